#include "imbp/continuous_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "imbp/parallel.hpp"

namespace imbp {

const RealVec& ContinuousPath::state_at(double s) const {
  auto it = std::upper_bound(t.begin(), t.end(), s);
  if (it == t.begin()) return states.front();
  return states[static_cast<std::size_t>(it - t.begin()) - 1];
}

BrownianPath::BrownianPath(std::size_t d, double dt, double horizon, RandomStream rng) : dt_(dt) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("BrownianPath: dt must be > 0");
  const auto n = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const double scale = std::sqrt(dt);
  cumulative_.assign(d, RealVec(n + 1, 0.0));
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t j = 0; j < d; ++j) cumulative_[j][k] = cumulative_[j][k - 1] + scale * rng.normal();
  }
}

double BrownianPath::increment(std::size_t j, double t0, double t1) const {
  const auto& w = cumulative_.at(j);
  auto idx = [&](double s) {
    const auto k = static_cast<std::size_t>(std::llround(s / dt_));
    if (k >= w.size()) throw std::out_of_range("BrownianPath: time beyond horizon");
    return k;
  };
  return w[idx(t1)] - w[idx(t0)];
}

namespace {

/// E[min(r_j, n)] for each coordinate.
RealVec truncated_jump_mean(const JumpSampler& sampler, double n) {
  return std::visit(
      [n](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        RealVec out;
        if constexpr (std::is_same_v<T, AtomJump>) {
          for (double r : s.r) out.push_back(std::min(r, n));
        } else if constexpr (std::is_same_v<T, ExponentialJump>) {
          for (double a : s.direction) {
            const double m = a * s.mean;
            out.push_back(m > 0.0 ? m * -std::expm1(-n / m) : 0.0);
          }
        } else {
          for (double a : s.direction) {
            if (a <= 0.0) {
              out.push_back(0.0);
              continue;
            }
            const double cap = n / a;
            if (cap <= s.scale) {
              out.push_back(n);
              continue;
            }
            double tail;
            if (std::abs(s.alpha - 1.0) < 1e-12) {
              tail = s.scale * std::log(cap / s.scale);
            } else {
              tail = std::pow(s.scale, s.alpha) * (std::pow(cap, 1.0 - s.alpha) - std::pow(s.scale, 1.0 - s.alpha)) /
                     (1.0 - s.alpha);
            }
            out.push_back(a * (s.scale + tail));
          }
        }
        return out;
      },
      sampler);
}

RealVec truncated_drift_correction(const JumpMeasureSpec& measure, std::size_t d, double n) {
  RealVec out(d, 0.0);
  if (measure.small_jump_truncation) {
    for (std::size_t j = 0; j < d; ++j) out[j] += measure.small_jump_truncation->compensator_drift[j];
  }
  for (const auto& c : measure.components) {
    if (!c.compensated) continue;
    const auto m = truncated_jump_mean(c.sampler, n);
    for (std::size_t j = 0; j < d; ++j) out[j] -= c.mass * m[j];
  }
  return out;
}

constexpr double kScheduleTolerance = 1e-9;

/// Drives a stepper over the horizon: aligns steps to checkpoints and grid
/// windows, refreezes competition factors, applies the step guard and clamps.
template <class Stepper, class OnStep, class OnStop>
void integrate(Stepper& stepper, RealVec y, double horizon, double dt, double step_guard,
               std::span<const double> stops, const std::optional<GridConfig>& frozen, OnStep&& on_step,
               OnStop&& on_stop, std::size_t& steps, std::size_t& clamped) {
  const std::size_t d = y.size();
  const double tol = kScheduleTolerance * dt;
  RealVec factor(d, 0.0);
  auto refreeze = [&] {
    for (std::size_t j = 0; j < d; ++j) factor[j] = floor_quantize(y[j], frozen->delta);
  };
  if (frozen) refreeze();

  std::size_t stop = 0;
  auto flush_stops = [&](double t) {
    while (stop < stops.size() && stops[stop] <= t + tol) {
      on_stop(y);
      ++stop;
    }
  };

  double t = 0.0;
  on_step(t, y, false);
  flush_stops(t);

  std::size_t window = 0;
  double next_window = frozen ? frozen->epsilon : std::numeric_limits<double>::infinity();
  double base = 0.0;
  std::size_t k = 0;
  RealVec next(d);
  while (t < horizon - tol) {
    double boundary = std::min(horizon, next_window);
    if (stop < stops.size()) boundary = std::min(boundary, stops[stop]);
    double t_next = base + static_cast<double>(k + 1) * dt;
    if (t_next >= boundary - tol) {
      t_next = boundary;
      base = boundary;
      k = 0;
    } else {
      ++k;
    }
    const bool jumped = stepper.step(y, next, t, t_next, frozen ? &factor : nullptr);
    bool any_clamped = false;
    for (std::size_t j = 0; j < d; ++j) {
      if (step_guard > 0.0 && std::abs(next[j] - y[j]) > step_guard * std::max(std::abs(y[j]), 1.0))
        throw StepRejected(j, t, y[j], next[j]);
      if (next[j] < 0.0 || std::isnan(next[j])) {
        if (std::isnan(next[j])) throw StepRejected(j, t, y[j], next[j]);
        next[j] = 0.0;
        any_clamped = true;
      }
    }
    std::swap(y, next);
    t = t_next;
    ++steps;
    if (any_clamped) ++clamped;
    on_step(t, y, jumped);
    flush_stops(t);
    if (frozen && t >= next_window - tol) {
      while (next_window <= t + tol) {
        ++window;
        next_window = static_cast<double>(window + 1) * frozen->epsilon;
      }
      refreeze();
    }
  }
  flush_stops(std::numeric_limits<double>::infinity());
}

class EulerStepper {
 public:
  EulerStepper(const ContinuousModelSpec& spec, const EulerConfig& cfg, RandomStream& rng)
      : spec_(spec),
        cfg_(cfg),
        brownian_(rng.child({stream_tag::brownian})),
        jumps_(rng.child({stream_tag::jumps})),
        ybar_(spec.d),
        dw_(spec.d) {
    const std::size_t d = spec.d;
    correction_.assign(d, RealVec(d, 0.0));
    if (!spec.jump_measures.empty()) {
      for (std::size_t i = 0; i < d; ++i) {
        correction_[i] = cfg.truncation_level
                             ? truncated_drift_correction(spec.jump_measures[i], d, *cfg.truncation_level)
                             : jump_drift_correction(spec.jump_measures[i], d);
      }
    }
    diffusive_ = std::any_of(spec.sigma.begin(), spec.sigma.end(), [](double s) { return s > 0.0; });
  }

  bool step(const RealVec& y, RealVec& next, double t0, double t1, const RealVec* factor) {
    const std::size_t d = spec_.d;
    const double h = t1 - t0;
    for (std::size_t j = 0; j < d; ++j) ybar_[j] = cfg_.truncation_level ? std::min(y[j], *cfg_.truncation_level) : y[j];

    if (cfg_.common_noise) {
      for (std::size_t j = 0; j < d; ++j) dw_[j] = cfg_.common_noise->increment(j, t0, t1);
    } else if (diffusive_) {
      const double s = std::sqrt(h);
      for (std::size_t j = 0; j < d; ++j) dw_[j] = s * brownian_.normal();
    }

    for (std::size_t j = 0; j < d; ++j) {
      const double g = factor ? (*factor)[j] : ybar_[j];
      double drift = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (ybar_[i] == 0.0) continue;
        drift += (spec_.C(i, j) * g + spec_.B(i, j) + correction_[i][j]) * ybar_[i];
      }
      double v = y[j] + drift * h;
      if (spec_.sigma[j] > 0.0) v += std::sqrt(2.0 * spec_.sigma[j] * std::max(ybar_[j], 0.0)) * dw_[j];
      next[j] = v;
    }

    bool jumped = false;
    if (spec_.jump_measures.empty()) return jumped;
    for (std::size_t i = 0; i < d; ++i) {
      if (!(ybar_[i] > 0.0)) continue;
      for (const auto& c : spec_.jump_measures[i].components) {
        const auto count = jumps_.poisson(c.mass * ybar_[i] * h);
        for (std::uint64_t n = 0; n < count; ++n) {
          const auto r = sample_jump(c.sampler, jumps_);
          for (std::size_t j = 0; j < d; ++j)
            next[j] += cfg_.truncation_level ? std::min(r[j], *cfg_.truncation_level) : r[j];
          jumped = true;
        }
      }
    }
    return jumped;
  }

 private:
  const ContinuousModelSpec& spec_;
  const EulerConfig& cfg_;
  RandomStream brownian_;
  RandomStream jumps_;
  std::vector<RealVec> correction_;
  RealVec ybar_;
  RealVec dw_;
  bool diffusive_ = false;
};

class LampertiStepper {
 public:
  LampertiStepper(std::span<const LevyDriverSpec> drivers, const Matrix& C, RandomStream& rng)
      : drivers_(drivers), C_(C) {
    for (std::size_t i = 0; i < drivers.size(); ++i) streams_.emplace_back(rng.child({stream_tag::walk, i}));
  }

  bool step(const RealVec& y, RealVec& next, double t0, double t1, const RealVec* factor) {
    const std::size_t d = y.size();
    const double h = t1 - t0;
    next = y;
    for (std::size_t i = 0; i < d; ++i) {
      const double clock = std::max(y[i], 0.0) * h;
      const auto inc = sample_levy_increment(drivers_[i], clock, streams_[i]);
      for (std::size_t j = 0; j < d; ++j) next[j] += inc[j] + C_(i, j) * y[i] * (factor ? (*factor)[j] : y[j]) * h;
    }
    return false;
  }

 private:
  std::span<const LevyDriverSpec> drivers_;
  const Matrix& C_;
  std::vector<IncrementStream> streams_;
};

void check_state(const RealVec& y, std::size_t d, const char* field) {
  if (y.size() != d)
    throw ValidationError({{ViolationCode::DimensionMismatch, field, "initial state has the wrong dimension"}});
  for (double v : y) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError({{ViolationCode::NonfiniteValue, field, "initial state must be finite and >= 0"}});
  }
}

void check_config(const EulerConfig& cfg, std::size_t d) {
  if (!(cfg.dt > 0.0)) throw ValidationError({{ViolationCode::NonfiniteValue, "dt", "dt must be > 0"}});
  if (cfg.truncation_level && !(*cfg.truncation_level > 0.0))
    throw ValidationError({{ViolationCode::NonfiniteValue, "truncation_level", "truncation level must be > 0"}});
  if (cfg.common_noise && cfg.common_noise->dimension() != d)
    throw ValidationError({{ViolationCode::DimensionMismatch, "common_noise", "noise dimension differs from d"}});
}

void check_checkpoints(std::span<const double> checkpoints) {
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    if (!(checkpoints[k] >= 0.0) || (k > 0 && checkpoints[k] < checkpoints[k - 1]))
      throw std::invalid_argument("checkpoints must be nonnegative and nondecreasing");
  }
}

}  // namespace

ContinuousPath euler_simulate(const ContinuousModelSpec& spec, const RealVec& y, double horizon,
                              const EulerConfig& cfg, RandomStream& rng, const std::optional<GridConfig>& frozen) {
  validate_continuous(spec);
  check_state(y, spec.d, "y");
  check_config(cfg, spec.d);
  if (frozen) validate_grid(*frozen);
  const std::size_t stride = std::max<std::size_t>(cfg.record_stride, 1);
  ContinuousPath path;
  EulerStepper stepper(spec, cfg, rng);
  std::size_t index = 0;
  bool pending_jump = false;
  RealVec last;
  double last_t = 0.0;
  auto on_step = [&](double t, const RealVec& s, bool jumped) {
    pending_jump = pending_jump || jumped;
    if (index++ % stride == 0) {
      path.t.push_back(t);
      path.states.push_back(s);
      path.jumped.push_back(pending_jump);
      pending_jump = false;
    } else {
      last = s;
      last_t = t;
    }
  };
  integrate(stepper, y, horizon, cfg.dt, cfg.step_guard, {}, frozen, on_step, [](const RealVec&) {}, path.steps,
            path.clamped_steps);
  if (path.t.back() < last_t) {
    path.t.push_back(last_t);
    path.states.push_back(last);
    path.jumped.push_back(pending_jump);
  }
  return path;
}

std::vector<RealVec> euler_at(const ContinuousModelSpec& spec, const RealVec& y, std::span<const double> checkpoints,
                              const EulerConfig& cfg, RandomStream& rng, const std::optional<GridConfig>& frozen) {
  validate_continuous(spec);
  check_state(y, spec.d, "y");
  check_config(cfg, spec.d);
  check_checkpoints(checkpoints);
  if (frozen) validate_grid(*frozen);
  std::vector<RealVec> out;
  if (checkpoints.empty()) return out;
  EulerStepper stepper(spec, cfg, rng);
  std::size_t steps = 0, clamped = 0;
  integrate(stepper, y, checkpoints.back(), cfg.dt, cfg.step_guard, checkpoints, frozen,
            [](double, const RealVec&, bool) {}, [&](const RealVec& s) { out.push_back(s); }, steps, clamped);
  return out;
}

std::vector<std::vector<RealVec>> euler_marginals(const ContinuousModelSpec& spec, const RealVec& y,
                                                  std::span<const double> checkpoints, const EulerConfig& cfg,
                                                  std::size_t n_paths, const RandomStream& rng, std::size_t workers,
                                                  const std::optional<GridConfig>& frozen) {
  validate_continuous(spec);
  std::vector<std::vector<RealVec>> out(n_paths);
  for_each_index(n_paths, workers, [&](std::size_t k) {
    auto stream = rng.child({stream_tag::path, k});
    out[k] = euler_at(spec, y, checkpoints, cfg, stream, frozen);
  });
  return out;
}

ContinuousPath lamperti_simulate(std::span<const LevyDriverSpec> drivers, const Matrix& C, const RealVec& z,
                                 double horizon, double dt, RandomStream& rng, const std::optional<GridConfig>& frozen) {
  const std::size_t d = drivers.size();
  std::vector<Violation> violations;
  for (const auto& drv : drivers) {
    auto v = check_driver(drv, d);
    violations.insert(violations.end(), v.begin(), v.end());
  }
  if (static_cast<std::size_t>(C.rows()) != d || static_cast<std::size_t>(C.cols()) != d)
    violations.push_back({ViolationCode::DimensionMismatch, "C", "interaction matrix must be d x d"});
  if (!violations.empty()) throw ValidationError(std::move(violations));
  check_state(z, d, "z");
  if (!(dt > 0.0)) throw ValidationError({{ViolationCode::NonfiniteValue, "dt", "dt must be > 0"}});
  if (frozen) validate_grid(*frozen);

  ContinuousPath path;
  LampertiStepper stepper(drivers, C, rng);
  integrate(
      stepper, z, horizon, dt, 0.0, {}, frozen,
      [&](double t, const RealVec& s, bool jumped) {
        path.t.push_back(t);
        path.states.push_back(s);
        path.jumped.push_back(jumped);
      },
      [](const RealVec&) {}, path.steps, path.clamped_steps);
  return path;
}

// --- generator ---------------------------------------------------------------

TestFunction TestFunction::constant(double c, std::size_t d) {
  return {[c](std::span<const double>) { return c; }, [d](std::span<const double>) { return RealVec(d, 0.0); },
          [d](std::span<const double>) { return RealVec(d, 0.0); }};
}

TestFunction TestFunction::coordinate(std::size_t j, std::size_t d) {
  return {[j](std::span<const double> x) { return x[j]; },
          [j, d](std::span<const double>) {
            RealVec g(d, 0.0);
            g[j] = 1.0;
            return g;
          },
          [d](std::span<const double>) { return RealVec(d, 0.0); }};
}

TestFunction TestFunction::square(std::size_t j, std::size_t d) {
  return {[j](std::span<const double> x) { return x[j] * x[j]; },
          [j, d](std::span<const double> x) {
            RealVec g(d, 0.0);
            g[j] = 2.0 * x[j];
            return g;
          },
          [j, d](std::span<const double>) {
            RealVec h(d, 0.0);
            h[j] = 2.0;
            return h;
          }};
}

TestFunction TestFunction::product(std::size_t i, std::size_t j, std::size_t d) {
  if (i == j) return square(i, d);
  return {[i, j](std::span<const double> x) { return x[i] * x[j]; },
          [i, j, d](std::span<const double> x) {
            RealVec g(d, 0.0);
            g[i] = x[j];
            g[j] = x[i];
            return g;
          },
          [d](std::span<const double>) { return RealVec(d, 0.0); }};
}

namespace {

/// int [f(x + r) - f(x) - <r, grad>] over one jump component (per unit mass).
double jump_integral(const JumpComponent& c, const TestFunction& f, std::span<const double> x, double fx,
                     const RealVec& grad) {
  const std::size_t d = x.size();
  RealVec shifted(x.begin(), x.end());
  auto integrand_at = [&](const RealVec& r) {
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + r[j];
    double v = f.value(shifted) - fx;
    if (c.compensated) {
      for (std::size_t j = 0; j < d; ++j) v -= r[j] * grad[j];
    }
    return v;
  };
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AtomJump>) {
          return integrand_at(s.r);
        } else {
          boost::math::quadrature::exp_sinh<double> quad;
          RealVec r(d);
          if constexpr (std::is_same_v<T, ExponentialJump>) {
            // s = mean * u, u ~ Exp(1)
            auto g = [&](double u) {
              if (u > 700.0) return 0.0;
              for (std::size_t j = 0; j < d; ++j) r[j] = s.mean * u * s.direction[j];
              return integrand_at(r) * std::exp(-u);
            };
            return quad.integrate(g, 0.0, std::numeric_limits<double>::infinity());
          } else {
            auto g = [&](double u) {
              for (std::size_t j = 0; j < d; ++j) r[j] = u * s.direction[j];
              return integrand_at(r) * s.alpha * std::pow(s.scale, s.alpha) * std::pow(u, -s.alpha - 1.0);
            };
            return quad.integrate(g, s.scale, std::numeric_limits<double>::infinity());
          }
        }
      },
      c.sampler);
}

}  // namespace

double generator_apply(const ContinuousModelSpec& spec, const TestFunction& f, std::span<const double> x) {
  const std::size_t d = spec.d;
  const auto grad = f.gradient(x);
  const auto hess = f.hessian_diagonal(x);
  double out = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double drift = 0.0;
    for (std::size_t i = 0; i < d; ++i) drift += spec.C(i, j) * x[i] * x[j] + spec.B(i, j) * x[i];
    out += drift * grad[j] + spec.sigma[j] * x[j] * hess[j];
  }
  if (spec.jump_measures.empty()) return out;
  const double fx = f.value(x);
  for (std::size_t i = 0; i < d; ++i) {
    if (x[i] == 0.0) continue;
    const auto& m = spec.jump_measures[i];
    double integral = 0.0;
    for (const auto& c : m.components) integral += c.mass * jump_integral(c, f, x, fx, grad);
    if (m.small_jump_truncation) {
      for (std::size_t j = 0; j < d; ++j) integral += m.small_jump_truncation->compensator_drift[j] * grad[j];
    }
    out += x[i] * integral;
  }
  return out;
}

namespace {

ResidualEstimate summarize_residuals(const RealVec& r) {
  ResidualEstimate est;
  est.n = r.size();
  if (r.empty()) return est;
  double sum = 0.0;
  for (double v : r) sum += v;
  est.mean = sum / static_cast<double>(r.size());
  if (r.size() > 1) {
    double ss = 0.0;
    for (double v : r) ss += (v - est.mean) * (v - est.mean);
    est.standard_error = std::sqrt(ss / static_cast<double>(r.size() - 1) / static_cast<double>(r.size()));
  }
  return est;
}

}  // namespace

ResidualEstimate martingale_residual(const ContinuousModelSpec& spec, const TestFunction& f,
                                     std::span<const ContinuousPath> paths) {
  RealVec residuals;
  residuals.reserve(paths.size());
  for (const auto& p : paths) {
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < p.t.size(); ++k)
      integral += generator_apply(spec, f, p.states[k]) * (p.t[k + 1] - p.t[k]);
    residuals.push_back(f.value(p.states.back()) - f.value(p.states.front()) - integral);
  }
  return summarize_residuals(residuals);
}

std::vector<ResidualEstimate> martingale_residual_mc(const ContinuousModelSpec& spec,
                                                     std::span<const TestFunction> fs, const RealVec& y,
                                                     double horizon, const EulerConfig& cfg, std::size_t n_paths,
                                                     const RandomStream& rng, std::size_t workers) {
  validate_continuous(spec);
  check_state(y, spec.d, "y");
  check_config(cfg, spec.d);
  std::vector<RealVec> residuals(fs.size(), RealVec(n_paths, 0.0));
  for_each_index(n_paths, workers, [&](std::size_t k) {
    auto stream = rng.child({stream_tag::path, k});
    EulerStepper stepper(spec, cfg, stream);
    RealVec integral(fs.size(), 0.0), prev_generator(fs.size(), 0.0);
    double prev_t = 0.0;
    RealVec first, last;
    auto on_step = [&](double t, const RealVec& s, bool) {
      if (first.empty()) first = s;
      for (std::size_t q = 0; q < fs.size(); ++q) {
        integral[q] += prev_generator[q] * (t - prev_t);
        prev_generator[q] = generator_apply(spec, fs[q], s);
      }
      prev_t = t;
      last = s;
    };
    std::size_t steps = 0, clamped = 0;
    integrate(stepper, y, horizon, cfg.dt, cfg.step_guard, {}, std::nullopt, on_step, [](const RealVec&) {}, steps,
              clamped);
    for (std::size_t q = 0; q < fs.size(); ++q)
      residuals[q][k] = fs[q].value(last) - fs[q].value(first) - integral[q];
  });
  std::vector<ResidualEstimate> out;
  for (const auto& r : residuals) out.push_back(summarize_residuals(r));
  return out;
}

}  // namespace imbp
