#include "imbp/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace imbp {

namespace {

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::vector<Violation> check_discrete(const DiscreteModelSpec& spec) {
  std::vector<Violation> out;
  const std::size_t d = spec.d;
  if (d == 0) {
    out.push_back({ViolationCode::DimensionMismatch, "d", "d must be at least 1"});
    return out;
  }
  if (spec.lambda.size() != d) {
    out.push_back({ViolationCode::DimensionMismatch, "lambda", "expected " + std::to_string(d) + " rates"});
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(spec.lambda[i]) || !(spec.lambda[i] > 0.0)) {
        out.push_back({ViolationCode::NonpositiveRate, idx("lambda", i), "rate must be finite and > 0"});
      }
    }
  }
  if (spec.offspring.size() != d) {
    out.push_back({ViolationCode::DimensionMismatch, "offspring", "expected " + std::to_string(d) + " laws"});
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      const auto field = idx("offspring", i);
      double total = 0.0;
      bool shape_ok = true;
      for (std::size_t k = 0; k < spec.offspring[i].size(); ++k) {
        const auto& o = spec.offspring[i][k];
        if (o.offspring.size() != d) {
          out.push_back({ViolationCode::DimensionMismatch, idx(field, k), "offspring vector must have d entries"});
          shape_ok = false;
          continue;
        }
        if (!std::isfinite(o.probability) || o.probability < 0.0) {
          out.push_back({ViolationCode::NonstochasticPMF, idx(field, k), "probability must be finite and >= 0"});
        }
        for (auto v : o.offspring) {
          if (v < 0) {
            out.push_back({ViolationCode::NegativeOffspring, idx(field, k), "offspring counts must be >= 0"});
            break;
          }
        }
        bool is_self = o.probability > 0.0;
        for (std::size_t j = 0; j < d && is_self; ++j) is_self = o.offspring[j] == (j == i ? 1 : 0);
        if (is_self) {
          out.push_back({ViolationCode::SelfOffspringLoop, idx(field, k),
                         "mu_i(e_i) must be 0 (replacing an individual by itself is not an event)"});
        }
        total += o.probability;
      }
      if (shape_ok && std::abs(total - 1.0) > kPmfTolerance) {
        out.push_back({ViolationCode::NonstochasticPMF, field, "probabilities sum to " + std::to_string(total)});
      }
    }
  }
  if (spec.interaction.rows() != static_cast<Eigen::Index>(d) ||
      spec.interaction.cols() != static_cast<Eigen::Index>(d)) {
    out.push_back({ViolationCode::DimensionMismatch, "interaction", "expected a d x d matrix"});
  } else if (!all_finite(spec.interaction)) {
    out.push_back({ViolationCode::NonfiniteValue, "interaction", "entries must be finite"});
  }
  return out;
}

DiscreteModelSpec validate_discrete(DiscreteModelSpec spec) {
  auto violations = check_discrete(spec);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return spec;
}

Matrix derive_mean_matrix(const DiscreteModelSpec& spec) {
  const auto d = static_cast<Eigen::Index>(spec.d);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (const auto& o : spec.offspring[i]) {
      for (Eigen::Index j = 0; j < d; ++j) a(i, j) += o.probability * static_cast<double>(o.offspring[j]);
    }
    a(i, i) -= 1.0;
    a.row(i) *= spec.lambda[i];
  }
  return a;
}

// ---------------------------------------------------------------------------

namespace {

double norm(const RealVec& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

RealVec scaled(const RealVec& dir, double s) {
  RealVec r(dir.size());
  for (std::size_t j = 0; j < dir.size(); ++j) r[j] = dir[j] * s;
  return r;
}

}  // namespace

RealVec sample_jump(const JumpSampler& sampler, RandomStream& rng) {
  struct Visitor {
    RandomStream& rng;
    RealVec operator()(const AtomJump& a) const { return a.r; }
    RealVec operator()(const ExponentialJump& e) const { return scaled(e.direction, e.mean * rng.exponential(1.0)); }
    RealVec operator()(const ParetoJump& p) const {
      return scaled(p.direction, p.scale * std::pow(rng.uniform_open(), -1.0 / p.alpha));
    }
  };
  return std::visit(Visitor{rng}, sampler);
}

RealVec jump_mean(const JumpSampler& sampler) {
  struct Visitor {
    RealVec operator()(const AtomJump& a) const { return a.r; }
    RealVec operator()(const ExponentialJump& e) const { return scaled(e.direction, e.mean); }
    RealVec operator()(const ParetoJump& p) const {
      if (p.alpha <= 1.0) {
        RealVec r(p.direction.size());
        for (std::size_t j = 0; j < r.size(); ++j)
          r[j] = p.direction[j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        return r;
      }
      return scaled(p.direction, p.scale * p.alpha / (p.alpha - 1.0));
    }
  };
  return std::visit(Visitor{}, sampler);
}

double jump_min_norm(const JumpSampler& sampler) {
  struct Visitor {
    double operator()(const AtomJump& a) const { return norm(a.r); }
    double operator()(const ExponentialJump&) const { return 0.0; }
    double operator()(const ParetoJump& p) const { return p.scale * norm(p.direction); }
  };
  return std::visit(Visitor{}, sampler);
}

std::size_t jump_dimension(const JumpSampler& sampler) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, AtomJump>) {
          return s.r.size();
        } else {
          return s.direction.size();
        }
      },
      sampler);
}

RealVec jump_drift_correction(const JumpMeasureSpec& measure, std::size_t d) {
  RealVec drift(d, 0.0);
  if (measure.small_jump_truncation) {
    for (std::size_t j = 0; j < d; ++j) drift[j] += measure.small_jump_truncation->compensator_drift[j];
  }
  for (const auto& c : measure.components) {
    if (!c.compensated) continue;
    const auto m = jump_mean(c.sampler);
    for (std::size_t j = 0; j < d; ++j) drift[j] -= c.mass * m[j];
  }
  return drift;
}

std::vector<Violation> check_jump_measure(const JumpMeasureSpec& measure, std::size_t d,
                                          std::size_t source_type, const std::string& prefix) {
  std::vector<Violation> out;
  const auto fail = [&](const std::string& field, const std::string& msg) {
    out.push_back({ViolationCode::JumpMeasureIntegrability, field, msg});
  };
  for (std::size_t k = 0; k < measure.components.size(); ++k) {
    const auto& c = measure.components[k];
    const auto field = idx(prefix + ".components", k);
    if (!std::isfinite(c.mass) || !(c.mass > 0.0)) {
      fail(field + ".mass", "mass must be finite and > 0");
    }
    if (jump_dimension(c.sampler) != d) {
      out.push_back({ViolationCode::DimensionMismatch, field, "jump vector must have d entries"});
      continue;
    }
    const RealVec shape = std::visit(
        [](const auto& s) -> RealVec {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, AtomJump>) {
            return s.r;
          } else {
            return s.direction;
          }
        },
        c.sampler);
    bool nonneg = true;
    for (double x : shape) nonneg = nonneg && std::isfinite(x) && x >= 0.0;
    if (!nonneg) fail(field, "jumps must be finite and componentwise >= 0");
    if (!(norm(shape) > 0.0)) fail(field, "jump law charges the origin");

    if (const auto* e = std::get_if<ExponentialJump>(&c.sampler); e && !(e->mean > 0.0 && std::isfinite(e->mean))) {
      fail(field + ".mean", "exponential mean must be finite and > 0");
    }
    if (const auto* p = std::get_if<ParetoJump>(&c.sampler)) {
      if (!(p->scale > 0.0) || !std::isfinite(p->scale)) fail(field + ".scale", "scale must be finite and > 0");
      // ||r|| ^ ||r||^2 ~ ||r|| at infinity, so the first moment must converge.
      if (!(p->alpha > 1.0)) fail(field + ".alpha", "alpha <= 1 gives an infinite first moment");
    }
    if (measure.small_jump_truncation && jump_min_norm(c.sampler) < measure.small_jump_truncation->r_min) {
      fail(field, "component has jumps below the truncation level r_min");
    }
  }
  if (const auto& t = measure.small_jump_truncation) {
    if (!(t->r_min > 0.0) || !std::isfinite(t->r_min)) fail(prefix + ".small_jump_truncation.r_min", "r_min must be > 0");
    if (t->compensator_drift.size() != d) {
      out.push_back({ViolationCode::DimensionMismatch, prefix + ".small_jump_truncation.compensator_drift",
                     "expected d entries"});
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        if (!std::isfinite(t->compensator_drift[j]) || (j != source_type && t->compensator_drift[j] < 0.0)) {
          fail(prefix + ".small_jump_truncation.compensator_drift", "off-diagonal stand-in drift must be >= 0");
          break;
        }
      }
    }
  }
  return out;
}

std::vector<Violation> check_continuous(const ContinuousModelSpec& spec) {
  std::vector<Violation> out;
  const std::size_t d = spec.d;
  if (d == 0) {
    out.push_back({ViolationCode::DimensionMismatch, "d", "d must be at least 1"});
    return out;
  }
  const auto di = static_cast<Eigen::Index>(d);
  if (spec.B.rows() != di || spec.B.cols() != di) {
    out.push_back({ViolationCode::DimensionMismatch, "B", "expected a d x d matrix"});
  } else if (!all_finite(spec.B)) {
    out.push_back({ViolationCode::NonfiniteValue, "B", "entries must be finite"});
  } else {
    for (Eigen::Index i = 0; i < di; ++i)
      for (Eigen::Index j = 0; j < di; ++j)
        if (i != j && spec.B(i, j) < 0.0)
          out.push_back({ViolationCode::NegativeOffDiagonalB,
                         "B[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                         "off-diagonal entries must be >= 0"});
  }
  if (spec.C.rows() != di || spec.C.cols() != di) {
    out.push_back({ViolationCode::DimensionMismatch, "C", "expected a d x d matrix"});
  } else if (!all_finite(spec.C)) {
    out.push_back({ViolationCode::NonfiniteValue, "C", "entries must be finite"});
  }
  if (spec.sigma.size() != d) {
    out.push_back({ViolationCode::DimensionMismatch, "sigma", "expected d entries"});
  } else {
    for (std::size_t i = 0; i < d; ++i)
      if (!std::isfinite(spec.sigma[i]) || spec.sigma[i] < 0.0)
        out.push_back({ViolationCode::NegativeSigma, idx("sigma", i), "must be finite and >= 0"});
  }
  if (!spec.jump_measures.empty() && spec.jump_measures.size() != d) {
    out.push_back({ViolationCode::DimensionMismatch, "jump_measures", "expected none or one measure per type"});
  } else {
    for (std::size_t i = 0; i < spec.jump_measures.size(); ++i) {
      auto v = check_jump_measure(spec.jump_measures[i], d, i, idx("jump_measures", i));
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

ContinuousModelSpec validate_continuous(ContinuousModelSpec spec) {
  auto violations = check_continuous(spec);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return spec;
}

}  // namespace imbp
