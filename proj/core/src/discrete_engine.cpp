#include "imbp/discrete_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "imbp/parallel.hpp"
#include "imbp/stats.hpp"

namespace imbp {

const IntVec& Path::state_at(double t) const {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                             [](double x, const Breakpoint& b) { return x < b.t; });
  if (it == breakpoints.begin()) throw std::out_of_range("Path::state_at before time 0");
  return std::prev(it)->state;
}

Path replay(const IntVec& z, const EventLog& log, double horizon) {
  Path path;
  path.horizon = horizon;
  path.breakpoints.push_back({0.0, z});
  IntVec u = z;
  for (const auto& ev : log) {
    if (ev.kind == EventKind::reproduction) {
      for (std::size_t j = 0; j < u.size(); ++j) u[j] += ev.offspring[j];
      u[ev.i] -= 1;
    } else {
      u[ev.j] += ev.sign;
    }
    path.breakpoints.push_back({ev.t, u});
  }
  return path;
}

namespace {

void check_initial_state(const IntVec& z, std::size_t d) {
  if (z.size() != d) throw ValidationError({{ViolationCode::DimensionMismatch, "z", "initial state must have d entries"}});
  for (auto x : z)
    if (x < 0) throw ValidationError({{ViolationCode::NegativeOffspring, "z", "initial state must be >= 0"}});
}

void check_checkpoints(std::span<const double> cps) {
  for (std::size_t k = 0; k < cps.size(); ++k) {
    if (!(cps[k] >= 0.0) || (k > 0 && cps[k] < cps[k - 1]))
      throw std::invalid_argument("checkpoints must be nonnegative and sorted");
  }
}

struct Sink {
  Path* path = nullptr;
  EventLog* log = nullptr;
  std::span<const double> checkpoints;
  std::vector<IntVec>* at = nullptr;
  std::size_t next_checkpoint = 0;

  // Records the current state for every checkpoint strictly before `t`.
  void flush_before(double t, const IntVec& u) {
    while (at && next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] < t) {
      at->push_back(u);
      ++next_checkpoint;
    }
  }
  void flush_all(const IntVec& u) {
    while (at && next_checkpoint < checkpoints.size()) {
      at->push_back(u);
      ++next_checkpoint;
    }
  }
};

struct CompiledModel {
  struct Pair {
    std::size_t i;
    std::size_t j;
    double rate;
    int sign;
  };

  std::size_t d = 0;
  std::vector<double> lambda;
  std::vector<std::vector<double>> cumulative;
  std::vector<std::vector<const IntVec*>> outcomes;
  std::vector<Pair> pairs;  // lexicographic (i, j), c_ij != 0
};

CompiledModel compile(const DiscreteModelSpec& spec) {
  CompiledModel m;
  m.d = spec.d;
  m.lambda = spec.lambda;
  m.cumulative.resize(spec.d);
  m.outcomes.resize(spec.d);
  for (std::size_t i = 0; i < spec.d; ++i) {
    double acc = 0.0;
    for (const auto& o : spec.offspring[i]) {
      if (o.probability <= 0.0) continue;
      m.cumulative[i].push_back(acc += o.probability);
      m.outcomes[i].push_back(&o.offspring);
    }
  }
  for (std::size_t i = 0; i < spec.d; ++i)
    for (std::size_t j = 0; j < spec.d; ++j) {
      const double c = spec.interaction(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (c != 0.0) m.pairs.push_back({i, j, std::abs(c), c > 0.0 ? 1 : -1});
    }
  return m;
}

// Index k with x in [sum_{l<k} w_l, sum_{l<=k} w_l); rounding at the top end
// falls back to the last positive weight.
std::size_t pick(const std::vector<double>& w, double x) {
  std::size_t last = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) continue;
    if (x < w[k]) return k;
    x -= w[k];
    last = k;
  }
  return last;
}

void run_gillespie(const CompiledModel& m, const IntVec& z, double horizon, RandomStream& rng,
                   const EngineOptions& opts, Sink& sink) {
  IntVec u = z;
  double t = 0.0;
  if (sink.path) {
    sink.path->horizon = horizon;
    sink.path->breakpoints.push_back({0.0, u});
  }
  std::vector<double> type_rate(m.d), pair_rate(m.pairs.size());
  for (;;) {
    double repro = 0.0;
    for (std::size_t i = 0; i < m.d; ++i) repro += type_rate[i] = m.lambda[i] * static_cast<double>(u[i]);
    double total = repro;
    for (std::size_t k = 0; k < m.pairs.size(); ++k) {
      const auto& p = m.pairs[k];
      total += pair_rate[k] = p.rate * static_cast<double>(u[p.i]) * static_cast<double>(u[p.j]);
    }
    if (total > opts.rate_cap) throw RateOverflow(total, t);
    if (total <= 0.0) break;  // absorbed
    const double t_next = t + rng.exponential(total);
    if (t_next > horizon) break;
    sink.flush_before(t_next, u);

    Event ev;
    ev.t = t_next;
    if (sink.log) ev.pre_state = u;
    double x = rng.uniform() * total;
    if (x < repro) {
      const std::size_t i = pick(type_rate, x);
      const auto& v = *m.outcomes[i][rng.categorical(m.cumulative[i])];
      for (std::size_t j = 0; j < m.d; ++j) u[j] += v[j];
      u[i] -= 1;
      ev.kind = EventKind::reproduction;
      ev.i = i;
      if (sink.log) ev.offspring = v;
    } else {
      x -= repro;
      const auto& p = m.pairs[pick(pair_rate, x)];
      u[p.j] += p.sign;
      ev.kind = EventKind::interaction;
      ev.i = p.i;
      ev.j = p.j;
      ev.sign = p.sign;
    }
    t = t_next;
    if (sink.path) sink.path->breakpoints.push_back({t, u});
    if (sink.log) sink.log->push_back(std::move(ev));
  }
  sink.flush_all(u);
}

// --- time change -------------------------------------------------------------

class WalkSource final : public DriverSource {
 public:
  WalkSource(const RandomWalkSpec& spec, RandomStream rng) : rng_(std::move(rng)), rate_(spec.jump_rate) {
    double acc = 0.0;
    for (const auto& j : spec.jumps) {
      if (j.probability <= 0.0) continue;
      cumulative_.push_back(acc += j.probability);
      jumps_.push_back(j.jump);
    }
    next_ = rng_.exponential(rate_);
  }
  double next_arrival() const override { return next_; }
  const IntVec& pop() override {
    const auto& jump = jumps_[rng_.categorical(cumulative_)];
    next_ += rng_.exponential(rate_);
    return jump;
  }
  double rate() const override { return rate_; }

 private:
  RandomStream rng_;
  double rate_;
  std::vector<double> cumulative_;
  std::vector<IntVec> jumps_;
  double next_ = 0.0;
};

class UnitPoissonSource final : public DriverSource {
 public:
  explicit UnitPoissonSource(RandomStream rng) : rng_(std::move(rng)), next_(rng_.exponential(1.0)) {}
  double next_arrival() const override { return next_; }
  const IntVec& pop() override {
    next_ += rng_.exponential(1.0);
    return unit_;
  }
  double rate() const override { return 1.0; }

 private:
  RandomStream rng_;
  double next_;
  IntVec unit_{1};
};

class ScriptedSource final : public DriverSource {
 public:
  explicit ScriptedSource(std::vector<std::pair<double, IntVec>> arrivals) : arrivals_(std::move(arrivals)) {}
  double next_arrival() const override {
    return pos_ < arrivals_.size() ? arrivals_[pos_].first : std::numeric_limits<double>::infinity();
  }
  const IntVec& pop() override { return arrivals_[pos_++].second; }
  double rate() const override { return 0.0; }

 private:
  std::vector<std::pair<double, IntVec>> arrivals_;
  std::size_t pos_ = 0;
};

struct DriverState {
  DriverSource* source;
  bool is_walk;
  std::size_t i;
  std::size_t j;
  double abs_c;
  int sign;
  double anchor_time = 0.0;   // real time of the last re-anchoring
  double anchor_clock = 0.0;  // driver clock at anchor_time
  double speed = 0.0;         // d(clock)/dt since anchor_time

  double firing_time() const {
    if (speed <= 0.0) return std::numeric_limits<double>::infinity();
    return anchor_time + (source->next_arrival() - anchor_clock) / speed;
  }
  void set_speed(double t, double new_speed) {
    if (new_speed == speed) return;
    anchor_clock += speed * (t - anchor_time);
    anchor_time = t;
    speed = new_speed;
  }
};

void run_time_change(const Matrix& interaction, const IntVec& z, double horizon, TimeChangeDrivers& drivers,
                     const EngineOptions& opts, const std::optional<GridConfig>& frozen, Sink& sink) {
  const std::size_t d = z.size();
  if (drivers.walks.size() != d) throw std::invalid_argument("need one walk driver per type");
  if (frozen) validate_grid(*frozen);

  std::vector<DriverState> ds;
  for (std::size_t i = 0; i < d; ++i) ds.push_back({drivers.walks[i].get(), true, i, i, 0.0, 0});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = interaction(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (c == 0.0) continue;
      auto& src = drivers.interactions.at(i * d + j);
      if (!src) throw std::invalid_argument("missing interaction driver for nonzero c_ij");
      ds.push_back({src.get(), false, i, j, std::abs(c), c > 0.0 ? 1 : -1});
    }

  IntVec u = z;
  RealVec factor(d);
  auto refreeze = [&] {
    for (std::size_t j = 0; j < d; ++j)
      factor[j] = frozen ? floor_quantize(static_cast<double>(u[j]), frozen->delta) : 0.0;
  };
  auto speed_of = [&](const DriverState& s) {
    if (s.is_walk) return static_cast<double>(u[s.i]);
    const double target = frozen ? factor[s.j] : static_cast<double>(u[s.j]);
    if (s.sign < 0 && u[s.j] == 0) return 0.0;
    return s.abs_c * static_cast<double>(u[s.i]) * target;
  };
  auto total_rate = [&] {
    double r = 0.0;
    for (const auto& s : ds) r += s.is_walk ? s.source->rate() * s.speed : s.speed;
    return r;
  };

  refreeze();
  for (auto& s : ds) s.speed = speed_of(s);
  double t = 0.0;
  std::size_t window = 1;
  double next_window = frozen ? frozen->epsilon : std::numeric_limits<double>::infinity();
  if (sink.path) {
    sink.path->horizon = horizon;
    sink.path->breakpoints.push_back({0.0, u});
  }

  for (;;) {
    const double rate = total_rate();
    if (rate > opts.rate_cap) throw RateOverflow(rate, t);

    std::size_t best = ds.size();
    double tau = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double f = ds[k].firing_time();
      if (f < tau) {
        tau = f;
        best = k;
      }
    }
    if (next_window <= horizon && !(tau < next_window)) {
      // Window boundary at m * eps: freeze the interaction factors anew.
      t = next_window;
      sink.flush_before(t, u);
      refreeze();
      for (auto& s : ds)
        if (!s.is_walk) s.set_speed(t, speed_of(s));
      ++window;
      next_window = static_cast<double>(window) * frozen->epsilon;
      continue;
    }
    if (best == ds.size() || tau > horizon) break;

    sink.flush_before(tau, u);
    auto& fired = ds[best];
    fired.anchor_clock = fired.source->next_arrival();
    fired.anchor_time = tau;
    const IntVec& jump = fired.source->pop();
    Event ev;
    if (sink.log) ev.pre_state = u;
    if (fired.is_walk) {
      for (std::size_t j = 0; j < d; ++j) u[j] += jump[j];
      ev.kind = EventKind::reproduction;
      ev.i = fired.i;
      if (sink.log) {
        ev.offspring = jump;
        ev.offspring[fired.i] += 1;
      }
    } else {
      u[fired.j] += fired.sign;
      ev.kind = EventKind::interaction;
      ev.i = fired.i;
      ev.j = fired.j;
      ev.sign = fired.sign;
    }
    t = tau;
    ev.t = t;
    for (auto& s : ds) s.set_speed(t, speed_of(s));
    if (sink.path) sink.path->breakpoints.push_back({t, u});
    if (sink.log) sink.log->push_back(std::move(ev));
  }
  sink.flush_all(u);
}

}  // namespace

GillespieRun simulate_gillespie(const DiscreteModelSpec& spec, const IntVec& z, double horizon, RandomStream& rng,
                                const EngineOptions& opts) {
  validate_discrete(spec);
  check_initial_state(z, spec.d);
  const auto m = compile(spec);
  GillespieRun run;
  Sink sink;
  sink.path = &run.path;
  if (opts.keep_log) sink.log = &run.log;
  run_gillespie(m, z, horizon, rng, opts, sink);
  return run;
}

std::vector<IntVec> gillespie_at(const DiscreteModelSpec& spec, const IntVec& z, std::span<const double> checkpoints,
                                 RandomStream& rng, const EngineOptions& opts) {
  validate_discrete(spec);
  check_initial_state(z, spec.d);
  check_checkpoints(checkpoints);
  const auto m = compile(spec);
  std::vector<IntVec> at;
  at.reserve(checkpoints.size());
  Sink sink;
  sink.checkpoints = checkpoints;
  sink.at = &at;
  run_gillespie(m, z, checkpoints.empty() ? 0.0 : checkpoints.back(), rng, opts, sink);
  return at;
}

TimeChangeDrivers make_time_change_drivers(std::span<const RandomWalkSpec> walks, const Matrix& interaction,
                                           const RandomStream& rng) {
  const std::size_t d = walks.size();
  TimeChangeDrivers drivers;
  for (std::size_t i = 0; i < d; ++i) {
    validate_walk(walks[i], d);
    drivers.walks.push_back(std::make_unique<WalkSource>(walks[i], rng.child({stream_tag::walk, i})));
  }
  drivers.interactions.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (interaction(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
        drivers.interactions[i * d + j] =
            std::make_unique<UnitPoissonSource>(rng.child({stream_tag::interaction, i, j}));
  return drivers;
}

std::unique_ptr<DriverSource> make_scripted_source(std::vector<std::pair<double, IntVec>> arrivals) {
  return std::make_unique<ScriptedSource>(std::move(arrivals));
}

Path simulate_time_change(const DiscreteModelSpec& spec, const IntVec& z, double horizon,
                          std::span<const RandomWalkSpec> walks, RandomStream& rng, const EngineOptions& opts) {
  validate_discrete(spec);
  check_initial_state(z, spec.d);
  auto drivers = make_time_change_drivers(walks, spec.interaction, rng);
  return simulate_time_change(spec.interaction, z, horizon, drivers, opts);
}

Path simulate_time_change(const Matrix& interaction, const IntVec& z, double horizon, TimeChangeDrivers& drivers,
                          const EngineOptions& opts, const std::optional<GridConfig>& frozen) {
  Path path;
  Sink sink;
  sink.path = &path;
  run_time_change(interaction, z, horizon, drivers, opts, frozen, sink);
  return path;
}

std::vector<IntVec> time_change_at(const Matrix& interaction, const IntVec& z, std::span<const double> checkpoints,
                                   TimeChangeDrivers& drivers, const EngineOptions& opts,
                                   const std::optional<GridConfig>& frozen) {
  check_checkpoints(checkpoints);
  std::vector<IntVec> at;
  at.reserve(checkpoints.size());
  Sink sink;
  sink.checkpoints = checkpoints;
  sink.at = &at;
  run_time_change(interaction, z, checkpoints.empty() ? 0.0 : checkpoints.back(), drivers, opts, frozen, sink);
  return at;
}

std::vector<std::vector<IntVec>> sample_marginals(EngineKind engine, const DiscreteModelSpec& spec, const IntVec& z,
                                                  std::span<const double> checkpoints, std::size_t n_paths,
                                                  const RandomStream& rng, const EngineOptions& opts,
                                                  std::size_t workers) {
  validate_discrete(spec);
  check_initial_state(z, spec.d);
  check_checkpoints(checkpoints);
  const auto walks = walk_specs_from_model(spec);
  std::vector<std::vector<IntVec>> out(n_paths);
  for_each_index(n_paths, workers, [&](std::size_t k) {
    RandomStream path_rng = rng.child({stream_tag::path, k});
    if (engine == EngineKind::gillespie) {
      out[k] = gillespie_at(spec, z, checkpoints, path_rng, opts);
    } else {
      auto drivers = make_time_change_drivers(walks, spec.interaction, path_rng);
      out[k] = time_change_at(spec.interaction, z, checkpoints, drivers, opts);
    }
  });
  return out;
}

EquivalenceReport law_equivalence_check(const EquivalenceSetup& setup, const RandomStream& rng) {
  const double cps[] = {setup.t};
  const auto a = sample_marginals(setup.engine_a, setup.spec_a, setup.z, cps, setup.n_paths, rng.child(0),
                                  setup.engine, setup.workers);
  const auto b = sample_marginals(setup.engine_b, setup.spec_b, setup.z, cps, setup.n_paths,
                                  rng.child(setup.shared_seed ? 0 : 1), setup.engine, setup.workers);
  std::vector<IntVec> sa, sb;
  sa.reserve(a.size());
  sb.reserve(b.size());
  for (const auto& x : a) sa.push_back(x.front());
  for (const auto& x : b) sb.push_back(x.front());

  EquivalenceReport rep;
  rep.n_paths = setup.n_paths;
  if (sa.empty()) return rep;
  const std::size_t d = setup.z.size();
  for (std::size_t j = 0; j < d; ++j) {
    const auto ks = ks_two_sample(column(sa, j), column(sb, j));
    rep.ks.push_back({ks.statistic, ks.p_value});
  }

  std::map<IntVec, std::pair<double, double>> joint;
  for (const auto& s : sa) joint[s].first += 1.0;
  for (const auto& s : sb) joint[s].second += 1.0;
  double tv = 0.0;
  for (const auto& [state, c] : joint)
    tv += std::abs(c.first / static_cast<double>(sa.size()) - c.second / static_cast<double>(sb.size()));
  rep.joint_tv = 0.5 * tv;

  auto ca = empirical_lattice(sa, d, setup.lattice_cap);
  auto cb = empirical_lattice(sb, d, setup.lattice_cap);
  for (auto& x : ca) x *= static_cast<double>(sa.size());
  for (auto& x : cb) x *= static_cast<double>(sb.size());
  const auto chi = chi_square_homogeneity(ca, cb);
  rep.chi_square = chi.statistic;
  rep.chi_square_dof = chi.dof;
  rep.chi_square_p = chi.p_value;
  return rep;
}

EquivalenceReport law_equivalence_check(const DiscreteModelSpec& spec, const IntVec& z, double t, std::size_t n_paths,
                                        const RandomStream& rng) {
  EquivalenceSetup setup;
  setup.spec_a = spec;
  setup.spec_b = spec;
  setup.z = z;
  setup.t = t;
  setup.n_paths = n_paths;
  return law_equivalence_check(setup, rng);
}

}  // namespace imbp
