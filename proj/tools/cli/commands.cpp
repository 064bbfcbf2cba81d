#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/grid_approx.hpp"
#include "imbp/io.hpp"
#include "imbp/parallel.hpp"
#include "imbp/scaling_harness.hpp"
#include "imbp/stats.hpp"

namespace imbp::cli {

using nlohmann::json;

void RunContext::write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
  std::ofstream f(out_ / name, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
  fill(f);
  if (!f) throw std::runtime_error("write failed for " + (out_ / name).string());
  written_.push_back(name);
}

void RunContext::write_json(const std::string& name, const json& doc) {
  write(name, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

namespace {

EngineOptions engine_options(const Config& cfg) {
  EngineOptions o;
  o.rate_cap = cfg.engine.rate_cap;
  o.keep_log = cfg.engine.keep_log;
  return o;
}

EulerConfig euler_config(const Config& cfg) {
  EulerConfig e;
  e.dt = cfg.engine.dt;
  e.truncation_level = cfg.engine.truncation_level;
  e.step_guard = cfg.engine.step_guard;
  e.record_stride = cfg.engine.record_stride;
  return e;
}

std::vector<double> checkpoints(const Config& cfg) {
  if (!cfg.experiment.checkpoints.empty()) return cfg.experiment.checkpoints;
  return {cfg.experiment.horizon};
}

void require_model(const Config& cfg, ModelKind kind, const char* what) {
  if (cfg.model.kind != kind) throw ConfigError("model.kind", std::string("this command needs a ") + what + " model");
}

json interval_json(const Interval& i) { return json::array({i.lower, i.upper}); }

json mean_json(const MeanEstimate& m) { return {{"mean", m.mean}, {"standard_error", m.standard_error}}; }

// Discrete trajectories with per-path overflow flags, written in path order.
struct DiscreteEnsemble {
  std::vector<Path> paths;
  std::vector<EventLog> logs;
  std::vector<std::size_t> overflow;
};

template <class Simulate>
DiscreteEnsemble run_discrete(const RunContext& ctx, std::size_t d, const IntVec& z, Simulate&& simulate) {
  const std::size_t n = ctx.cfg().experiment.paths;
  DiscreteEnsemble e;
  e.paths.resize(n);
  e.logs.resize(n);
  std::vector<char> failed(n, 0);
  const RandomStream master(ctx.cfg().experiment.seed);
  for_each_index(n, ctx.workers(), [&](std::size_t k) {
    auto stream = master.child({stream_tag::path, k});
    try {
      simulate(stream, e.paths[k], e.logs[k]);
    } catch (const RateOverflow&) {
      failed[k] = 1;
      e.paths[k] = Path{{{0.0, z}}, ctx.cfg().experiment.horizon};
      e.logs[k].clear();
    }
  });
  for (std::size_t k = 0; k < n; ++k)
    if (failed[k]) e.overflow.push_back(k);
  (void)d;
  return e;
}

int finish_discrete(RunContext& ctx, const DiscreteEnsemble& e, std::size_t d, json summary) {
  const auto& x = ctx.cfg().experiment;
  if (x.format == "csv") {
    ctx.write("trajectories.csv", [&](std::ostream& os) { write_paths_csv(os, e.paths, d); });
  } else {
    ctx.write("trajectories.jsonl", [&](std::ostream& os) {
      for (std::size_t k = 0; k < e.paths.size(); ++k) write_path_jsonl(os, e.paths[k], k);
    });
  }
  if (ctx.cfg().engine.keep_log) {
    ctx.write("events.jsonl", [&](std::ostream& os) {
      for (std::size_t k = 0; k < e.logs.size(); ++k) write_event_log_jsonl(os, e.logs[k], k);
    });
  }

  RealVec mean(d, 0.0);
  std::size_t extinct = 0, counted = 0;
  double extinction_time = 0.0;
  for (std::size_t k = 0; k < e.paths.size(); ++k) {
    if (std::binary_search(e.overflow.begin(), e.overflow.end(), k)) continue;
    ++counted;
    const auto& last = e.paths[k].breakpoints.back();
    for (std::size_t j = 0; j < d; ++j) mean[j] += static_cast<double>(last.state[j]);
    if (std::all_of(last.state.begin(), last.state.end(), [](auto v) { return v == 0; })) {
      ++extinct;
      extinction_time += last.t;
    }
  }
  if (counted > 0)
    for (auto& m : mean) m /= static_cast<double>(counted);
  summary["paths"] = e.paths.size();
  summary["mean_final_state"] = mean;
  summary["extinct_paths"] = extinct;
  summary["extinct_fraction"] = counted ? static_cast<double>(extinct) / static_cast<double>(counted) : 0.0;
  summary["mean_extinction_time"] = extinct ? json(extinction_time / static_cast<double>(extinct)) : json(nullptr);
  summary["rate_overflow_paths"] = e.overflow;
  ctx.write_json("summary.json", summary);
  return e.overflow.empty() ? kSuccess : kNumericalGuard;
}

struct ContinuousEnsemble {
  std::vector<ContinuousPath> paths;
};

int finish_continuous(RunContext& ctx, const std::vector<ContinuousPath>& paths, std::size_t d, json summary) {
  const auto& x = ctx.cfg().experiment;
  if (x.format == "csv") {
    ctx.write("trajectories.csv", [&](std::ostream& os) { write_continuous_paths_csv(os, paths, d); });
  } else {
    ctx.write("trajectories.jsonl", [&](std::ostream& os) {
      for (std::size_t k = 0; k < paths.size(); ++k) write_continuous_jsonl(os, paths[k], k);
    });
  }
  RealVec mean(d, 0.0);
  std::size_t steps = 0, clamped = 0, extinct = 0;
  for (const auto& p : paths) {
    const auto& last = p.final_state();
    for (std::size_t j = 0; j < d; ++j) mean[j] += last[j];
    steps += p.steps;
    clamped += p.clamped_steps;
    if (std::all_of(last.begin(), last.end(), [](double v) { return v == 0.0; })) ++extinct;
  }
  if (!paths.empty())
    for (auto& m : mean) m /= static_cast<double>(paths.size());
  summary["paths"] = paths.size();
  summary["mean_final_state"] = mean;
  summary["extinct_fraction"] = paths.empty() ? 0.0 : static_cast<double>(extinct) / static_cast<double>(paths.size());
  summary["clamped_step_fraction"] = steps ? static_cast<double>(clamped) / static_cast<double>(steps) : 0.0;
  ctx.write_json("summary.json", summary);
  return kSuccess;
}

std::vector<LevyDriverSpec> drivers_for(const ContinuousModelSpec& spec) {
  std::vector<LevyDriverSpec> drivers;
  for (std::size_t i = 0; i < spec.d; ++i) drivers.push_back(driver_from_model(spec, i));
  return drivers;
}

std::vector<ContinuousPath> run_continuous(const RunContext& ctx, const std::optional<GridConfig>& grid) {
  const auto& cfg = ctx.cfg();
  const auto& spec = cfg.model.continuous;
  const std::string method = cfg.engine.method.empty() ? "euler" : cfg.engine.method;
  if (method != "euler" && method != "lamperti")
    throw ConfigError("engine.method", "continuous models use euler or lamperti");
  const auto drivers = drivers_for(spec);
  const auto ecfg = euler_config(cfg);
  std::vector<ContinuousPath> paths(cfg.experiment.paths);
  const RandomStream master(cfg.experiment.seed);
  for_each_index(paths.size(), ctx.workers(), [&](std::size_t k) {
    auto stream = master.child({stream_tag::path, k});
    paths[k] = method == "euler"
                   ? euler_simulate(spec, cfg.model.y, cfg.experiment.horizon, ecfg, stream, grid)
                   : lamperti_simulate(drivers, spec.C, cfg.model.y, cfg.experiment.horizon, ecfg.dt, stream, grid);
  });
  return paths;
}

EngineKind engine_kind(const std::string& name) {
  return name == "time_change" ? EngineKind::time_change : EngineKind::gillespie;
}

}  // namespace

int cmd_simulate_discrete(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  require_model(cfg, ModelKind::discrete, "discrete");
  const auto& spec = cfg.model.discrete;
  const std::string method = cfg.engine.method.empty() ? "gillespie" : cfg.engine.method;
  if (method != "gillespie" && method != "time_change")
    throw ConfigError("engine.method", "discrete models use gillespie or time_change");
  const auto opts = engine_options(cfg);
  const auto walks = walk_specs_from_model(spec);
  const double horizon = cfg.experiment.horizon;
  auto e = run_discrete(ctx, spec.d, cfg.model.z, [&](RandomStream& stream, Path& path, EventLog& log) {
    if (method == "gillespie") {
      auto run = simulate_gillespie(spec, cfg.model.z, horizon, stream, opts);
      path = std::move(run.path);
      log = std::move(run.log);
    } else {
      path = simulate_time_change(spec, cfg.model.z, horizon, walks, stream, opts);
    }
  });
  return finish_discrete(ctx, e, spec.d, {{"engine", method}, {"horizon", horizon}});
}

int cmd_simulate_continuous(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  require_model(cfg, ModelKind::continuous, "continuous");
  const auto paths = run_continuous(ctx, std::nullopt);
  return finish_continuous(ctx, paths, cfg.model.continuous.d,
                           {{"engine", cfg.engine.method.empty() ? "euler" : cfg.engine.method},
                            {"horizon", cfg.experiment.horizon},
                            {"dt", cfg.engine.dt}});
}

int cmd_simulate_grid(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const auto& x = cfg.experiment;
  if (!x.grid && x.grids.empty())
    throw ConfigError("experiment.epsilon", "simulate-grid needs epsilon and delta or a grids list");
  int code = kSuccess;

  if (x.grid) {
    json summary{{"epsilon", x.grid->epsilon}, {"delta", x.grid->delta}, {"horizon", x.horizon}};
    if (cfg.model.kind == ModelKind::discrete) {
      const auto& spec = cfg.model.discrete;
      const auto opts = engine_options(cfg);
      auto e = run_discrete(ctx, spec.d, cfg.model.z, [&](RandomStream& stream, Path& path, EventLog&) {
        path = simulate_grid_discrete(spec, cfg.model.z, x.horizon, *x.grid, stream, opts);
      });
      summary["engine"] = "time_change";
      code = finish_discrete(ctx, e, spec.d, summary);
    } else if (cfg.model.kind == ModelKind::continuous) {
      const auto paths = run_continuous(ctx, x.grid);
      summary["engine"] = cfg.engine.method.empty() ? "euler" : cfg.engine.method;
      summary["dt"] = cfg.engine.dt;
      code = finish_continuous(ctx, paths, cfg.model.continuous.d, summary);
    } else {
      throw ConfigError("model.kind", "simulate-grid needs a discrete or continuous model");
    }
  }

  if (!x.grids.empty()) {
    require_model(cfg, ModelKind::continuous, "continuous");
    GridExperimentConfig g;
    g.checkpoints = checkpoints(cfg);
    g.n_paths = x.paths;
    g.reference_paths = x.reference_paths;
    g.grid_euler = euler_config(cfg);
    g.reference_euler = g.grid_euler;
    g.reference_euler.dt = cfg.engine.reference_dt;
    g.bootstrap_reps = x.bootstrap;
    g.confidence = x.confidence;
    g.workers = ctx.workers();
    const auto report = grid_convergence_experiment(cfg.model.continuous, cfg.model.y, x.grids, g,
                                                    RandomStream(x.seed).child({stream_tag::experiment}));
    json rows = json::array();
    for (const auto& r : report.rows) {
      json w1 = json::array(), ci = json::array();
      for (std::size_t cp = 0; cp < r.w1.size(); ++cp) {
        w1.push_back(r.w1[cp]);
        json c = json::array();
        for (const auto& i : r.w1_ci[cp]) c.push_back(interval_json(i));
        ci.push_back(c);
      }
      rows.push_back({{"epsilon", r.grid.epsilon},
                      {"delta", r.grid.delta},
                      {"w1", w1},
                      {"w1_ci", ci},
                      {"sup_difference_to_previous",
                       std::isnan(r.sup_difference_to_previous) ? json(nullptr) : json(r.sup_difference_to_previous)},
                      {"sup_difference_to_live", r.sup_difference_to_live}});
    }
    const bool pass = report.w1_strictly_decreasing && report.sup_difference_decreasing;
    ctx.write_json("grid_report.json", {{"checkpoints", g.checkpoints},
                                        {"reference_dt", g.reference_euler.dt},
                                        {"noise_floor", report.noise_floor},
                                        {"rows", rows},
                                        {"w1_strictly_decreasing", report.w1_strictly_decreasing},
                                        {"sup_difference_decreasing", report.sup_difference_decreasing},
                                        {"pass", pass}});
    if (!pass && code == kSuccess) code = kTestFailed;
  }
  return code;
}

int cmd_scaling(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  require_model(cfg, ModelKind::feller_family, "feller_family");
  const auto& x = cfg.experiment;
  std::vector<std::size_t> ns = x.n_list.empty() ? std::vector<std::size_t>{10, 100, 1000} : x.n_list;
  std::sort(ns.begin(), ns.end());
  const auto fam = build_feller_family(cfg.model.family_y, cfg.model.family_c, ns);

  ScalingExperimentConfig s;
  s.checkpoints = checkpoints(cfg);
  s.n_paths = x.paths;
  s.reference_paths = x.reference_paths;
  s.reference_euler = euler_config(cfg);
  s.bootstrap_reps = x.bootstrap;
  s.confidence = x.confidence;
  s.workers = ctx.workers();
  s.engine = engine_options(cfg);
  const RandomStream master(x.seed);
  const auto report = scaling_convergence_experiment(fam, ns, fam.limit, s, master.child({stream_tag::experiment}));

  json rows = json::array();
  for (const auto& r : report.rows) {
    json w1 = json::array(), ci = json::array(), mean = json::array();
    for (std::size_t cp = 0; cp < r.w1.size(); ++cp) {
      w1.push_back(r.w1[cp]);
      json c = json::array(), m = json::array();
      for (const auto& i : r.w1_ci[cp]) c.push_back(interval_json(i));
      for (const auto& e : r.mean[cp]) m.push_back(mean_json(e));
      ci.push_back(c);
      mean.push_back(m);
    }
    rows.push_back({{"n", r.n}, {"w1", w1}, {"w1_ci", ci}, {"mean", mean}, {"extinct_fraction", r.extinct_fraction}});
  }
  json ref_mean = json::array();
  for (const auto& cp : report.reference_mean) {
    json m = json::array();
    for (const auto& e : cp) m.push_back(mean_json(e));
    ref_mean.push_back(m);
  }
  json doc{{"y", cfg.model.family_y},
           {"c", cfg.model.family_c},
           {"checkpoints", s.checkpoints},
           {"reference_dt", s.reference_euler.dt},
           {"rows", rows},
           {"reference_mean", ref_mean},
           {"w1_strictly_decreasing", report.w1_strictly_decreasing},
           {"w1_nonincreasing", report.w1_nonincreasing},
           {"note", "marginal W1 decay is a distributional surrogate; almost-sure path convergence is not tested"}};
  if (cfg.model.family_c == 0.0) {
    // Critical Feller diffusion with sigma = 1/2: P(Y_t = 0) = exp(-y / (sigma t)).
    json ext = json::array();
    for (double t : s.checkpoints) ext.push_back(t > 0.0 ? std::exp(-cfg.model.family_y / (0.5 * t)) : 0.0);
    doc["feller_extinction_probability"] = ext;
  }
  bool pass = report.w1_nonincreasing;

  if (x.difference_paths > 0 && !x.grids.empty()) {
    const auto diff = lemma3_difference_experiment(fam, x.grids, ns.back(), x.horizon, x.difference_paths,
                                                   master.child({stream_tag::experiment, 1}), ctx.workers(), s.engine);
    json drows = json::array();
    for (const auto& r : diff.rows) {
      json m = json::array();
      for (const auto& e : r.difference) m.push_back(mean_json(e));
      drows.push_back({{"epsilon", r.grid.epsilon}, {"delta", r.grid.delta}, {"difference", m},
                       {"identical", r.identical}});
    }
    doc["difference"] = {{"n", diff.n}, {"paths", x.difference_paths}, {"rows", drows}, {"decreasing", diff.decreasing}};
    pass = pass && diff.decreasing;
  }
  doc["pass"] = pass;
  ctx.write_json("scaling_report.json", doc);
  return pass ? kSuccess : kTestFailed;
}

int cmd_oracle_check(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  require_model(cfg, ModelKind::discrete, "discrete");
  const auto& x = cfg.experiment;
  const auto& spec = cfg.model.discrete;
  UniformizationOptions u;
  u.leak_threshold = x.leak_threshold;
  const auto oracle = transient_distribution(spec, cfg.model.z, x.horizon, x.cap, u);
  const std::string method = cfg.engine.method.empty() ? "gillespie" : cfg.engine.method;
  const double t[] = {x.horizon};
  const auto sample = sample_marginals(engine_kind(method), spec, cfg.model.z, t, x.paths, RandomStream(x.seed),
                                       engine_options(cfg), ctx.workers());
  std::vector<IntVec> finals;
  finals.reserve(sample.size());
  for (const auto& s : sample) finals.push_back(s.front());
  const auto empirical = empirical_lattice(finals, spec.d, x.cap);
  const double tv = finals.empty() ? 1.0 : tv_to_oracle(empirical, oracle);
  const bool pass = tv <= x.tv_threshold;
  ctx.write("oracle.csv", [&](std::ostream& os) { write_distribution_csv(os, oracle); });
  ctx.write_json("oracle_report.json", {{"engine", method},
                                        {"t", x.horizon},
                                        {"cap", x.cap},
                                        {"paths", x.paths},
                                        {"leak", oracle.leak},
                                        {"tv", tv},
                                        {"tv_threshold", x.tv_threshold},
                                        {"pass", pass}});
  return pass ? kSuccess : kTestFailed;
}

int cmd_equivalence(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  require_model(cfg, ModelKind::discrete, "discrete");
  const auto& x = cfg.experiment;
  EquivalenceSetup setup;
  setup.spec_a = cfg.model.discrete;
  setup.spec_b = cfg.model.discrete;
  setup.engine_a = engine_kind(x.engine_a);
  setup.engine_b = engine_kind(x.engine_b);
  setup.z = cfg.model.z;
  setup.t = x.horizon;
  setup.n_paths = x.paths;
  setup.shared_seed = x.shared_seed;
  setup.lattice_cap = x.cap;
  setup.workers = ctx.workers();
  setup.engine = engine_options(cfg);
  const auto r = law_equivalence_check(setup, RandomStream(x.seed));
  json ks = json::array();
  bool pass = r.joint_tv <= x.tv_threshold;
  for (const auto& k : r.ks) {
    ks.push_back({{"statistic", k.statistic}, {"p_value", k.p_value}});
    // A zero statistic means identical samples; the p-value is 1 regardless of size.
    if (k.statistic > 0.0 && !(k.p_value > x.alpha)) pass = false;
  }
  ctx.write_json("equivalence_report.json", {{"engine_a", x.engine_a},
                                             {"engine_b", x.engine_b},
                                             {"shared_seed", x.shared_seed},
                                             {"t", x.horizon},
                                             {"paths", r.n_paths},
                                             {"ks", ks},
                                             {"chi_square", r.chi_square},
                                             {"chi_square_dof", r.chi_square_dof},
                                             {"chi_square_p", r.chi_square_p},
                                             {"joint_tv", r.joint_tv},
                                             {"alpha", x.alpha},
                                             {"tv_threshold", x.tv_threshold},
                                             {"pass", pass}});
  return pass ? kSuccess : kTestFailed;
}

}  // namespace imbp::cli
