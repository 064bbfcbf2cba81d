// Acceptance gate. Prints one PASS/FAIL line per criterion (details indented
// above it) and exits nonzero if any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/grid_approx.hpp"
#include "imbp/parallel.hpp"
#include "imbp/scaling_harness.hpp"
#include "imbp/stats.hpp"

using namespace imbp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

const std::size_t kWorkers = default_workers();

// --- fixed models -------------------------------------------------------------

struct NamedModel {
  const char* name;
  DiscreteModelSpec spec;
  IntVec z;
};

DiscreteModelSpec pure_death() {
  DiscreteModelSpec s;
  s.d = 1;
  s.lambda = {1.0};
  s.offspring = {{{{0}, 1.0}}};
  s.interaction = Matrix::Zero(1, 1);
  return s;
}

// Type 1 dies, splits, or produces one of each type; type 2 dies or splits.
DiscreteModelSpec fission_death() {
  DiscreteModelSpec s;
  s.d = 2;
  s.lambda = {1.0, 1.0};
  s.offspring = {{{{0, 0}, 0.4}, {{2, 0}, 0.3}, {{1, 1}, 0.3}}, {{{0, 0}, 0.6}, {{0, 2}, 0.4}}};
  s.interaction = Matrix::Zero(2, 2);
  return s;
}

DiscreteModelSpec interacting() {
  auto s = fission_death();
  s.interaction(0, 1) = -0.5;
  s.interaction(1, 0) = 0.2;
  return s;
}

std::vector<NamedModel> discrete_models() {
  return {{"pure death", pure_death(), {3}},
          {"two-type fission/death", fission_death(), {2, 1}},
          {"two-type c12=-0.5 c21=+0.2", interacting(), {2, 2}}};
}

ContinuousModelSpec continuous(Matrix b, Matrix c, RealVec sigma) {
  ContinuousModelSpec s;
  s.d = sigma.size();
  s.B = std::move(b);
  s.C = std::move(c);
  s.sigma = std::move(sigma);
  s.jump_measures.resize(s.d);
  return s;
}

ContinuousModelSpec logistic_1d(double sigma) {
  return continuous(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, -1.0), {sigma});
}

EulerConfig euler(double dt) {
  EulerConfig c;
  c.dt = dt;
  return c;
}

// --- criteria -----------------------------------------------------------------

bool engine_equivalence() {
  bool ok = true;
  std::uint64_t seed = 100;
  for (const auto& m : discrete_models()) {
    const auto start = Clock::now();
    EquivalenceSetup s;
    s.spec_a = s.spec_b = m.spec;
    s.engine_a = EngineKind::gillespie;
    s.engine_b = EngineKind::time_change;
    s.z = m.z;
    s.t = 1.0;
    s.n_paths = 100000;
    s.lattice_cap = 20;
    s.workers = kWorkers;
    const auto r = law_equivalence_check(s, RandomStream(seed++));
    const double secs = seconds_since(start);
    bool model_ok = r.joint_tv <= 0.02 && secs <= 120.0;
    std::ostringstream ks;
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      ks << " KS_" << j + 1 << " D=" << r.ks[j].statistic << " p=" << r.ks[j].p_value;
      model_ok = model_ok && r.ks[j].p_value > 0.001;
    }
    detail("%s: n=%zu%s joint TV=%.4f chi2 p=%.3g (%.1fs) %s", m.name, r.n_paths, ks.str().c_str(), r.joint_tv,
           r.chi_square_p, secs, model_ok ? "ok" : "FAIL");
    ok = ok && model_ok;
  }
  return ok;
}

bool oracle_match() {
  bool ok = true;
  std::uint64_t seed = 200;
  for (const auto& m : discrete_models()) {
    UniformizationOptions u;
    u.leak_threshold = 1e-3;
    LatticeDistribution oracle;
    try {
      oracle = transient_distribution(m.spec, m.z, 1.0, 20, u);
    } catch (const BoxTooSmall& e) {
      detail("%s: box cap 20 leaks %.3g", m.name, e.leak());
      ok = false;
      continue;
    }
    const std::array<double, 1> t{1.0};
    const auto marg = sample_marginals(EngineKind::gillespie, m.spec, m.z, t, 100000, RandomStream(seed++), {}, kWorkers);
    std::vector<IntVec> finals;
    for (const auto& p : marg) finals.push_back(p[0]);
    const double tv = tv_to_oracle(empirical_lattice(finals, m.spec.d, 20), oracle);
    const bool model_ok = oracle.leak < 1e-3 && tv <= 0.02;
    detail("%s: leak=%.2e TV=%.4f %s", m.name, oracle.leak, tv, model_ok ? "ok" : "FAIL");
    ok = ok && model_ok;
  }
  return ok;
}

bool mean_flow_check() {
  const auto spec = fission_death();
  const IntVec z{2, 1};
  const std::array<double, 2> t{0.5, 1.0};
  const std::size_t n = 100000;
  const auto marg = sample_marginals(EngineKind::gillespie, spec, z, t, n, RandomStream(300), {}, kWorkers);
  const Matrix a = derive_mean_matrix(spec);
  bool ok = true;
  for (std::size_t c = 0; c < t.size(); ++c) {
    const auto exact = mean_flow(a, {2.0, 1.0}, t[c]);
    for (std::size_t j = 0; j < spec.d; ++j) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = static_cast<double>(marg[k][c][j]);
      const auto est = mean_estimate(x);
      const double rel = std::abs(est.mean - exact[j]) / exact[j];
      const bool within_se = std::abs(est.mean - exact[j]) <= 3 * est.standard_error;
      detail("t=%.1f z_%zu: empirical %.5f exact %.5f rel.err %.4f (3 s.e. = %.5f, %s)", t[c], j + 1, est.mean,
             exact[j], rel, 3 * est.standard_error, within_se ? "inside" : "outside");
      ok = ok && rel <= 0.02;
    }
  }
  return ok;
}

bool deterministic_limits() {
  RandomStream r(400);
  const auto lin = euler_simulate(continuous(Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1), {0.0}), {1.0}, 1.0,
                                  euler(1e-4), r);
  const double rel = std::abs(lin.final_state()[0] / std::exp(1.0) - 1.0);
  detail("linear ODE: Y_1=%.8f e=%.8f rel.err %.2e", lin.final_state()[0], std::exp(1.0), rel);
  bool ok = rel <= 1e-3;
  const std::array<double, 3> t{0.5, 1.0, 2.0};
  const auto y = euler_at(logistic_1d(0.0), {0.5}, t, euler(1e-4), r);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double exact = 1.0 / (1.0 + std::exp(-t[k]));
    const double err = std::abs(y[k][0] - exact);
    detail("logistic ODE t=%.1f: Y=%.8f exact %.8f abs.err %.2e", t[k], y[k][0], exact, err);
    ok = ok && err <= 1e-3;
  }
  return ok;
}

bool martingale_consistency() {
  Matrix fb(2, 2), lb(2, 2), lc(2, 2);
  fb << 0.0, 0.3, 0.2, 0.0;
  lb << 1.0, 0.2, 0.1, 1.0;
  lc << -1.0, -0.2, -0.3, -1.0;
  const std::array<std::pair<const char*, ContinuousModelSpec>, 2> models{
      std::pair{"two-type Feller", continuous(fb, Matrix::Zero(2, 2), {1.0, 0.5})},
      std::pair{"two-type logistic diffusion", continuous(lb, lc, {0.1, 0.1})}};
  const std::array<RealVec, 2> starts{RealVec{1.0, 1.0}, RealVec{0.5, 0.5}};
  const std::vector<TestFunction> fs{TestFunction::coordinate(0, 2), TestFunction::coordinate(1, 2),
                                     TestFunction::square(0, 2),     TestFunction::square(1, 2),
                                     TestFunction::product(0, 1, 2)};
  const char* names[] = {"x_1", "x_2", "x_1^2", "x_2^2", "x_1 x_2"};
  bool ok = true;
  std::uint64_t seed = 500;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto res = martingale_residual_mc(models[m].second, fs, starts[m], 1.0, euler(1e-3), 100000,
                                            RandomStream(seed++), kWorkers);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      const bool f_ok = std::abs(res[f].mean) <= 3 * res[f].standard_error;
      detail("%s, f=%s: residual %+.5f s.e. %.5f (%.2f s.e.) %s", models[m].first, names[f], res[f].mean,
             res[f].standard_error, res[f].mean / res[f].standard_error, f_ok ? "ok" : "FAIL");
      ok = ok && f_ok;
    }
  }
  return ok;
}

bool grid_convergence() {
  const std::array<GridConfig, 3> grids{GridConfig{0.5, 0.5}, GridConfig{0.1, 0.1}, GridConfig{0.02, 0.02}};
  GridExperimentConfig cfg;
  cfg.checkpoints = {1.0};
  cfg.n_paths = 20000;
  cfg.reference_paths = 20000;
  cfg.grid_euler = euler(1e-3);
  cfg.reference_euler = euler(1e-4);
  cfg.bootstrap_reps = 200;
  cfg.workers = kWorkers;
  const auto rep = grid_convergence_experiment(logistic_1d(0.1), {0.5}, grids, cfg, RandomStream(600));
  for (const auto& row : rep.rows) {
    detail("(eps,delta)=(%.2f,%.2f): W1=%.5f CI [%.5f, %.5f] sup|grid-previous|=%.4f sup|grid-live|=%.4f",
           row.grid.epsilon, row.grid.delta, row.w1[0][0], row.w1_ci[0][0].lower, row.w1_ci[0][0].upper,
           row.sup_difference_to_previous, row.sup_difference_to_live);
  }
  detail("noise floor (two independent references) %.5f", rep.noise_floor);
  detail("W1 decreasing beyond CI overlap: %s; common-noise sup-difference decreasing: %s",
         rep.w1_strictly_decreasing ? "yes" : "no", rep.sup_difference_decreasing ? "yes" : "no");
  return rep.w1_strictly_decreasing && rep.sup_difference_decreasing;
}

bool scaling_limit() {
  const auto start = Clock::now();
  const std::array<std::size_t, 3> ns{10, 100, 1000};
  const double y = 1.0;
  bool ok = true;

  ScalingExperimentConfig cfg;
  cfg.checkpoints = {1.0};
  cfg.n_paths = 100000;
  cfg.reference_paths = 200000;
  cfg.reference_euler = euler(1e-3);
  cfg.bootstrap_reps = 200;
  cfg.workers = kWorkers;

  const auto critical = build_feller_family(y, 0.0, ns);
  const auto rep = scaling_convergence_experiment(critical, ns, critical.limit, cfg, RandomStream(700));
  const double p_extinct = std::exp(-2.0 * y);
  bool means_ok = true, strict = true;
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    const auto& row = rep.rows[r];
    const double start_mass = std::ceil(y * static_cast<double>(row.n)) / static_cast<double>(row.n);
    const auto& m = row.mean[0][0];
    const bool mean_ok = std::abs(m.mean - start_mass) <= 3 * m.standard_error;
    means_ok = means_ok && mean_ok;
    if (r > 0) strict = strict && row.w1[0][0] < rep.rows[r - 1].w1[0][0];
    detail("c=0 n=%4zu: mean %.5f (start %.3f, s.e. %.5f, %s) P(extinct)=%.4f W1=%.5f CI [%.5f, %.5f]", row.n,
           m.mean, start_mass, m.standard_error, mean_ok ? "ok" : "FAIL", row.extinct_fraction[0], row.w1[0][0],
           row.w1_ci[0][0].lower, row.w1_ci[0][0].upper);
  }
  const double ext = rep.rows.back().extinct_fraction[0];
  // The limit is the Feller diffusion with sigma = 1/2, so P(Y_1 = 0) = exp(-y / sigma) = exp(-2y);
  // equivalently the survival probability is 1 - exp(-2y).
  const bool ext_ok = std::abs(ext - p_extinct) <= 0.02;
  detail("(a) rescaled mean constant within 3 s.e.: %s", means_ok ? "yes" : "no");
  detail("(b) n=1000: P(Y_1=0)=%.4f vs exp(-2y)=%.4f; P(Y_1>0)=%.4f vs 1-exp(-2y)=%.4f: %s", ext, p_extinct,
         1.0 - ext, 1.0 - p_extinct, ext_ok ? "ok" : "FAIL");
  detail("(c) W1 strictly decreasing in n: %s (disjoint CIs: %s)", strict ? "yes" : "no",
         rep.w1_strictly_decreasing ? "yes" : "no");
  ok = means_ok && ext_ok && strict;

  const auto competitive = build_feller_family(y, -1.0, ns);
  const auto crep = scaling_convergence_experiment(competitive, ns, competitive.limit, cfg, RandomStream(701));
  for (const auto& row : crep.rows)
    detail("c=-1 n=%4zu: mean %.5f (limit %.5f) W1=%.5f", row.n, row.mean[0][0].mean, crep.reference_mean[0][0].mean,
           row.w1[0][0]);
  const double w1_comp = crep.rows.back().w1[0][0];
  const bool comp_ok = w1_comp <= 0.05;
  const double secs = seconds_since(start);
  detail("c=-1: W1 at n=1000 = %.5f (<= 0.05: %s); runtime %.0fs (budget 900s)", w1_comp, comp_ok ? "yes" : "no",
         secs);
  return ok && comp_ok && secs <= 900.0;
}

bool difference_decay() {
  const std::size_t n = 1000;
  const std::array<std::size_t, 1> ns{n};
  const std::array<GridConfig, 3> grids{GridConfig{0.5, 0.5}, GridConfig{0.2, 0.2}, GridConfig{0.05, 0.05}};
  const auto fam = build_feller_family(0.5, -1.0, ns);
  const auto rep = lemma3_difference_experiment(fam, grids, n, 1.0, 200, RandomStream(800), kWorkers);
  for (const auto& row : rep.rows)
    detail("c=-1 (eps,delta)=(%.2f,%.2f): E|Z - Z_grid| = %.5f (s.e. %.5f)", row.grid.epsilon, row.grid.delta,
           row.difference[0].mean, row.difference[0].standard_error);
  const auto free = build_feller_family(0.5, 0.0, ns);
  const auto zero = lemma3_difference_experiment(free, grids, n, 1.0, 100, RandomStream(801), kWorkers);
  bool identical = true;
  for (const auto& row : zero.rows) identical = identical && row.identical && row.difference[0].mean == 0.0;
  detail("decreasing: %s; C=0 difference identically 0 on every path and grid: %s", rep.decreasing ? "yes" : "no",
         identical ? "yes" : "no");
  return rep.decreasing && identical;
}

// --- reproducibility through the command-line tool ------------------------------

int cli(std::vector<std::string> args, std::string& err_text) {
  args.insert(args.begin(), "imbp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json discrete_json(const DiscreteModelSpec& s, const IntVec& z) {
  json offspring = json::array();
  for (const auto& pmf : s.offspring) {
    json row = json::array();
    for (const auto& o : pmf) row.push_back({{"v", o.offspring}, {"p", o.probability}});
    offspring.push_back(row);
  }
  json c = json::array();
  for (Eigen::Index i = 0; i < s.interaction.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < s.interaction.cols(); ++j) row.push_back(s.interaction(i, j));
    c.push_back(row);
  }
  return {{"kind", "discrete"}, {"lambda", s.lambda}, {"offspring", offspring}, {"interaction", c}, {"z", z}};
}

bool reproducibility() {
  const auto root = fs::temp_directory_path() / "imbp_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const json logistic{{"kind", "continuous"}, {"B", {{1.0}}}, {"C", {{-1.0}}}, {"sigma", {0.1}}, {"y", {0.5}}};

  struct Run {
    const char* command;
    json config;
  };
  const std::vector<Run> runs{
      {"equivalence", {{"model", discrete_json(interacting(), {2, 2})}, {"experiment", {{"paths", 5000}, {"tv_threshold", 0.1}}}}},
      {"oracle-check", {{"model", discrete_json(fission_death(), {2, 1})}, {"experiment", {{"paths", 5000}, {"tv_threshold", 0.1}}}}},
      {"simulate-discrete",
       {{"model", discrete_json(interacting(), {2, 2})},
        {"engine", {{"keep_log", true}}},
        {"experiment", {{"paths", 200}, {"horizon", 2.0}}}}},
      {"simulate-discrete",
       {{"model", discrete_json(interacting(), {2, 2})},
        {"engine", {{"method", "time_change"}}},
        {"experiment", {{"paths", 200}, {"format", "jsonl"}}}}},
      {"simulate-continuous",
       {{"model", logistic}, {"engine", {{"dt", 1e-3}, {"record_stride", 10}}}, {"experiment", {{"paths", 200}}}}},
      {"simulate-grid",
       {{"model", logistic},
        {"engine", {{"dt", 1e-3}, {"reference_dt", 1e-3}}},
        {"experiment",
         {{"paths", 500},
          {"epsilon", 0.1},
          {"delta", 0.1},
          {"bootstrap", 50},
          {"grids", {{{"epsilon", 0.5}, {"delta", 0.5}}, {{"epsilon", 0.1}, {"delta", 0.1}}}}}}}},
      {"scaling",
       {{"model", {{"kind", "feller_family"}, {"y", 1.0}, {"c", -1.0}}},
        {"experiment",
         {{"paths", 2000},
          {"n_list", {10, 100}},
          {"bootstrap", 50},
          {"difference_paths", 20},
          {"grids", {{{"epsilon", 0.5}, {"delta", 0.5}}, {{"epsilon", 0.1}, {"delta", 0.1}}}}}}}},
  };

  bool ok = true;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto dir = root / ("run" + std::to_string(r));
    fs::create_directories(dir);
    const auto config = dir / "config.json";
    std::ofstream(config) << runs[r].config.dump(2);
    std::string err;
    const int first = cli({runs[r].command, "--config", config.string(), "--seed", "9", "--workers", "1", "--out",
                           (dir / "w1").string()},
                          err);
    const auto manifest = json::parse(slurp(dir / "w1" / "manifest.json"));
    bool same = true;
    std::size_t files = 0;
    for (const std::size_t workers : {2, 4}) {
      const auto target = dir / ("w" + std::to_string(workers));
      const int again = cli({"rerun", "--manifest", (dir / "w1" / "manifest.json").string(), "--workers",
                             std::to_string(workers), "--out", target.string()},
                            err);
      same = same && again == first;
      const auto re = json::parse(slurp(target / "manifest.json"));
      same = same && re["files"].size() == manifest["files"].size() && re["config_digest"] == manifest["config_digest"];
      for (const auto& f : manifest["files"]) {
        const auto name = f["name"].get<std::string>();
        same = same && slurp(dir / "w1" / name) == slurp(target / name);
        ++files;
      }
    }
    detail("%s: exit %d, %zu data files compared at 2 and 4 workers: %s", runs[r].command, first,
           manifest["files"].size(), same ? "byte-identical" : "DIFFERENT");
    ok = ok && same && first == 0 && manifest["files"].size() > 0;
  }
  return ok;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "engine equivalence (Gillespie vs time change, 3 models, 1e5 paths)", engine_equivalence},
      {2, "uniformization oracle match (cap 20, 1e5 paths)", oracle_match},
      {3, "mean-flow check without interaction", mean_flow_check},
      {4, "deterministic limits of the Euler engine", deterministic_limits},
      {5, "generator/martingale consistency", martingale_consistency},
      {6, "grid convergence on the logistic diffusion", grid_convergence},
      {7, "scaling limit of the Feller family", scaling_limit},
      {8, "coupled grid difference decay at n=1000", difference_decay},
      {9, "reproducibility from manifests across worker counts", reproducibility},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  std::printf("acceptance: %zu worker(s)\n", kWorkers);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    bool pass = false;
    try {
      pass = c.run();
    } catch (const std::exception& e) {
      detail("error: %s", e.what());
    }
    std::printf("%s %d: %s [%.1fs]\n", pass ? "PASS" : "FAIL", c.id, c.title, seconds_since(start));
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
