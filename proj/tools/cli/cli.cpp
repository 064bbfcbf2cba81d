#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "imbp/errors.hpp"
#include "imbp/parallel.hpp"
#include "manifest.hpp"

#ifndef IMBP_VERSION
#define IMBP_VERSION "0.0.0"
#endif

namespace imbp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigHelp = R"(Config document (JSON), sections model / engine / experiment. Unknown keys are rejected.

  model (discrete):    {"kind":"discrete", "lambda":[..], "offspring":[[{"v":[..],"p":..},..],..],
                        "interaction":[[..],..], "z":[..]}
  model (continuous):  {"kind":"continuous", "B":[[..]], "C":[[..]], "sigma":[..],
                        "jumps":[{"components":[{"type":"atom","mass":..,"r":[..]}
                                               |{"type":"exponential","mass":..,"direction":[..],"mean":..}
                                               |{"type":"pareto","mass":..,"direction":[..],"scale":..,"alpha":..}],
                                  "small_jumps":{"r_min":..,"drift":[..]}}],
                        "y":[..]}
  model (scaling):     {"kind":"feller_family", "y":.., "c":..}
  engine:              method (gillespie|time_change|euler|lamperti), dt, reference_dt, rate_cap,
                       truncation_level, step_guard, record_stride, keep_log
  experiment:          seed, paths, horizon, checkpoints, epsilon, delta, grids [{"epsilon","delta"}], n_list,
                       reference_paths, bootstrap, confidence, cap, leak_threshold, tv_threshold, alpha,
                       engine_a, engine_b, shared_seed, difference_paths, format (csv|jsonl)

Exit codes: 0 success, 2 config error, 3 numerical guard tripped, 4 statistical test failed.
Environment: IMBP_WORKERS sets the default worker count.)";

using Command = int (*)(RunContext&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"simulate-discrete", cmd_simulate_discrete}, {"simulate-continuous", cmd_simulate_continuous},
      {"simulate-grid", cmd_simulate_grid},         {"scaling", cmd_scaling},
      {"oracle-check", cmd_oracle_check},           {"equivalence", cmd_equivalence},
  };
  return table;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::vector<std::size_t> n_list;
  std::optional<std::string> format;
};

void add_run_options(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config document (see --help on the main command)")->required();
  sub->add_option("--seed", o.seed, "master seed (overrides experiment.seed)");
  sub->add_option("--paths", o.paths, "number of sample paths (overrides experiment.paths)");
  sub->add_option("--horizon", o.horizon, "time horizon (overrides experiment.horizon)");
  sub->add_option("--dt", o.dt, "Euler step (overrides engine.dt)");
  sub->add_option("--epsilon", o.epsilon, "grid time resolution (overrides experiment.epsilon)");
  sub->add_option("--delta", o.delta, "grid space resolution (overrides experiment.delta)");
  sub->add_option("--n-list", o.n_list, "scaling indices, e.g. --n-list 10 100 1000")->expected(1, -1);
  sub->add_option("--format", o.format, "trajectory format")->check(CLI::IsMember({"csv", "jsonl"}));
}

json apply_overrides(json doc, const Overrides& o) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  auto& x = doc["experiment"];
  if (x.is_null()) x = json::object();
  if (!x.is_object()) throw ConfigError("experiment", "expected an object");
  if (o.seed) x["seed"] = *o.seed;
  if (o.paths) x["paths"] = *o.paths;
  if (o.horizon) x["horizon"] = *o.horizon;
  if (o.epsilon) x["epsilon"] = *o.epsilon;
  if (o.delta) x["delta"] = *o.delta;
  if (!o.n_list.empty()) x["n_list"] = o.n_list;
  if (o.format) x["format"] = *o.format;
  if (o.dt) {
    auto& e = doc["engine"];
    if (e.is_null()) e = json::object();
    if (!e.is_object()) throw ConfigError("engine", "expected an object");
    e["dt"] = *o.dt;
  }
  return doc;
}

void write_manifest(const fs::path& out, const std::string& command, const json& doc, const Config* cfg,
                    double seconds, int code, const std::vector<std::string>& written, const std::string& error) {
  json files = json::array();
  for (const auto& entry : file_inventory(out)) {
    if (std::find(written.begin(), written.end(), entry["name"].get<std::string>()) != written.end())
      files.push_back(entry);
  }
  json m{{"tool", "imbp"},
         {"version", IMBP_VERSION},
         {"command", command},
         {"config", doc},
         {"config_digest", sha256_hex(doc.dump())},
         {"wall_clock_seconds", seconds},
         {"exit_code", code},
         {"files", files}};
  if (cfg) {
    const auto& x = cfg->experiment;
    m["seed"] = x.seed;
    m["parameters"] = {{"paths", x.paths}, {"horizon", x.horizon}, {"dt", cfg->engine.dt}, {"format", x.format}};
    if (x.grid) {
      m["parameters"]["epsilon"] = x.grid->epsilon;
      m["parameters"]["delta"] = x.grid->delta;
    }
    if (!x.n_list.empty()) m["parameters"]["n_list"] = x.n_list;
  }
  if (!error.empty()) m["error"] = error;
  std::ofstream f(out / kManifestName, std::ios::binary | std::ios::trunc);
  f << m.dump(2) << '\n';
}

int execute(const std::string& command, const json& doc, const fs::path& out, std::size_t workers,
            std::ostream& os, std::ostream& err) {
  const Config cfg = parse_config(doc);
  fs::create_directories(out);
  // A stale manifest from an earlier run must not survive a failed rerun.
  fs::remove(out / kManifestName);
  RunContext ctx(cfg, out, workers);
  const auto start = std::chrono::steady_clock::now();
  int code = kSuccess;
  std::string error;
  try {
    code = commands().at(command)(ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError&) {
    throw;
  } catch (const RateOverflow& e) {
    code = kNumericalGuard;
    error = e.what();
  } catch (const StepRejected& e) {
    code = kNumericalGuard;
    error = e.what();
  } catch (const BoxTooSmall& e) {
    code = kNumericalGuard;
    error = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(out, command, doc, &cfg, seconds, code, ctx.written(), error);
  if (!error.empty()) err << "imbp: numerical guard: " << error << '\n';
  os << command << ": exit " << code << ", " << ctx.written().size() << " file(s) in " << out.string() << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interacting multitype branching process simulator", "imbp"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", IMBP_VERSION);

  std::size_t workers = default_workers();
  std::string out_dir = "imbp-out";
  Overrides overrides;

  const std::map<std::string, std::string> descriptions{
      {"simulate-discrete", "simulate a discrete-state model (gillespie or time_change)"},
      {"simulate-continuous", "simulate a continuous-state model (euler or lamperti)"},
      {"simulate-grid", "simulate the (epsilon, delta) grid approximation; with experiment.grids run the "
                        "grid convergence experiment"},
      {"scaling", "rescaled discrete models against their continuous limit"},
      {"oracle-check", "Gillespie samples against the uniformization oracle"},
      {"equivalence", "law comparison of two discrete engines"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, text] : descriptions) {
    auto* sub = app.add_subcommand(name, text);
    add_run_options(sub, overrides);
    sub->add_option("--workers", workers, "worker threads (default: IMBP_WORKERS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    subs.push_back(sub);
  }
  std::string manifest_path;
  std::optional<std::string> rerun_out;
  auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
  rerun->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun->add_option("--workers", workers, "worker threads (default: IMBP_WORKERS or 1)")->check(CLI::PositiveNumber);
  rerun->add_option("--out", rerun_out, "output directory (default: <manifest dir>/rerun)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (rerun->parsed()) {
      const json m = read_json_file(manifest_path);
      if (!m.contains("command") || !m.contains("config") || !commands().count(m["command"].get<std::string>()))
        throw ConfigError("--manifest", "not an imbp manifest");
      const fs::path target = rerun_out ? fs::path(*rerun_out) : fs::path(manifest_path).parent_path() / "rerun";
      return execute(m["command"].get<std::string>(), m["config"], target, workers, out, err);
    }
    for (auto* sub : subs) {
      if (!sub->parsed()) continue;
      const json doc = apply_overrides(read_json_file(overrides.config), overrides);
      return execute(sub->get_name(), doc, out_dir, workers, out, err);
    }
  } catch (const ConfigError& e) {
    err << "imbp: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ValidationError& e) {
    err << "imbp: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "imbp: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace imbp::cli
