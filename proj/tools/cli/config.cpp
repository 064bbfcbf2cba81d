#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string_view>

namespace imbp::cli {

using nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

namespace {

std::string at_key(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string at_index(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  require_object(j, path);
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(at_key(path, key), "unknown key");
  }
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t as_count(const json& j, const std::string& path) {
  const auto v = as_int(j, path);
  if (v < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ConfigError(at_key(path, key), "missing required key");
  return *it;
}

RealVec real_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  RealVec out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_double(j[k], at_index(path, k)));
  return out;
}

IntVec int_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of integers");
  IntVec out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_int(j[k], at_index(path, k)));
  return out;
}

Matrix matrix(const json& j, std::size_t d, const std::string& path) {
  if (!j.is_array() || j.size() != d) throw ConfigError(path, "expected " + std::to_string(d) + " rows");
  Matrix m(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = real_vector(j[r], at_index(path, r));
    if (row.size() != d) throw ConfigError(at_index(path, r), "expected " + std::to_string(d) + " entries");
    for (std::size_t c = 0; c < d; ++c) m(r, c) = row[c];
  }
  return m;
}

void raise_violations(const std::vector<Violation>& violations, const std::string& prefix) {
  if (violations.empty()) return;
  std::string message;
  for (const auto& v : violations) {
    if (!message.empty()) message += "; ";
    message += at_key(prefix, v.field) + ": " + std::string(to_string(v.code)) + " (" + v.message + ")";
  }
  throw ConfigError(at_key(prefix, violations.front().field), message);
}

GridConfig grid(const json& j, const std::string& path) {
  allow_keys(j, path, {"epsilon", "delta"});
  GridConfig g{as_double(require(j, "epsilon", path), at_key(path, "epsilon")),
               as_double(require(j, "delta", path), at_key(path, "delta"))};
  raise_violations(check_grid(g), path);
  return g;
}

JumpComponent jump_component(const json& j, std::size_t d, const std::string& path) {
  allow_keys(j, path, {"type", "mass", "compensated", "r", "direction", "mean", "scale", "alpha"});
  JumpComponent c;
  c.mass = as_double(require(j, "mass", path), at_key(path, "mass"));
  if (j.contains("compensated")) c.compensated = as_bool(j["compensated"], at_key(path, "compensated"));
  const auto type = as_string(require(j, "type", path), at_key(path, "type"));
  auto direction = [&] {
    auto v = real_vector(require(j, "direction", path), at_key(path, "direction"));
    if (v.size() != d) throw ConfigError(at_key(path, "direction"), "expected " + std::to_string(d) + " entries");
    return v;
  };
  if (type == "atom") {
    auto r = real_vector(require(j, "r", path), at_key(path, "r"));
    if (r.size() != d) throw ConfigError(at_key(path, "r"), "expected " + std::to_string(d) + " entries");
    c.sampler = AtomJump{std::move(r)};
  } else if (type == "exponential") {
    c.sampler = ExponentialJump{direction(), as_double(require(j, "mean", path), at_key(path, "mean"))};
  } else if (type == "pareto") {
    c.sampler = ParetoJump{direction(), as_double(require(j, "scale", path), at_key(path, "scale")),
                           as_double(require(j, "alpha", path), at_key(path, "alpha"))};
  } else {
    throw ConfigError(at_key(path, "type"), "expected atom, exponential or pareto");
  }
  return c;
}

void parse_discrete(const json& m, ModelConfig& out) {
  const std::string path = "model";
  allow_keys(m, path, {"kind", "lambda", "offspring", "interaction", "z"});
  auto& spec = out.discrete;
  spec.lambda = real_vector(require(m, "lambda", path), "model.lambda");
  spec.d = spec.lambda.size();
  if (spec.d == 0) throw ConfigError("model.lambda", "need at least one type");
  const auto& offspring = require(m, "offspring", path);
  if (!offspring.is_array() || offspring.size() != spec.d)
    throw ConfigError("model.offspring", "expected one offspring law per type");
  for (std::size_t i = 0; i < spec.d; ++i) {
    const auto law_path = at_index("model.offspring", i);
    const auto& law = offspring[i];
    if (!law.is_array()) throw ConfigError(law_path, "expected an array of outcomes");
    OffspringPmf pmf;
    for (std::size_t k = 0; k < law.size(); ++k) {
      const auto p = at_index(law_path, k);
      allow_keys(law[k], p, {"v", "p"});
      pmf.push_back({int_vector(require(law[k], "v", p), at_key(p, "v")),
                     as_double(require(law[k], "p", p), at_key(p, "p"))});
    }
    spec.offspring.push_back(std::move(pmf));
  }
  spec.interaction = m.contains("interaction") ? matrix(m["interaction"], spec.d, "model.interaction")
                                               : Matrix::Zero(spec.d, spec.d);
  raise_violations(check_discrete(spec), path);
  out.z = int_vector(require(m, "z", path), "model.z");
  if (out.z.size() != spec.d) throw ConfigError("model.z", "expected " + std::to_string(spec.d) + " entries");
  for (std::size_t j = 0; j < out.z.size(); ++j)
    if (out.z[j] < 0) throw ConfigError(at_index("model.z", j), "counts must be >= 0");
}

void parse_continuous(const json& m, ModelConfig& out) {
  const std::string path = "model";
  allow_keys(m, path, {"kind", "B", "C", "sigma", "jumps", "y"});
  auto& spec = out.continuous;
  spec.sigma = real_vector(require(m, "sigma", path), "model.sigma");
  spec.d = spec.sigma.size();
  if (spec.d == 0) throw ConfigError("model.sigma", "need at least one type");
  spec.B = m.contains("B") ? matrix(m["B"], spec.d, "model.B") : Matrix::Zero(spec.d, spec.d);
  spec.C = m.contains("C") ? matrix(m["C"], spec.d, "model.C") : Matrix::Zero(spec.d, spec.d);
  if (m.contains("jumps")) {
    const auto& jumps = m["jumps"];
    if (!jumps.is_array() || jumps.size() != spec.d)
      throw ConfigError("model.jumps", "expected one jump measure per type");
    for (std::size_t i = 0; i < spec.d; ++i) {
      const auto mp = at_index("model.jumps", i);
      allow_keys(jumps[i], mp, {"components", "small_jumps"});
      JumpMeasureSpec measure;
      if (jumps[i].contains("components")) {
        const auto& comps = jumps[i]["components"];
        if (!comps.is_array()) throw ConfigError(at_key(mp, "components"), "expected an array");
        for (std::size_t k = 0; k < comps.size(); ++k)
          measure.components.push_back(jump_component(comps[k], spec.d, at_index(at_key(mp, "components"), k)));
      }
      if (jumps[i].contains("small_jumps")) {
        const auto sp = at_key(mp, "small_jumps");
        const auto& s = jumps[i]["small_jumps"];
        allow_keys(s, sp, {"r_min", "drift"});
        measure.small_jump_truncation = SmallJumpTruncation{as_double(require(s, "r_min", sp), at_key(sp, "r_min")),
                                                            real_vector(require(s, "drift", sp), at_key(sp, "drift"))};
      }
      spec.jump_measures.push_back(std::move(measure));
    }
  }
  raise_violations(check_continuous(spec), path);
  out.y = real_vector(require(m, "y", path), "model.y");
  if (out.y.size() != spec.d) throw ConfigError("model.y", "expected " + std::to_string(spec.d) + " entries");
  for (std::size_t j = 0; j < out.y.size(); ++j)
    if (out.y[j] < 0.0) throw ConfigError(at_index("model.y", j), "initial state must be >= 0");
}

void parse_family(const json& m, ModelConfig& out) {
  allow_keys(m, "model", {"kind", "y", "c"});
  out.family_y = as_double(require(m, "y", "model"), "model.y");
  if (out.family_y < 0.0) throw ConfigError("model.y", "initial mass must be >= 0");
  if (m.contains("c")) out.family_c = as_double(m["c"], "model.c");
}

void parse_engine(const json& e, EngineConfig& out) {
  const std::string path = "engine";
  allow_keys(e, path,
             {"method", "dt", "reference_dt", "rate_cap", "truncation_level", "step_guard", "record_stride",
              "keep_log"});
  if (e.contains("method")) {
    out.method = as_string(e["method"], "engine.method");
    static const char* known[] = {"gillespie", "time_change", "euler", "lamperti"};
    if (std::find(std::begin(known), std::end(known), out.method) == std::end(known))
      throw ConfigError("engine.method", "expected gillespie, time_change, euler or lamperti");
  }
  auto positive = [&](const char* key, double& target) {
    if (!e.contains(key)) return;
    target = as_double(e[key], at_key(path, key));
    if (!(target > 0.0)) throw ConfigError(at_key(path, key), "must be > 0");
  };
  positive("dt", out.dt);
  positive("reference_dt", out.reference_dt);
  positive("rate_cap", out.rate_cap);
  if (e.contains("truncation_level")) {
    double n = 0.0;
    positive("truncation_level", n);
    out.truncation_level = n;
  }
  if (e.contains("step_guard")) {
    out.step_guard = as_double(e["step_guard"], "engine.step_guard");
    if (out.step_guard < 0.0) throw ConfigError("engine.step_guard", "must be >= 0");
  }
  if (e.contains("record_stride")) {
    out.record_stride = as_count(e["record_stride"], "engine.record_stride");
    if (out.record_stride == 0) throw ConfigError("engine.record_stride", "must be >= 1");
  }
  if (e.contains("keep_log")) out.keep_log = as_bool(e["keep_log"], "engine.keep_log");
}

void parse_experiment(const json& x, ExperimentConfig& out) {
  const std::string path = "experiment";
  allow_keys(x, path,
             {"seed", "paths", "horizon", "checkpoints", "epsilon", "delta", "grids", "n_list", "reference_paths",
              "bootstrap", "confidence", "cap", "leak_threshold", "tv_threshold", "alpha", "engine_a", "engine_b",
              "shared_seed", "difference_paths", "format"});
  if (x.contains("seed")) out.seed = static_cast<std::uint64_t>(as_count(x["seed"], "experiment.seed"));
  if (x.contains("paths")) out.paths = as_count(x["paths"], "experiment.paths");
  if (x.contains("horizon")) {
    out.horizon = as_double(x["horizon"], "experiment.horizon");
    if (out.horizon < 0.0) throw ConfigError("experiment.horizon", "must be >= 0");
  }
  if (x.contains("checkpoints")) {
    out.checkpoints = real_vector(x["checkpoints"], "experiment.checkpoints");
    for (std::size_t k = 0; k < out.checkpoints.size(); ++k) {
      if (out.checkpoints[k] < 0.0 || (k > 0 && out.checkpoints[k] <= out.checkpoints[k - 1]))
        throw ConfigError(at_index("experiment.checkpoints", k), "checkpoints must be >= 0 and increasing");
    }
  }
  if (x.contains("epsilon") != x.contains("delta"))
    throw ConfigError(x.contains("epsilon") ? "experiment.delta" : "experiment.epsilon",
                      "epsilon and delta must be given together");
  if (x.contains("epsilon")) {
    json g{{"epsilon", x["epsilon"]}, {"delta", x["delta"]}};
    out.grid = grid(g, path);
  }
  if (x.contains("grids")) {
    const auto& gs = x["grids"];
    if (!gs.is_array()) throw ConfigError("experiment.grids", "expected an array");
    for (std::size_t k = 0; k < gs.size(); ++k) out.grids.push_back(grid(gs[k], at_index("experiment.grids", k)));
  }
  if (x.contains("n_list")) {
    const auto& ns = x["n_list"];
    if (!ns.is_array()) throw ConfigError("experiment.n_list", "expected an array");
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const auto n = as_count(ns[k], at_index("experiment.n_list", k));
      if (n == 0) throw ConfigError(at_index("experiment.n_list", k), "must be >= 1");
      out.n_list.push_back(n);
    }
  }
  if (x.contains("reference_paths")) out.reference_paths = as_count(x["reference_paths"], "experiment.reference_paths");
  if (x.contains("bootstrap")) out.bootstrap = as_count(x["bootstrap"], "experiment.bootstrap");
  auto unit = [&](const char* key, double& target) {
    if (!x.contains(key)) return;
    target = as_double(x[key], at_key(path, key));
    if (!(target > 0.0 && target < 1.0)) throw ConfigError(at_key(path, key), "must lie in (0, 1)");
  };
  unit("confidence", out.confidence);
  unit("leak_threshold", out.leak_threshold);
  unit("tv_threshold", out.tv_threshold);
  unit("alpha", out.alpha);
  if (x.contains("cap")) {
    out.cap = as_int(x["cap"], "experiment.cap");
    if (out.cap < 1) throw ConfigError("experiment.cap", "must be >= 1");
  }
  for (auto [key, target] : {std::pair{"engine_a", &out.engine_a}, std::pair{"engine_b", &out.engine_b}}) {
    if (!x.contains(key)) continue;
    *target = as_string(x[key], at_key(path, key));
    if (*target != "gillespie" && *target != "time_change")
      throw ConfigError(at_key(path, key), "expected gillespie or time_change");
  }
  if (x.contains("shared_seed")) out.shared_seed = as_bool(x["shared_seed"], "experiment.shared_seed");
  if (x.contains("difference_paths"))
    out.difference_paths = as_count(x["difference_paths"], "experiment.difference_paths");
  if (x.contains("format")) {
    out.format = as_string(x["format"], "experiment.format");
    if (out.format != "csv" && out.format != "jsonl") throw ConfigError("experiment.format", "expected csv or jsonl");
  }
}

}  // namespace

Config parse_config(const json& doc) {
  allow_keys(doc, "", {"model", "engine", "experiment"});
  Config cfg;
  const auto& m = require(doc, "model", "");
  require_object(m, "model");
  const auto kind = as_string(require(m, "kind", "model"), "model.kind");
  if (kind == "discrete") {
    cfg.model.kind = ModelKind::discrete;
    parse_discrete(m, cfg.model);
  } else if (kind == "continuous") {
    cfg.model.kind = ModelKind::continuous;
    parse_continuous(m, cfg.model);
  } else if (kind == "feller_family") {
    cfg.model.kind = ModelKind::feller_family;
    parse_family(m, cfg.model);
  } else {
    throw ConfigError("model.kind", "expected discrete, continuous or feller_family");
  }
  if (doc.contains("engine")) parse_engine(doc["engine"], cfg.engine);
  if (doc.contains("experiment")) parse_experiment(doc["experiment"], cfg.experiment);
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace imbp::cli
