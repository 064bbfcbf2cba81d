#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "imbp/grid_config.hpp"
#include "imbp/model.hpp"

namespace imbp::cli {

/// Malformed or inconsistent configuration; `field` is a dotted path such as
/// "model.offspring[1][0].p".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ModelKind { discrete, continuous, feller_family };

struct ModelConfig {
  ModelKind kind = ModelKind::discrete;
  DiscreteModelSpec discrete;
  IntVec z;
  ContinuousModelSpec continuous;
  RealVec y;
  double family_y = 1.0;  // feller_family
  double family_c = 0.0;
};

struct EngineConfig {
  std::string method;  // gillespie | time_change | euler | lamperti; empty picks by model
  double dt = 1e-3;
  double reference_dt = 1e-4;
  double rate_cap = 1e9;
  std::optional<double> truncation_level;
  double step_guard = 0.0;
  std::size_t record_stride = 1;
  bool keep_log = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t paths = 100;
  double horizon = 1.0;
  std::vector<double> checkpoints;  // empty: {horizon}
  std::optional<GridConfig> grid;
  std::vector<GridConfig> grids;
  std::vector<std::size_t> n_list;
  std::size_t reference_paths = 0;
  std::size_t bootstrap = 200;
  double confidence = 0.95;
  std::int64_t cap = 20;
  double leak_threshold = 1e-3;
  double tv_threshold = 0.02;
  double alpha = 0.001;
  std::string engine_a = "gillespie";
  std::string engine_b = "time_change";
  bool shared_seed = false;
  std::size_t difference_paths = 0;  // 0 disables the coupled grid difference in `scaling`
  std::string format = "csv";
};

struct Config {
  ModelConfig model;
  EngineConfig engine;
  ExperimentConfig experiment;
};

/// Parses and validates a config document. Unknown keys are rejected.
Config parse_config(const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace imbp::cli
