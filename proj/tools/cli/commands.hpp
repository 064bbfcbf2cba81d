#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace imbp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kNumericalGuard = 3,
  kTestFailed = 4,
};

class RunContext {
 public:
  RunContext(Config cfg, std::filesystem::path out, std::size_t workers)
      : cfg_(std::move(cfg)), out_(std::move(out)), workers_(workers) {}

  const Config& cfg() const noexcept { return cfg_; }
  std::size_t workers() const noexcept { return workers_; }
  const std::vector<std::string>& written() const noexcept { return written_; }

  /// Writes out/name through `fill` and records it for the manifest.
  void write(const std::string& name, const std::function<void(std::ostream&)>& fill);
  void write_json(const std::string& name, const nlohmann::json& doc);

 private:
  Config cfg_;
  std::filesystem::path out_;
  std::size_t workers_;
  std::vector<std::string> written_;
};

int cmd_simulate_discrete(RunContext& ctx);
int cmd_simulate_continuous(RunContext& ctx);
int cmd_simulate_grid(RunContext& ctx);
int cmd_scaling(RunContext& ctx);
int cmd_oracle_check(RunContext& ctx);
int cmd_equivalence(RunContext& ctx);

}  // namespace imbp::cli
