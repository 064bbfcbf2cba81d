#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "imbp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = imbp::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "imbp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const auto p = dir / "config.json";
  std::ofstream(p) << doc.dump();
  return p;
}

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json pure_death(std::size_t paths) {
  return {{"model",
           {{"kind", "discrete"},
            {"lambda", {1.0}},
            {"offspring", {{{{"v", {0}}, {"p", 1.0}}}}},
            {"interaction", {{0.0}}},
            {"z", {1}}}},
          {"experiment", {{"paths", paths}, {"horizon", 1.0}}}};
}

}  // namespace

TEST_CASE("pure death summary has mean extinction time near 1") {
  const auto dir = scratch("summary");
  const auto cfg = write_config(dir, pure_death(10000));
  const auto r = run({"simulate-discrete", "--config", cfg.string(), "--horizon", "1e6", "--out",
                      (dir / "out").string(), "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto s = read(dir / "out" / "summary.json");
  CHECK(s["extinct_paths"] == 10000);
  // Exp(1) mean over 10^4 paths: standard error 0.01
  CHECK(std::abs(s["mean_extinction_time"].get<double>() - 1.0) < 0.03);
}

TEST_CASE("zero paths give a header-only trajectory file and a valid manifest") {
  const auto dir = scratch("empty");
  const auto cfg = write_config(dir, pure_death(5));
  const auto r = run({"simulate-discrete", "--config", cfg.string(), "--paths", "0", "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "out" / "trajectories.csv") == "path,t,z_1\n");
  const auto m = read(dir / "out" / "manifest.json");
  CHECK(m["exit_code"] == 0);
  CHECK(m["parameters"]["paths"] == 0);
  CHECK(m["files"].size() == 2);
}

TEST_CASE("manifest inventories every emitted file with its digest") {
  const auto dir = scratch("inventory");
  auto doc = pure_death(20);
  doc["engine"] = {{"keep_log", true}};
  const auto cfg = write_config(dir, doc);
  const auto out = dir / "out";
  REQUIRE(run({"simulate-discrete", "--config", cfg.string(), "--out", out.string(), "--format", "jsonl"}).code == 0);
  const auto m = read(out / "manifest.json");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out)) files += e.path().filename() != "manifest.json";
  CHECK(m["files"].size() == files);
  for (const auto& f : m["files"]) CHECK(f["sha256"] == imbp::cli::sha256_file(out / f["name"].get<std::string>()));
  CHECK(m["config_digest"] == imbp::cli::sha256_hex(m["config"].dump()));
  CHECK(m["config"]["experiment"]["format"] == "jsonl");
  CHECK(fs::exists(out / "events.jsonl"));
}

TEST_CASE("malformed config names the offending field") {
  const auto dir = scratch("malformed");
  auto doc = pure_death(5);
  doc["model"]["offspring"][0][0]["p"] = 0.5;
  auto r = run({"simulate-discrete", "--config", write_config(dir, doc).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("model.offspring[0]") != std::string::npos);

  doc = pure_death(5);
  doc["experiment"]["sed"] = 4;
  r = run({"simulate-discrete", "--config", write_config(dir, doc).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("experiment.sed") != std::string::npos);

  r = run({"simulate-discrete", "--config", (dir / "missing.json").string()});
  CHECK(r.code == 2);
  r = run({"simulate-discrete", "--bogus-flag"});
  CHECK(r.code == 2);
}

TEST_CASE("rate overflow is flagged with a distinct exit code") {
  const auto dir = scratch("overflow");
  json doc{{"model",
            {{"kind", "discrete"},
             {"lambda", {1.0}},
             {"offspring", {{{{"v", {2}}, {"p", 1.0}}}}},
             {"interaction", {{1.0}}},
             {"z", {5}}}},
           {"engine", {{"rate_cap", 1e4}}},
           {"experiment", {{"paths", 3}, {"horizon", 100.0}}}};
  const auto r = run({"simulate-discrete", "--config", write_config(dir, doc).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 3);
  const auto s = read(dir / "o" / "summary.json");
  CHECK(s["rate_overflow_paths"].size() == 3);
}

TEST_CASE("oracle check on pure death passes") {
  const auto dir = scratch("oracle");
  auto doc = pure_death(100000);
  doc["model"]["z"] = {3};
  const auto r = run({"oracle-check", "--config", write_config(dir, doc).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  const auto rep = read(dir / "o" / "oracle_report.json");
  CHECK(rep["tv"].get<double>() <= 0.02);
  CHECK(rep["pass"] == true);
}

TEST_CASE("equivalence of one engine with itself") {
  const auto dir = scratch("equivalence");
  auto doc = pure_death(2000);
  doc["experiment"]["engine_b"] = "gillespie";
  doc["experiment"]["shared_seed"] = true;
  const auto r = run({"equivalence", "--config", write_config(dir, doc).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  const auto rep = read(dir / "o" / "equivalence_report.json");
  CHECK(rep["ks"][0]["statistic"] == 0.0);
  CHECK(rep["pass"] == true);
}

TEST_CASE("continuous simulation and rerun are byte-identical across worker counts") {
  const auto dir = scratch("continuous");
  json doc{{"model",
            {{"kind", "continuous"},
             {"B", {{1.0}}},
             {"C", {{-1.0}}},
             {"sigma", {0.1}},
             {"jumps", {{{"components", {{{"type", "exponential"}, {"mass", 0.5}, {"direction", {1.0}}, {"mean", 0.1}}}}}}},
             {"y", {0.5}}}},
           {"engine", {{"record_stride", 10}}},
           {"experiment", {{"paths", 50}}}};
  const auto cfg = write_config(dir, doc);
  const auto a = dir / "a";
  REQUIRE(run({"simulate-continuous", "--config", cfg.string(), "--dt", "0.01", "--out", a.string(), "--workers", "1"})
              .code == 0);
  REQUIRE(run({"rerun", "--manifest", (a / "manifest.json").string(), "--workers", "3"}).code == 0);
  for (const auto* f : {"trajectories.csv", "summary.json"}) CHECK(slurp(a / f) == slurp(a / "rerun" / f));
  CHECK(read(a / "manifest.json")["config"]["engine"]["dt"] == 0.01);
}

TEST_CASE("grid simulation needs a grid") {
  const auto dir = scratch("grid");
  json doc{{"model", {{"kind", "continuous"}, {"B", {{1.0}}}, {"C", {{-1.0}}}, {"sigma", {0.0}}, {"y", {0.5}}}},
           {"experiment", {{"paths", 2}}}};
  const auto cfg = write_config(dir, doc);
  CHECK(run({"simulate-grid", "--config", cfg.string(), "--out", (dir / "o").string()}).code == 2);
  CHECK(run({"simulate-grid", "--config", cfg.string(), "--epsilon", "0.1", "--out", (dir / "o").string()}).code == 2);
  const auto r = run({"simulate-grid", "--config", cfg.string(), "--epsilon", "0.01", "--delta", "0.01", "--dt",
                      "1e-4", "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto s = read(dir / "o" / "summary.json");
  CHECK(std::abs(s["mean_final_state"][0].get<double>() - 1.0 / (1.0 + std::exp(-1.0))) < 0.02);
}

TEST_CASE("scaling on the Feller family gives a monotone W1 table") {
  const auto dir = scratch("scaling");
  json doc{{"model", {{"kind", "feller_family"}, {"y", 1.0}, {"c", 0.0}}},
           {"experiment", {{"paths", 20000}, {"bootstrap", 100}}}};
  const auto r = run({"scaling", "--config", write_config(dir, doc).string(), "--n-list", "10", "100", "1000",
                      "--out", (dir / "o").string()});
  const auto rep = read(dir / "o" / "scaling_report.json");
  CHECK(r.code == 0);
  CHECK(rep["w1_nonincreasing"] == true);
  CHECK(rep["rows"].size() == 3);
  CHECK(rep["feller_extinction_probability"][0].get<double>() == doctest::Approx(std::exp(-2.0)));
}
