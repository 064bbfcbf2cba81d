#include <doctest.h>

#include <charconv>
#include <sstream>

#include <json.hpp>

#include "imbp/io.hpp"

using namespace imbp;

namespace {

Path two_step() {
  Path p;
  p.breakpoints = {{0.0, {1, 2}}, {0.25, {2, 2}}, {1.5, {2, 1}}};
  p.horizon = 3.0;
  return p;
}

}  // namespace

TEST_CASE("trajectory CSV schema") {
  std::ostringstream os;
  write_path_csv(os, two_step(), 2);
  CHECK(os.str() == "t,z_1,z_2\n0,1,2\n0.25,2,2\n1.5,2,1\n");
}

TEST_CASE("ensemble CSV prefixes the path index") {
  std::ostringstream os;
  const std::vector<Path> paths{two_step(), two_step()};
  write_paths_csv(os, paths, 2);
  const auto s = os.str();
  CHECK(s.rfind("path,t,z_1,z_2\n0,0,1,2\n", 0) == 0);
  CHECK(s.find("\r") == std::string::npos);
  CHECK(s.find("\n1,1.5,2,1\n") != std::string::npos);
}

TEST_CASE("doubles round trip") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) {
    const auto s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == x);
  }
}

TEST_CASE("event log JSONL") {
  EventLog log;
  Event e;
  e.t = 0.5;
  e.kind = EventKind::interaction;
  e.i = 0;
  e.j = 1;
  e.sign = -1;
  e.pre_state = {3, 4};
  log.push_back(e);
  std::ostringstream os;
  write_event_log_jsonl(os, log, 7);
  const auto line = nlohmann::json::parse(os.str());
  CHECK(line["path"] == 7);
  CHECK(line["i"] == 1);
  CHECK(line["j"] == 2);
  CHECK(line["t"] == 0.5);
}

TEST_CASE("path JSONL") {
  std::ostringstream os;
  write_path_jsonl(os, two_step(), 3);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["path"] == 3);
  CHECK(j["t"].size() == 3);
  CHECK(j["z"][2] == nlohmann::json::array({2, 1}));
}

TEST_CASE("continuous CSV") {
  ContinuousPath p;
  p.t = {0.0, 0.5};
  p.states = {{1.0}, {0.75}};
  p.jumped = {false, true};
  std::ostringstream os;
  write_continuous_csv(os, p, 1);
  CHECK(os.str() == "t,y_1,jump\n0,1,0\n0.5,0.75,1\n");
}

TEST_CASE("distribution CSV lists the support") {
  LatticeDistribution d;
  d.d = 1;
  d.cap = 2;
  d.probability = {0.5, 0.0, 0.5};
  std::ostringstream os;
  write_distribution_csv(os, d);
  CHECK(os.str() == "z_1,probability\n0,0.5\n2,0.5\n");
}
