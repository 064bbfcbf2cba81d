#include <doctest.h>

#include <array>
#include <cmath>

#include "imbp/grid_approx.hpp"
#include "imbp/parallel.hpp"
#include "imbp/stats.hpp"
#include "models.hpp"

using namespace imbp;
using namespace imbp::testing;

namespace {

EulerConfig with_dt(double dt) {
  EulerConfig c;
  c.dt = dt;
  return c;
}

}  // namespace

TEST_CASE("floor_quantize") {
  CHECK(floor_quantize(1.26, 0.5) == 1.0);
  CHECK(floor_quantize(0.0, 0.3) == 0.0);
  CHECK(floor_quantize(0.49, 0.5) == 0.0);
  for (int k = 0; k <= 1000; ++k) {
    const double delta = 0.1;
    REQUIRE(floor_quantize(k * delta, delta) == k * delta);
  }
  for (int k = 0; k <= 1000; ++k) {
    const double delta = 0.02;
    REQUIRE(floor_quantize(k * delta, delta) == k * delta);
  }
}

TEST_CASE("invalid grids") {
  CHECK_FALSE(check_grid({0.0, 0.1}).empty());
  CHECK_FALSE(check_grid({0.1, -1.0}).empty());
  CHECK_THROWS_AS(validate_grid({0.1, std::nan("")}), ValidationError);
  CHECK(check_grid({0.1, 0.1}).empty());
}

TEST_CASE("without competition the grid leaves the continuous law unchanged") {
  const auto spec = one_dim(0.0, 0.0, 0.5);
  const std::size_t n = 20000;
  std::vector<double> a(n), b(n);
  const RandomStream ra(1), rb(2);
  for_each_index(n, default_workers(), [&](std::size_t k) {
    auto r1 = ra.child({stream_tag::path, k});
    auto r2 = rb.child({stream_tag::path, k});
    a[k] = simulate_grid_continuous(spec, {1.0}, 1.0, {0.3, 0.25}, with_dt(1e-2), r1).final_state()[0];
    b[k] = euler_simulate(spec, {1.0}, 1.0, with_dt(1e-2), r2).final_state()[0];
  });
  CHECK(ks_two_sample(a, b).p_value > 0.001);
}

TEST_CASE("one window freezes the competition at the initial quantized mass") {
  // dy = y dt - k y dt with k = floor(0.5 / 0.2) * 0.2 = 0.4
  RandomStream r(3);
  const auto path = simulate_grid_continuous(one_dim(1.0, -1.0, 0.0), {0.5}, 1.0, {2.0, 0.2}, with_dt(1e-4), r);
  CHECK(std::abs(path.final_state()[0] - 0.5 * std::exp(0.6)) < 1e-3);
}

TEST_CASE("fine grid approaches the logistic ODE") {
  RandomStream r(4);
  const auto path = simulate_grid_continuous(one_dim(1.0, -1.0, 0.0), {0.5}, 1.0, {0.01, 0.01}, with_dt(1e-4), r);
  CHECK(std::abs(path.final_state()[0] - logistic(1.0)) < 0.02);
  const auto coarse = simulate_grid_continuous(one_dim(1.0, -1.0, 0.0), {0.5}, 1.0, {0.5, 0.5}, with_dt(1e-4), r);
  CHECK(std::abs(coarse.final_state()[0] - logistic(1.0)) > std::abs(path.final_state()[0] - logistic(1.0)));
}

TEST_CASE("driver form of the grid process matches the SDE form for drift-only drivers") {
  RandomStream r(5);
  const std::vector<LevyDriverSpec> drivers{{0, {1.0}, 0.0, {}}};
  const auto a = simulate_grid_continuous(drivers, Matrix::Constant(1, 1, -1.0), {0.5}, 1.0, {0.1, 0.1}, 1e-4, r);
  const auto b = simulate_grid_continuous(one_dim(1.0, -1.0, 0.0), {0.5}, 1.0, {0.1, 0.1}, with_dt(1e-4), r);
  CHECK(a.final_state()[0] == doctest::Approx(b.final_state()[0]).epsilon(1e-3));
}

TEST_CASE("discrete grid process from zero stays at zero") {
  RandomStream r(6);
  const auto p = simulate_grid_discrete(critical_binary(-0.5), {0}, 3.0, {0.1, 1.0}, r);
  CHECK(p.breakpoints.size() == 1);
}

TEST_CASE("discrete grid process without competition has the Gillespie law") {
  const auto spec = critical_binary();
  const int n = 20000;
  std::vector<double> a, b;
  const RandomStream ra(7), rb(8);
  for (int k = 0; k < n; ++k) {
    auto r1 = ra.child({stream_tag::path, std::uint64_t(k)});
    auto r2 = rb.child({stream_tag::path, std::uint64_t(k)});
    a.push_back(static_cast<double>(simulate_grid_discrete(spec, {5}, 1.0, {0.2, 2.0}, r1).final_state()[0]));
    b.push_back(static_cast<double>(simulate_gillespie(spec, {5}, 1.0, r2).path.final_state()[0]));
  }
  CHECK(ks_two_sample(a, b).p_value > 0.001);
}

TEST_CASE("without competition the frozen and live time changes coincide path by path") {
  const auto spec = critical_binary();
  const auto walks = walk_specs_from_model(spec);
  const RandomStream master(9);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const auto s = master.child({stream_tag::path, k});
    auto d1 = make_time_change_drivers(walks, spec.interaction, s);
    auto d2 = make_time_change_drivers(walks, spec.interaction, s);
    const auto live = simulate_time_change(spec.interaction, {7}, 2.0, d1);
    const auto grid = simulate_time_change(spec.interaction, {7}, 2.0, d2, {}, GridConfig{0.3, 2.0});
    REQUIRE(live.breakpoints.size() == grid.breakpoints.size());
    for (std::size_t e = 0; e < live.breakpoints.size(); ++e) {
      REQUIRE(live.breakpoints[e].t == grid.breakpoints[e].t);
      REQUIRE(live.breakpoints[e].state == grid.breakpoints[e].state);
    }
  }
}

TEST_CASE("a delta above every population switches interactions off") {
  // Competition that would matter, quantized away: the mean follows z exp(tA).
  const auto spec = one_type(1.0, {{{0}, 0.4}, {{2}, 0.6}}, -0.5);
  const int n = 40000;
  std::vector<double> x;
  const RandomStream master(10);
  for (int k = 0; k < n; ++k) {
    auto r = master.child({stream_tag::path, std::uint64_t(k)});
    x.push_back(static_cast<double>(simulate_grid_discrete(spec, {3}, 1.0, {0.1, 1e6}, r).final_state()[0]));
  }
  const auto est = mean_estimate(x);
  const double exact = 3.0 * std::exp(0.2);
  CHECK(std::abs(est.mean - exact) < 3.5 * est.standard_error);
}

TEST_CASE("grid experiment without competition stays at the noise floor") {
  const auto spec = one_dim(0.0, 0.0, 0.5);
  const std::array<GridConfig, 2> grids{GridConfig{0.5, 0.5}, GridConfig{0.1, 0.1}};
  GridExperimentConfig cfg;
  cfg.n_paths = 4000;
  cfg.grid_euler = with_dt(1e-2);
  cfg.reference_euler = with_dt(1e-2);
  cfg.bootstrap_reps = 100;
  cfg.workers = default_workers();
  const auto rep = grid_convergence_experiment(spec, {1.0}, grids, cfg, RandomStream(11));
  REQUIRE(rep.rows.size() == 2);
  CHECK(std::isnan(rep.rows[0].sup_difference_to_previous));
  for (const auto& row : rep.rows) {
    CHECK(row.w1[0][0] < 4 * rep.noise_floor + 0.01);
    CHECK(row.sup_difference_to_live == doctest::Approx(0.0).epsilon(1e-12));
  }
}
