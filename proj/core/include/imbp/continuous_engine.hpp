#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "imbp/grid_config.hpp"
#include "imbp/levy_paths.hpp"
#include "imbp/model.hpp"
#include "imbp/random.hpp"
#include "imbp/types.hpp"

namespace imbp {

/// Trajectory on the integration grid. Jumps inside a step are not timed; the
/// step that contains one is flagged instead.
struct ContinuousPath {
  RealVec t;
  std::vector<RealVec> states;
  std::vector<bool> jumped;
  std::size_t steps = 0;
  std::size_t clamped_steps = 0;

  /// State at the last recorded time <= s.
  const RealVec& state_at(double s) const;
  const RealVec& final_state() const { return states.back(); }
  double clamped_fraction() const {
    return steps == 0 ? 0.0 : static_cast<double>(clamped_steps) / static_cast<double>(steps);
  }
};

/// Pre-sampled Brownian motion on a fine grid, so that several integrations at
/// coarser multiples of its step see the same noise.
class BrownianPath {
 public:
  BrownianPath(std::size_t d, double dt, double horizon, RandomStream rng);
  double dt() const noexcept { return dt_; }
  std::size_t dimension() const noexcept { return cumulative_.size(); }
  /// W^j(t1) - W^j(t0); both times are rounded to the nearest grid point.
  double increment(std::size_t j, double t0, double t1) const;

 private:
  double dt_;
  std::vector<RealVec> cumulative_;
};

struct EulerConfig {
  double dt = 1e-3;
  /// Replaces Y^i by Y^i ^ n in every coefficient and caps jump sizes at n.
  std::optional<double> truncation_level;
  /// Reject a step that moves a coordinate by more than step_guard * max(|Y^j|, 1);
  /// 0 disables the check.
  double step_guard = 0.0;
  /// Keep every k-th grid point (the last point is always kept).
  std::size_t record_stride = 1;
  const BrownianPath* common_noise = nullptr;
};

/// Euler-Maruyama path of the jump-diffusion. With `frozen` set, the
/// competition factor Y^j in the drift is replaced by floor_quantize(Y^j(m eps), delta)
/// on window m, and steps are aligned to the window boundaries.
ContinuousPath euler_simulate(const ContinuousModelSpec& spec, const RealVec& y, double horizon,
                              const EulerConfig& cfg, RandomStream& rng,
                              const std::optional<GridConfig>& frozen = {});

/// States at the given increasing checkpoints of a single Euler path; the
/// integration grid stops exactly at each checkpoint.
std::vector<RealVec> euler_at(const ContinuousModelSpec& spec, const RealVec& y, std::span<const double> checkpoints,
                              const EulerConfig& cfg, RandomStream& rng,
                              const std::optional<GridConfig>& frozen = {});

/// Checkpoint marginals of n_paths independent Euler paths: [path][checkpoint].
/// Path k uses rng.child({stream_tag::path, k}).
std::vector<std::vector<RealVec>> euler_marginals(const ContinuousModelSpec& spec, const RealVec& y,
                                                  std::span<const double> checkpoints, const EulerConfig& cfg,
                                                  std::size_t n_paths, const RandomStream& rng, std::size_t workers,
                                                  const std::optional<GridConfig>& frozen = {});

/// Explicit time stepping of the time-change equation: per step each driver
/// clock advances by Z^i dt, the increments are summed and the competition
/// term c_ij Z^i Z^j dt is added. Driver i draws from rng.child({stream_tag::walk, i}).
ContinuousPath lamperti_simulate(std::span<const LevyDriverSpec> drivers, const Matrix& C, const RealVec& z,
                                 double horizon, double dt, RandomStream& rng,
                                 const std::optional<GridConfig>& frozen = {});

// --- generator ---------------------------------------------------------------

struct TestFunction {
  std::function<double(std::span<const double>)> value;
  std::function<RealVec(std::span<const double>)> gradient;
  std::function<RealVec(std::span<const double>)> hessian_diagonal;

  static TestFunction constant(double c, std::size_t d);
  static TestFunction coordinate(std::size_t j, std::size_t d);
  static TestFunction square(std::size_t j, std::size_t d);
  static TestFunction product(std::size_t i, std::size_t j, std::size_t d);
};

/// (A f)(x) for the continuous model. Atom jumps are summed exactly; exponential
/// and Pareto components are integrated by quadrature along their direction.
/// Uncompensated components contribute f(x + r) - f(x) without the gradient term.
double generator_apply(const ContinuousModelSpec& spec, const TestFunction& f, std::span<const double> x);

struct ResidualEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
};

/// Mean over paths of f(Y_T) - f(Y_0) - sum_k (A f)(Y_{t_k}) (t_{k+1} - t_k), with
/// the Monte Carlo standard error.
ResidualEstimate martingale_residual(const ContinuousModelSpec& spec, const TestFunction& f,
                                     std::span<const ContinuousPath> paths);

/// Same estimator for several test functions, accumulated along each path without storing it.
std::vector<ResidualEstimate> martingale_residual_mc(const ContinuousModelSpec& spec,
                                                     std::span<const TestFunction> fs, const RealVec& y,
                                                     double horizon, const EulerConfig& cfg, std::size_t n_paths,
                                                     const RandomStream& rng, std::size_t workers);

}  // namespace imbp
