#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/grid_config.hpp"
#include "imbp/stats.hpp"

namespace imbp {

/// Frozen-competition process on the (epsilon, delta) grid, integrated by Euler.
/// Windows start at absolute times m * epsilon and are glued continuously.
ContinuousPath simulate_grid_continuous(const ContinuousModelSpec& spec, const RealVec& z, double horizon,
                                        const GridConfig& grid, const EulerConfig& cfg, RandomStream& rng);

/// Same construction driven by Levy drivers through the time-change equation.
ContinuousPath simulate_grid_continuous(std::span<const LevyDriverSpec> drivers, const Matrix& C, const RealVec& z,
                                        double horizon, const GridConfig& grid, double dt, RandomStream& rng);

/// Exact event simulation of the discrete grid process: during window m the
/// i -> j interaction fires at |c_ij| * floor_quantize(Z^j(m eps), delta) * Z^i.
Path simulate_grid_discrete(const DiscreteModelSpec& spec, const IntVec& z, double horizon, const GridConfig& grid,
                            RandomStream& rng, const EngineOptions& opts = {});

struct GridExperimentConfig {
  std::vector<double> checkpoints{1.0};
  std::size_t n_paths = 10000;
  std::size_t reference_paths = 0;  // 0: same as n_paths
  EulerConfig grid_euler{};
  EulerConfig reference_euler = [] {
    EulerConfig c;
    c.dt = 1e-4;
    return c;
  }();
  std::size_t bootstrap_reps = 200;
  double confidence = 0.95;
  std::size_t workers = 1;
};

struct GridRow {
  GridConfig grid;
  /// [checkpoint][coordinate]
  std::vector<RealVec> w1;
  std::vector<std::vector<Interval>> w1_ci;
  /// Sup over the path of |Z_this - Z_previous grid| for one common-noise path
  /// (NaN for the first grid), and against the ungridded path with the same noise.
  double sup_difference_to_previous = 0.0;
  double sup_difference_to_live = 0.0;
};

struct GridExperimentReport {
  std::vector<GridRow> rows;
  /// Whether each successive W1 lies strictly below the previous one with
  /// disjoint confidence intervals (all checkpoints and coordinates).
  bool w1_strictly_decreasing = false;
  bool sup_difference_decreasing = false;
  double noise_floor = 0.0;  // W1 between two independent reference samples
};

/// W1 distances of grid marginals against fine-dt Euler marginals of the ungridded
/// model, plus a common-noise single-path refinement check. Grids should be
/// ordered from coarse to fine.
GridExperimentReport grid_convergence_experiment(const ContinuousModelSpec& spec, const RealVec& z,
                                                 std::span<const GridConfig> grids,
                                                 const GridExperimentConfig& cfg, const RandomStream& rng);

}  // namespace imbp
