#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imbp/continuous_engine.hpp"
#include "imbp/discrete_engine.hpp"
#include "imbp/grid_config.hpp"
#include "imbp/stats.hpp"

namespace imbp {

/// One member of a rescaled sequence: the discrete model at index n with its time
/// scale a_n and per-type mass scales b_n.
struct ScalingLevel {
  std::size_t n = 0;
  double a = 0.0;
  RealVec b;
  IntVec z;
  Matrix C;
  std::vector<RandomWalkSpec> walks;

  DiscreteModelSpec model() const { return model_from_walks(walks, C); }
  /// a_n / b_n^j
  double mass_scale(std::size_t j) const { return a / b[j]; }
};

struct ScalingFamily {
  std::size_t d = 0;
  std::vector<ScalingLevel> levels;  // increasing n
  RealVec z_limit;
  Matrix C_limit;
  ContinuousModelSpec limit;  // continuous model the rescaled processes approach

  const ScalingLevel& level(std::size_t n) const;
};

/// Requires increasing a_n > 0 and strictly increasing b_n^j / a_n along the levels.
std::vector<Violation> check_family(const ScalingFamily& fam);
ScalingFamily validate_family(ScalingFamily fam);

/// Critical binary family: rate-1 walk with jumps +-1 (probability 1/2 each),
/// a_n = n, b_n = n^2, z_n = ceil(y n), c_n = c / n^2. The limit is the Feller
/// diffusion with sigma = 1/2 and competition c.
ScalingFamily build_feller_family(double y, double c, std::span<const std::size_t> n_values);

/// Z^(n) up to a_n * horizon by the time-change engine, returned with time
/// divided by a_n and coordinate j multiplied by a_n / b_n^j.
ContinuousPath rescaled_run(const ScalingFamily& fam, std::size_t n, double horizon, RandomStream& rng,
                            const EngineOptions& opts = {});

/// Rescaled values at the checkpoints for n_paths paths ([path][checkpoint]).
/// One-type levels use the block-aggregated direct method; others use the
/// time-change engine. Path k uses rng.child({stream_tag::path, k}).
std::vector<std::vector<RealVec>> rescaled_marginals(const ScalingFamily& fam, std::size_t n,
                                                     std::span<const double> checkpoints, std::size_t n_paths,
                                                     const RandomStream& rng, std::size_t workers = 1,
                                                     const EngineOptions& opts = {});

struct ScalingExperimentConfig {
  std::vector<double> checkpoints{1.0};
  std::size_t n_paths = 10000;
  std::size_t reference_paths = 0;  // 0: same as n_paths
  EulerConfig reference_euler{};
  std::size_t bootstrap_reps = 200;
  double confidence = 0.95;
  std::size_t workers = 1;
  EngineOptions engine{};
};

struct ScalingRow {
  std::size_t n = 0;
  /// Indexed [checkpoint][coordinate]; for d > 1 a final entry holds the sum of coordinates.
  std::vector<RealVec> w1;
  std::vector<std::vector<Interval>> w1_ci;
  std::vector<std::vector<MeanEstimate>> mean;
  RealVec extinct_fraction;  // per checkpoint: all coordinates zero
  double seconds = 0.0;
};

struct ScalingExperimentReport {
  std::vector<ScalingRow> rows;
  std::vector<std::vector<MeanEstimate>> reference_mean;
  bool w1_strictly_decreasing = false;  // disjoint CIs between successive n
  bool w1_nonincreasing = false;        // each W1 at most the previous upper CI bound
};

ScalingExperimentReport scaling_convergence_experiment(const ScalingFamily& fam, std::span<const std::size_t> n_values,
                                                       const ContinuousModelSpec& reference,
                                                       const ScalingExperimentConfig& cfg, const RandomStream& rng);

struct DifferenceRow {
  GridConfig grid;
  /// Per coordinate: mean of (a_n / b_n^j) |Z^(n),j - Z^(eps,delta,n),j| at the horizon.
  std::vector<MeanEstimate> difference;
  bool identical = false;  // every coupled pair of trajectories matched exactly
};

struct DifferenceReport {
  std::size_t n = 0;
  std::vector<DifferenceRow> rows;
  bool decreasing = false;
};

/// Couples Z^(n) and its grid version through the same drivers. The grid is in
/// rescaled units: windows of a_n * epsilon and population quanta of delta * b_n / a_n.
DifferenceReport lemma3_difference_experiment(const ScalingFamily& fam, std::span<const GridConfig> grids,
                                              std::size_t n, double horizon, std::size_t n_paths,
                                              const RandomStream& rng, std::size_t workers = 1,
                                              const EngineOptions& opts = {});

}  // namespace imbp
