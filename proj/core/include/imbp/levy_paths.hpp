#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imbp/model.hpp"
#include "imbp/random.hpp"
#include "imbp/types.hpp"

namespace imbp {

struct WalkJump {
  IntVec jump;
  double probability;
};

/// Continuous-time random walk X^i on Z^d driving type i: jumps arrive at
/// jump_rate per unit of its own clock and are drawn from `jumps`.
/// Coordinate `type` is downwards skip-free (jumps >= -1); the other
/// coordinates never decrease.
struct RandomWalkSpec {
  std::size_t type = 0;
  double jump_rate = 0.0;
  std::vector<WalkJump> jumps;
};

std::vector<Violation> check_walk(const RandomWalkSpec& spec, std::size_t d);
RandomWalkSpec validate_walk(RandomWalkSpec spec, std::size_t d);

/// Walks with rate lambda_i and law mu~_i(v) = mu_i(v + e_i).
std::vector<RandomWalkSpec> walk_specs_from_model(const DiscreteModelSpec& spec);
/// Inverse of walk_specs_from_model: lambda_i = jump_rate, mu_i(v) = law(v - e_i).
DiscreteModelSpec model_from_walks(std::span<const RandomWalkSpec> walks, const Matrix& interaction);

/// Random source bound to one driver, tracking how much of the driver clock has
/// been consumed. The cursor never moves backwards.
class IncrementStream {
 public:
  explicit IncrementStream(RandomStream rng, double resolution = 0.0);

  RandomStream& rng() noexcept { return rng_; }
  double cursor() const noexcept { return cursor_; }
  double resolution() const noexcept { return resolution_; }

  /// Moves the cursor forward; throws std::invalid_argument on negative advances.
  void consume(double clock_advance);

 private:
  RandomStream rng_;
  double resolution_;
  double cursor_ = 0.0;
};

/// Increment of the walk over `clock_advance` units of its clock: the sum of a
/// Poisson(rate * clock_advance) number of i.i.d. jumps.
IntVec sample_walk_increment(const RandomWalkSpec& spec, double clock_advance, IncrementStream& stream);

std::uint64_t sample_poisson_count(double rate, double window, RandomStream& rng);

/// Levy driver X^i = (X^{i,j})_j for the continuous model: linear drift, a
/// Brownian part on coordinate `type` only, and nonnegative jumps. The diagonal
/// coordinate is spectrally positive; off-diagonal coordinates are subordinators.
struct LevyDriverSpec {
  std::size_t type = 0;
  RealVec drift;
  double brownian_variance = 0.0;
  JumpMeasureSpec jumps;
};

std::vector<Violation> check_driver(const LevyDriverSpec& spec, std::size_t d);
LevyDriverSpec validate_driver(LevyDriverSpec spec, std::size_t d);

/// Driver whose time change reproduces the SDE of `spec`: drift b_i., Brownian
/// variance 2 sigma_i, jumps m^(i).
LevyDriverSpec driver_from_model(const ContinuousModelSpec& spec, std::size_t i);

/// drift * dt + N(0, variance * dt) e_type + compound-Poisson jumps over dt,
/// with compensated components corrected by their mean.
RealVec sample_levy_increment(const LevyDriverSpec& spec, double clock_advance, IncrementStream& stream);

/// Path of the driver on a uniform grid of the stream's resolution, as partial sums.
std::vector<RealVec> sample_levy_path(const LevyDriverSpec& spec, double horizon, IncrementStream& stream);

}  // namespace imbp
