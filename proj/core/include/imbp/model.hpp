#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "imbp/errors.hpp"
#include "imbp/random.hpp"
#include "imbp/types.hpp"

namespace imbp {

// ---------------------------------------------------------------------------
// Discrete-state model
// ---------------------------------------------------------------------------

struct OffspringOutcome {
  IntVec offspring;    // v = (v_1, ..., v_d)
  double probability;  // mu_i(v)
};

/// Finite-support offspring law of one type. Infinite-support laws must be
/// truncated by the caller before they get here.
using OffspringPmf = std::vector<OffspringOutcome>;

/// Parameters of the discrete interacting multitype branching process.
///
/// A type-i individual dies at rate lambda[i] and is replaced by v with
/// probability offspring[i](v). A type-i individual picks a type-j individual at
/// rate |interaction(i, j)|; the chosen one is killed when the entry is negative and
/// replicated when it is positive.
struct DiscreteModelSpec {
  std::size_t d = 0;
  RealVec lambda;
  std::vector<OffspringPmf> offspring;
  Matrix interaction;
};

inline constexpr double kPmfTolerance = 1e-12;

std::vector<Violation> check_discrete(const DiscreteModelSpec& spec);
/// Returns the spec unchanged when valid; throws ValidationError listing every violation.
DiscreteModelSpec validate_discrete(DiscreteModelSpec spec);

/// First-moment generator of the non-interacting model:
/// A(i, j) = lambda_i * (sum_v v_j mu_i(v) - [i == j]), so E[Z_t] = z exp(tA).
Matrix derive_mean_matrix(const DiscreteModelSpec& spec);

// ---------------------------------------------------------------------------
// Jump measures
// ---------------------------------------------------------------------------

/// Point mass at a fixed jump vector.
struct AtomJump {
  RealVec r;
};

/// r = s * direction with s ~ Exponential(mean).
struct ExponentialJump {
  RealVec direction;
  double mean = 1.0;
};

/// r = s * direction with s Pareto: P(s > x) = (scale / x)^alpha for x >= scale.
struct ParetoJump {
  RealVec direction;
  double scale = 1.0;
  double alpha = 1.5;
};

using JumpSampler = std::variant<AtomJump, ExponentialJump, ParetoJump>;

struct JumpComponent {
  double mass = 0.0;  // total rate per unit mass of the source type
  JumpSampler sampler;
  bool compensated = true;
};

/// Stand-in for the unsimulated small jumps of an infinite-activity measure: every
/// simulated component must have jumps of norm >= r_min, and the truncated part
/// is replaced by a deterministic drift of compensator_drift per unit source mass.
struct SmallJumpTruncation {
  double r_min = 0.0;
  RealVec compensator_drift;
};

struct JumpMeasureSpec {
  std::vector<JumpComponent> components;
  std::optional<SmallJumpTruncation> small_jump_truncation;

  bool empty() const noexcept { return components.empty() && !small_jump_truncation; }
};

RealVec sample_jump(const JumpSampler& sampler, RandomStream& rng);
/// Mean jump vector; entries are +inf when the first moment diverges.
RealVec jump_mean(const JumpSampler& sampler);
/// Infimum of the jump norm over the support.
double jump_min_norm(const JumpSampler& sampler);
std::size_t jump_dimension(const JumpSampler& sampler);

/// Net drift per unit source mass that accompanies the simulated jumps: the
/// small-jump stand-in drift minus mass * E[r] of every compensated component.
RealVec jump_drift_correction(const JumpMeasureSpec& measure, std::size_t d);

/// Checks the parametric form of the integrability condition for the jump measure
/// of source type i. `prefix` names the field in reported violations.
std::vector<Violation> check_jump_measure(const JumpMeasureSpec& measure, std::size_t d,
                                          std::size_t source_type, const std::string& prefix);

// ---------------------------------------------------------------------------
// Continuous-state model
// ---------------------------------------------------------------------------

/// Parameters of the continuous-state interacting multitype branching process
/// dY^j = (sum_i c_ij Y^i Y^j + sum_i b_ij Y^i) dt + sqrt(2 sigma_j Y^j) dW^j + jumps.
struct ContinuousModelSpec {
  std::size_t d = 0;
  Matrix B;
  Matrix C;
  RealVec sigma;
  std::vector<JumpMeasureSpec> jump_measures;  // one per source type; may be empty
};

std::vector<Violation> check_continuous(const ContinuousModelSpec& spec);
ContinuousModelSpec validate_continuous(ContinuousModelSpec spec);

}  // namespace imbp
