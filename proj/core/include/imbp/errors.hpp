#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imbp {

enum class ViolationCode {
  DimensionMismatch,
  NonfiniteValue,
  NonpositiveRate,
  NonstochasticPMF,
  SelfOffspringLoop,
  NegativeOffspring,
  NegativeOffDiagonalB,
  NegativeSigma,
  JumpMeasureIntegrability,
  SkipFreeViolation,
  SubordinatorViolation,
  InvalidGrid,
  ScalingPremise,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::string field;    // e.g. "offspring[1]"
  std::string message;
};

/// Thrown by the validate_* family; carries every violation found, not just the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }
  bool has(ViolationCode code) const noexcept;

 private:
  std::vector<Violation> violations_;
};

/// Total event rate exceeded the configured cap (explosive cooperation).
class RateOverflow : public std::runtime_error {
 public:
  RateOverflow(double rate, double time);
  double rate() const noexcept { return rate_; }
  double time() const noexcept { return time_; }

 private:
  double rate_;
  double time_;
};

/// A single Euler step moved a coordinate further than the configured guard allows.
class StepRejected : public std::runtime_error {
 public:
  StepRejected(std::size_t coordinate, double time, double before, double after);
};

/// Uniformization oracle lost more probability through the lattice boundary than allowed.
class BoxTooSmall : public std::runtime_error {
 public:
  explicit BoxTooSmall(double leak);
  double leak() const noexcept { return leak_; }

 private:
  double leak_;
};

}  // namespace imbp
