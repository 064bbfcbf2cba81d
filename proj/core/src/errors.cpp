#include "imbp/errors.hpp"

#include <algorithm>
#include <sstream>

namespace imbp {

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::DimensionMismatch: return "DimensionMismatch";
    case ViolationCode::NonfiniteValue: return "NonfiniteValue";
    case ViolationCode::NonpositiveRate: return "NonpositiveRate";
    case ViolationCode::NonstochasticPMF: return "NonstochasticPMF";
    case ViolationCode::SelfOffspringLoop: return "SelfOffspringLoop";
    case ViolationCode::NegativeOffspring: return "NegativeOffspring";
    case ViolationCode::NegativeOffDiagonalB: return "NegativeOffDiagonalB";
    case ViolationCode::NegativeSigma: return "NegativeSigma";
    case ViolationCode::JumpMeasureIntegrability: return "JumpMeasureIntegrability";
    case ViolationCode::SkipFreeViolation: return "SkipFreeViolation";
    case ViolationCode::SubordinatorViolation: return "SubordinatorViolation";
    case ViolationCode::InvalidGrid: return "InvalidGrid";
    case ViolationCode::ScalingPremise: return "ScalingPremise";
  }
  return "Unknown";
}

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "validation failed:";
  for (const auto& v : violations) {
    os << "\n  " << to_string(v.code) << " at " << v.field << ": " << v.message;
  }
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

bool ValidationError::has(ViolationCode code) const noexcept {
  return std::any_of(violations_.begin(), violations_.end(),
                     [code](const Violation& v) { return v.code == code; });
}

RateOverflow::RateOverflow(double rate, double time)
    : std::runtime_error("total event rate " + std::to_string(rate) + " exceeds cap at t=" +
                         std::to_string(time)),
      rate_(rate),
      time_(time) {}

StepRejected::StepRejected(std::size_t coordinate, double time, double before, double after)
    : std::runtime_error("Euler step rejected: coordinate " + std::to_string(coordinate) +
                         " moved from " + std::to_string(before) + " to " +
                         std::to_string(after) + " at t=" + std::to_string(time)) {}

BoxTooSmall::BoxTooSmall(double leak)
    : std::runtime_error("truncated lattice leaked probability mass " + std::to_string(leak)),
      leak_(leak) {}

}  // namespace imbp
