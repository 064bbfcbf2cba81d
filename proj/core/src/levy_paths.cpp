#include "imbp/levy_paths.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace imbp {

std::vector<Violation> check_walk(const RandomWalkSpec& spec, std::size_t d) {
  std::vector<Violation> out;
  if (spec.type >= d) {
    out.push_back({ViolationCode::DimensionMismatch, "type", "type index out of range"});
    return out;
  }
  if (!std::isfinite(spec.jump_rate) || !(spec.jump_rate > 0.0)) {
    out.push_back({ViolationCode::NonpositiveRate, "jump_rate", "must be finite and > 0"});
  }
  double total = 0.0;
  for (std::size_t k = 0; k < spec.jumps.size(); ++k) {
    const auto field = "jumps[" + std::to_string(k) + "]";
    const auto& jmp = spec.jumps[k];
    if (jmp.jump.size() != d) {
      out.push_back({ViolationCode::DimensionMismatch, field, "jump must have d entries"});
      continue;
    }
    if (!(jmp.probability >= 0.0)) out.push_back({ViolationCode::NonstochasticPMF, field, "negative probability"});
    total += jmp.probability;
    bool nonzero = false;
    for (std::size_t j = 0; j < d; ++j) {
      nonzero = nonzero || jmp.jump[j] != 0;
      if (j == spec.type && jmp.jump[j] < -1) {
        out.push_back({ViolationCode::SkipFreeViolation, field, "diagonal jumps must lie in {-1, 0, 1, 2, ...}"});
      }
      if (j != spec.type && jmp.jump[j] < 0) {
        out.push_back({ViolationCode::SubordinatorViolation, field, "off-diagonal jumps must be >= 0"});
      }
    }
    if (!nonzero && jmp.probability > 0.0) {
      out.push_back({ViolationCode::SelfOffspringLoop, field, "zero jump carries positive probability"});
    }
  }
  if (std::abs(total - 1.0) > kPmfTolerance) {
    out.push_back({ViolationCode::NonstochasticPMF, "jumps", "probabilities sum to " + std::to_string(total)});
  }
  return out;
}

RandomWalkSpec validate_walk(RandomWalkSpec spec, std::size_t d) {
  auto v = check_walk(spec, d);
  if (!v.empty()) throw ValidationError(std::move(v));
  return spec;
}

std::vector<RandomWalkSpec> walk_specs_from_model(const DiscreteModelSpec& spec) {
  std::vector<RandomWalkSpec> walks(spec.d);
  for (std::size_t i = 0; i < spec.d; ++i) {
    walks[i].type = i;
    walks[i].jump_rate = spec.lambda[i];
    for (const auto& o : spec.offspring[i]) {
      if (o.probability <= 0.0) continue;
      IntVec jump = o.offspring;
      jump[i] -= 1;
      walks[i].jumps.push_back({std::move(jump), o.probability});
    }
  }
  return walks;
}

DiscreteModelSpec model_from_walks(std::span<const RandomWalkSpec> walks, const Matrix& interaction) {
  DiscreteModelSpec spec;
  spec.d = walks.size();
  spec.lambda.resize(spec.d);
  spec.offspring.resize(spec.d);
  spec.interaction = interaction;
  for (std::size_t i = 0; i < spec.d; ++i) {
    const auto& w = walks[i];
    spec.lambda[i] = w.jump_rate;
    for (const auto& j : w.jumps) {
      IntVec v = j.jump;
      v[w.type] += 1;
      spec.offspring[i].push_back({std::move(v), j.probability});
    }
  }
  return spec;
}

IncrementStream::IncrementStream(RandomStream rng, double resolution)
    : rng_(std::move(rng)), resolution_(resolution) {}

void IncrementStream::consume(double clock_advance) {
  if (!(clock_advance >= 0.0)) throw std::invalid_argument("clock advance must be >= 0");
  cursor_ += clock_advance;
}

IntVec sample_walk_increment(const RandomWalkSpec& spec, double clock_advance, IncrementStream& stream) {
  stream.consume(clock_advance);
  const std::size_t d = spec.jumps.empty() ? 0 : spec.jumps.front().jump.size();
  IntVec inc(d, 0);
  const auto count = stream.rng().poisson(spec.jump_rate * clock_advance);
  if (count == 0) return inc;
  std::vector<double> cumulative(spec.jumps.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.jumps.size(); ++k) cumulative[k] = acc += spec.jumps[k].probability;
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto& jmp = spec.jumps[stream.rng().categorical(cumulative)].jump;
    for (std::size_t j = 0; j < d; ++j) inc[j] += jmp[j];
  }
  return inc;
}

std::uint64_t sample_poisson_count(double rate, double window, RandomStream& rng) {
  return rng.poisson(rate * window);
}

std::vector<Violation> check_driver(const LevyDriverSpec& spec, std::size_t d) {
  std::vector<Violation> out;
  if (spec.type >= d) {
    out.push_back({ViolationCode::DimensionMismatch, "type", "type index out of range"});
    return out;
  }
  if (spec.drift.size() != d) {
    out.push_back({ViolationCode::DimensionMismatch, "drift", "expected d entries"});
    return out;
  }
  if (!std::isfinite(spec.brownian_variance) || spec.brownian_variance < 0.0) {
    out.push_back({ViolationCode::NegativeSigma, "brownian_variance", "must be finite and >= 0"});
  }
  auto jv = check_jump_measure(spec.jumps, d, spec.type, "jumps");
  out.insert(out.end(), jv.begin(), jv.end());
  if (!jv.empty()) return out;
  // Off-diagonal coordinates are subordinators: their net drift after
  // compensation must be nonnegative.
  const auto correction = jump_drift_correction(spec.jumps, d);
  for (std::size_t j = 0; j < d; ++j) {
    if (j == spec.type) continue;
    if (spec.drift[j] + correction[j] < 0.0) {
      out.push_back({ViolationCode::SubordinatorViolation, "drift[" + std::to_string(j) + "]",
                     "off-diagonal coordinate would decrease"});
    }
  }
  return out;
}

LevyDriverSpec validate_driver(LevyDriverSpec spec, std::size_t d) {
  auto v = check_driver(spec, d);
  if (!v.empty()) throw ValidationError(std::move(v));
  return spec;
}

LevyDriverSpec driver_from_model(const ContinuousModelSpec& spec, std::size_t i) {
  LevyDriverSpec drv;
  drv.type = i;
  drv.drift.resize(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) drv.drift[j] = spec.B(i, j);
  drv.brownian_variance = 2.0 * spec.sigma[i];
  if (!spec.jump_measures.empty()) drv.jumps = spec.jump_measures[i];
  return drv;
}

RealVec sample_levy_increment(const LevyDriverSpec& spec, double clock_advance, IncrementStream& stream) {
  stream.consume(clock_advance);
  const std::size_t d = spec.drift.size();
  RealVec inc(d, 0.0);
  if (clock_advance == 0.0) return inc;
  const auto correction = jump_drift_correction(spec.jumps, d);
  for (std::size_t j = 0; j < d; ++j) inc[j] = (spec.drift[j] + correction[j]) * clock_advance;
  if (spec.brownian_variance > 0.0) {
    inc[spec.type] += std::sqrt(spec.brownian_variance * clock_advance) * stream.rng().normal();
  }
  for (const auto& c : spec.jumps.components) {
    const auto count = stream.rng().poisson(c.mass * clock_advance);
    for (std::uint64_t n = 0; n < count; ++n) {
      const auto r = sample_jump(c.sampler, stream.rng());
      for (std::size_t j = 0; j < d; ++j) inc[j] += r[j];
    }
  }
  return inc;
}

std::vector<RealVec> sample_levy_path(const LevyDriverSpec& spec, double horizon, IncrementStream& stream) {
  if (!(stream.resolution() > 0.0)) throw std::invalid_argument("sample_levy_path needs a positive resolution");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / stream.resolution() - 1e-12));
  std::vector<RealVec> path;
  path.reserve(steps + 1);
  path.emplace_back(spec.drift.size(), 0.0);
  double t = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double h = std::min(stream.resolution(), horizon - t);
    auto inc = sample_levy_increment(spec, h, stream);
    RealVec next = path.back();
    for (std::size_t j = 0; j < next.size(); ++j) next[j] += inc[j];
    path.push_back(std::move(next));
    t += h;
  }
  return path;
}

}  // namespace imbp
