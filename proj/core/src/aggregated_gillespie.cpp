// Block-aggregated direct simulation for one-type models.
//
// The Gillespie path is an embedded jump chain L_0, L_1, ... plus independent
// holding times H_k ~ Exp(R(L_k)). Holding times spent on the same level are
// exchangeable, so their sum over a block is Gamma(count, R(level)) and, given
// that sum, the individual holdings are sum * Dirichlet(1, ..., 1). A block is
// accepted wholesale when its total duration ends before the next checkpoint;
// otherwise the block is replayed from the saved generator state to recover the
// level sequence, and the holdings are drawn conditionally and scanned one by one.

#include <algorithm>
#include <cmath>
#include <limits>

#include "imbp/discrete_engine.hpp"

namespace imbp {

namespace {

enum class ChainKind { general, birth_death, symmetric };

struct OneTypeModel {
  double lambda = 0.0;
  std::vector<double> cumulative;   // offspring law
  std::vector<std::int64_t> delta;  // v - 1
  double abs_c = 0.0;
  int sign = 0;
  ChainKind kind = ChainKind::general;
  double p_birth = 0.0;  // birth_death: offspring law puts p_birth on 2, the rest on 0

  double rate(std::int64_t u) const {
    const double x = static_cast<double>(u);
    return lambda * x + abs_c * x * x;
  }

  std::int64_t general_step(std::int64_t u, double r, RandomStream& rng) const {
    if (rng.uniform() * r < lambda * static_cast<double>(u)) {
      const std::size_t k = rng.categorical(cumulative);
      return delta[std::min(k, delta.size() - 1)];
    }
    return sign;
  }
};

constexpr std::size_t kMaxBlock = 1 << 16;
constexpr std::size_t kMinBlock = 16;

/// Per-level step probabilities of a +-1 chain, grown on demand.
class LevelTables {
 public:
  explicit LevelTables(const OneTypeModel& m) : m_(m) {}

  double p_up(std::int64_t level) const {
    const double x = static_cast<double>(level);
    if (x == 0.0) return 0.0;
    return std::min(1.0, (m_.lambda * m_.p_birth + (m_.sign > 0 ? m_.abs_c * x : 0.0)) / (m_.lambda + m_.abs_c * x));
  }

  /// Threshold on the 64-bit generator output for an up-step.
  std::uint64_t threshold(std::int64_t level) {
    grow(level);
    return threshold_[static_cast<std::size_t>(level)];
  }

  /// Probability that a step whose fair bit points the preferred way is reversed.
  double reversal(std::int64_t level) {
    grow(level);
    return reversal_[static_cast<std::size_t>(level)];
  }

 private:
  void grow(std::int64_t level) {
    while (threshold_.size() <= static_cast<std::size_t>(level)) {
      const double p = p_up(static_cast<std::int64_t>(threshold_.size()));
      threshold_.push_back(p >= 1.0 ? std::numeric_limits<std::uint64_t>::max()
                                    : static_cast<std::uint64_t>(std::ldexp(p, 64)));
      reversal_.push_back(std::abs(1.0 - 2.0 * p));
    }
  }

  const OneTypeModel& m_;
  std::vector<std::uint64_t> threshold_;
  std::vector<double> reversal_;
};

/// Level counts of one block for +-1 chains, stored around the starting level.
/// lo and hi bound the visited range (possibly loosely).
struct Tally {
  std::vector<std::uint32_t> counts;
  std::int64_t origin = 0;  // level stored at counts[0]
  std::int64_t lo = 0, hi = 0;

  void reset(std::int64_t start, std::size_t block) {
    const std::size_t width = 2 * block + 1;
    if (counts.size() < width) counts.assign(width, 0u);
    origin = start - static_cast<std::int64_t>(block);
    lo = hi = start;
  }
  std::uint32_t& operator[](std::int64_t level) { return counts[static_cast<std::size_t>(level - origin)]; }
  void clear() { std::fill(&(*this)[lo], &(*this)[hi] + 1, 0u); }
};

constexpr double kMaxReversal = 0.25;

/// Runs up to `block` steps of a +-1 embedded chain from u, counting visits
/// (and recording the levels when `seq` is given). Returns the final level.
///
/// When p_up stays on one side of 1/2 over the reachable range, a step is a fair
/// bit, reversed with probability |1 - 2 p_up| when it points the preferred way.
/// Reversal candidates are placed by geometric skips at the range maximum and
/// accepted with the level's own probability, so most steps cost one bit.
template <bool Record>
std::int64_t run_pm1_block(const OneTypeModel& m, LevelTables& tables, std::int64_t u, std::size_t block,
                           RandomStream& rng, Tally& tally, std::vector<std::int64_t>* seq) {
  std::int64_t level = u;
  std::size_t done = 0;
  const auto span = static_cast<std::int64_t>(block);
  const std::int64_t low_end = std::max<std::int64_t>(1, u - span);
  const double p_lo = tables.p_up(low_end), p_hi = tables.p_up(u + span);
  const bool below = p_lo <= 0.5 && p_hi <= 0.5;
  const bool above = p_lo >= 0.5 && p_hi >= 0.5;
  const double rho_max = m.kind == ChainKind::symmetric ? 0.0 : std::max(std::abs(1.0 - 2.0 * p_lo), std::abs(1.0 - 2.0 * p_hi));

  if (!(below || above) || rho_max > kMaxReversal) {
    for (; done < block && level > 0; ++done) {
      if constexpr (Record) seq->push_back(level);
      ++tally[level];
      level += rng.bits() < tables.threshold(level) ? 1 : -1;
      tally.lo = std::min(tally.lo, level);
      tally.hi = std::max(tally.hi, level);
    }
    return level;
  }

  // Preferred bit: 1 (up) when p_up <= 1/2, so reversals turn ups into downs.
  const std::uint64_t preferred = below ? 1u : 0u;
  const double log_keep = rho_max > 0.0 ? std::log1p(-rho_max) : 0.0;
  auto draw_skip = [&]() -> std::uint64_t {
    if (rho_max <= 0.0) return std::numeric_limits<std::uint64_t>::max();
    const double g = std::floor(std::log(rng.uniform_open()) / log_keep);
    return g >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(g);
  };
  std::uint64_t skip = draw_skip();

  while (done < block && level > 0) {
    std::uint64_t bits = rng.bits();
    const std::size_t take = std::min<std::size_t>(64, block - done);
    const std::int64_t chunk_start = level;
    std::size_t b = 0;
    for (; b < take && level > 0; ++b, bits >>= 1) {
      if constexpr (Record) seq->push_back(level);
      ++tally[level];
      std::uint64_t bit = bits & 1u;
      const std::uint64_t eligible = bit ^ preferred ^ 1u;
      if (eligible & static_cast<std::uint64_t>(skip == 0)) [[unlikely]] {
        if (rng.uniform() * rho_max < tables.reversal(level)) bit ^= 1u;
        skip = draw_skip();
      } else {
        skip -= eligible;
      }
      level += static_cast<std::int64_t>(bit << 1) - 1;
    }
    done += b;
    const auto moved = static_cast<std::int64_t>(b);
    tally.lo = std::min(tally.lo, std::max<std::int64_t>(0, chunk_start - moved));
    tally.hi = std::max(tally.hi, chunk_start + moved);
  }
  return level;
}

}  // namespace

std::vector<IntVec> gillespie_at_aggregated(const DiscreteModelSpec& spec, const IntVec& z,
                                            std::span<const double> checkpoints, RandomStream& rng,
                                            const EngineOptions& opts) {
  if (spec.d != 1) return gillespie_at(spec, z, checkpoints, rng, opts);
  validate_discrete(spec);
  if (z.size() != 1 || z[0] < 0)
    throw ValidationError({{ViolationCode::DimensionMismatch, "z", "initial state must be one count >= 0"}});
  for (std::size_t k = 0; k < checkpoints.size(); ++k)
    if (!(checkpoints[k] >= 0.0) || (k > 0 && checkpoints[k] < checkpoints[k - 1]))
      throw std::invalid_argument("checkpoints must be nonnegative and sorted");

  OneTypeModel m;
  m.lambda = spec.lambda[0];
  double acc = 0.0;
  for (const auto& o : spec.offspring[0]) {
    if (o.probability <= 0.0) continue;
    m.cumulative.push_back(acc += o.probability);
    m.delta.push_back(o.offspring[0] - 1);
  }
  const double c = spec.interaction(0, 0);
  m.abs_c = std::abs(c);
  m.sign = c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
  if (std::all_of(m.delta.begin(), m.delta.end(), [](auto v) { return v == 1 || v == -1; })) {
    for (std::size_t k = 0; k < m.delta.size(); ++k) {
      if (m.delta[k] == 1) m.p_birth += m.cumulative[k] - (k == 0 ? 0.0 : m.cumulative[k - 1]);
    }
    m.p_birth /= m.cumulative.back();
    m.kind = (m.sign == 0 && m.p_birth == 0.5) ? ChainKind::symmetric : ChainKind::birth_death;
  }
  const bool pm1 = m.kind != ChainKind::general;

  std::vector<IntVec> at;
  at.reserve(checkpoints.size());
  std::size_t next_cp = 0;

  std::int64_t u = z[0];
  double t = 0.0;
  LevelTables tables(m);
  Tally tally;
  std::vector<std::int64_t> seq;
  std::vector<double> level_time, level_exp, holding;

  while (next_cp < checkpoints.size()) {
    const double r0 = m.rate(u);
    if (r0 > opts.rate_cap) throw RateOverflow(r0, t);
    if (r0 <= 0.0) break;

    const double expected = r0 * (checkpoints[next_cp] - t);
    const auto block = static_cast<std::size_t>(
        std::clamp(std::ceil(0.5 * expected), static_cast<double>(kMinBlock), static_cast<double>(kMaxBlock)));

    std::int64_t level = u;
    std::int64_t lo = u, hi = u;
    const RandomStream saved = pm1 ? rng : RandomStream();
    seq.clear();
    if (pm1) {
      tally.reset(u, block);
      level = run_pm1_block<false>(m, tables, u, block, rng, tally, nullptr);
      lo = tally.lo;
      hi = tally.hi;
      if (m.sign > 0 && m.rate(hi) > opts.rate_cap) throw RateOverflow(m.rate(hi), t);
    } else {
      for (std::size_t k = 0; k < block; ++k) {
        const double r = m.rate(level);
        if (r <= 0.0) break;
        if (r > opts.rate_cap) throw RateOverflow(r, t);
        seq.push_back(level);
        level += m.general_step(level, r, rng);
        lo = std::min(lo, level);
        hi = std::max(hi, level);
      }
    }

    const auto width = static_cast<std::size_t>(hi - lo + 1);
    level_time.assign(width, 0.0);
    std::vector<std::uint32_t> general_counts;
    if (!pm1) {
      general_counts.assign(width, 0u);
      for (auto l : seq) ++general_counts[static_cast<std::size_t>(l - lo)];
    }
    double total = 0.0;
    for (std::size_t w = 0; w < width; ++w) {
      const std::int64_t l = lo + static_cast<std::int64_t>(w);
      const std::uint32_t count = pm1 ? tally[l] : general_counts[w];
      if (count == 0) continue;
      level_time[w] = rng.gamma(static_cast<double>(count), 1.0 / m.rate(l));
      total += level_time[w];
    }

    if (t + total < checkpoints[next_cp]) {
      if (pm1) tally.clear();
      t += total;
      u = level;
      continue;
    }

    if (pm1) {
      // Replay with the same generator state to recover the level sequence; the
      // gamma draws that follow are reproduced identically.
      tally.clear();
      rng = saved;
      tally.reset(u, block);
      run_pm1_block<true>(m, tables, u, block, rng, tally, &seq);
      for (std::size_t w = 0; w < width; ++w) {
        const std::int64_t l = lo + static_cast<std::int64_t>(w);
        if (tally[l] != 0) rng.gamma(static_cast<double>(tally[l]), 1.0 / m.rate(l));
      }
      tally.clear();
    }

    // Straddling block: split each level's total into individual holdings.
    level_exp.assign(width, 0.0);
    holding.resize(seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
      holding[k] = rng.exponential(1.0);
      level_exp[static_cast<std::size_t>(seq[k] - lo)] += holding[k];
    }
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto w = static_cast<std::size_t>(seq[k] - lo);
      holding[k] = level_time[w] * holding[k] / level_exp[w];
    }
    double clock = t;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const double end = clock + holding[k];
      while (next_cp < checkpoints.size() && checkpoints[next_cp] < end) {
        at.push_back({seq[k]});
        ++next_cp;
      }
      clock = end;
    }
    t = clock;
    u = level;
  }
  while (next_cp < checkpoints.size()) {
    at.push_back({u});
    ++next_cp;
  }
  return at;
}

}  // namespace imbp
