#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace imbp {

/// SplitMix64 finalizer; used only to derive seeds, never as the sampling engine.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based seed derivation: hashes the master seed together with an ordered
/// list of indices (path index, driver family, type, ...). The derived seed depends
/// only on (master, indices), never on how many draws were made elsewhere, so results
/// do not depend on scheduling or worker count.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> indices) noexcept;

/// Tags for the sub-streams carved out of a path stream.
namespace stream_tag {
inline constexpr std::uint64_t path = 0x70617468;
inline constexpr std::uint64_t walk = 1;
inline constexpr std::uint64_t interaction = 2;
inline constexpr std::uint64_t brownian = 3;
inline constexpr std::uint64_t jumps = 4;
inline constexpr std::uint64_t gillespie = 5;
inline constexpr std::uint64_t reference = 6;
inline constexpr std::uint64_t bootstrap = 7;
inline constexpr std::uint64_t experiment = 8;
}  // namespace stream_tag

/// Seeded random source. Single owner; copy to fork an identical sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream whose seed is derived from this stream's seed (not its state).
  RandomStream child(std::initializer_list<std::uint64_t> indices) const;
  RandomStream child(std::uint64_t index) const { return child({index}); }

  double uniform();        // [0, 1)
  double uniform_open();   // (0, 1]
  double exponential(double rate);
  double normal();
  std::uint64_t poisson(double mean);
  double gamma(double shape, double scale);
  std::uint64_t bits();
  std::uint64_t index(std::uint64_t n);  // uniform on {0, ..., n-1}

  /// Index into a cumulative weight table (last entry is the total).
  std::size_t categorical(std::span<const double> cumulative);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace imbp
