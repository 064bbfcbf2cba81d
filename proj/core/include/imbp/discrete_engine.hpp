#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "imbp/grid_config.hpp"
#include "imbp/levy_paths.hpp"
#include "imbp/model.hpp"
#include "imbp/random.hpp"
#include "imbp/types.hpp"

namespace imbp {

struct Breakpoint {
  double t;
  IntVec state;
};

/// Right-continuous step path. The first breakpoint is (0, z); the state holds
/// until the next breakpoint, and the last one holds until `horizon`.
struct Path {
  std::vector<Breakpoint> breakpoints;
  double horizon = 0.0;

  const IntVec& state_at(double t) const;
  const IntVec& final_state() const { return breakpoints.back().state; }
};

enum class EventKind { reproduction, interaction };

/// One transition. Reproduction: a type-i individual is replaced by `offspring`.
/// Interaction: type i acts on type j, adding sign * e_j.
struct Event {
  double t = 0.0;
  EventKind kind = EventKind::reproduction;
  std::size_t i = 0;
  std::size_t j = 0;
  int sign = 0;
  IntVec offspring;
  IntVec pre_state;
};

using EventLog = std::vector<Event>;

/// Rebuilds the path from the initial state and an event log.
Path replay(const IntVec& z, const EventLog& log, double horizon);

struct EngineOptions {
  double rate_cap = 1e9;  // events per unit time; RateOverflow above this
  bool keep_log = false;
};

// --- direct CTMC simulation ------------------------------------------------

struct GillespieRun {
  Path path;
  EventLog log;  // empty unless EngineOptions::keep_log
};

GillespieRun simulate_gillespie(const DiscreteModelSpec& spec, const IntVec& z, double horizon,
                                RandomStream& rng, const EngineOptions& opts = {});

/// States at sorted checkpoint times, without storing the path.
std::vector<IntVec> gillespie_at(const DiscreteModelSpec& spec, const IntVec& z,
                                 std::span<const double> checkpoints, RandomStream& rng,
                                 const EngineOptions& opts = {});

/// Same law as gillespie_at for one-type models, but the embedded jump chain is
/// generated in blocks and the holding times of each visited level are drawn as a
/// single Gamma variate, refined into individual holding times only for the block
/// that straddles a checkpoint. Exact; much faster for large populations. Falls
/// back to gillespie_at when d > 1.
std::vector<IntVec> gillespie_at_aggregated(const DiscreteModelSpec& spec, const IntVec& z,
                                            std::span<const double> checkpoints, RandomStream& rng,
                                            const EngineOptions& opts = {});

// --- multiparameter time change --------------------------------------------

/// Arrival process of one driver, indexed by its own clock.
class DriverSource {
 public:
  virtual ~DriverSource() = default;
  /// Clock value at which the pending arrival occurs (+inf if none).
  virtual double next_arrival() const = 0;
  /// Consumes the pending arrival and returns its jump vector.
  virtual const IntVec& pop() = 0;
  /// Arrivals per unit clock; used only for the rate cap.
  virtual double rate() const = 0;
};

/// Walks X^i (one per type) and unit Poisson processes N^{ij} (null where c_ij = 0).
struct TimeChangeDrivers {
  std::vector<std::unique_ptr<DriverSource>> walks;
  std::vector<std::unique_ptr<DriverSource>> interactions;  // row-major d x d
};

/// Stochastic drivers sampled lazily from sub-streams of `rng`: walk i uses
/// child({walk, i}) and N^{ij} uses child({interaction, i, j}), so two calls with
/// the same stream produce identical driver realizations.
TimeChangeDrivers make_time_change_drivers(std::span<const RandomWalkSpec> walks, const Matrix& interaction,
                                           const RandomStream& rng);

/// Driver with a fixed list of (clock, jump) arrivals; for deterministic tests.
std::unique_ptr<DriverSource> make_scripted_source(std::vector<std::pair<double, IntVec>> arrivals);

/// Solves Z^j_t = z^j + sum_i X^{ij}(int_0^t Z^i) + sum_i sgn(c_ij) N^{ij}(|c_ij| int_0^t Z^i Z^j)
/// exactly by racing the driver clocks between events.
Path simulate_time_change(const DiscreteModelSpec& spec, const IntVec& z, double horizon,
                          std::span<const RandomWalkSpec> walks, RandomStream& rng,
                          const EngineOptions& opts = {});

/// With `frozen` set, the i -> j interaction clock runs at
/// |c_ij| * floor_quantize(Z^j(m eps), delta) * Z^i during window m; kill events
/// are suppressed while Z^j = 0.
Path simulate_time_change(const Matrix& interaction, const IntVec& z, double horizon, TimeChangeDrivers& drivers,
                          const EngineOptions& opts = {}, const std::optional<GridConfig>& frozen = {});

std::vector<IntVec> time_change_at(const Matrix& interaction, const IntVec& z, std::span<const double> checkpoints,
                                   TimeChangeDrivers& drivers, const EngineOptions& opts = {},
                                   const std::optional<GridConfig>& frozen = {});

// --- ensembles and engine comparison ---------------------------------------

enum class EngineKind { gillespie, time_change };

/// Z at the checkpoints for paths 0..n_paths-1; path k uses rng.child({path, k}).
/// Result is indexed [path][checkpoint].
std::vector<std::vector<IntVec>> sample_marginals(EngineKind engine, const DiscreteModelSpec& spec,
                                                  const IntVec& z, std::span<const double> checkpoints,
                                                  std::size_t n_paths, const RandomStream& rng,
                                                  const EngineOptions& opts = {}, std::size_t workers = 1);

struct EquivalenceSetup {
  DiscreteModelSpec spec_a;
  DiscreteModelSpec spec_b;
  EngineKind engine_a = EngineKind::gillespie;
  EngineKind engine_b = EngineKind::time_change;
  IntVec z;
  double t = 1.0;
  std::size_t n_paths = 10000;
  bool shared_seed = false;    // both sides draw from the same per-path streams
  std::int64_t lattice_cap = 20;
  std::size_t workers = 1;
  EngineOptions engine;
};

struct CoordinateKs {
  double statistic;
  double p_value;
};

struct EquivalenceReport {
  std::size_t n_paths = 0;
  std::vector<CoordinateKs> ks;  // one per coordinate
  double chi_square = 0.0;
  std::size_t chi_square_dof = 0;
  double chi_square_p = 1.0;
  double joint_tv = 0.0;  // between the two empirical joint laws
};

EquivalenceReport law_equivalence_check(const EquivalenceSetup& setup, const RandomStream& rng);
EquivalenceReport law_equivalence_check(const DiscreteModelSpec& spec, const IntVec& z, double t,
                                        std::size_t n_paths, const RandomStream& rng);

}  // namespace imbp
