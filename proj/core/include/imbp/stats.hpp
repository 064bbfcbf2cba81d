#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imbp/model.hpp"
#include "imbp/random.hpp"
#include "imbp/types.hpp"

namespace imbp {

// --- exact transient law on a truncated lattice -----------------------------

/// Generator of the discrete model restricted to {0..cap}^d. Transitions that
/// would leave the box are routed to an absorbing leak state instead.
struct TruncatedGenerator {
  struct Transition {
    std::size_t target;
    double rate;
  };

  std::size_t d = 0;
  std::int64_t cap = 0;
  std::vector<std::vector<Transition>> rows;  // off-diagonal rates inside the box
  std::vector<double> leak_rate;              // rate into the leak state
  std::vector<double> exit_rate;              // total outflow (= -diagonal)

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t index(std::span<const std::int64_t> state) const;
  IntVec state(std::size_t index) const;
  bool contains(std::span<const std::int64_t> state) const;
};

TruncatedGenerator build_truncated_generator(const DiscreteModelSpec& spec, std::int64_t cap);

struct LatticeDistribution {
  std::size_t d = 0;
  std::int64_t cap = 0;
  std::vector<double> probability;  // indexed like TruncatedGenerator
  double leak = 0.0;                // mass that left the box by time t

  double at(std::span<const std::int64_t> state) const;
};

struct UniformizationOptions {
  double tolerance = 1e-10;       // absolute accuracy of the probability vector
  double poisson_tail = 1e-12;    // truncation of the Poisson sum
  double leak_threshold = 1e-3;   // BoxTooSmall above this
};

/// P(Z_t = .) on {0..cap}^d by uniformization, plus the leaked mass.
LatticeDistribution transient_distribution(const DiscreteModelSpec& spec, const IntVec& z, double t,
                                           std::int64_t cap, const UniformizationOptions& opts = {});

/// Empirical frequencies on the lattice; the extra last entry counts samples outside the box.
std::vector<double> empirical_lattice(std::span<const IntVec> samples, std::size_t d, std::int64_t cap);

/// Total variation between the empirical lattice frequencies (with outside bin)
/// and the oracle (with leak bin).
double tv_to_oracle(std::span<const double> empirical, const LatticeDistribution& oracle);

// --- two-sample statistics -------------------------------------------------

struct KsResult {
  double statistic;
  double p_value;
};

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value. Ties are
/// handled by evaluating both empirical CDFs after each distinct value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Survival function of the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// W1 between the empirical laws of a and b: integral of |Fa^-1(u) - Fb^-1(u)|.
/// For equal sizes this is the mean absolute difference of the sorted samples.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// 0.5 * sum |p - q| over a common index.
double tv_distance(std::span<const double> p, std::span<const double> q);

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test on bin counts. Bins whose pooled
/// expected count is below `min_expected` are merged into one.
ChiSquareResult chi_square_homogeneity(std::span<const double> counts_a, std::span<const double> counts_b,
                                       double min_expected = 5.0);

// --- estimators -------------------------------------------------------------

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

MeanEstimate mean_estimate(std::span<const double> x);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Percentile bootstrap interval for wasserstein1(a, b), resampling both sides.
Interval bootstrap_w1_interval(std::span<const double> a, std::span<const double> b, std::size_t reps,
                               double level, RandomStream& rng);

struct SampleSummary {
  std::size_t n = 0;
  RealVec mean;
  Matrix covariance;
  std::vector<std::vector<double>> sorted;  // per coordinate, for ECDF queries

  double ecdf(std::size_t coordinate, double x) const;
};

SampleSummary summarize(std::span<const RealVec> samples);

/// Row vector z^T exp(tA): the mean of the non-interacting model.
RealVec mean_flow(const Matrix& a, const RealVec& z, double t);

/// Column j of a sample set.
std::vector<double> column(std::span<const RealVec> samples, std::size_t j);
std::vector<double> column(std::span<const IntVec> samples, std::size_t j);

}  // namespace imbp
