#include "imbp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace imbp {

std::size_t TruncatedGenerator::index(std::span<const std::int64_t> state) const {
  std::size_t idx = 0;
  for (std::size_t j = d; j-- > 0;) idx = idx * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(state[j]);
  return idx;
}

IntVec TruncatedGenerator::state(std::size_t index) const {
  IntVec s(d);
  for (std::size_t j = 0; j < d; ++j) {
    s[j] = static_cast<std::int64_t>(index % static_cast<std::size_t>(cap + 1));
    index /= static_cast<std::size_t>(cap + 1);
  }
  return s;
}

bool TruncatedGenerator::contains(std::span<const std::int64_t> state) const {
  return std::all_of(state.begin(), state.end(), [this](std::int64_t x) { return x >= 0 && x <= cap; });
}

TruncatedGenerator build_truncated_generator(const DiscreteModelSpec& spec, std::int64_t cap) {
  validate_discrete(spec);
  if (cap < 0) throw std::invalid_argument("lattice cap must be >= 0");
  TruncatedGenerator g;
  g.d = spec.d;
  g.cap = cap;
  std::size_t n = 1;
  for (std::size_t j = 0; j < spec.d; ++j) n *= static_cast<std::size_t>(cap + 1);
  g.rows.resize(n);
  g.leak_rate.assign(n, 0.0);
  g.exit_rate.assign(n, 0.0);

  IntVec target(spec.d);
  for (std::size_t s = 0; s < n; ++s) {
    const IntVec u = g.state(s);
    std::map<std::size_t, double> out;
    auto add = [&](const IntVec& to, double rate) {
      if (rate <= 0.0) return;
      g.exit_rate[s] += rate;
      if (g.contains(to)) {
        out[g.index(to)] += rate;
      } else {
        g.leak_rate[s] += rate;
      }
    };
    for (std::size_t i = 0; i < spec.d; ++i) {
      if (u[i] == 0) continue;
      for (const auto& o : spec.offspring[i]) {
        for (std::size_t j = 0; j < spec.d; ++j) target[j] = u[j] + o.offspring[j] - (j == i ? 1 : 0);
        add(target, spec.lambda[i] * static_cast<double>(u[i]) * o.probability);
      }
    }
    for (std::size_t i = 0; i < spec.d; ++i) {
      for (std::size_t j = 0; j < spec.d; ++j) {
        const double c = spec.interaction(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (c == 0.0) continue;
        target = u;
        target[j] += c > 0.0 ? 1 : -1;
        add(target, std::abs(c) * static_cast<double>(u[i]) * static_cast<double>(u[j]));
      }
    }
    g.rows[s].reserve(out.size());
    for (const auto& [to, rate] : out) {
      if (to == s) {
        g.exit_rate[s] -= rate;  // self-loops are not transitions
      } else {
        g.rows[s].push_back({to, rate});
      }
    }
  }
  return g;
}

double LatticeDistribution::at(std::span<const std::int64_t> state) const {
  std::size_t idx = 0;
  for (std::size_t j = d; j-- > 0;) {
    if (state[j] < 0 || state[j] > cap) return 0.0;
    idx = idx * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(state[j]);
  }
  return probability[idx];
}

LatticeDistribution transient_distribution(const DiscreteModelSpec& spec, const IntVec& z, double t,
                                           std::int64_t cap, const UniformizationOptions& opts) {
  const auto gen = build_truncated_generator(spec, cap);
  if (z.size() != spec.d || !gen.contains(z)) throw std::invalid_argument("initial state outside the lattice box");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");

  LatticeDistribution dist;
  dist.d = spec.d;
  dist.cap = cap;
  dist.probability.assign(gen.size(), 0.0);
  const std::size_t start = gen.index(z);

  const double unif_rate = *std::max_element(gen.exit_rate.begin(), gen.exit_rate.end());
  const double mean = unif_rate * t;
  if (mean == 0.0) {
    dist.probability[start] = 1.0;
    return dist;
  }

  // p_k = p_0 P^k with P = I + Q / unif_rate; the leak is an extra absorbing state.
  std::vector<double> p(gen.size(), 0.0), next(gen.size(), 0.0);
  double leak = 0.0;
  p[start] = 1.0;
  double weight_sum = 0.0;
  const double log_mean = std::log(mean);
  const auto k_max = static_cast<std::size_t>(mean + 12.0 * std::sqrt(mean) + 50.0);
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double w = std::exp(-mean + static_cast<double>(k) * log_mean - std::lgamma(static_cast<double>(k) + 1.0));
    weight_sum += w;
    for (std::size_t s = 0; s < gen.size(); ++s) dist.probability[s] += w * p[s];
    dist.leak += w * leak;
    if (1.0 - weight_sum < opts.poisson_tail && static_cast<double>(k) > mean) break;

    std::fill(next.begin(), next.end(), 0.0);
    double next_leak = leak;
    for (std::size_t s = 0; s < gen.size(); ++s) {
      const double ps = p[s];
      if (ps == 0.0) continue;
      next[s] += ps * (1.0 - gen.exit_rate[s] / unif_rate);
      for (const auto& tr : gen.rows[s]) next[tr.target] += ps * tr.rate / unif_rate;
      next_leak += ps * gen.leak_rate[s] / unif_rate;
    }
    p.swap(next);
    leak = next_leak;
  }
  // Mass not covered by the truncated Poisson sum is attributed to the leak, so
  // the leak stays an upper bound on the truncation error.
  dist.leak += std::max(0.0, 1.0 - weight_sum);
  if (dist.leak > opts.leak_threshold) throw BoxTooSmall(dist.leak);
  return dist;
}

std::vector<double> empirical_lattice(std::span<const IntVec> samples, std::size_t d, std::int64_t cap) {
  std::size_t n = 1;
  for (std::size_t j = 0; j < d; ++j) n *= static_cast<std::size_t>(cap + 1);
  std::vector<double> freq(n + 1, 0.0);
  if (samples.empty()) return freq;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    std::size_t idx = 0;
    bool inside = true;
    for (std::size_t j = d; j-- > 0;) {
      if (s[j] < 0 || s[j] > cap) {
        inside = false;
        break;
      }
      idx = idx * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(s[j]);
    }
    freq[inside ? idx : n] += w;
  }
  return freq;
}

double tv_to_oracle(std::span<const double> empirical, const LatticeDistribution& oracle) {
  if (empirical.size() != oracle.probability.size() + 1) throw std::invalid_argument("lattice size mismatch");
  double acc = std::abs(empirical.back() - oracle.leak);
  for (std::size_t s = 0; s < oracle.probability.size(); ++s) acc += std::abs(empirical[s] - oracle.probability[s]);
  return 0.5 * acc;
}

// ---------------------------------------------------------------------------

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form, converges quickly for small lambda.
    const double pi = 3.14159265358979323846;
    const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) sum += std::pow(y, static_cast<double>((2 * k - 1) * (2 * k - 1)));
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  // Once one side is exhausted its CDF is 1; the gap only shrinks from here.
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  return {d, kolmogorov_survival((root + 0.12 + 0.11 / root) * d)};
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1 needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) acc += std::abs(sa[k] - sb[k]);
    return acc / static_cast<double>(sa.size());
  }
  // Merge the quantile-level breakpoints k/n and l/m.
  const double n = static_cast<double>(sa.size());
  const double m = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double ua = static_cast<double>(i + 1) / n;
    const double ub = static_cast<double>(j + 1) / m;
    const double next = std::min(ua, ub);
    acc += (next - u) * std::abs(sa[i] - sb[j]);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return acc;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance needs a common index");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return 0.5 * acc;
}

ChiSquareResult chi_square_homogeneity(std::span<const double> counts_a, std::span<const double> counts_b,
                                       double min_expected) {
  if (counts_a.size() != counts_b.size()) throw std::invalid_argument("bin count mismatch");
  const double na = std::accumulate(counts_a.begin(), counts_a.end(), 0.0);
  const double nb = std::accumulate(counts_b.begin(), counts_b.end(), 0.0);
  const double n = na + nb;
  ChiSquareResult res;
  if (na == 0.0 || nb == 0.0) return res;

  std::vector<std::pair<double, double>> bins;
  double pooled_a = 0.0, pooled_b = 0.0;
  for (std::size_t k = 0; k < counts_a.size(); ++k) {
    const double total = counts_a[k] + counts_b[k];
    if (total == 0.0) continue;
    if (total * std::min(na, nb) / n < min_expected) {
      pooled_a += counts_a[k];
      pooled_b += counts_b[k];
    } else {
      bins.emplace_back(counts_a[k], counts_b[k]);
    }
  }
  if (pooled_a + pooled_b > 0.0) bins.emplace_back(pooled_a, pooled_b);
  if (bins.size() < 2) return res;

  for (const auto& [oa, ob] : bins) {
    const double total = oa + ob;
    const double ea = total * na / n;
    const double eb = total * nb / n;
    res.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  res.dof = bins.size() - 1;
  res.p_value = boost::math::gamma_q(0.5 * static_cast<double>(res.dof), 0.5 * res.statistic);
  return res;
}

MeanEstimate mean_estimate(std::span<const double> x) {
  MeanEstimate e;
  if (x.empty()) return e;
  const double n = static_cast<double>(x.size());
  e.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (x.size() < 2) return e;
  double ss = 0.0;
  for (double v : x) ss += (v - e.mean) * (v - e.mean);
  e.standard_error = std::sqrt(ss / (n - 1.0) / n);
  return e;
}

namespace {

// Resample a sorted sample with replacement; the result is sorted without a sort.
void resample_sorted(const std::vector<double>& sorted, std::vector<std::uint32_t>& counts,
                     std::vector<double>& out, RandomStream& rng) {
  std::fill(counts.begin(), counts.end(), 0u);
  for (std::size_t k = 0; k < sorted.size(); ++k) ++counts[rng.index(sorted.size())];
  out.clear();
  for (std::size_t k = 0; k < sorted.size(); ++k) out.insert(out.end(), counts[k], sorted[k]);
}

}  // namespace

Interval bootstrap_w1_interval(std::span<const double> a, std::span<const double> b, std::size_t reps,
                               double level, RandomStream& rng) {
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::uint32_t> ca(sa.size()), cb(sb.size());
  std::vector<double> ra, rb, stats;
  ra.reserve(sa.size());
  rb.reserve(sb.size());
  stats.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    resample_sorted(sa, ca, ra, rng);
    resample_sorted(sb, cb, rb, rng);
    stats.push_back(wasserstein1(ra, rb));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 0.5 * (1.0 - level);
  const auto pick = [&](double q) {
    const auto k = static_cast<std::size_t>(std::clamp(q * static_cast<double>(reps - 1), 0.0,
                                                       static_cast<double>(reps - 1)));
    return stats[k];
  };
  return {pick(alpha), pick(1.0 - alpha)};
}

double SampleSummary::ecdf(std::size_t coordinate, double x) const {
  const auto& s = sorted[coordinate];
  return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) / static_cast<double>(s.size());
}

SampleSummary summarize(std::span<const RealVec> samples) {
  if (samples.empty()) throw std::invalid_argument("summarize needs at least one sample");
  SampleSummary s;
  s.n = samples.size();
  const std::size_t d = samples.front().size();
  s.mean.assign(d, 0.0);
  for (const auto& x : samples)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x[j];
  for (auto& m : s.mean) m /= static_cast<double>(s.n);
  s.covariance = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (s.n > 1) {
    for (const auto& x : samples)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          s.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
              (x[i] - s.mean[i]) * (x[j] - s.mean[j]);
    s.covariance /= static_cast<double>(s.n - 1);
  }
  s.sorted.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    s.sorted[j] = column(samples, j);
    std::sort(s.sorted[j].begin(), s.sorted[j].end());
  }
  return s;
}

RealVec mean_flow(const Matrix& a, const RealVec& z, double t) {
  const Matrix e = (a * t).exp();
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(z.size()));
  for (std::size_t j = 0; j < z.size(); ++j) row(static_cast<Eigen::Index>(j)) = z[j];
  const Eigen::RowVectorXd m = row * e;
  return RealVec(m.data(), m.data() + m.size());
}

std::vector<double> column(std::span<const RealVec> samples, std::size_t j) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s[j]);
  return out;
}

std::vector<double> column(std::span<const IntVec> samples, std::size_t j) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(static_cast<double>(s[j]));
  return out;
}

}  // namespace imbp
