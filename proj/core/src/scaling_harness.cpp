#include "imbp/scaling_harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "imbp/parallel.hpp"

namespace imbp {

const ScalingLevel& ScalingFamily::level(std::size_t n) const {
  for (const auto& l : levels) {
    if (l.n == n) return l;
  }
  throw std::out_of_range("scaling family has no level n = " + std::to_string(n));
}

std::vector<Violation> check_family(const ScalingFamily& fam) {
  std::vector<Violation> out;
  if (fam.levels.empty()) {
    out.push_back({ViolationCode::ScalingPremise, "levels", "family needs at least one level"});
    return out;
  }
  for (std::size_t k = 0; k < fam.levels.size(); ++k) {
    const auto& l = fam.levels[k];
    const std::string field = "levels[" + std::to_string(k) + "]";
    if (l.b.size() != fam.d || l.z.size() != fam.d || l.walks.size() != fam.d ||
        static_cast<std::size_t>(l.C.rows()) != fam.d || static_cast<std::size_t>(l.C.cols()) != fam.d) {
      out.push_back({ViolationCode::DimensionMismatch, field, "level components must have dimension d"});
      continue;
    }
    if (!(l.a > 0.0)) out.push_back({ViolationCode::ScalingPremise, field + ".a", "a_n must be > 0"});
    for (std::size_t j = 0; j < fam.d; ++j) {
      if (!(l.b[j] > 0.0)) out.push_back({ViolationCode::ScalingPremise, field + ".b", "b_n must be > 0"});
    }
    if (k == 0) continue;
    const auto& p = fam.levels[k - 1];
    if (!(l.n > p.n)) out.push_back({ViolationCode::ScalingPremise, field + ".n", "levels must have increasing n"});
    if (!(l.a > p.a)) out.push_back({ViolationCode::ScalingPremise, field + ".a", "a_n must increase"});
    for (std::size_t j = 0; j < fam.d && p.b.size() == fam.d; ++j) {
      if (!(l.b[j] / l.a > p.b[j] / p.a))
        out.push_back({ViolationCode::ScalingPremise, field + ".b", "b_n / a_n must increase"});
    }
  }
  return out;
}

ScalingFamily validate_family(ScalingFamily fam) {
  auto v = check_family(fam);
  if (!v.empty()) throw ValidationError(std::move(v));
  return fam;
}

ScalingFamily build_feller_family(double y, double c, std::span<const std::size_t> n_values) {
  if (!(y >= 0.0) || !std::isfinite(y))
    throw ValidationError({{ViolationCode::NonfiniteValue, "y", "initial mass must be finite and >= 0"}});
  if (!std::isfinite(c)) throw ValidationError({{ViolationCode::NonfiniteValue, "c", "c must be finite"}});
  ScalingFamily fam;
  fam.d = 1;
  fam.z_limit = {y};
  fam.C_limit = Matrix::Constant(1, 1, c);
  fam.limit.d = 1;
  fam.limit.B = Matrix::Zero(1, 1);
  fam.limit.C = fam.C_limit;
  fam.limit.sigma = {0.5};

  std::vector<std::size_t> ns(n_values.begin(), n_values.end());
  std::sort(ns.begin(), ns.end());
  for (auto n : ns) {
    const double x = static_cast<double>(n);
    ScalingLevel l;
    l.n = n;
    l.a = x;
    l.b = {x * x};
    l.z = {static_cast<std::int64_t>(std::ceil(y * x))};
    l.C = Matrix::Constant(1, 1, c / (x * x));
    l.walks = {RandomWalkSpec{0, 1.0, {{{1}, 0.5}, {{-1}, 0.5}}}};
    fam.levels.push_back(std::move(l));
  }
  return validate_family(std::move(fam));
}

ContinuousPath rescaled_run(const ScalingFamily& fam, std::size_t n, double horizon, RandomStream& rng,
                            const EngineOptions& opts) {
  const auto& l = fam.level(n);
  auto drivers = make_time_change_drivers(l.walks, l.C, rng);
  const auto path = simulate_time_change(l.C, l.z, l.a * horizon, drivers, opts);
  ContinuousPath out;
  for (const auto& bp : path.breakpoints) {
    RealVec s(fam.d);
    for (std::size_t j = 0; j < fam.d; ++j) s[j] = static_cast<double>(bp.state[j]) * l.mass_scale(j);
    out.t.push_back(bp.t / l.a);
    out.states.push_back(std::move(s));
    out.jumped.push_back(out.t.size() > 1);
  }
  out.steps = path.breakpoints.size() - 1;
  if (out.t.back() < horizon) {
    // The last state holds until the horizon.
    out.t.push_back(horizon);
    out.states.push_back(out.states.back());
    out.jumped.push_back(false);
  }
  return out;
}

std::vector<std::vector<RealVec>> rescaled_marginals(const ScalingFamily& fam, std::size_t n,
                                                     std::span<const double> checkpoints, std::size_t n_paths,
                                                     const RandomStream& rng, std::size_t workers,
                                                     const EngineOptions& opts) {
  const auto& l = fam.level(n);
  const auto spec = l.model();
  RealVec raw(checkpoints.begin(), checkpoints.end());
  for (auto& t : raw) t *= l.a;
  std::vector<std::vector<RealVec>> out(n_paths);
  for_each_index(n_paths, workers, [&](std::size_t k) {
    auto stream = rng.child({stream_tag::path, k});
    std::vector<IntVec> states;
    if (fam.d == 1) {
      states = gillespie_at_aggregated(spec, l.z, raw, stream, opts);
    } else {
      auto drivers = make_time_change_drivers(l.walks, l.C, stream);
      states = time_change_at(l.C, l.z, raw, drivers, opts);
    }
    auto& row = out[k];
    row.reserve(states.size());
    for (const auto& s : states) {
      RealVec x(fam.d);
      for (std::size_t j = 0; j < fam.d; ++j) x[j] = static_cast<double>(s[j]) * l.mass_scale(j);
      row.push_back(std::move(x));
    }
  });
  return out;
}

namespace {

RealVec extract(const std::vector<std::vector<RealVec>>& m, std::size_t cp, std::size_t j, std::size_t d) {
  RealVec out(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (j < d) {
      out[k] = m[k][cp][j];
    } else {
      double s = 0.0;
      for (double v : m[k][cp]) s += v;
      out[k] = s;
    }
  }
  return out;
}

}  // namespace

ScalingExperimentReport scaling_convergence_experiment(const ScalingFamily& fam, std::span<const std::size_t> n_values,
                                                       const ContinuousModelSpec& reference,
                                                       const ScalingExperimentConfig& cfg, const RandomStream& rng) {
  validate_family(fam);
  validate_continuous(reference);
  const std::size_t d = fam.d;
  const std::size_t columns = d > 1 ? d + 1 : d;
  const std::size_t n_ref = cfg.reference_paths == 0 ? cfg.n_paths : cfg.reference_paths;

  const auto ref = euler_marginals(reference, fam.z_limit, cfg.checkpoints, cfg.reference_euler, n_ref,
                                   rng.child({stream_tag::reference}), cfg.workers);
  ScalingExperimentReport report;
  std::vector<std::vector<RealVec>> ref_columns(cfg.checkpoints.size());
  for (std::size_t cp = 0; cp < cfg.checkpoints.size(); ++cp) {
    std::vector<MeanEstimate> means;
    for (std::size_t j = 0; j < columns; ++j) {
      ref_columns[cp].push_back(extract(ref, cp, j, d));
      means.push_back(mean_estimate(ref_columns[cp].back()));
    }
    report.reference_mean.push_back(std::move(means));
  }

  for (auto n : n_values) {
    ScalingRow row;
    row.n = n;
    const auto start = std::chrono::steady_clock::now();
    const auto sample = rescaled_marginals(fam, n, cfg.checkpoints, cfg.n_paths,
                                           rng.child({stream_tag::experiment, n}), cfg.workers, cfg.engine);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto boot = rng.child({stream_tag::bootstrap, n});
    for (std::size_t cp = 0; cp < cfg.checkpoints.size(); ++cp) {
      RealVec w(columns);
      std::vector<Interval> ci(columns);
      std::vector<MeanEstimate> means(columns);
      for (std::size_t j = 0; j < columns; ++j) {
        const auto a = extract(sample, cp, j, d);
        w[j] = wasserstein1(a, ref_columns[cp][j]);
        ci[j] = bootstrap_w1_interval(a, ref_columns[cp][j], cfg.bootstrap_reps, cfg.confidence, boot);
        means[j] = mean_estimate(a);
      }
      std::size_t extinct = 0;
      for (const auto& p : sample) {
        if (std::all_of(p[cp].begin(), p[cp].end(), [](double v) { return v == 0.0; })) ++extinct;
      }
      row.w1.push_back(std::move(w));
      row.w1_ci.push_back(std::move(ci));
      row.mean.push_back(std::move(means));
      row.extinct_fraction.push_back(sample.empty() ? 0.0
                                                    : static_cast<double>(extinct) / static_cast<double>(sample.size()));
    }
    report.rows.push_back(std::move(row));
  }

  bool strict = report.rows.size() >= 2;
  bool weak = report.rows.size() >= 2;
  for (std::size_t r = 1; r < report.rows.size(); ++r) {
    const auto& prev = report.rows[r - 1];
    const auto& cur = report.rows[r];
    for (std::size_t cp = 0; cp < cfg.checkpoints.size(); ++cp) {
      for (std::size_t j = 0; j < columns; ++j) {
        if (!(cur.w1[cp][j] < prev.w1[cp][j] && cur.w1_ci[cp][j].upper < prev.w1_ci[cp][j].lower)) strict = false;
        if (!(cur.w1[cp][j] <= prev.w1_ci[cp][j].upper)) weak = false;
      }
    }
  }
  report.w1_strictly_decreasing = strict;
  report.w1_nonincreasing = weak;
  return report;
}

DifferenceReport lemma3_difference_experiment(const ScalingFamily& fam, std::span<const GridConfig> grids,
                                              std::size_t n, double horizon, std::size_t n_paths,
                                              const RandomStream& rng, std::size_t workers, const EngineOptions& opts) {
  validate_family(fam);
  for (const auto& g : grids) validate_grid(g);
  const auto& l = fam.level(n);
  const std::size_t d = fam.d;
  for (std::size_t j = 1; j < d; ++j) {
    if (l.b[j] != l.b[0])
      throw ValidationError({{ViolationCode::ScalingPremise, "levels.b",
                              "grid coupling needs one mass scale shared by all types"}});
  }
  std::vector<GridConfig> raw;
  for (const auto& g : grids) {
    // Rescaled population delta corresponds to delta * b_n / a_n raw individuals;
    // the frozen factor multiplies c_n, which carries the 1 / b_n.
    raw.push_back({g.epsilon * l.a, g.delta * l.b[0] / l.a});
  }
  const std::array<double, 1> until{l.a * horizon};

  // [grid][path][coordinate]
  std::vector<std::vector<RealVec>> diffs(grids.size(), std::vector<RealVec>(n_paths, RealVec(d, 0.0)));
  for_each_index(n_paths, workers, [&](std::size_t k) {
    const auto stream = rng.child({stream_tag::path, k});
    auto plain_drivers = make_time_change_drivers(l.walks, l.C, stream);
    const auto plain = time_change_at(l.C, l.z, until, plain_drivers, opts).front();
    for (std::size_t g = 0; g < raw.size(); ++g) {
      auto drivers = make_time_change_drivers(l.walks, l.C, stream);
      const auto gridded = time_change_at(l.C, l.z, until, drivers, opts, raw[g]).front();
      for (std::size_t j = 0; j < d; ++j)
        diffs[g][k][j] = l.mass_scale(j) * std::abs(static_cast<double>(plain[j] - gridded[j]));
    }
  });

  DifferenceReport report;
  report.n = n;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    DifferenceRow row;
    row.grid = grids[g];
    row.identical = std::all_of(diffs[g].begin(), diffs[g].end(), [](const RealVec& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    });
    for (std::size_t j = 0; j < d; ++j) {
      RealVec col(n_paths);
      for (std::size_t k = 0; k < n_paths; ++k) col[k] = diffs[g][k][j];
      row.difference.push_back(mean_estimate(col));
    }
    report.rows.push_back(std::move(row));
  }
  bool dec = report.rows.size() >= 2;
  for (std::size_t g = 1; g < report.rows.size(); ++g) {
    for (std::size_t j = 0; j < d; ++j) {
      if (!(report.rows[g].difference[j].mean < report.rows[g - 1].difference[j].mean)) dec = false;
    }
  }
  report.decreasing = dec;
  return report;
}

}  // namespace imbp
