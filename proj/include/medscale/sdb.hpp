#pragma once

// Subsampled double bootstrap (SDB) confidence intervals for every mediation
// product, plus the conventional n-out-of-n percentile bootstrap used as the
// comparison baseline.
//
// Replicate s owns RngStream(master_seed, s); retries use stream ids with the
// attempt number in the high bits. Results are merged by replicate index, so a
// report depends only on (data, config), never on the thread count.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medscale/dataset.hpp"
#include "medscale/error.hpp"
#include "medscale/mediation.hpp"
#include "medscale/parallel.hpp"
#include "medscale/stochastics.hpp"

namespace medscale {

/// Centre of each replicate root sqrt(n) (p* - centre). `subset` uses the
/// unweighted estimate on that replicate's b rows; `full_data` uses the
/// estimate on all n rows.
enum class RootCentering { subset, full_data };

inline std::string to_string(RootCentering c) { return c == RootCentering::subset ? "subset" : "full_data"; }

inline RootCentering parse_root_centering(const std::string& text) {
  if (text == "subset") return RootCentering::subset;
  if (text == "full_data" || text == "full") return RootCentering::full_data;
  fail(ErrorKind::invalid_argument, "unknown root centering '" + text + "' (expected subset or full_data)");
}

struct SdbConfig {
  /// b = floor(n^subset_exponent) unless `subset_size` is set.
  double subset_exponent = 0.7;
  std::optional<std::int64_t> subset_size;
  std::int64_t replicates = 500;
  double level = 0.05;  // delta
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  RootCentering centering = RootCentering::subset;
  /// Retries per replicate after a failed fit, each on a fresh sub-stream.
  int max_retries = 3;
  /// Largest tolerated fraction of replicates that failed every attempt.
  double max_failure_fraction = 0.05;

  std::int64_t resolve_subset(std::int64_t n) const {
    const std::int64_t b = subset_size ? *subset_size : subset_size_for(n);
    require(b > 1 && b <= n, ErrorKind::invalid_argument,
            "resolved subset size b=" + std::to_string(b) + " must satisfy 1 < b <= n=" + std::to_string(n));
    return b;
  }

  void validate() const {
    require(replicates >= 2, ErrorKind::invalid_argument, "need at least 2 replicates");
    require(level > 0.0 && level < 1.0, ErrorKind::invalid_argument, "level must lie in (0, 1)");
    require(max_retries >= 0, ErrorKind::invalid_argument, "max_retries must be non-negative");
  }

 private:
  std::int64_t subset_size_for(std::int64_t n) const { return medscale::subset_size(n, subset_exponent); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
};

struct MediatorInterval {
  double estimate = 0.0;  // full-data alpha_k * beta_k
  Interval single;
  Interval adjusted;
  /// Quantiles behind the intervals: roots for SDB, products for the percentile bootstrap.
  double q_lower_single = 0.0;
  double q_upper_single = 0.0;
  double q_lower_adjusted = 0.0;
  double q_upper_adjusted = 0.0;
};

/// Per-mediator replicate statistics, in replicate order (failed replicates omitted).
struct RootStatistics {
  std::vector<std::vector<double>> values;
};

struct IntervalReport {
  std::string method;  // "sdb" or "bootstrap"
  std::string centering;  // sdb only
  std::int64_t n = 0;
  std::int64_t subset_size = 0;
  std::int64_t replicates = 0;
  double level = 0.05;
  std::uint64_t master_seed = 0;
  std::int64_t failed_replicates = 0;
  std::int64_t retried_attempts = 0;
  std::vector<MediatorInterval> mediators;
  MediationFit full_fit;
  RootStatistics replicate_statistics;
  double full_fit_seconds = 0.0;
  double replicate_seconds = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline std::uint64_t attempt_stream(std::int64_t replicate, int attempt) {
  return static_cast<std::uint64_t>(replicate) | (static_cast<std::uint64_t>(attempt) << 48);
}

struct ReplicateOutcome {
  std::vector<double> products;
  int failed_attempts = 0;
  bool ok = false;
};

/// Runs `draw(rng)` -> products for S replicates with the retry policy, then
/// enforces the failure budget. Returns successful products by replicate index.
template <typename Draw>
std::vector<ReplicateOutcome> run_replicates(const SdbConfig& cfg, Draw&& draw) {
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(cfg.replicates));
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t s) {
    auto& out = outcomes[s];
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      RngStream rng(cfg.master_seed, attempt_stream(static_cast<std::int64_t>(s), attempt));
      try {
        out.products = draw(rng);
        out.ok = true;
        return;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular_design && e.kind() != ErrorKind::separation &&
            e.kind() != ErrorKind::numeric) {
          throw;
        }
        ++out.failed_attempts;
      }
    }
  });

  std::int64_t failed = 0;
  for (const auto& o : outcomes) failed += o.ok ? 0 : 1;
  const double allowed = cfg.max_failure_fraction * static_cast<double>(cfg.replicates);
  if (static_cast<double>(failed) > allowed) {
    fail(ErrorKind::engine, std::to_string(failed) + " of " + std::to_string(cfg.replicates) +
                                " replicates failed every attempt (limit " +
                                std::to_string(cfg.max_failure_fraction * 100.0) + "%)");
  }
  return outcomes;
}

inline std::vector<double> products_of(const MediationFit& fit) {
  std::vector<double> out;
  out.reserve(fit.mediators.size());
  for (const auto& m : fit.mediators) out.push_back(m.product);
  return out;
}

inline void tally(IntervalReport& report, const std::vector<ReplicateOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    report.failed_replicates += o.ok ? 0 : 1;
    report.retried_attempts += o.failed_attempts;
  }
}

}  // namespace detail

/// Root-function intervals: for each mediator,
///   single   = [est - q(1 - delta/2)/sqrt(n),      est - q(delta/2)/sqrt(n)]
///   adjusted = [est - q(1 - delta/(2d))/sqrt(n),   est - q(delta/(2d))/sqrt(n)]
/// where q are empirical quantiles of that mediator's roots.
inline std::vector<MediatorInterval> intervals_from_roots(const std::vector<double>& estimates,
                                                          const RootStatistics& roots, std::int64_t n, double level) {
  require(roots.values.size() == estimates.size(), ErrorKind::invalid_argument, "root/estimate counts differ");
  const double d = static_cast<double>(estimates.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<MediatorInterval> out(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& t = roots.values[k];
    auto& iv = out[k];
    iv.estimate = estimates[k];
    iv.q_lower_single = empirical_quantile(t, level / 2.0);
    iv.q_upper_single = empirical_quantile(t, 1.0 - level / 2.0);
    iv.q_lower_adjusted = empirical_quantile(t, level / (2.0 * d));
    iv.q_upper_adjusted = empirical_quantile(t, 1.0 - level / (2.0 * d));
    iv.single = {iv.estimate - scale * iv.q_upper_single, iv.estimate - scale * iv.q_lower_single};
    iv.adjusted = {iv.estimate - scale * iv.q_upper_adjusted, iv.estimate - scale * iv.q_lower_adjusted};
  }
  return out;
}

/// Percentile intervals [q(delta/2), q(1 - delta/2)] of resampled products
/// (and the delta/(2d) adjusted version).
inline std::vector<MediatorInterval> percentile_intervals(const std::vector<double>& estimates,
                                                          const RootStatistics& products, double level) {
  require(products.values.size() == estimates.size(), ErrorKind::invalid_argument, "product/estimate counts differ");
  const double d = static_cast<double>(estimates.size());
  std::vector<MediatorInterval> out(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& p = products.values[k];
    auto& iv = out[k];
    iv.estimate = estimates[k];
    iv.q_lower_single = empirical_quantile(p, level / 2.0);
    iv.q_upper_single = empirical_quantile(p, 1.0 - level / 2.0);
    iv.q_lower_adjusted = empirical_quantile(p, level / (2.0 * d));
    iv.q_upper_adjusted = empirical_quantile(p, 1.0 - level / (2.0 * d));
    iv.single = {iv.q_lower_single, iv.q_upper_single};
    iv.adjusted = {iv.q_lower_adjusted, iv.q_upper_adjusted};
  }
  return out;
}

/// SDB confidence intervals for all d products alpha_k * beta_k.
inline IntervalReport run_sdb(const Dataset& data, OutcomeKind kind, const SdbConfig& cfg) {
  cfg.validate();
  data.validate();
  const std::int64_t n = data.rows();
  const std::int64_t b = cfg.resolve_subset(n);

  IntervalReport report;
  report.method = "sdb";
  report.centering = to_string(cfg.centering);
  report.n = n;
  report.subset_size = b;
  report.replicates = cfg.replicates;
  report.level = cfg.level;
  report.master_seed = cfg.master_seed;

  auto start = detail::Clock::now();
  report.full_fit = fit_mediation(data, kind);
  report.full_fit_seconds = detail::seconds_since(start);
  const std::vector<double> estimates = detail::products_of(report.full_fit);

  start = detail::Clock::now();
  const auto outcomes = detail::run_replicates(cfg, [&](RngStream& rng) {
    const SubsetDraw subset = sample_without_replacement(n, b, rng);
    const ResampleWeights weights = multinomial_uniform(n, b, rng);
    const MediationDesign design = MediationDesign::gather(data, subset.indices);
    if (kind == OutcomeKind::binary) {
      const double ones = design.outcome.sum();
      if (ones == 0.0 || ones == static_cast<double>(b)) fail(ErrorKind::separation, "subset carries a single outcome class");
    }
    std::vector<double> centre = estimates;
    LogisticOptions opts;
    if (cfg.centering == RootCentering::subset) {
      const MediationFit sub = fit_mediation(design, kind);
      centre = detail::products_of(sub);
      opts.start = sub.outcome_fit.coefficients;
    } else {
      opts.start = report.full_fit.outcome_fit.coefficients;
    }
    std::vector<double> diff = detail::products_of(fit_mediation(design, kind, weights.weights, opts));
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= centre[k];
    return diff;
  });
  report.replicate_seconds = detail::seconds_since(start);
  detail::tally(report, outcomes);

  const double root_n = std::sqrt(static_cast<double>(n));
  auto& roots = report.replicate_statistics.values;
  roots.assign(estimates.size(), {});
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    for (std::size_t k = 0; k < estimates.size(); ++k) roots[k].push_back(root_n * o.products[k]);
  }
  report.mediators = intervals_from_roots(estimates, report.replicate_statistics, n, cfg.level);
  return report;
}

/// Conventional percentile bootstrap: S resamples of size n drawn with
/// replacement from all rows (as multinomial frequencies over the n rows).
inline IntervalReport run_full_bootstrap(const Dataset& data, OutcomeKind kind, std::int64_t replicates, double level,
                                         std::uint64_t seed, unsigned threads = 1) {
  data.validate();
  SdbConfig cfg;
  cfg.replicates = replicates;
  cfg.level = level;
  cfg.master_seed = seed;
  cfg.threads = threads;
  cfg.validate();
  const std::int64_t n = data.rows();

  IntervalReport report;
  report.method = "bootstrap";
  report.n = n;
  report.subset_size = n;
  report.replicates = replicates;
  report.level = level;
  report.master_seed = seed;

  auto start = detail::Clock::now();
  report.full_fit = fit_mediation(data, kind);
  report.full_fit_seconds = detail::seconds_since(start);
  const std::vector<double> estimates = detail::products_of(report.full_fit);

  start = detail::Clock::now();
  const auto outcomes = detail::run_replicates(cfg, [&](RngStream& rng) {
    const ResampleWeights counts = bootstrap_counts(n, rng);
    std::vector<std::int64_t> rows, weights;
    for (std::int64_t i = 0; i < n; ++i) {
      const auto w = counts.weights[static_cast<std::size_t>(i)];
      if (w == 0) continue;
      rows.push_back(i);
      weights.push_back(w);
    }
    LogisticOptions opts;
    opts.start = report.full_fit.outcome_fit.coefficients;
    return detail::products_of(fit_mediation_weighted(data, kind, rows, weights, opts));
  });
  report.replicate_seconds = detail::seconds_since(start);
  detail::tally(report, outcomes);

  auto& products = report.replicate_statistics.values;
  products.assign(estimates.size(), {});
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    for (std::size_t k = 0; k < estimates.size(); ++k) products[k].push_back(o.products[k]);
  }
  report.mediators = percentile_intervals(estimates, report.replicate_statistics, level);
  return report;
}

}  // namespace medscale
