#pragma once

// Divide-and-conquer Sobel test: fit the mediation system on J disjoint
// blocks, average the block products, combine the block Sobel variances and
// test every product with a Bonferroni-adjusted two-sided z-test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "medscale/dataset.hpp"
#include "medscale/error.hpp"
#include "medscale/mediation.hpp"
#include "medscale/parallel.hpp"
#include "medscale/stochastics.hpp"

namespace medscale {

struct DcConfig {
  std::int64_t blocks = 1;  // J
  std::uint64_t shuffle_seed = 1;
  /// Pre-randomised inputs may skip the shuffle; a single block never shuffles.
  bool shuffle = true;
  double significance = 0.05;
  unsigned threads = 1;

  void validate(std::int64_t n, std::int64_t regressors) const {
    require(blocks >= 1, ErrorKind::invalid_argument, "need at least one block");
    require(blocks <= n, ErrorKind::invalid_argument,
            "more blocks (" + std::to_string(blocks) + ") than rows (" + std::to_string(n) + ")");
    require(blocks <= n / (regressors + 2), ErrorKind::invalid_argument,
            "J=" + std::to_string(blocks) + " leaves blocks too small to fit " + std::to_string(regressors) +
                " regressors (max J=" + std::to_string(n / (regressors + 2)) + ")");
    require(significance > 0.0 && significance < 1.0, ErrorKind::invalid_argument, "significance must lie in (0, 1)");
  }
};

/// Per block j, per mediator k estimates; rows are blocks.
struct BlockEstimates {
  std::vector<std::vector<MediatorEstimate>> blocks;

  std::size_t block_count() const { return blocks.size(); }
  std::size_t mediator_count() const { return blocks.empty() ? 0 : blocks.front().size(); }
};

struct MediatorTest {
  double estimate = 0.0;
  double std_error = 0.0;
  double statistic = 0.0;
  /// 2d(1 - Phi(|T|)) as computed; may exceed 1.
  double p_value = 1.0;
  double p_value_capped = 1.0;
  bool rejected = false;
  /// Set when estimate and SE were both zero and the statistic was reported as 0.
  bool degenerate = false;
};

struct DcTestReport {
  std::int64_t n = 0;
  std::int64_t blocks = 1;
  std::uint64_t shuffle_seed = 0;
  bool shuffled = true;
  double significance = 0.05;
  std::vector<MediatorTest> mediators;
  std::vector<std::size_t> significant;  // 0-based indices of rejected mediators
  double seconds = 0.0;
};

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Bonferroni-adjusted two-sided p-value 2d(1 - Phi(|T|)).
inline double bonferroni_p_value(double statistic, std::size_t mediators) {
  return static_cast<double>(mediators) * std::erfc(std::abs(statistic) / std::sqrt(2.0));
}

/// Row-index blocks: shuffle (unless disabled or J=1), then split contiguously;
/// the first n mod J blocks carry one extra row.
inline std::vector<std::vector<std::int64_t>> partition_indices(std::int64_t n, std::int64_t blocks, bool shuffle,
                                                                std::uint64_t seed) {
  require(blocks >= 1 && blocks <= n, ErrorKind::invalid_argument,
          "block count must satisfy 1 <= J <= n (J=" + std::to_string(blocks) + ", n=" + std::to_string(n) + ")");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle && blocks > 1) {
    RngStream rng(seed, 0);
    for (std::int64_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::int64_t> pick(0, i);
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
  }
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(blocks));
  const std::int64_t base = n / blocks;
  const std::int64_t extra = n % blocks;
  auto it = order.begin();
  for (std::int64_t j = 0; j < blocks; ++j) {
    const std::int64_t size = base + (j < extra ? 1 : 0);
    out[static_cast<std::size_t>(j)].assign(it, it + size);
    it += size;
  }
  return out;
}

inline std::vector<Dataset> partition(const Dataset& data, const DcConfig& cfg) {
  data.validate();
  std::vector<Dataset> out;
  for (const auto& rows : partition_indices(data.rows(), cfg.blocks, cfg.shuffle, cfg.shuffle_seed)) {
    out.push_back(select_rows(data, rows));
  }
  return out;
}

/// Sobel test of each product from a fit's own estimate and Sobel SE.
inline MediatorTest sobel_test(double estimate, double std_error, std::size_t mediators, double significance) {
  MediatorTest t;
  t.estimate = estimate;
  t.std_error = std_error;
  if (std_error == 0.0) {
    require(estimate == 0.0, ErrorKind::numeric, "zero standard error with a nonzero estimate");
    t.degenerate = true;
    t.statistic = 0.0;
  } else {
    t.statistic = estimate / std_error;
  }
  t.p_value = bonferroni_p_value(t.statistic, mediators);
  t.p_value_capped = std::min(t.p_value, 1.0);
  t.rejected = t.p_value < significance;
  return t;
}

/// Averages block products and combines block Sobel SEs as
/// (1/J) sqrt(sum_j se_j^2), then tests each mediator.
inline DcTestReport aggregate(const BlockEstimates& estimates, double significance = 0.05) {
  const std::size_t blocks = estimates.block_count();
  const std::size_t d = estimates.mediator_count();
  require(blocks >= 1 && d >= 1, ErrorKind::invalid_argument, "empty block estimate grid");
  for (const auto& row : estimates.blocks) {
    require(row.size() == d, ErrorKind::invalid_argument, "block estimate grid is incomplete");
  }

  DcTestReport report;
  report.blocks = static_cast<std::int64_t>(blocks);
  report.significance = significance;
  const double jj = static_cast<double>(blocks);
  for (std::size_t k = 0; k < d; ++k) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& row : estimates.blocks) {
      sum += row[k].product;
      sum_sq += row[k].sobel_se * row[k].sobel_se;
    }
    const MediatorTest t = sobel_test(sum / jj, std::sqrt(sum_sq) / jj, d, significance);
    if (t.rejected) report.significant.push_back(k);
    report.mediators.push_back(t);
  }
  return report;
}

/// The ordinary (undivided) Sobel analysis on all rows.
inline DcTestReport full_sobel_analysis(const Dataset& data, OutcomeKind kind, double significance = 0.05) {
  const MediationFit fit = fit_mediation(data, kind);
  DcTestReport report;
  report.n = data.rows();
  report.blocks = 1;
  report.shuffled = false;
  report.significance = significance;
  const std::size_t d = fit.mediators.size();
  for (std::size_t k = 0; k < d; ++k) {
    const MediatorTest t = sobel_test(fit.mediators[k].product, fit.mediators[k].sobel_se, d, significance);
    if (t.rejected) report.significant.push_back(k);
    report.mediators.push_back(t);
  }
  return report;
}

/// partition -> per-block fit_mediation -> aggregate.
inline DcTestReport run_dc_sobel(const Dataset& data, OutcomeKind kind, const DcConfig& cfg) {
  data.validate();
  cfg.validate(data.rows(), data.outcome_regressors());
  const auto start = std::chrono::steady_clock::now();
  const auto blocks = partition_indices(data.rows(), cfg.blocks, cfg.shuffle, cfg.shuffle_seed);

  BlockEstimates grid;
  grid.blocks.resize(blocks.size());
  parallel_for(blocks.size(), cfg.threads, [&](std::size_t j) {
    try {
      const Dataset block = blocks.size() == 1 ? data : select_rows(data, blocks[j]);
      grid.blocks[j] = fit_mediation(block, kind).mediators;
    } catch (const Error& e) {
      throw e.with_context("block " + std::to_string(j));
    }
  });

  DcTestReport report = aggregate(grid, cfg.significance);
  report.n = data.rows();
  report.shuffle_seed = cfg.shuffle_seed;
  report.shuffled = cfg.shuffle && cfg.blocks > 1;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace medscale
