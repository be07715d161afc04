#pragma once

// Per-repetition study records and the pure reductions that turn them into
// coverage, interval length, bias, MSE, power and FWER summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "medscale/error.hpp"
#include "medscale/sdb.hpp"

namespace medscale::harness {

// ---------------------------------------------------------------------------
// Confidence-interval study

struct CiMethodRecord {
  std::vector<double> estimate;
  std::vector<Interval> single;
  std::vector<Interval> adjusted;
  std::int64_t failed_replicates = 0;
  double full_fit_seconds = 0.0;
  double replicate_seconds = 0.0;
};

struct CiRepRecord {
  std::int64_t repetition = 0;
  CiMethodRecord sdb;
  std::optional<CiMethodRecord> bootstrap;
};

struct CiMethodSummary {
  std::vector<double> coverage_single;
  std::vector<double> coverage_adjusted;
  std::vector<double> mean_length_single;
  std::vector<double> mean_length_adjusted;
  std::vector<double> bias;
  std::vector<double> mse;
  /// Fraction of repetitions in which every adjusted interval covered its product.
  double simultaneous_coverage_adjusted = 0.0;
  std::int64_t failed_replicates = 0;
  double mean_full_fit_seconds = 0.0;
  double mean_replicate_seconds = 0.0;
};

struct CiStudySummary {
  std::int64_t repetitions = 0;
  std::vector<double> truth;
  CiMethodSummary sdb;
  std::optional<CiMethodSummary> bootstrap;
};

inline CiMethodSummary summarize_method(const std::vector<const CiMethodRecord*>& recs,
                                        const std::vector<double>& truth) {
  const std::size_t d = truth.size();
  const double reps = static_cast<double>(recs.size());
  CiMethodSummary s;
  s.coverage_single.assign(d, 0.0);
  s.coverage_adjusted.assign(d, 0.0);
  s.mean_length_single.assign(d, 0.0);
  s.mean_length_adjusted.assign(d, 0.0);
  s.bias.assign(d, 0.0);
  s.mse.assign(d, 0.0);
  std::int64_t all_covered = 0;
  for (const auto* r : recs) {
    require(r->estimate.size() == d && r->single.size() == d && r->adjusted.size() == d, ErrorKind::invalid_argument,
            "record mediator count does not match truth");
    bool every = true;
    for (std::size_t k = 0; k < d; ++k) {
      s.coverage_single[k] += r->single[k].contains(truth[k]) ? 1.0 : 0.0;
      const bool adj = r->adjusted[k].contains(truth[k]);
      s.coverage_adjusted[k] += adj ? 1.0 : 0.0;
      every = every && adj;
      s.mean_length_single[k] += r->single[k].length();
      s.mean_length_adjusted[k] += r->adjusted[k].length();
      const double err = r->estimate[k] - truth[k];
      s.bias[k] += err;
      s.mse[k] += err * err;
    }
    all_covered += every ? 1 : 0;
    s.failed_replicates += r->failed_replicates;
    s.mean_full_fit_seconds += r->full_fit_seconds;
    s.mean_replicate_seconds += r->replicate_seconds;
  }
  for (auto* v : {&s.coverage_single, &s.coverage_adjusted, &s.mean_length_single, &s.mean_length_adjusted, &s.bias,
                  &s.mse}) {
    for (auto& x : *v) x /= reps;
  }
  s.simultaneous_coverage_adjusted = static_cast<double>(all_covered) / reps;
  s.mean_full_fit_seconds /= reps;
  s.mean_replicate_seconds /= reps;
  return s;
}

inline CiStudySummary summarize_ci(const std::vector<CiRepRecord>& records, const std::vector<double>& truth) {
  require(!records.empty(), ErrorKind::invalid_argument, "no repetitions to summarize");
  CiStudySummary out;
  out.repetitions = static_cast<std::int64_t>(records.size());
  out.truth = truth;
  std::vector<const CiMethodRecord*> sdb, boot;
  for (const auto& r : records) {
    sdb.push_back(&r.sdb);
    if (r.bootstrap) boot.push_back(&*r.bootstrap);
  }
  out.sdb = summarize_method(sdb, truth);
  if (!boot.empty()) {
    require(boot.size() == records.size(), ErrorKind::invalid_argument, "baseline missing from some repetitions");
    out.bootstrap = summarize_method(boot, truth);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Divide-and-conquer testing study

struct TestBlockRecord {
  std::int64_t blocks = 1;
  std::vector<double> estimate;
  std::vector<double> std_error;
  std::vector<double> p_value;
  std::vector<bool> rejected;
  double seconds = 0.0;
};

struct TestRepRecord {
  std::int64_t repetition = 0;
  std::vector<TestBlockRecord> by_blocks;
};

struct TestBlockSummary {
  std::int64_t blocks = 1;
  std::vector<double> bias;
  std::vector<double> mse;
  /// Monte-Carlo standard error of the mean estimate: sd / sqrt(reps).
  std::vector<double> bias_mc_se;
  std::vector<double> rejection_rate;
  /// Mean rejection rate over the signal set; NaN when the signal set is empty.
  double power = std::numeric_limits<double>::quiet_NaN();
  double fwer = 0.0;
  double mean_seconds = 0.0;
};

struct TestStudySummary {
  std::int64_t repetitions = 0;
  std::vector<double> truth;
  std::vector<std::size_t> signal;  // Omega
  std::vector<TestBlockSummary> by_blocks;
};

inline TestStudySummary summarize_test(const std::vector<TestRepRecord>& records, const std::vector<double>& truth) {
  require(!records.empty(), ErrorKind::invalid_argument, "no repetitions to summarize");
  const std::size_t d = truth.size();
  const double reps = static_cast<double>(records.size());
  TestStudySummary out;
  out.repetitions = static_cast<std::int64_t>(records.size());
  out.truth = truth;
  std::vector<bool> is_signal(d, false);
  for (std::size_t k = 0; k < d; ++k) {
    if (truth[k] != 0.0) {
      out.signal.push_back(k);
      is_signal[k] = true;
    }
  }

  const std::size_t configs = records.front().by_blocks.size();
  for (std::size_t c = 0; c < configs; ++c) {
    TestBlockSummary s;
    s.blocks = records.front().by_blocks[c].blocks;
    s.bias.assign(d, 0.0);
    s.mse.assign(d, 0.0);
    s.bias_mc_se.assign(d, 0.0);
    s.rejection_rate.assign(d, 0.0);
    std::vector<double> sum_sq_dev(d, 0.0);
    std::int64_t family_errors = 0;
    for (const auto& rec : records) {
      require(rec.by_blocks.size() == configs, ErrorKind::invalid_argument, "records disagree on block settings");
      const auto& b = rec.by_blocks[c];
      require(b.blocks == s.blocks && b.estimate.size() == d, ErrorKind::invalid_argument, "inconsistent record");
      bool false_rejection = false;
      for (std::size_t k = 0; k < d; ++k) {
        const double err = b.estimate[k] - truth[k];
        s.bias[k] += err;
        s.mse[k] += err * err;
        s.rejection_rate[k] += b.rejected[k] ? 1.0 : 0.0;
        false_rejection = false_rejection || (!is_signal[k] && b.rejected[k]);
      }
      family_errors += false_rejection ? 1 : 0;
      s.mean_seconds += b.seconds;
    }
    for (std::size_t k = 0; k < d; ++k) {
      s.bias[k] /= reps;
      s.mse[k] /= reps;
      s.rejection_rate[k] /= reps;
    }
    // Second pass for the spread of the estimates around their mean.
    for (const auto& rec : records) {
      const auto& b = rec.by_blocks[c];
      for (std::size_t k = 0; k < d; ++k) {
        const double dev = b.estimate[k] - (truth[k] + s.bias[k]);
        sum_sq_dev[k] += dev * dev;
      }
    }
    for (std::size_t k = 0; k < d; ++k) {
      const double var = reps > 1 ? sum_sq_dev[k] / (reps - 1.0) : 0.0;
      s.bias_mc_se[k] = std::sqrt(var / reps);
    }
    if (!out.signal.empty()) {
      double total = 0.0;
      for (auto k : out.signal) total += s.rejection_rate[k];
      s.power = total / static_cast<double>(out.signal.size());
    }
    s.fwer = static_cast<double>(family_errors) / reps;
    s.mean_seconds /= reps;
    out.by_blocks.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timing study

struct TimingSample {
  std::string method;
  std::vector<double> seconds;            // per repetition, method only
  std::vector<double> replicate_seconds;  // resampling loop only (sdb/bootstrap)
};

struct TimingSummary {
  std::string method;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  double mean_replicate_seconds = 0.0;
  double median_replicate_seconds = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline TimingSummary summarize_timing(const TimingSample& sample) {
  TimingSummary s;
  s.method = sample.method;
  s.mean_seconds = mean_of(sample.seconds);
  s.median_seconds = median_of(sample.seconds);
  s.mean_replicate_seconds = mean_of(sample.replicate_seconds);
  s.median_replicate_seconds = median_of(sample.replicate_seconds);
  return s;
}

}  // namespace medscale::harness
