#pragma once

// Monte-Carlo study orchestration. Repetition r generates its dataset from
// RngStream(seed, r) and derives every engine seed from (seed, r), so studies
// are reproducible and independent of the thread budget.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medscale/dc.hpp"
#include "medscale/error.hpp"
#include "medscale/harness/metrics.hpp"
#include "medscale/parallel.hpp"
#include "medscale/sdb.hpp"
#include "medscale/simgen.hpp"

namespace medscale::harness {

inline std::uint64_t derived_seed(std::uint64_t seed, std::int64_t repetition, std::uint64_t purpose) {
  return medscale::detail::splitmix64(medscale::detail::splitmix64(seed) ^
                                      medscale::detail::splitmix64(static_cast<std::uint64_t>(repetition) * 8 + purpose));
}

inline SimScenario scenario_with_n(const std::string& key, std::int64_t n, NormalReading reading) {
  SimScenario s = lookup_scenario(key, reading);
  s.n = n;
  return s;
}

inline std::vector<double> true_products(const SimScenario& s) {
  const Eigen::VectorXd p = s.params.products();
  return {p.data(), p.data() + p.size()};
}

// ---------------------------------------------------------------------------

struct CiStudyConfig {
  std::string scenario = "ci/linear/case1";
  std::int64_t n = 10000;
  std::int64_t replicates = 500;  // S
  std::int64_t repetitions = 200;
  double subset_exponent = 0.7;
  std::optional<std::int64_t> subset_size;
  double level = 0.05;
  std::uint64_t seed = 1;
  bool baseline = false;
  RootCentering centering = RootCentering::subset;
  unsigned threads = 1;
  NormalReading reading = NormalReading::variance;
};

struct CiStudyResult {
  CiStudyConfig config;
  std::vector<CiRepRecord> records;
  CiStudySummary summary;
};

inline CiMethodRecord method_record(const IntervalReport& report) {
  CiMethodRecord rec;
  for (const auto& m : report.mediators) {
    rec.estimate.push_back(m.estimate);
    rec.single.push_back(m.single);
    rec.adjusted.push_back(m.adjusted);
  }
  rec.failed_replicates = report.failed_replicates;
  rec.full_fit_seconds = report.full_fit_seconds;
  rec.replicate_seconds = report.replicate_seconds;
  return rec;
}

/// Coverage and length study of SDB intervals (and optionally the full percentile bootstrap).
inline CiStudyResult run_ci_study(const CiStudyConfig& cfg) {
  require(cfg.repetitions >= 1, ErrorKind::invalid_argument, "need at least one repetition");
  const SimScenario scenario = scenario_with_n(cfg.scenario, cfg.n, cfg.reading);
  const OutcomeKind kind = scenario.params.outcome_kind;

  CiStudyResult result;
  result.config = cfg;
  result.records.resize(static_cast<std::size_t>(cfg.repetitions));
  parallel_for(result.records.size(), cfg.threads, [&](std::size_t i) {
    const auto rep = static_cast<std::int64_t>(i);
    try {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(rep));
      const Dataset data = generate(scenario, rng);

      SdbConfig sdb;
      sdb.subset_exponent = cfg.subset_exponent;
      sdb.subset_size = cfg.subset_size;
      sdb.replicates = cfg.replicates;
      sdb.level = cfg.level;
      sdb.master_seed = derived_seed(cfg.seed, rep, 1);
      sdb.centering = cfg.centering;
      auto& rec = result.records[i];
      rec.repetition = rep;
      rec.sdb = method_record(run_sdb(data, kind, sdb));
      if (cfg.baseline) {
        rec.bootstrap = method_record(
            run_full_bootstrap(data, kind, cfg.replicates, cfg.level, derived_seed(cfg.seed, rep, 2)));
      }
    } catch (const Error& e) {
      throw e.with_context("repetition " + std::to_string(rep));
    }
  });
  result.summary = summarize_ci(result.records, true_products(scenario));
  return result;
}

// ---------------------------------------------------------------------------

struct TestStudyConfig {
  std::string scenario = "test/linear/case1";
  std::int64_t n = 10000;
  std::vector<std::int64_t> blocks = {1, 5, 50, 100};
  std::int64_t repetitions = 200;
  double significance = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  NormalReading reading = NormalReading::variance;
};

struct TestStudyResult {
  TestStudyConfig config;
  std::vector<TestRepRecord> records;
  TestStudySummary summary;
};

/// Bias, MSE, power and FWER of the divide-and-conquer Sobel test across block counts.
inline TestStudyResult run_test_study(const TestStudyConfig& cfg) {
  require(cfg.repetitions >= 1, ErrorKind::invalid_argument, "need at least one repetition");
  require(!cfg.blocks.empty(), ErrorKind::invalid_argument, "need at least one block count");
  const SimScenario scenario = scenario_with_n(cfg.scenario, cfg.n, cfg.reading);
  const OutcomeKind kind = scenario.params.outcome_kind;

  TestStudyResult result;
  result.config = cfg;
  result.records.resize(static_cast<std::size_t>(cfg.repetitions));
  parallel_for(result.records.size(), cfg.threads, [&](std::size_t i) {
    const auto rep = static_cast<std::int64_t>(i);
    try {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(rep));
      const Dataset data = generate(scenario, rng);
      auto& rec = result.records[i];
      rec.repetition = rep;
      for (const auto j : cfg.blocks) {
        DcConfig dc;
        dc.blocks = j;
        dc.shuffle_seed = derived_seed(cfg.seed, rep, 3);
        dc.significance = cfg.significance;
        const DcTestReport report = run_dc_sobel(data, kind, dc);
        TestBlockRecord b;
        b.blocks = j;
        for (const auto& m : report.mediators) {
          b.estimate.push_back(m.estimate);
          b.std_error.push_back(m.std_error);
          b.p_value.push_back(m.p_value);
          b.rejected.push_back(m.rejected);
        }
        b.seconds = report.seconds;
        rec.by_blocks.push_back(std::move(b));
      }
    } catch (const Error& e) {
      throw e.with_context("repetition " + std::to_string(rep));
    }
  });
  result.summary = summarize_test(result.records, true_products(scenario));
  return result;
}

// ---------------------------------------------------------------------------

struct TimingConfig {
  std::string scenario = "timing/linear/d5";
  std::int64_t n = 100000;
  /// "sdb", "bootstrap", or "dc:J" (one node's share: a Sobel analysis of n/J rows).
  std::vector<std::string> methods = {"sdb", "bootstrap"};
  std::int64_t repetitions = 10;
  std::int64_t replicates = 500;
  double subset_exponent = 0.7;
  std::optional<std::int64_t> subset_size;
  double level = 0.05;
  std::uint64_t seed = 1;
  RootCentering centering = RootCentering::subset;
  NormalReading reading = NormalReading::variance;
  /// Workers for the SDB and bootstrap replicate loops. DC timing is always one node.
  unsigned threads = 1;
};

struct TimingResult {
  TimingConfig config;
  std::vector<TimingSample> samples;
  std::vector<TimingSummary> summary;
};

inline std::int64_t parse_dc_blocks(const std::string& method) {
  require(method.rfind("dc:", 0) == 0, ErrorKind::invalid_argument, "unknown timing method '" + method + "'");
  try {
    const long long j = std::stoll(method.substr(3));
    require(j >= 1, ErrorKind::invalid_argument, "dc block count must be >= 1");
    return j;
  } catch (const std::logic_error&) {
    fail(ErrorKind::invalid_argument, "bad dc block count in '" + method + "'");
  }
}

/// Wall-clock cost of each method, excluding data generation. Runs single-threaded.
inline TimingResult run_timing(const TimingConfig& cfg) {
  require(cfg.repetitions >= 1, ErrorKind::invalid_argument, "need at least one repetition");
  TimingResult result;
  result.config = cfg;
  for (const auto& method : cfg.methods) {
    TimingSample sample;
    sample.method = method;
    const bool is_dc = method != "sdb" && method != "bootstrap";
    const std::int64_t blocks = is_dc ? parse_dc_blocks(method) : 1;
    const SimScenario scenario = scenario_with_n(cfg.scenario, cfg.n / blocks, cfg.reading);
    const OutcomeKind kind = scenario.params.outcome_kind;
    for (std::int64_t rep = 0; rep < cfg.repetitions; ++rep) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(rep));
      const Dataset data = generate(scenario, rng);
      const auto start = std::chrono::steady_clock::now();
      double loop_seconds = 0.0;
      if (method == "sdb") {
        SdbConfig sdb;
        sdb.subset_exponent = cfg.subset_exponent;
        sdb.subset_size = cfg.subset_size;
        sdb.replicates = cfg.replicates;
        sdb.level = cfg.level;
        sdb.master_seed = derived_seed(cfg.seed, rep, 1);
        sdb.centering = cfg.centering;
        sdb.threads = cfg.threads;
        loop_seconds = run_sdb(data, kind, sdb).replicate_seconds;
      } else if (method == "bootstrap") {
        loop_seconds =
            run_full_bootstrap(data, kind, cfg.replicates, cfg.level, derived_seed(cfg.seed, rep, 2), cfg.threads)
                .replicate_seconds;
      } else {
        // One node's work: the undivided analysis of its n/J block, then the J-way reduction.
        const MediationFit fit = fit_mediation(data, kind);
        BlockEstimates grid;
        grid.blocks.assign(static_cast<std::size_t>(blocks), fit.mediators);
        (void)aggregate(grid);
      }
      sample.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      if (!is_dc) sample.replicate_seconds.push_back(loop_seconds);
    }
    result.summary.push_back(summarize_timing(sample));
    result.samples.push_back(std::move(sample));
  }
  return result;
}

}  // namespace medscale::harness
