#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "catch_amalgamated.hpp"

#include "medscale/sdb.hpp"
#include "medscale/simgen.hpp"

using namespace medscale;
using Catch::Approx;

namespace {

Dataset simulate(const std::string& key, std::int64_t n, std::uint64_t seed) {
  SimScenario s = lookup_scenario(key);
  s.n = n;
  RngStream rng(seed, 0);
  return generate(s, rng);
}

/// y = 0.6 m + e, m = 0.8 x + e, no covariates.
Dataset single_mediator(std::int64_t n, std::uint64_t seed) {
  SimScenario s;
  s.n = n;
  auto& p = s.params;
  p.c = 0.0;
  p.gamma = 0.0;
  p.alpha = Eigen::VectorXd::Constant(1, 0.8);
  p.beta = Eigen::VectorXd::Constant(1, 0.6);
  p.c_k = Eigen::VectorXd::Zero(1);
  p.theta.resize(0);
  p.eta.resize(1, 0);
  p.sigma_e = Eigen::MatrixXd::Identity(1, 1);
  p.sigma_eps = 1.0;
  RngStream rng(seed, 0);
  return generate(s, rng);
}

bool same_intervals(const IntervalReport& a, const IntervalReport& b) {
  if (a.mediators.size() != b.mediators.size()) return false;
  for (std::size_t k = 0; k < a.mediators.size(); ++k) {
    const auto& x = a.mediators[k];
    const auto& y = b.mediators[k];
    if (x.estimate != y.estimate || x.single.lo != y.single.lo || x.single.hi != y.single.hi ||
        x.adjusted.lo != y.adjusted.lo || x.adjusted.hi != y.adjusted.hi)
      return false;
  }
  return a.replicate_statistics.values == b.replicate_statistics.values;
}

}  // namespace

TEST_CASE("intervals_from_roots") {
  SECTION("zero roots collapse both intervals onto the estimate") {
    RootStatistics roots;
    roots.values.assign(3, std::vector<double>(50, 0.0));
    const auto iv = intervals_from_roots({0.1, -0.2, 0.0}, roots, 10000, 0.05);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(iv[k].single.lo == iv[k].estimate);
      CHECK(iv[k].single.hi == iv[k].estimate);
      CHECK(iv[k].adjusted.lo == iv[k].estimate);
      CHECK(iv[k].adjusted.hi == iv[k].estimate);
    }
  }

  SECTION("hand example with roots 1..100") {
    RootStatistics roots;
    roots.values.emplace_back(100);
    std::iota(roots.values[0].begin(), roots.values[0].end(), 1.0);
    const auto iv = intervals_from_roots({5.0}, roots, 100, 0.05);
    // q(0.025) = 3, q(0.975) = 98, scale 1/10.
    CHECK(iv[0].single.lo == Approx(5.0 - 9.8).margin(1e-12));
    CHECK(iv[0].single.hi == Approx(5.0 - 0.3).margin(1e-12));
    // d = 1: adjusted equals single.
    CHECK(iv[0].adjusted.lo == iv[0].single.lo);
    CHECK(iv[0].adjusted.hi == iv[0].single.hi);
  }

  SECTION("adjusted contains single") {
    RngStream rng(4, 4);
    std::normal_distribution<double> normal;
    RootStatistics roots;
    roots.values.assign(5, std::vector<double>(400));
    for (auto& r : roots.values)
      for (auto& v : r) v = normal(rng);
    const auto iv = intervals_from_roots({0, 1, 2, 3, 4}, roots, 1000, 0.05);
    for (const auto& m : iv) {
      CHECK(m.single.lo <= m.single.hi);
      CHECK(m.adjusted.lo <= m.single.lo);
      CHECK(m.adjusted.hi >= m.single.hi);
      CHECK(m.adjusted.length() > m.single.length());
    }
  }

  SECTION("percentile form") {
    RootStatistics products;
    products.values.emplace_back(100);
    std::iota(products.values[0].begin(), products.values[0].end(), 1.0);
    const auto iv = percentile_intervals({50.0}, products, 0.05);
    CHECK(iv[0].single.lo == 3.0);
    CHECK(iv[0].single.hi == 98.0);
  }
}

TEST_CASE("run_sdb is deterministic across thread counts") {
  const Dataset data = simulate("ci/logistic/case3", 5000, 31);
  SdbConfig cfg;
  cfg.replicates = 60;
  cfg.master_seed = 99;
  cfg.threads = 1;
  const IntervalReport a = run_sdb(data, OutcomeKind::binary, cfg);
  cfg.threads = 4;
  const IntervalReport b = run_sdb(data, OutcomeKind::binary, cfg);
  CHECK(same_intervals(a, b));
  CHECK(a.subset_size == subset_size(5000, 0.7));
  CHECK(a.replicate_statistics.values[0].size() == 60u);
  CHECK(a.centering == "subset");

  cfg.master_seed = 100;
  CHECK_FALSE(same_intervals(a, run_sdb(data, OutcomeKind::binary, cfg)));

  const IntervalReport c = run_full_bootstrap(data, OutcomeKind::binary, 30, 0.05, 5, 1);
  const IntervalReport d = run_full_bootstrap(data, OutcomeKind::binary, 30, 0.05, 5, 4);
  CHECK(same_intervals(c, d));
  CHECK(c.method == "bootstrap");
}

TEST_CASE("single mediator with a large effect: SDB and full bootstrap agree") {
  const Dataset data = single_mediator(20000, 32);
  SdbConfig cfg;
  cfg.replicates = 300;
  cfg.master_seed = 8;
  for (auto centering : {RootCentering::subset, RootCentering::full_data}) {
    cfg.centering = centering;
    const IntervalReport sdb = run_sdb(data, OutcomeKind::continuous, cfg);
    const auto& iv = sdb.mediators[0];
    CHECK(iv.single.contains(0.48));
    CHECK_FALSE(iv.single.contains(0.0));
    CHECK(iv.single.lo <= iv.estimate);
    CHECK(iv.estimate <= iv.single.hi);
  }
  const IntervalReport boot = run_full_bootstrap(data, OutcomeKind::continuous, 300, 0.05, 8);
  CHECK(boot.mediators[0].single.contains(0.48));
  CHECK_FALSE(boot.mediators[0].single.contains(0.0));
}

TEST_CASE("root centring: replicate roots average near zero") {
  const Dataset data = simulate("ci/linear/case1", 5000, 33);
  SdbConfig cfg;
  cfg.subset_exponent = 0.8;
  cfg.replicates = 1000;
  cfg.master_seed = 2;
  const IntervalReport r = run_sdb(data, OutcomeKind::continuous, cfg);
  for (const auto& roots : r.replicate_statistics.values) {
    const double s = static_cast<double>(roots.size());
    const double mean = std::accumulate(roots.begin(), roots.end(), 0.0) / s;
    double ss = 0.0;
    for (double t : roots) ss += (t - mean) * (t - mean);
    const double sd = std::sqrt(ss / (s - 1.0));
    CHECK(std::abs(mean) < 5.0 * sd / std::sqrt(s));
  }
}

TEST_CASE("full bootstrap mechanics on three rows") {
  Dataset data;
  data.exposure = Eigen::Vector3d(0.0, 1.0, 2.0);
  data.mediators = Eigen::MatrixXd(3, 1);
  data.mediators << 0.5, 0.7, 2.5;
  data.outcome = Eigen::Vector3d(1.0, 0.0, 4.0);
  data.covariates.resize(3, 0);

  // Two rows of a three-row resample are repeated with probability 21/27, so
  // some seeds exhaust the retries and trip the failure budget.
  int succeeded = 0, budget_errors = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    try {
      const IntervalReport r = run_full_bootstrap(data, OutcomeKind::continuous, 2, 0.05, seed);
      ++succeeded;
      REQUIRE(r.replicate_statistics.values[0].size() == 2u);
      const auto& p = r.replicate_statistics.values[0];
      CHECK(r.mediators[0].single.lo == std::min(p[0], p[1]));
      CHECK(r.mediators[0].single.hi == std::max(p[0], p[1]));
      CHECK(r.failed_replicates == 0);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::engine);
      ++budget_errors;
    }
  }
  CHECK(succeeded > 0);
  CHECK(budget_errors > 0);
}

TEST_CASE("replicate failures are retried, counted and budgeted") {
  // Rare outcome with tiny subsets: many subsets carry one class.
  SimScenario s = lookup_scenario("ci/logistic/case1");
  s.n = 4000;
  s.params.c = -6.0;
  RngStream rng(34, 0);
  const Dataset data = generate(s, rng);
  const double prevalence = data.outcome.mean();
  REQUIRE(prevalence > 0.005);
  REQUIRE(prevalence < 0.05);

  SdbConfig cfg;
  cfg.replicates = 40;
  cfg.subset_size = 40;
  try {
    run_sdb(data, OutcomeKind::binary, cfg);
    FAIL("expected the failure budget to be exceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::engine);
  }

  // Larger subsets mostly succeed; any retry is recorded.
  cfg.subset_size = 1500;
  cfg.max_failure_fraction = 1.0;
  const IntervalReport r = run_sdb(data, OutcomeKind::binary, cfg);
  CHECK(r.failed_replicates <= r.retried_attempts);
  CHECK(static_cast<std::int64_t>(r.replicate_statistics.values[0].size()) == 40 - r.failed_replicates);
}

TEST_CASE("config validation") {
  const Dataset data = simulate("ci/linear/case1", 500, 35);
  SdbConfig cfg;
  cfg.replicates = 1;
  CHECK_THROWS_AS(run_sdb(data, OutcomeKind::continuous, cfg), Error);
  cfg.replicates = 10;
  cfg.subset_size = 501;
  CHECK_THROWS_AS(run_sdb(data, OutcomeKind::continuous, cfg), Error);
  cfg.subset_size.reset();
  cfg.level = 1.0;
  CHECK_THROWS_AS(run_sdb(data, OutcomeKind::continuous, cfg), Error);
  CHECK(parse_root_centering("full") == RootCentering::full_data);
  CHECK_THROWS_AS(parse_root_centering("middle"), Error);
}

TEST_CASE("replicate-loop cost follows b, not n") {
  auto loop_seconds = [](std::int64_t n) {
    const Dataset data = simulate("ci/linear/case1", n, 36);
    SdbConfig cfg;
    cfg.subset_size = 500;
    cfg.replicates = 200;
    std::vector<double> times;
    for (int i = 0; i < 5; ++i) times.push_back(run_sdb(data, OutcomeKind::continuous, cfg).replicate_seconds);
    std::nth_element(times.begin(), times.begin() + 2, times.end());
    return times[2];
  };
  const double small = loop_seconds(20000);
  const double large = loop_seconds(40000);
  INFO("n=2e4: " << small << " s, n=4e4: " << large << " s");
  CHECK(std::abs(large / small - 1.0) < 0.25);
}
