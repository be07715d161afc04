#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "catch_amalgamated.hpp"

#include "medscale/dc.hpp"
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

MediatorEstimate block_estimate(double product, double se) {
  MediatorEstimate e;
  e.product = product;
  e.sobel_se = se;
  return e;
}

}  // namespace

TEST_CASE("partition_indices") {
  SECTION("J = 1 keeps every row in order") {
    const auto blocks = partition_indices(10, 1, true, 5);
    REQUIRE(blocks.size() == 1u);
    std::vector<std::int64_t> all(10);
    std::iota(all.begin(), all.end(), 0);
    CHECK(blocks[0] == all);
  }

  SECTION("remainder rows go to the first blocks") {
    const auto blocks = partition_indices(10, 3, true, 5);
    REQUIRE(blocks.size() == 3u);
    CHECK(blocks[0].size() == 4u);
    CHECK(blocks[1].size() == 3u);
    CHECK(blocks[2].size() == 3u);
  }

  SECTION("1e5 rows into 100 blocks of 1000, disjoint and covering") {
    const auto blocks = partition_indices(100000, 100, true, 7);
    REQUIRE(blocks.size() == 100u);
    std::vector<char> seen(100000, 0);
    for (const auto& b : blocks) {
      CHECK(b.size() == 1000u);
      for (auto i : b) {
        CHECK(seen[static_cast<std::size_t>(i)] == 0);
        seen[static_cast<std::size_t>(i)] = 1;
      }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; }));
  }

  SECTION("shuffle depends on the seed; no shuffle keeps row order") {
    CHECK(partition_indices(50, 5, true, 1) == partition_indices(50, 5, true, 1));
    CHECK(partition_indices(50, 5, true, 1) != partition_indices(50, 5, true, 2));
    const auto plain = partition_indices(50, 5, false, 1);
    CHECK(plain[1].front() == 10);
  }

  SECTION("J > n") {
    try {
      partition_indices(10, 11, true, 1);
      FAIL("expected invalid-argument");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }
}

TEST_CASE("aggregate") {
  SECTION("two identical blocks") {
    BlockEstimates grid;
    grid.blocks = {{block_estimate(0.3, 0.1)}, {block_estimate(0.3, 0.1)}};
    const DcTestReport r = aggregate(grid);
    CHECK(r.mediators[0].estimate == Approx(0.3).margin(1e-15));
    CHECK(r.mediators[0].std_error == Approx(0.1 / std::sqrt(2.0)).margin(1e-15));
  }

  SECTION("mean product and root-sum-square SE over J") {
    BlockEstimates grid;
    grid.blocks = {{block_estimate(0.1, 0.3)}, {block_estimate(0.2, 0.4)}, {block_estimate(0.6, 1.2)}};
    const DcTestReport r = aggregate(grid);
    CHECK(r.mediators[0].estimate == Approx(0.3).margin(1e-15));
    CHECK(r.mediators[0].std_error == Approx(1.3 / 3.0).margin(1e-15));
  }

  SECTION("Bonferroni p-values") {
    CHECK(bonferroni_p_value(1.96, 1) == Approx(0.0499958).margin(1e-6));
    CHECK(bonferroni_p_value(-1.96, 1) == bonferroni_p_value(1.96, 1));
    CHECK(bonferroni_p_value(1.96, 5) == Approx(5 * 0.0499958).margin(5e-6));
    // d = 5 at T = 0 gives P = 5, reported uncapped; the capped copy stops at 1.
    const MediatorTest t = sobel_test(0.0, 1.0, 5, 0.05);
    CHECK(t.p_value == Approx(5.0));
    CHECK(t.p_value_capped == 1.0);
    CHECK_FALSE(t.rejected);
  }

  SECTION("rejection is P < significance") {
    const MediatorTest t = sobel_test(2.5, 1.0, 1, 0.05);
    CHECK(t.rejected);
    CHECK(t.p_value == Approx(std::erfc(2.5 / std::sqrt(2.0))).margin(1e-15));
  }

  SECTION("degenerate variance") {
    const MediatorTest zero = sobel_test(0.0, 0.0, 3, 0.05);
    CHECK(zero.degenerate);
    CHECK(zero.statistic == 0.0);
    try {
      sobel_test(0.1, 0.0, 3, 0.05);
      FAIL("expected numeric error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::numeric);
    }
  }

  SECTION("incomplete grid") {
    BlockEstimates grid;
    grid.blocks = {{block_estimate(0.1, 0.1), block_estimate(0.1, 0.1)}, {block_estimate(0.1, 0.1)}};
    CHECK_THROWS_AS(aggregate(grid), Error);
  }

  SECTION("block order does not matter") {
    BlockEstimates grid;
    RngStream rng(3, 1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int j = 0; j < 7; ++j) grid.blocks.push_back({block_estimate(u(rng), std::abs(u(rng)) + 0.1)});
    const DcTestReport a = aggregate(grid);
    std::reverse(grid.blocks.begin(), grid.blocks.end());
    const DcTestReport b = aggregate(grid);
    CHECK(a.mediators[0].estimate == Approx(b.mediators[0].estimate).margin(1e-15));
    CHECK(a.mediators[0].std_error == Approx(b.mediators[0].std_error).margin(1e-15));
  }
}

TEST_CASE("run_dc_sobel") {
  const Dataset data = simulate("test/linear/case1", 20000, 41);

  SECTION("J = 1 reproduces the undivided analysis bit for bit") {
    DcConfig cfg;
    cfg.blocks = 1;
    const DcTestReport dc = run_dc_sobel(data, OutcomeKind::continuous, cfg);
    const DcTestReport full = full_sobel_analysis(data, OutcomeKind::continuous);
    CHECK_FALSE(dc.shuffled);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(dc.mediators[k].estimate == full.mediators[k].estimate);
      CHECK(dc.mediators[k].std_error == full.mediators[k].std_error);
      CHECK(dc.mediators[k].p_value == full.mediators[k].p_value);
    }
    CHECK(dc.significant == full.significant);
  }

  SECTION("aggregates the per-block fits") {
    DcConfig cfg;
    cfg.blocks = 4;
    cfg.shuffle_seed = 9;
    const DcTestReport dc = run_dc_sobel(data, OutcomeKind::continuous, cfg);
    BlockEstimates grid;
    for (const auto& rows : partition_indices(data.rows(), 4, true, 9))
      grid.blocks.push_back(fit_mediation(select_rows(data, rows), OutcomeKind::continuous).mediators);
    const DcTestReport manual = aggregate(grid);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(dc.mediators[k].estimate == manual.mediators[k].estimate);
      CHECK(dc.mediators[k].std_error == manual.mediators[k].std_error);
    }
    CHECK(dc.blocks == 4);
    CHECK(dc.shuffled);
  }

  SECTION("thread count does not change the report") {
    DcConfig cfg;
    cfg.blocks = 8;
    cfg.threads = 1;
    const DcTestReport a = run_dc_sobel(data, OutcomeKind::continuous, cfg);
    cfg.threads = 4;
    const DcTestReport b = run_dc_sobel(data, OutcomeKind::continuous, cfg);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(a.mediators[k].estimate == b.mediators[k].estimate);
      CHECK(a.mediators[k].p_value == b.mediators[k].p_value);
    }
  }

  SECTION("blocks too small to fit") {
    DcConfig cfg;
    cfg.blocks = 20000 / 9 + 1;
    try {
      run_dc_sobel(data, OutcomeKind::continuous, cfg);
      FAIL("expected invalid-argument");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
  }
}

TEST_CASE("global null keeps the family-wise error near the nominal level") {
  SimScenario s = lookup_scenario("test/linear/case1");
  s.n = 2000;
  s.params.alpha.setZero();
  s.params.beta.setZero();
  int any_rejection = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    RngStream rng(42, static_cast<std::uint64_t>(rep));
    const Dataset data = generate(s, rng);
    DcConfig cfg;
    cfg.blocks = 5;
    cfg.shuffle_seed = static_cast<std::uint64_t>(rep);
    any_rejection += run_dc_sobel(data, OutcomeKind::continuous, cfg).significant.empty() ? 0 : 1;
  }
  // Sobel under alpha = beta = 0 is very conservative.
  CHECK(static_cast<double>(any_rejection) / reps < 0.05);
}
