#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cdn/error.hpp"
#include "cdn/metrics/ranking.hpp"
#include "cdn/rng.hpp"
#include "support/metric_oracle.hpp"

using namespace cdn;
using namespace cdn::metrics;

namespace {

RankedGroup group(std::vector<double> scores, std::vector<int> labels) {
  return {std::move(scores), std::move(labels)};
}

}  // namespace

TEST_SUITE("ranking metrics") {
  TEST_CASE("worked examples") {
    auto first = group({9, 1, 2, 3, 4, 5, 6, 7, 0, 8}, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    CHECK(recall_at_k(first, 1) == 1.0);
    auto two = group({10, 9, 8, 7, 6, 5, 4, 3, 2, 1}, {1, 0, 0, 1, 0, 0, 0, 0, 0, 0});
    CHECK(recall_at_k(two, 2) == 0.5);
    auto third = group({3, 2, 1}, {0, 0, 1});
    CHECK(reciprocal_rank(third) == doctest::Approx(1.0 / 3.0));
    auto ap = group({10, 9, 8, 7, 6, 5, 4, 3, 2, 1}, {1, 0, 1, 0, 0, 0, 0, 0, 0, 0});
    CHECK(average_precision(ap) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    auto perfect = group({5, 4, 3, 2, 1}, {1, 1, 0, 0, 0});
    CHECK(average_precision(perfect) == 1.0);
    CHECK(reciprocal_rank(perfect) == 1.0);
    CHECK(precision_at_1(perfect) == 1.0);
    for (std::size_t k = 2; k <= 5; ++k) CHECK(recall_at_k(perfect, k) == 1.0);
  }

  TEST_CASE("ties go to the lower index and NaN ranks last") {
    auto tied = group({1, 1, 1}, {0, 1, 0});
    CHECK(rank_order(tied) == std::vector<std::size_t>{0, 1, 2});
    CHECK(precision_at_1(tied) == 0.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto with_nan = group({nan, 0.1, -5}, {1, 0, 0});
    CHECK(rank_order(with_nan) == std::vector<std::size_t>{1, 2, 0});
  }

  TEST_CASE("k out of range") {
    auto g = group({1, 2}, {1, 0});
    CHECK_THROWS_AS(recall_at_k(g, 0), ContractError);
    CHECK_THROWS_AS(recall_at_k(g, 3), ContractError);
  }

  TEST_CASE("agreement with the brute-force oracle") {
    Rng rng(1);
    RankedRun run;
    for (int i = 0; i < 1000; ++i) {
      const auto g = testing::random_group(rng, 1 + rng.index(10));
      const testing::MetricOracle o(g);
      for (std::size_t k = 1; k <= g.scores.size(); ++k) CHECK(recall_at_k(g, k) == o.recall(k));
      CHECK(reciprocal_rank(g) == o.rr());
      CHECK(average_precision(g) == o.ap());
      CHECK(precision_at_1(g) == o.p1());
      run.groups.push_back(g);
    }
    // Run means, with and without the zero-positive filter.
    for (bool filter : {false, true}) {
      run.filter_zero_positive = filter;
      double rr = 0.0;
      std::size_t kept = 0;
      for (const auto& g : run.groups) {
        const testing::MetricOracle o(g);
        if (filter && !o.positives()) continue;
        rr += o.rr();
        ++kept;
      }
      CHECK(mean_reciprocal_rank(run) == doctest::Approx(rr / static_cast<double>(kept)).epsilon(1e-12));
    }
  }

  TEST_CASE("invariance under strictly increasing maps") {
    Rng rng(2);
    for (int m = 0; m < 200; ++m) {
      const double a = rng.uniform(0.1, 3.0), b = rng.uniform(0.0, 2.0), c = rng.uniform(-5.0, 5.0);
      const int kind = static_cast<int>(rng.index(3));
      auto f = [&](double x) {
        switch (kind) {
          case 0: return a * x + c;
          case 1: return a * x + b * x * x * x + c;
          default: return std::exp(a * x) + c;
        }
      };
      for (int i = 0; i < 5; ++i) {
        auto g = testing::random_group(rng, 2 + rng.index(9));
        auto h = g;
        for (auto& s : h.scores) s = f(s);
        CHECK(rank_order(g) == rank_order(h));
        for (std::size_t k = 1; k <= g.scores.size(); ++k) CHECK(recall_at_k(g, k) == recall_at_k(h, k));
        CHECK(reciprocal_rank(g) == reciprocal_rank(h));
        CHECK(average_precision(g) == average_precision(h));
        CHECK(precision_at_1(g) == precision_at_1(h));
      }
    }
  }

  TEST_CASE("bounds and monotone recall") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
      const auto g = testing::random_group(rng, 1 + rng.index(10));
      double prev = 0.0;
      for (std::size_t k = 1; k <= g.scores.size(); ++k) {
        const double r = recall_at_k(g, k);
        CHECK(r >= prev);
        CHECK(r <= 1.0);
        prev = r;
      }
      for (double v : {reciprocal_rank(g), average_precision(g), precision_at_1(g)}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_SUITE("reports") {
  TEST_CASE("scored TSV and the report table") {
    std::ostringstream text;
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 10; ++i) text << (i == 0 ? 1 : 0) << '\t' << (i == 0 ? 0.9 : 0.1 * i / 10.0) << '\n';
    std::istringstream in(text.str());
    const auto run = parse_scored_tsv(in, 10);
    REQUIRE(run.groups.size() == 3);
    const auto report = standard_report(run);
    REQUIRE(report.size() == 6);
    CHECK(report[0].first == "R_10@1");
    CHECK(report[2].first == "R_10@5");
    const auto table = format_report(report);
    CHECK(table.find("R_10@1 = 1.0000") != std::string::npos);
    CHECK(table.find("MAP    = 1.0000") != std::string::npos);

    std::istringstream ragged("1\t0.5\n0\t0.1\n1\t0.2\n");
    CHECK_THROWS_AS(parse_scored_tsv(ragged, 2), FormatError);
    std::istringstream bad("yes\t0.5\n");
    CHECK_THROWS_AS(parse_scored_tsv(bad, 1), FormatError);
  }

  TEST_CASE("four-way groups report R_4@1 and R_4@2 only") {
    RankedRun run;
    run.groups.push_back(group({0.1, 0.9, 0.3, 0.2}, {0, 1, 0, 0}));
    const auto report = standard_report(run);
    REQUIRE(report.size() == 5);
    CHECK(report[0].first == "R_4@1");
    CHECK(report[1].first == "R_4@2");
    CHECK(report[2].first == "MAP");
  }
}
