#include <doctest.h>

#include <cmath>
#include <vector>

#include "bwsl/errors.hpp"
#include "bwsl/features.hpp"
#include "helpers.hpp"

using namespace bwsl;

TEST_SUITE("features") {
  TEST_CASE("raw features of one stock") {
    const MarketPanel p = testing::price_panel({{10.0, 12.5}});
    const FeatureVector f = raw_features(p, 0, 1);
    CHECK(f[static_cast<std::size_t>(Feature::PR)] == 1.25);
    CHECK(f[static_cast<std::size_t>(Feature::VOL)] == 0.5);
    CHECK(f[static_cast<std::size_t>(Feature::TV)] == 1e6);
    CHECK(f[static_cast<std::size_t>(Feature::MC)] == 12.5e6);
    CHECK(f[static_cast<std::size_t>(Feature::PE)] == 15.0);
    CHECK(f[static_cast<std::size_t>(Feature::BM)] == 0.5);
    CHECK(f[static_cast<std::size_t>(Feature::DIV)] == 0.1);
    CHECK_THROWS_AS(raw_features(p, 0, 0), DataError);
  }

  TEST_CASE("cross-sectional z-scores of 1, 2, 3") {
    std::vector<FeatureVector> raw(3);
    for (std::size_t i = 0; i < 3; ++i) {
      raw[i].fill(4.0);
      raw[i][0] = static_cast<double>(i + 1);
    }
    const auto z = zscore_crosssection(raw);
    const double a = std::sqrt(1.5);
    CHECK(std::abs(z[0][0] + a) < 1e-12);
    CHECK(std::abs(z[1][0]) < 1e-12);
    CHECK(std::abs(z[2][0] - a) < 1e-12);
    for (std::size_t i = 0; i < 3; ++i) CHECK(z[i][3] == 0.0);
  }

  TEST_CASE("z-scores have zero mean and unit population std") {
    Rng rng(17);
    std::vector<FeatureVector> raw(40);
    for (auto& v : raw) {
      for (double& x : v) x = rng.uniform(-5.0, 20.0);
    }
    const auto z = zscore_crosssection(raw);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double m = 0.0, q = 0.0;
      for (const auto& v : z) m += v[f];
      m /= 40.0;
      for (const auto& v : z) q += (v[f] - m) * (v[f] - m);
      CHECK(std::abs(m) < 1e-12);
      CHECK(std::abs(q / 40.0 - 1.0) < 1e-12);
    }
  }

  TEST_CASE("ranks descend with ties to the earlier entry") {
    const std::vector<double> v{0.5, 2.0, 0.5, -1.0, 2.0};
    const std::vector<int> expect{3, 1, 4, 5, 2};
    CHECK(rank_descending(v) == expect);
  }

  TEST_CASE("eligibility needs every bar in the look-back window") {
    MarketPanel p = testing::price_panel({{1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6}});
    p.clear_bar(1, 2);
    CHECK(is_eligible(p, 0, 3, 3));
    CHECK_FALSE(is_eligible(p, 1, 3, 3));
    CHECK_FALSE(is_eligible(p, 1, 5, 3));
    CHECK(is_eligible(p, 1, 5, 2));
    CHECK_FALSE(is_eligible(p, 0, 2, 3));
    CHECK(eligible_stocks(p, 4, 3) == std::vector<std::size_t>{0, 2});
  }

  TEST_CASE("windows are ordered oldest first and match direct z-scores") {
    const MarketPanel p = testing::random_panel(5, 12, 21);
    const std::size_t t = 7, k = 4;
    const WindowSet ws = build_windows(p, t, k);
    REQUIRE(ws.windows.size() == 5);
    for (std::size_t row = 0; row < k; ++row) {
      const std::size_t tau = t - k + 1 + row;
      std::vector<FeatureVector> raw;
      for (std::size_t s = 0; s < 5; ++s) raw.push_back(raw_features(p, s, tau));
      const auto z = zscore_crosssection(raw);
      for (std::size_t s = 0; s < 5; ++s) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) CHECK(ws.windows[s].x.at(row, f) == z[s][f]);
      }
    }
    std::vector<double> pr;
    for (std::size_t s = 0; s < 5; ++s) pr.push_back(p.bar(s, t).close / p.bar(s, t - 1).close);
    CHECK(ws.ranks == rank_descending(pr));
  }

  TEST_CASE("windows never read past the decision period") {
    MarketPanel p = testing::random_panel(4, 10, 3);
    const WindowSet before = build_windows(p, 6, 3);
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t t = 7; t < 10; ++t) p.set_bar(s, t, testing::bar(999.0 + static_cast<double>(s)));
    }
    const WindowSet after = build_windows(p, 6, 3);
    for (std::size_t s = 0; s < 4; ++s) CHECK(before.windows[s].x == after.windows[s].x);
    CHECK(before.ranks == after.ranks);
  }

  TEST_CASE("stacking windows by step") {
    const MarketPanel p = testing::random_panel(4, 8, 5);
    const WindowSet ws = build_windows(p, 5, 3);
    const auto steps = stack_steps(ws.windows);
    REQUIRE(steps.size() == 3);
    CHECK(steps[1].rows() == 4);
    CHECK(steps[1].cols() == kNumFeatures);
    CHECK(steps[2].at(1, 4) == ws.windows[1].x.at(2, 4));
    CHECK_THROWS_AS(build_windows(p, 2, 3), DataError);
  }
}
