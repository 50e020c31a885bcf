#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bwsl/backtester.hpp"
#include "bwsl/errors.hpp"
#include "helpers.hpp"

using namespace bwsl;

namespace {

BacktestConfig hand_config(std::size_t lookback) {
  BacktestConfig c;
  c.lookback = lookback;
  c.tc = 0.0;
  c.leg_size = 1;
  return c;
}

bool has_event(const BacktestRun& run, const std::string& kind) {
  for (const auto& e : run.events) {
    if (e.kind == kind) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("backtester") {
  TEST_CASE("full decision range") {
    const MarketPanel p = testing::random_panel(4, 10, 1);
    const DecisionRange r = full_range(p, 3);
    CHECK(r.first == 3);
    CHECK(r.last == 8);
    CHECK_THROWS_AS(full_range(p, 9), DataError);
  }

  TEST_CASE("market baseline is the equal-weight long-only return") {
    const MarketPanel p = testing::price_panel({{10, 11, 12.1}, {10, 10, 9}, {10, 12, 12}, {10, 8, 10}});
    const BacktestRun run = run_market(p, {1, 1}, hand_config(1));
    REQUIRE(run.returns.size() == 1);
    CHECK(std::abs(run.returns[0] - ((1.1 + 0.9 + 1.0 + 1.25) / 4.0 - 1.0)) < 1e-15);
    CHECK(run.periods[0] == YearMonth{2000, 2});
    CHECK(run.universe_size[0] == 4);
  }

  TEST_CASE("time-series momentum longs rising and shorts falling stocks") {
    const MarketPanel p = testing::price_panel({{10, 11, 12.1}, {10, 10, 9}, {10, 12, 12}, {10, 8, 10}});
    const BacktestRun ls = run_tsm(p, {1, 1}, hand_config(1));
    // Rising: 0 and 2; falling: 3; stock 1 is flat.
    CHECK(ls.portfolios[0].long_idx == std::vector<std::size_t>{0, 2});
    CHECK(ls.portfolios[0].short_idx == std::vector<std::size_t>{3});
    CHECK(std::abs(ls.returns[0] - ((1.1 + 1.0) / 2.0 - 1.25)) < 1e-15);
    BacktestConfig lo = hand_config(1);
    lo.mode = Mode::LongOnly;
    CHECK(std::abs(run_tsm(p, {1, 1}, lo).returns[0] - 0.05) < 1e-15);
    const MarketPanel up = testing::price_panel({{10, 11, 12}, {10, 12, 12}});
    CHECK(has_event(run_tsm(up, {1, 1}, hand_config(1)), "empty-leg"));
  }

  TEST_CASE("cross-sectional momentum ranks the look-back return") {
    const MarketPanel p = testing::price_panel({{10, 11, 12.1}, {10, 10, 9}, {10, 12, 12}, {10, 8, 10}});
    const BacktestRun run = run_csm(p, {1, 1}, hand_config(1));
    CHECK(run.portfolios[0].long_idx == std::vector<std::size_t>{2});
    CHECK(run.portfolios[0].short_idx == std::vector<std::size_t>{3});
    CHECK(std::abs(run.returns[0] - (1.0 - 1.25)) < 1e-15);
    BacktestConfig wide = hand_config(1);
    wide.leg_size = 3;
    const BacktestRun shrunk = run_csm(p, {1, 1}, wide);
    CHECK(has_event(shrunk, "leg-shrunk"));
    CHECK(shrunk.portfolios[0].long_idx.size() == 2);
  }

  TEST_CASE("a held stock without a next close exits at its last close") {
    MarketPanel p = testing::price_panel({{10, 11, 12.1}, {10, 10, 9}, {10, 12, 12}, {10, 8, 10}});
    p.clear_bar(3, 2);
    const BacktestRun run = run_csm(p, {1, 1}, hand_config(1));
    CHECK(has_event(run, "delisted"));
    CHECK(std::abs(run.returns[0] - 0.0) < 1e-15);
  }

  TEST_CASE("policy backtest: stocks enter and leave the universe") {
    MarketPanel p = testing::random_panel(6, 14, 3);
    p.clear_bar(1, 5);
    const PolicyParams params = testing::small_params(3, 4);
    const BacktestConfig c = hand_config(2);
    const BacktestRun run = run_policy(p, params, full_range(p, 2), c);
    CHECK(run.returns.size() == 11);
    // Stock 1 misses month 5, so it is out for decisions 5..7.
    CHECK(run.universe_size[3] == 5);
    CHECK(run.universe_size[6] == 6);
    CHECK(run.universe_size[2] == 6);
    for (std::size_t i = 0; i < run.returns.size(); ++i) {
      const WindowSet ws = build_windows(p, 2 + i, 2);
      CHECK(run.portfolios[i] == generate(policy_forward(ws.windows, ws.ranks, params), 1, Mode::LongShort));
    }
  }

  TEST_CASE("corrupting data after t leaves portfolios up to t unchanged") {
    const MarketPanel p = testing::random_panel(8, 20, 5);
    const PolicyParams params = testing::small_params(4, 6);
    const BacktestConfig c = hand_config(3);
    const DecisionRange range = full_range(p, 3);
    const BacktestRun base = run_policy(p, params, range, c);
    const BacktestRun base_csm = run_csm(p, range, c);
    Rng rng(7);
    for (std::size_t cut = 5; cut < 18; cut += 3) {
      MarketPanel bad = p;
      for (std::size_t s = 0; s < 8; ++s) {
        for (std::size_t t = cut + 1; t < 20; ++t) {
          Bar b = p.bar(s, t);
          b.close *= rng.uniform(0.8, 1.25);
          b.vol *= rng.uniform(0.5, 2.0);
          b.volume *= rng.uniform(0.5, 2.0);
          b.pe = rng.uniform(-20.0, 40.0);
          bad.set_bar(s, t, b);
        }
      }
      const BacktestRun run = run_policy(bad, params, range, c);
      const BacktestRun csm = run_csm(bad, range, c);
      for (std::size_t t = range.first; t <= cut; ++t) {
        CHECK(run.portfolios[t - range.first] == base.portfolios[t - range.first]);
        CHECK(csm.portfolios[t - range.first] == base_csm.portfolios[t - range.first]);
      }
    }
  }

  TEST_CASE("range validation") {
    const MarketPanel p = testing::random_panel(4, 10, 8);
    const BacktestConfig c = hand_config(3);
    CHECK_THROWS_AS(run_market(p, {2, 5}, c), DataError);
    CHECK_THROWS_AS(run_market(p, {3, 9}, c), DataError);
    CHECK_THROWS_AS(run_market(p, {6, 5}, c), DataError);
  }

  TEST_CASE("returns csv and wealth chart") {
    const MarketPanel p = testing::random_panel(4, 10, 9);
    const BacktestRun run = run_market(p, full_range(p, 3), hand_config(3));
    std::ostringstream os;
    write_run_csv(os, run);
    const std::string csv = os.str();
    CHECK(csv.rfind("period,return,wealth,universe_size\n1970-04,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    const std::string svg = wealth_svg({run, run_csm(p, full_range(p, 3), hand_config(3))});
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("csm") != std::string::npos);
  }

  TEST_CASE("backtests are deterministic") {
    const MarketPanel p = testing::random_panel(6, 16, 10);
    const PolicyParams params = testing::small_params(3, 11);
    const BacktestConfig c = hand_config(3);
    const BacktestRun a = run_policy(p, params, full_range(p, 3), c);
    const BacktestRun b = run_policy(p, params, full_range(p, 3), c);
    CHECK(a.returns == b.returns);
    CHECK(a.portfolios == b.portfolios);
  }
}
