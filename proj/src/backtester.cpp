#include "bwsl/backtester.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>

#include "bwsl/errors.hpp"
#include "bwsl/features.hpp"
#include "bwsl/svg.hpp"

namespace bwsl {

namespace {

// Excess return of one leg: sum w z - 1, or 0 for an empty leg.
double leg_excess(const std::vector<std::size_t>& idx, const std::vector<double>& w, const std::vector<double>& z) {
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) acc += w[k] * z[idx[k]];
  return acc - 1.0;
}

PortfolioPair equal_weight(Mode mode, std::vector<std::size_t> longs, std::vector<std::size_t> shorts,
                           std::size_t universe) {
  PortfolioPair p;
  p.mode = mode;
  p.leg_size = std::max(longs.size(), shorts.size());
  p.combined.assign(universe, 0.0);
  p.long_w.assign(longs.size(), longs.empty() ? 0.0 : 1.0 / static_cast<double>(longs.size()));
  p.short_w.assign(shorts.size(), shorts.empty() ? 0.0 : 1.0 / static_cast<double>(shorts.size()));
  for (std::size_t k = 0; k < longs.size(); ++k) p.combined[longs[k]] = p.long_w[k];
  for (std::size_t k = 0; k < shorts.size(); ++k) p.combined[shorts[k]] = p.short_w[k];
  p.long_idx = std::move(longs);
  p.short_idx = std::move(shorts);
  return p;
}

using Chooser = std::function<std::optional<PortfolioPair>(std::size_t t, const std::vector<std::size_t>& stocks,
                                                           std::vector<BacktestEvent>& events)>;

void check_range(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg) {
  if (range.first > range.last) throw DataError("backtest: empty decision range");
  if (range.first < cfg.lookback) throw DataError("backtest: first decision precedes a full look-back window");
  if (range.last + 1 >= panel.num_periods()) throw DataError("backtest: last decision has no following close");
}

BacktestRun walk(const std::string& name, const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg,
                 const Chooser& choose) {
  check_range(panel, range, cfg);
  BacktestRun run;
  run.strategy = name;
  for (std::size_t t = range.first; t <= range.last; ++t) {
    const YearMonth when = panel.period(t);
    const auto stocks = eligible_stocks(panel, t, cfg.lookback);
    run.periods.push_back(when);
    run.universe_size.push_back(stocks.size());
    run.universe.push_back(stocks);
    std::optional<PortfolioPair> pair;
    if (stocks.empty()) {
      run.events.push_back({when, "empty-universe", "no eligible stocks; period skipped"});
    } else {
      pair = choose(t, stocks, run.events);
    }
    if (!pair) {
      run.returns.push_back(0.0);
      run.portfolios.emplace_back();
      continue;
    }
    const ForwardReturns fwd = forward_returns(panel, stocks, t);
    for (std::size_t pos : fwd.substituted) {
      if (pair->combined[pos] != 0.0) {
        run.events.push_back({when, "delisted", panel.stock_id(stocks[pos]) + " has no close at " +
                                                    panel.period(t + 1).str() + "; exited at last close"});
      }
    }
    const double r = leg_excess(pair->long_idx, pair->long_w, fwd.z) -
                     (pair->mode == Mode::LongShort ? leg_excess(pair->short_idx, pair->short_w, fwd.z) : 0.0);
    run.returns.push_back(r);
    run.portfolios.push_back(std::move(*pair));
  }
  run.report = report_flagged(run.returns, cfg.theta, cfg.tc, cfg.periods_per_year);
  return run;
}

std::vector<double> momentum_signal(const MarketPanel& panel, const std::vector<std::size_t>& stocks, std::size_t t,
                                    std::size_t lookback) {
  std::vector<double> sig(stocks.size());
  for (std::size_t i = 0; i < stocks.size(); ++i) {
    sig[i] = panel.bar(stocks[i], t).close / panel.bar(stocks[i], t - lookback).close - 1.0;
  }
  return sig;
}

}  // namespace

DecisionRange full_range(const MarketPanel& panel, std::size_t lookback) {
  if (panel.num_periods() < lookback + 2) throw DataError("panel too short for any decision");
  return {lookback, panel.num_periods() - 2};
}

BacktestRun run_policy(const MarketPanel& panel, const PolicyParams& params, DecisionRange range,
                       const BacktestConfig& cfg) {
  return walk("policy", panel, range, cfg,
              [&](std::size_t t, const std::vector<std::size_t>& stocks,
                  std::vector<BacktestEvent>& events) -> std::optional<PortfolioPair> {
                const std::size_t n = stocks.size();
                if (n < 2) {
                  events.push_back({panel.period(t), "empty-universe", "fewer than 2 stocks to score"});
                  return std::nullopt;
                }
                std::size_t g = cfg.leg_size == 0 ? default_leg_size(n) : cfg.leg_size;
                const std::size_t cap = cfg.mode == Mode::LongShort ? n / 2 : n;
                if (g > cap) {
                  events.push_back({panel.period(t), "leg-shrunk",
                                    "G=" + std::to_string(g) + " reduced to " + std::to_string(cap)});
                  g = cap;
                }
                const WindowSet ws = build_windows(panel, t, cfg.lookback);
                const auto scores = policy_forward(ws.windows, ws.ranks, params);
                return generate(scores, g, cfg.mode);
              });
}

BacktestRun run_market(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg) {
  return walk("market", panel, range, cfg,
              [](std::size_t, const std::vector<std::size_t>& stocks,
                 std::vector<BacktestEvent>&) -> std::optional<PortfolioPair> {
                std::vector<std::size_t> all(stocks.size());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                return equal_weight(Mode::LongOnly, std::move(all), {}, stocks.size());
              });
}

BacktestRun run_tsm(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg) {
  return walk("tsm", panel, range, cfg,
              [&](std::size_t t, const std::vector<std::size_t>& stocks,
                  std::vector<BacktestEvent>& events) -> std::optional<PortfolioPair> {
                const auto sig = momentum_signal(panel, stocks, t, cfg.lookback);
                std::vector<std::size_t> longs, shorts;
                for (std::size_t i = 0; i < sig.size(); ++i) {
                  if (sig[i] > 0.0) longs.push_back(i);
                  if (sig[i] < 0.0) shorts.push_back(i);
                }
                if (longs.empty()) events.push_back({panel.period(t), "empty-leg", "no stock with positive signal"});
                if (cfg.mode == Mode::LongShort && shorts.empty()) {
                  events.push_back({panel.period(t), "empty-leg", "no stock with negative signal"});
                }
                if (cfg.mode == Mode::LongOnly) shorts.clear();
                return equal_weight(cfg.mode, std::move(longs), std::move(shorts), stocks.size());
              });
}

BacktestRun run_csm(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg) {
  return walk("csm", panel, range, cfg,
              [&](std::size_t t, const std::vector<std::size_t>& stocks,
                  std::vector<BacktestEvent>& events) -> std::optional<PortfolioPair> {
                const std::size_t n = stocks.size();
                std::size_t g = cfg.leg_size == 0 ? default_leg_size(n) : cfg.leg_size;
                const std::size_t cap = cfg.mode == Mode::LongShort ? n / 2 : n;
                if (g > cap) {
                  events.push_back({panel.period(t), "leg-shrunk",
                                    "G=" + std::to_string(g) + " reduced to " + std::to_string(cap)});
                  g = cap;
                }
                if (g == 0) {
                  events.push_back({panel.period(t), "empty-universe", "too few stocks for two legs"});
                  return std::nullopt;
                }
                const auto order = descending_order(momentum_signal(panel, stocks, t, cfg.lookback));
                std::vector<std::size_t> longs(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g));
                std::vector<std::size_t> shorts;
                if (cfg.mode == Mode::LongShort) {
                  shorts.assign(order.end() - static_cast<std::ptrdiff_t>(g), order.end());
                }
                return equal_weight(cfg.mode, std::move(longs), std::move(shorts), n);
              });
}

void write_run_csv(std::ostream& out, const BacktestRun& run) {
  out << "period,return,wealth,universe_size\n";
  char buf[96];
  for (std::size_t i = 0; i < run.returns.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.12g,%.12g,%zu\n", run.returns[i], run.report.wealth[i + 1],
                  run.universe_size[i]);
    out << run.periods[i].str() << buf;
  }
}

std::string wealth_svg(const std::vector<BacktestRun>& runs) {
  std::vector<svg::Series> series;
  std::vector<std::string> labels;
  for (const BacktestRun& r : runs) {
    series.push_back({r.strategy, r.report.wealth});
    if (labels.empty()) {
      for (const YearMonth& p : r.periods) labels.push_back(p.str());
      if (!r.periods.empty()) labels.push_back(r.periods.back().plus(1).str());
    }
  }
  return svg::line_chart("Cumulative wealth", series, labels);
}

}  // namespace bwsl
