#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "bwsl/market_data.hpp"
#include "bwsl/metrics.hpp"
#include "bwsl/policy.hpp"
#include "bwsl/portfolio.hpp"

namespace bwsl {

struct BacktestConfig {
  std::size_t lookback = 12;
  std::size_t leg_size = 0;  // 0: floor(I_t / 4)
  Mode mode = Mode::LongShort;
  double theta = 0.0;
  double tc = 0.001;
  double periods_per_year = 12.0;
};

// Decision times [first, last]; each decision trades over (t, t+1].
struct DecisionRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

// Every decision a panel supports: [lookback, periods - 2].
DecisionRange full_range(const MarketPanel& panel, std::size_t lookback);

struct BacktestEvent {
  YearMonth period;
  std::string kind;  // delisted | empty-universe | empty-leg | leg-shrunk
  std::string detail;
};

struct BacktestRun {
  std::string strategy;
  std::vector<YearMonth> periods;         // decision dates
  std::vector<double> returns;
  std::vector<std::size_t> universe_size;
  std::vector<std::vector<std::size_t>> universe;  // panel stock indices per decision
  std::vector<PortfolioPair> portfolios;           // positions index into `universe`
  PerformanceReport report;
  std::vector<BacktestEvent> events;
};

BacktestRun run_policy(const MarketPanel& panel, const PolicyParams& params, DecisionRange range,
                       const BacktestConfig& cfg);
BacktestRun run_market(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg);
// Time-series momentum: long every stock with positive K-period return,
// short every stock with a negative one, equal weights.
BacktestRun run_tsm(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg);
// Cross-sectional momentum: long the top G, short the bottom G by K-period return.
BacktestRun run_csm(const MarketPanel& panel, DecisionRange range, const BacktestConfig& cfg);

// CSV "period,return,wealth,universe_size".
void write_run_csv(std::ostream& out, const BacktestRun& run);
// Cumulative wealth of several runs on one chart.
std::string wealth_svg(const std::vector<BacktestRun>& runs);

}  // namespace bwsl
