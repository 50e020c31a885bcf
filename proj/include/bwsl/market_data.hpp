#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bwsl {

struct YearMonth {
  int year = 2000;
  int month = 1;  // 1..12

  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) { return {idx / 12, idx % 12 + 1}; }
  YearMonth plus(int months) const { return from_index(index() + months); }

  static YearMonth parse(std::string_view text);  // "YYYY-MM"
  std::string str() const;

  friend auto operator<=>(const YearMonth& a, const YearMonth& b) { return a.index() <=> b.index(); }
  friend bool operator==(const YearMonth& a, const YearMonth& b) { return a.index() == b.index(); }
};

// One stock's record for one month.
struct Bar {
  double close = 0.0;   // price at period end
  double vol = 0.0;     // std of intra-period prices, currency units
  double volume = 0.0;  // quantity traded during the period
  double mcap = 0.0;
  double pe = 0.0;
  double bm = 0.0;
  double div = 0.0;     // dividend per share paid in the period

  friend bool operator==(const Bar&, const Bar&) = default;
};

// Stocks x consecutive months, with a presence mask. Stocks are kept in
// ascending id order so every tie-break on "ascending stock_id" is just
// ascending index.
class MarketPanel {
 public:
  MarketPanel() = default;
  MarketPanel(std::vector<std::string> stock_ids, YearMonth start, std::size_t num_periods);

  std::size_t num_stocks() const { return ids_.size(); }
  std::size_t num_periods() const { return periods_; }
  YearMonth start() const { return start_; }
  YearMonth period(std::size_t t) const { return start_.plus(static_cast<int>(t)); }
  std::optional<std::size_t> index_of(YearMonth p) const;
  const std::vector<std::string>& stock_ids() const { return ids_; }
  const std::string& stock_id(std::size_t s) const { return ids_[s]; }

  bool present(std::size_t stock, std::size_t t) const { return mask_[stock * periods_ + t] != 0; }
  const Bar& bar(std::size_t stock, std::size_t t) const;  // DataError when absent

  // Validates the Bar invariants; throws DataError.
  void set_bar(std::size_t stock, std::size_t t, const Bar& bar);
  void clear_bar(std::size_t stock, std::size_t t);

  // Periods [begin, end) of the axis.
  MarketPanel slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const MarketPanel&, const MarketPanel&) = default;

 private:
  std::vector<std::string> ids_;
  YearMonth start_;
  std::size_t periods_ = 0;
  std::vector<Bar> bars_;
  std::vector<std::uint8_t> mask_;
};

inline constexpr std::string_view kPanelHeader = "stock_id,period,close,vol,volume,mcap,pe,bm,div";

MarketPanel read_panel(std::istream& in, const std::string& source = "<stream>");
MarketPanel load_panel(const std::filesystem::path& path);
// Rows ordered by stock id then period; floats at 12 significant digits.
void write_panel(std::ostream& out, const MarketPanel& panel);
void save_panel(const MarketPanel& panel, const std::filesystem::path& path);

struct SynthConfig {
  std::size_t num_stocks = 50;
  std::size_t num_periods = 240;
  std::size_t sub_steps = 21;
  std::size_t lookback = 12;  // only used to validate num_periods

  // Drifts are expected simple returns: each step's log return carries the
  // -sigma^2/2 correction, so a stock without drift has martingale prices.

  // Persistent per-stock monthly drift: AR(1) with this stationary std.
  double momentum = 0.0;
  double momentum_persistence = 0.95;
  // Per-sub-step pull of log price toward its trailing exponential average.
  double reversion = 0.0;
  double anchor_halflife = 21.0;  // sub-steps

  // Per-sub-step idiosyncratic log-return std, drawn log-uniformly per stock.
  double vol_lo = 0.01;
  double vol_hi = 0.03;
  // Monthly probability that a stock redraws its volatility level.
  double vol_switch = 0.0;
  // Monthly drift bonus for the calmest stocks, penalty for the wildest.
  double low_vol_premium = 0.0;

  double market_drift = 0.0;  // common monthly log drift
  double market_vol = 0.0;    // common per-sub-step shock std

  YearMonth start{1970, 1};
  std::uint64_t seed = 1;
};

MarketPanel synth_market(const SynthConfig& cfg);

struct PanelSplit {
  MarketPanel train;  // [start, train_end]
  MarketPanel test;   // (train_end - lookback, end]
};

PanelSplit split(const MarketPanel& panel, YearMonth train_end, std::size_t lookback);

}  // namespace bwsl
