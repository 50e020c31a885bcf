#include "bwsl/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "bwsl/errors.hpp"
#include "bwsl/rng.hpp"

namespace bwsl {

YearMonth YearMonth::parse(std::string_view text) {
  int year = 0, month = 0;
  const bool shape_ok = text.size() == 7 && text[4] == '-';
  if (shape_ok) {
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 4, year);
    auto [p2, e2] = std::from_chars(text.data() + 5, text.data() + 7, month);
    if (e1 == std::errc{} && e2 == std::errc{} && p1 == text.data() + 4 && p2 == text.data() + 7 && month >= 1 &&
        month <= 12) {
      return {year, month};
    }
  }
  throw DataError("invalid period '" + std::string(text) + "', expected YYYY-MM");
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

MarketPanel::MarketPanel(std::vector<std::string> stock_ids, YearMonth start, std::size_t num_periods)
    : ids_(std::move(stock_ids)),
      start_(start),
      periods_(num_periods),
      bars_(ids_.size() * num_periods),
      mask_(ids_.size() * num_periods, 0) {
  if (!std::is_sorted(ids_.begin(), ids_.end()) ||
      std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
    throw DataError("stock ids must be unique and sorted");
  }
}

std::optional<std::size_t> MarketPanel::index_of(YearMonth p) const {
  const int off = p.index() - start_.index();
  if (off < 0 || static_cast<std::size_t>(off) >= periods_) return std::nullopt;
  return static_cast<std::size_t>(off);
}

const Bar& MarketPanel::bar(std::size_t stock, std::size_t t) const {
  if (!present(stock, t)) {
    throw DataError("missing bar for " + ids_[stock] + " at " + period(t).str());
  }
  return bars_[stock * periods_ + t];
}

void MarketPanel::set_bar(std::size_t stock, std::size_t t, const Bar& b) {
  const auto where = [&] { return " for " + ids_[stock] + " at " + period(t).str(); };
  if (!(b.close > 0.0) || !std::isfinite(b.close)) throw DataError("non-positive close" + where());
  if (!(b.vol >= 0.0)) throw DataError("negative vol" + where());
  if (!(b.volume >= 0.0)) throw DataError("negative volume" + where());
  if (!(b.mcap > 0.0)) throw DataError("non-positive mcap" + where());
  for (double v : {b.vol, b.volume, b.mcap, b.pe, b.bm, b.div}) {
    if (!std::isfinite(v)) throw DataError("non-finite field" + where());
  }
  bars_[stock * periods_ + t] = b;
  mask_[stock * periods_ + t] = 1;
}

void MarketPanel::clear_bar(std::size_t stock, std::size_t t) {
  bars_[stock * periods_ + t] = Bar{};
  mask_[stock * periods_ + t] = 0;
}

MarketPanel MarketPanel::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > periods_) throw DataError("panel slice out of range");
  MarketPanel out(ids_, period(begin), end - begin);
  for (std::size_t s = 0; s < ids_.size(); ++s) {
    for (std::size_t t = begin; t < end; ++t) {
      if (present(s, t)) out.set_bar(s, t - begin, bars_[s * periods_ + t]);
    }
  }
  return out;
}

namespace {

double parse_double(std::string_view field, std::size_t line, const char* name) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw DataError("malformed row at line " + std::to_string(line) + ": bad " + name + " '" +
                    std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = row.find(',', pos);
    out.push_back(row.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Row {
  std::string id;
  YearMonth period;
  Bar bar;
  std::size_t line;
};

}  // namespace

MarketPanel read_panel(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kPanelHeader) throw DataError(source + ": header must be '" + std::string(kPanelHeader) + "'");

  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) {
      throw DataError(source + ": malformed row at line " + std::to_string(line_no) + ": expected 9 fields, got " +
                      std::to_string(f.size()));
    }
    if (f[0].empty()) throw DataError(source + ": malformed row at line " + std::to_string(line_no) + ": empty id");
    Row r;
    r.id = std::string(f[0]);
    r.line = line_no;
    try {
      r.period = YearMonth::parse(f[1]);
    } catch (const DataError& e) {
      throw DataError(source + ": malformed row at line " + std::to_string(line_no) + ": " + e.what());
    }
    r.bar.close = parse_double(f[2], line_no, "close");
    r.bar.vol = parse_double(f[3], line_no, "vol");
    r.bar.volume = parse_double(f[4], line_no, "volume");
    r.bar.mcap = parse_double(f[5], line_no, "mcap");
    r.bar.pe = parse_double(f[6], line_no, "pe");
    r.bar.bm = parse_double(f[7], line_no, "bm");
    r.bar.div = parse_double(f[8], line_no, "div");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  std::vector<std::string> ids;
  int lo = rows.front().period.index(), hi = lo;
  for (const Row& r : rows) {
    ids.push_back(r.id);
    lo = std::min(lo, r.period.index());
    hi = std::max(hi, r.period.index());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  MarketPanel panel(ids, YearMonth::from_index(lo), static_cast<std::size_t>(hi - lo + 1));
  for (const Row& r : rows) {
    const auto s = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), r.id) - ids.begin());
    const std::size_t t = static_cast<std::size_t>(r.period.index() - lo);
    if (panel.present(s, t)) {
      throw DataError(source + ": duplicate (" + r.id + ", " + r.period.str() + ") at line " +
                      std::to_string(r.line));
    }
    try {
      panel.set_bar(s, t, r.bar);
    } catch (const DataError& e) {
      throw DataError(source + ": line " + std::to_string(r.line) + ": " + e.what());
    }
  }
  return panel;
}

MarketPanel load_panel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open panel file " + path.string());
  return read_panel(in, path.string());
}

void write_panel(std::ostream& out, const MarketPanel& panel) {
  out << kPanelHeader << '\n';
  char buf[512];
  for (std::size_t s = 0; s < panel.num_stocks(); ++s) {
    for (std::size_t t = 0; t < panel.num_periods(); ++t) {
      if (!panel.present(s, t)) continue;
      const Bar& b = panel.bar(s, t);
      std::snprintf(buf, sizeof buf, "%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", panel.stock_id(s).c_str(),
                    panel.period(t).str().c_str(), b.close, b.vol, b.volume, b.mcap, b.pe, b.bm, b.div);
      out << buf;
    }
  }
}

void save_panel(const MarketPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write panel file " + path.string());
  write_panel(out, panel);
}

MarketPanel synth_market(const SynthConfig& cfg) {
  if (cfg.num_stocks < 4) throw UsageError("synth: num_stocks must be >= 4");
  if (cfg.sub_steps < 2) throw UsageError("synth: sub_steps must be >= 2");
  if (cfg.num_periods < 2 * cfg.lookback + 2) throw UsageError("synth: num_periods must be >= 2K+2");
  if (!(cfg.vol_lo > 0.0) || cfg.vol_hi < cfg.vol_lo) throw UsageError("synth: need 0 < vol_lo <= vol_hi");
  if (cfg.momentum_persistence < 0.0 || cfg.momentum_persistence >= 1.0) {
    throw UsageError("synth: momentum_persistence must be in [0, 1)");
  }

  Rng rng = Rng::substream(cfg.seed, "data");
  const std::size_t n_stocks = cfg.num_stocks;
  const std::size_t width = std::to_string(n_stocks - 1).size() < 3 ? 3 : std::to_string(n_stocks - 1).size();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_stocks; ++i) {
    std::string num = std::to_string(i);
    ids.push_back("S" + std::string(width - num.size(), '0') + num);
  }
  MarketPanel panel(ids, cfg.start, cfg.num_periods);

  const double log_lo = std::log(cfg.vol_lo);
  const double log_hi = std::log(cfg.vol_hi);
  const double log_mid = 0.5 * (log_lo + log_hi);
  const double log_half = 0.5 * (log_hi - log_lo);
  const double steps = static_cast<double>(cfg.sub_steps);
  const double anchor_rate = 1.0 - std::pow(0.5, 1.0 / cfg.anchor_halflife);
  const double rho = cfg.momentum_persistence;
  const double innov = std::sqrt(1.0 - rho * rho);

  struct StockState {
    double log_price, anchor, drift, log_sigma, log_shares, log_pe, log_bm, log_yield, log_volume;
  };
  std::vector<StockState> st(n_stocks);
  for (auto& s : st) {
    s.log_price = std::log(rng.uniform(20.0, 100.0));
    s.anchor = s.log_price;
    s.drift = cfg.momentum * rng.normal();
    s.log_sigma = rng.uniform(log_lo, log_hi);
    s.log_shares = std::log(rng.uniform(1e7, 1e9));
    s.log_pe = std::log(15.0) + 0.3 * rng.normal();
    s.log_bm = std::log(0.5) + 0.3 * rng.normal();
    s.log_yield = std::log(0.02) + 0.3 * rng.normal();
    s.log_volume = std::log(rng.uniform(1e5, 1e7));
  }

  std::vector<double> step_returns(cfg.sub_steps);
  std::vector<double> common(cfg.sub_steps);
  for (std::size_t t = 0; t < cfg.num_periods; ++t) {
    for (double& c : common) c = cfg.market_vol * rng.normal();
    for (std::size_t i = 0; i < n_stocks; ++i) {
      StockState& s = st[i];
      if (t > 0) {
        s.drift = rho * s.drift + innov * cfg.momentum * rng.normal();
        if (cfg.vol_switch > 0.0 && rng.uniform() < cfg.vol_switch) s.log_sigma = rng.uniform(log_lo, log_hi);
      }
      const double sigma = std::exp(s.log_sigma);
      const double premium = log_half > 0.0 ? cfg.low_vol_premium * (log_mid - s.log_sigma) / log_half : 0.0;
      const double step_drift =
          (s.drift + premium + cfg.market_drift) / steps - 0.5 * (sigma * sigma + cfg.market_vol * cfg.market_vol);
      for (std::size_t k = 0; k < cfg.sub_steps; ++k) {
        const double pull = -cfg.reversion * (s.log_price - s.anchor);
        const double step = step_drift + pull + common[k] + sigma * rng.normal();
        s.log_price += step;
        s.anchor += anchor_rate * (s.log_price - s.anchor);
        step_returns[k] = step;
      }
      double mean = 0.0;
      for (double r : step_returns) mean += r;
      mean /= steps;
      double var = 0.0;
      for (double r : step_returns) var += (r - mean) * (r - mean);

      s.log_shares += 0.005 * rng.normal();
      s.log_pe += 0.03 * rng.normal();
      s.log_bm += 0.03 * rng.normal();
      s.log_yield += 0.03 * rng.normal();
      const double volume_noise = 0.3 * rng.normal();

      Bar b;
      b.close = std::exp(s.log_price);
      b.vol = std::sqrt(var / steps);
      b.volume = std::exp(s.log_volume + volume_noise);
      b.mcap = b.close * std::exp(s.log_shares);
      b.pe = std::exp(s.log_pe);
      b.bm = std::exp(s.log_bm);
      b.div = b.close * std::exp(s.log_yield) / 12.0;
      panel.set_bar(i, t, b);
    }
  }
  return panel;
}

PanelSplit split(const MarketPanel& panel, YearMonth train_end, std::size_t lookback) {
  const auto idx = panel.index_of(train_end);
  if (!idx) throw DataError("split: train_end " + train_end.str() + " outside the panel axis");
  if (*idx + 1 >= panel.num_periods()) throw DataError("split: train_end " + train_end.str() + " leaves no test range");
  const std::size_t test_begin = *idx + 1 > lookback ? *idx + 1 - lookback : 0;
  return {panel.slice(0, *idx + 1), panel.slice(test_begin, panel.num_periods())};
}

}  // namespace bwsl
