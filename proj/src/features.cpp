#include "bwsl/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bwsl/errors.hpp"

namespace bwsl {

FeatureVector raw_features(const MarketPanel& panel, std::size_t stock, std::size_t t) {
  if (t == 0 || !panel.present(stock, t - 1) || !panel.present(stock, t)) {
    throw DataError("raw_features: missing bar for " + panel.stock_id(stock) + " around " +
                    panel.period(t).str());
  }
  const Bar& prev = panel.bar(stock, t - 1);
  const Bar& cur = panel.bar(stock, t);
  return {cur.close / prev.close, cur.vol, cur.volume, cur.mcap, cur.pe, cur.bm, cur.div};
}

std::vector<FeatureVector> zscore_crosssection(std::span<const FeatureVector> raw) {
  if (raw.size() < 2) throw DataError("zscore_crosssection: need at least 2 stocks");
  const double n = static_cast<double>(raw.size());
  std::vector<FeatureVector> out(raw.size());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double mean = 0.0;
    for (const auto& v : raw) mean += v[f];
    mean /= n;
    double var = 0.0;
    for (const auto& v : raw) var += (v[f] - mean) * (v[f] - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out[i][f] = sd > 0.0 ? (raw[i][f] - mean) / sd : 0.0;
    }
  }
  return out;
}

bool is_eligible(const MarketPanel& panel, std::size_t stock, std::size_t t, std::size_t lookback) {
  if (t < lookback || t >= panel.num_periods()) return false;
  for (std::size_t tau = t - lookback; tau <= t; ++tau) {
    if (!panel.present(stock, tau)) return false;
  }
  return true;
}

std::vector<std::size_t> eligible_stocks(const MarketPanel& panel, std::size_t t, std::size_t lookback) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < panel.num_stocks(); ++s) {
    if (is_eligible(panel, s, t, lookback)) out.push_back(s);
  }
  return out;
}

std::vector<int> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<int> ranks(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r + 1);
  return ranks;
}

WindowSet build_windows(const MarketPanel& panel, std::size_t t, std::size_t lookback) {
  if (lookback == 0) throw UsageError("build_windows: lookback must be >= 1");
  if (t < lookback || t >= panel.num_periods()) {
    throw DataError("build_windows: decision period " + std::to_string(t) + " cannot hold a " +
                    std::to_string(lookback) + "-step window");
  }
  WindowSet ws;
  ws.t = t;
  ws.stocks = eligible_stocks(panel, t, lookback);
  if (ws.stocks.empty()) throw DataError("build_windows: no eligible stocks at " + panel.period(t).str());

  const std::size_t n = ws.stocks.size();
  ws.windows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ws.windows[i].stock = ws.stocks[i];
    ws.windows[i].stock_id = panel.stock_id(ws.stocks[i]);
    ws.windows[i].t = t;
    ws.windows[i].x = ad::Tensor(ad::Shape{lookback, kNumFeatures});
  }

  std::vector<FeatureVector> raw(n);
  for (std::size_t k = 0; k < lookback; ++k) {
    const std::size_t tau = t - lookback + 1 + k;
    for (std::size_t i = 0; i < n; ++i) raw[i] = raw_features(panel, ws.stocks[i], tau);
    if (k + 1 == lookback) {
      std::vector<double> pr(n);
      for (std::size_t i = 0; i < n; ++i) pr[i] = raw[i][0];
      ws.ranks = rank_descending(pr);
    }
    if (n == 1) {
      // A lone stock has no cross-section to compare against.
      for (std::size_t f = 0; f < kNumFeatures; ++f) ws.windows[0].x.at(k, f) = 0.0;
      continue;
    }
    const auto z = zscore_crosssection(raw);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) ws.windows[i].x.at(k, f) = z[i][f];
    }
  }
  return ws;
}

std::vector<ad::Tensor> stack_steps(std::span<const StockWindow> windows) {
  if (windows.empty()) return {};
  const std::size_t steps = windows[0].x.rows();
  const std::size_t feats = windows[0].x.cols();
  std::vector<ad::Tensor> out(steps, ad::Tensor(ad::Shape{windows.size(), feats}));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].x.rows() != steps || windows[i].x.cols() != feats) {
      throw ShapeError("stack_steps: windows disagree on K or F");
    }
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t f = 0; f < feats; ++f) out[k].at(i, f) = windows[i].x.at(k, f);
    }
  }
  return out;
}

}  // namespace bwsl
