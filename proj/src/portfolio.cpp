#include "bwsl/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bwsl/errors.hpp"

namespace bwsl {

std::string_view mode_name(Mode m) { return m == Mode::LongShort ? "long-short" : "long-only"; }

Mode parse_mode(std::string_view text) {
  if (text == "long-short") return Mode::LongShort;
  if (text == "long-only") return Mode::LongOnly;
  throw UsageError("unknown mode '" + std::string(text) + "' (long-short | long-only)");
}

std::size_t default_leg_size(std::size_t universe) { return std::max<std::size_t>(1, universe / 4); }

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

std::vector<double> leg_softmax(std::span<const double> values) {
  const double m = *std::max_element(values.begin(), values.end());
  std::vector<double> w(values.size());
  double z = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    w[i] = std::exp(values[i] - m);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

}  // namespace

PortfolioPair generate(std::span<const double> scores, std::size_t leg_size, Mode mode) {
  const std::size_t n = scores.size();
  if (leg_size < 1) throw UsageError("generate: leg size must be >= 1");
  if (mode == Mode::LongShort && 2 * leg_size > n) {
    throw UsageError("generate: legs overlap, 2G=" + std::to_string(2 * leg_size) + " > I=" + std::to_string(n));
  }
  if (mode == Mode::LongOnly && leg_size > n) {
    throw UsageError("generate: G=" + std::to_string(leg_size) + " exceeds I=" + std::to_string(n));
  }
  const auto order = descending_order(scores);
  PortfolioPair p;
  p.mode = mode;
  p.leg_size = leg_size;
  p.combined.assign(n, 0.0);

  p.long_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(leg_size));
  std::vector<double> vals;
  for (std::size_t i : p.long_idx) vals.push_back(scores[i]);
  p.long_w = leg_softmax(vals);
  for (std::size_t k = 0; k < leg_size; ++k) p.combined[p.long_idx[k]] = p.long_w[k];

  if (mode == Mode::LongShort) {
    p.short_idx.assign(order.end() - static_cast<std::ptrdiff_t>(leg_size), order.end());
    vals.clear();
    for (std::size_t i : p.short_idx) vals.push_back(1.0 - scores[i]);
    p.short_w = leg_softmax(vals);
    for (std::size_t k = 0; k < leg_size; ++k) p.combined[p.short_idx[k]] = p.short_w[k];
  }
  return p;
}

double realize_return(const PortfolioPair& pair, std::span<const double> z) {
  auto leg = [&](const std::vector<std::size_t>& idx, const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= z.size() || !(z[idx[k]] > 0.0) || !std::isfinite(z[idx[k]])) {
        throw DataError("realize_return: missing rising rate for held position " + std::to_string(idx[k]));
      }
      acc += w[k] * z[idx[k]];
    }
    return acc;
  };
  const double long_part = leg(pair.long_idx, pair.long_w);
  if (pair.mode == Mode::LongOnly) return long_part - 1.0;
  return long_part - leg(pair.short_idx, pair.short_w);
}

ForwardReturns forward_returns(const MarketPanel& panel, std::span<const std::size_t> stocks, std::size_t t) {
  if (t + 1 >= panel.num_periods()) {
    throw DataError("forward_returns: no period after " + panel.period(t).str());
  }
  ForwardReturns out;
  out.z.resize(stocks.size());
  for (std::size_t i = 0; i < stocks.size(); ++i) {
    const std::size_t s = stocks[i];
    const double entry = panel.bar(s, t).close;
    if (panel.present(s, t + 1)) {
      out.z[i] = panel.bar(s, t + 1).close / entry;
    } else {
      out.z[i] = 1.0;
      out.substituted.push_back(i);
    }
  }
  return out;
}

}  // namespace bwsl
