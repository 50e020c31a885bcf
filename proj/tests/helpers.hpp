#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/market_data.hpp"
#include "bwsl/policy.hpp"
#include "bwsl/rng.hpp"

namespace testing {

inline bwsl::ad::Tensor random_tensor(bwsl::ad::Shape shape, bwsl::Rng& rng, double lo = -1.0, double hi = 1.0) {
  bwsl::ad::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(100 + i));
  return out;
}

inline bwsl::Bar bar(double close) {
  bwsl::Bar b;
  b.close = close;
  b.vol = 0.5;
  b.volume = 1e6;
  b.mcap = close * 1e6;
  b.pe = 15.0;
  b.bm = 0.5;
  b.div = 0.1;
  return b;
}

// Panel whose closes are given per stock, one row per period.
inline bwsl::MarketPanel price_panel(const std::vector<std::vector<double>>& closes,
                                     bwsl::YearMonth start = {2000, 1}) {
  bwsl::MarketPanel p(ids(closes.size()), start, closes.front().size());
  for (std::size_t s = 0; s < closes.size(); ++s) {
    for (std::size_t t = 0; t < closes[s].size(); ++t) p.set_bar(s, t, bar(closes[s][t]));
  }
  return p;
}

inline bwsl::MarketPanel random_panel(std::size_t stocks, std::size_t periods, std::uint64_t seed) {
  bwsl::SynthConfig cfg;
  cfg.num_stocks = stocks;
  cfg.num_periods = periods;
  cfg.lookback = 1;
  cfg.momentum = 0.02;
  cfg.seed = seed;
  return bwsl::synth_market(cfg);
}

inline bwsl::PolicyParams small_params(std::size_t hidden, std::uint64_t seed, std::size_t embed = 4,
                                       std::size_t cols = 8) {
  bwsl::PolicyConfig cfg;
  cfg.hidden = hidden;
  cfg.embed = embed;
  cfg.lookup_cols = cols;
  bwsl::Rng rng(seed);
  return bwsl::PolicyParams::init(cfg, rng);
}

}  // namespace testing
