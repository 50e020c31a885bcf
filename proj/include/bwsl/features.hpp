#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/market_data.hpp"

namespace bwsl {

// Column order of every feature vector and window row.
enum class Feature : std::size_t { PR = 0, VOL, TV, MC, PE, BM, DIV };
inline constexpr std::size_t kNumFeatures = 7;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {"PR", "VOL", "TV", "MC",
                                                                             "PE", "BM",  "DIV"};

using FeatureVector = std::array<double, kNumFeatures>;

// K x F standardized history of one stock at decision time t.
// Row k (0-based) holds the features of period t - K + 1 + k.
struct StockWindow {
  std::size_t stock = 0;
  std::string stock_id;
  std::size_t t = 0;
  ad::Tensor x;
};

// Unstandardized features at t. Needs bars at t-1 and t.
FeatureVector raw_features(const MarketPanel& panel, std::size_t stock, std::size_t t);

// Per-feature cross-sectional z-scores with population std; a feature with
// zero spread maps to all zeros.
std::vector<FeatureVector> zscore_crosssection(std::span<const FeatureVector> raw);

// Bars in [t-K, t] all present.
bool is_eligible(const MarketPanel& panel, std::size_t stock, std::size_t t, std::size_t lookback);
std::vector<std::size_t> eligible_stocks(const MarketPanel& panel, std::size_t t, std::size_t lookback);

// Rank 1 = highest value; ties go to the earlier entry.
std::vector<int> rank_descending(std::span<const double> values);

struct WindowSet {
  std::size_t t = 0;
  std::vector<std::size_t> stocks;  // eligible stock indices, ascending
  std::vector<StockWindow> windows;
  std::vector<int> ranks;  // rank of last-period PR
};

WindowSet build_windows(const MarketPanel& panel, std::size_t t, std::size_t lookback);

// Stacks window row k of every stock into one I x F matrix per step.
std::vector<ad::Tensor> stack_steps(std::span<const StockWindow> windows);

}  // namespace bwsl
