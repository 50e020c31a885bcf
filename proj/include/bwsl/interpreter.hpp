#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/features.hpp"
#include "bwsl/market_data.hpp"
#include "bwsl/policy.hpp"

namespace bwsl {

// d s_i / d X^(i): K x F, rows ordered like the window (oldest first). The
// other stocks' windows are held fixed.
ad::Tensor input_sensitivity(std::span<const StockWindow> windows, std::span<const int> ranks,
                             const PolicyParams& params, std::size_t stock);

// All stocks at once; out[i] is input_sensitivity(..., i).
std::vector<ad::Tensor> input_sensitivities(std::span<const StockWindow> windows, std::span<const int> ranks,
                                            const PolicyParams& params);

struct SensitivityReport {
  std::size_t lookback = 0;
  // F x K; column (lag - 1) holds the mean sensitivity to the feature
  // observed `lag` periods before the decision (lag 1 = most recent row).
  ad::Tensor delta;
  std::vector<double> feature_mean;  // mean over lags, per feature
  std::size_t samples = 0;           // (period, stock) pairs averaged
};

// Mean of input_sensitivity over every decision t in [t_begin, t_end] and
// every eligible stock.
SensitivityReport average_sensitivity(const MarketPanel& panel, const PolicyParams& params, std::size_t t_begin,
                                      std::size_t t_end, std::size_t lookback);

// Sample-count-weighted combination of two reports.
SensitivityReport merge(const SensitivityReport& a, const SensitivityReport& b);

// Rows: feature,lag_1..lag_K,mean.
void write_sensitivity_csv(std::ostream& out, const SensitivityReport& r);
// One bar chart of sensitivity by lag for a single feature.
std::string sensitivity_svg(const SensitivityReport& r, std::size_t feature);

}  // namespace bwsl
