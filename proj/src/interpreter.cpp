#include "bwsl/interpreter.hpp"

#include <cstdio>
#include <ostream>
#include <string>

#include "bwsl/errors.hpp"
#include "bwsl/svg.hpp"

namespace bwsl {

namespace {

ad::Tensor window_grad(std::span<const ad::Var> inputs, std::size_t stock) {
  const std::size_t steps = inputs.size();
  const std::size_t feats = inputs[0].value().cols();
  ad::Tensor out(ad::Shape{steps, feats});
  for (std::size_t k = 0; k < steps; ++k) {
    const ad::Tensor& g = inputs[k].grad();
    for (std::size_t f = 0; f < feats; ++f) out.at(k, f) = g.at(stock, f);
  }
  return out;
}

SensitivityReport finish(ad::Tensor sum_by_row, std::size_t samples, std::size_t lookback) {
  SensitivityReport r;
  r.lookback = lookback;
  r.samples = samples;
  r.delta = ad::Tensor(ad::Shape{kNumFeatures, lookback});
  r.feature_mean.assign(kNumFeatures, 0.0);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    for (std::size_t lag = 1; lag <= lookback; ++lag) {
      const double v = sum_by_row.at(lookback - lag, f) / static_cast<double>(samples);
      r.delta.at(f, lag - 1) = v;
      r.feature_mean[f] += v;
    }
    r.feature_mean[f] /= static_cast<double>(lookback);
  }
  return r;
}

}  // namespace

std::vector<ad::Tensor> input_sensitivities(std::span<const StockWindow> windows, std::span<const int> ranks,
                                            const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  std::vector<ad::Var> inputs;
  for (ad::Tensor& x : stack_steps(windows)) inputs.push_back(tape.leaf(std::move(x), true));
  const ad::Var scores = graph::policy_scores(pv, inputs, ranks);
  std::vector<ad::Tensor> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const ad::Var si = ad::slice(scores, 0, i, i + 1);
    tape.backward(si);
    out.push_back(window_grad(inputs, i));
  }
  return out;
}

ad::Tensor input_sensitivity(std::span<const StockWindow> windows, std::span<const int> ranks,
                             const PolicyParams& params, std::size_t stock) {
  if (stock >= windows.size()) throw UsageError("input_sensitivity: stock index out of range");
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  std::vector<ad::Var> inputs;
  for (ad::Tensor& x : stack_steps(windows)) inputs.push_back(tape.leaf(std::move(x), true));
  const ad::Var scores = graph::policy_scores(pv, inputs, ranks);
  tape.backward(ad::slice(scores, 0, stock, stock + 1));
  return window_grad(inputs, stock);
}

SensitivityReport average_sensitivity(const MarketPanel& panel, const PolicyParams& params, std::size_t t_begin,
                                      std::size_t t_end, std::size_t lookback) {
  if (t_begin < lookback) t_begin = lookback;
  if (t_end >= panel.num_periods()) t_end = panel.num_periods() - 1;
  if (t_begin > t_end) throw DataError("average_sensitivity: empty decision range");
  ad::Tensor sum(ad::Shape{lookback, kNumFeatures});
  std::size_t samples = 0;
  for (std::size_t t = t_begin; t <= t_end; ++t) {
    const auto stocks = eligible_stocks(panel, t, lookback);
    if (stocks.size() < 2) continue;
    const WindowSet ws = build_windows(panel, t, lookback);
    for (const ad::Tensor& d : input_sensitivities(ws.windows, ws.ranks, params)) {
      for (std::size_t j = 0; j < d.size(); ++j) sum[j] += d[j];
      ++samples;
    }
  }
  if (samples == 0) throw DataError("average_sensitivity: no decision time with at least 2 eligible stocks");
  return finish(std::move(sum), samples, lookback);
}

SensitivityReport merge(const SensitivityReport& a, const SensitivityReport& b) {
  if (a.lookback != b.lookback) throw ShapeError("merge: reports disagree on lookback");
  const double wa = static_cast<double>(a.samples), wb = static_cast<double>(b.samples);
  ad::Tensor sum(ad::Shape{a.lookback, kNumFeatures});
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    for (std::size_t lag = 1; lag <= a.lookback; ++lag) {
      sum.at(a.lookback - lag, f) = a.delta.at(f, lag - 1) * wa + b.delta.at(f, lag - 1) * wb;
    }
  }
  return finish(std::move(sum), a.samples + b.samples, a.lookback);
}

void write_sensitivity_csv(std::ostream& out, const SensitivityReport& r) {
  out << "feature";
  for (std::size_t lag = 1; lag <= r.lookback; ++lag) out << ",lag_" << lag;
  out << ",mean\n";
  char buf[40];
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    out << kFeatureNames[f];
    for (std::size_t lag = 1; lag <= r.lookback; ++lag) {
      std::snprintf(buf, sizeof buf, ",%.12g", r.delta.at(f, lag - 1));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.12g\n", r.feature_mean[f]);
    out << buf;
  }
}

std::string sensitivity_svg(const SensitivityReport& r, std::size_t feature) {
  std::vector<std::string> labels;
  std::vector<double> values;
  for (std::size_t lag = 1; lag <= r.lookback; ++lag) {
    labels.push_back(std::to_string(lag));
    values.push_back(r.delta.at(feature, lag - 1));
  }
  return svg::bar_chart("Sensitivity of winner score to " + std::string(kFeatureNames[feature]) +
                            " (months before decision)",
                        labels, values);
}

}  // namespace bwsl
