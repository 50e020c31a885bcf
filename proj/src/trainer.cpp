#include "bwsl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "bwsl/errors.hpp"
#include "bwsl/features.hpp"
#include "bwsl/metrics.hpp"
#include "bwsl/rng.hpp"

namespace bwsl {

std::string_view surrogate_name(Surrogate s) { return s == Surrogate::Leg ? "leg" : "universe"; }

Surrogate parse_surrogate(std::string_view text) {
  if (text == "leg") return Surrogate::Leg;
  if (text == "universe") return Surrogate::Universe;
  throw UsageError("unknown surrogate '" + std::string(text) + "' (leg | universe)");
}

std::size_t effective_leg_size(std::size_t configured, std::size_t universe, Mode mode) {
  std::size_t g = configured == 0 ? default_leg_size(universe) : configured;
  if (mode == Mode::LongShort) {
    if (universe < 2) throw DataError("long-short portfolio needs at least 2 stocks, have " + std::to_string(universe));
    g = std::min(g, universe / 2);
  } else {
    if (universe < 1) throw DataError("empty universe");
    g = std::min(g, universe);
  }
  return g;
}

ad::Var portfolio_log_likelihood(ad::Var scores, const PortfolioPair& pair, Surrogate surrogate) {
  auto leg_term = [&](const std::vector<std::size_t>& idx, bool short_side) {
    ad::Var side = short_side ? ad::add_scalar(ad::neg(scores), 1.0) : scores;
    if (surrogate == Surrogate::Leg) {
      ad::Var picked = ad::gather(side, idx, ad::Shape{idx.size()});
      return ad::sum(ad::log(ad::softmax(picked)));
    }
    ad::Var all = ad::softmax(side);
    return ad::sum(ad::log(ad::gather(all, idx, ad::Shape{idx.size()})));
  };
  ad::Var total = leg_term(pair.long_idx, false);
  if (pair.mode == Mode::LongShort) total = total + leg_term(pair.short_idx, true);
  return total;
}

Trajectory simulate_trajectory(const MarketPanel& panel, std::size_t t0, const PolicyParams& params,
                               const TrainConfig& cfg, bool with_grad, std::size_t horizon) {
  const std::size_t steps = horizon == 0 ? cfg.horizon : horizon;
  if (t0 < cfg.lookback || t0 + steps >= panel.num_periods()) {
    throw DataError("simulate_trajectory: start " + std::to_string(t0) + " leaves no room for " +
                    std::to_string(steps) + " decisions");
  }
  Trajectory tr;
  tr.t0 = t0;
  if (with_grad) tr.log_likelihood_grad = zero_grads(params);
  double gap_sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = t0 + k;
    const WindowSet ws = build_windows(panel, t, cfg.lookback);
    ad::Tape tape;
    const auto pv = graph::bind(tape, params, with_grad);
    std::vector<ad::Var> inputs;
    for (ad::Tensor& x : stack_steps(ws.windows)) inputs.push_back(tape.constant(std::move(x)));
    const ad::Var scores = graph::policy_scores(pv, inputs, ws.ranks);
    const auto s = scores.value().data();
    for (double v : s) gap_sum += std::abs(v - 0.5);
    scored += s.size();

    const std::size_t g = effective_leg_size(cfg.leg_size, s.size(), cfg.mode);
    PortfolioPair pair = generate(s, g, cfg.mode);
    const ForwardReturns fwd = forward_returns(panel, ws.stocks, t);
    tr.returns.push_back(realize_return(pair, fwd.z));
    if (with_grad) {
      const ad::Var ll = portfolio_log_likelihood(scores, pair, cfg.surrogate);
      tr.log_likelihood += ll.value().item();
      tape.backward(ll);
      for (std::size_t i = 0; i < kNumParams; ++i) {
        auto dst = tr.log_likelihood_grad[i].data();
        const auto src = pv.vars[i].grad().data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
    tr.portfolios.push_back(std::move(pair));
  }
  tr.mean_abs_score_gap = scored ? gap_sum / static_cast<double>(scored) : 0.0;
  tr.sharpe = sharpe(tr.returns, cfg.theta, cfg.tc);
  return tr;
}

Threshold market_threshold(const MarketPanel& panel, std::size_t t0, std::size_t horizon, double theta, double tc,
                           std::size_t lookback) {
  if (t0 < lookback || t0 + horizon >= panel.num_periods()) {
    throw DataError("market_threshold: window does not fit the panel");
  }
  std::vector<double> returns;
  for (std::size_t t = t0; t < t0 + horizon; ++t) {
    const auto stocks = eligible_stocks(panel, t, lookback);
    if (stocks.empty()) throw DataError("market_threshold: no eligible stocks at " + panel.period(t).str());
    const ForwardReturns fwd = forward_returns(panel, stocks, t);
    double mean = 0.0;
    for (double z : fwd.z) mean += z;
    returns.push_back(mean / static_cast<double>(fwd.z.size()) - 1.0);
  }
  // Spreads at rounding-noise level count as a flat market.
  double mean = 0.0, var = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  for (double r : returns) var += (r - mean) * (r - mean);
  if (std::sqrt(var / static_cast<double>(returns.size())) <= 1e-12) return {0.0, true};
  return {sharpe(returns, theta, tc), false};
}

ParamGrads weighted_gradient(std::span<const Trajectory> trajectories, std::span<const double> weights,
                             const PolicyParams& params) {
  if (trajectories.size() != weights.size()) throw UsageError("batch_gradient: one weight per trajectory");
  if (trajectories.empty()) throw UsageError("batch_gradient: empty batch");
  ParamGrads out = zero_grads(params);
  const double inv_n = 1.0 / static_cast<double>(trajectories.size());
  for (std::size_t n = 0; n < trajectories.size(); ++n) {
    if (!std::isfinite(weights[n])) {
      throw NumericError("batch_gradient: non-finite Sharpe in trajectory " + std::to_string(n));
    }
    const double weight = weights[n] * inv_n;
    for (std::size_t i = 0; i < kNumParams; ++i) {
      auto dst = out[i].data();
      const auto src = trajectories[n].log_likelihood_grad[i].data();
      if (src.size() != dst.size()) throw ShapeError("batch_gradient: trajectory gradient has wrong layout");
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] += weight * src[j];
        if (!std::isfinite(dst[j])) {
          throw NumericError("batch_gradient: non-finite gradient from trajectory " + std::to_string(n));
        }
      }
    }
  }
  return out;
}

ParamGrads batch_gradient(std::span<const Trajectory> trajectories, std::span<const double> thresholds,
                          const PolicyParams& params) {
  if (trajectories.size() != thresholds.size()) throw UsageError("batch_gradient: one threshold per trajectory");
  std::vector<double> advantages(trajectories.size());
  for (std::size_t n = 0; n < trajectories.size(); ++n) advantages[n] = trajectories[n].sharpe - thresholds[n];
  return weighted_gradient(trajectories, advantages, params);
}

double global_norm(const ParamGrads& g) {
  double sq = 0.0;
  for (const auto& t : g) {
    for (double v : t.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_global_norm(ParamGrads& g, double max_norm) {
  const double norm = global_norm(g);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& t : g) {
      for (double& v : t.data()) v *= k;
    }
  }
  return norm;
}

void ascend(PolicyParams& params, const ParamGrads& g, double lr) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    auto dst = params.tensors()[i].data();
    const auto src = g[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += lr * src[j];
  }
}

std::vector<std::size_t> valid_starts(const MarketPanel& panel, std::size_t lookback, std::size_t horizon,
                                      std::size_t end) {
  end = std::min(end, panel.num_periods());
  std::vector<std::size_t> out;
  for (std::size_t t0 = lookback; t0 + horizon + 1 <= end; ++t0) out.push_back(t0);
  return out;
}

namespace {

double validation_sharpe(const MarketPanel& panel, const PolicyParams& params, const TrainConfig& cfg,
                         std::size_t fit_end) {
  const std::size_t t0 = std::max(fit_end - 1, cfg.lookback);
  const std::size_t steps = panel.num_periods() - 1 - t0;
  try {
    return simulate_trajectory(panel, t0, params, cfg, false, steps).sharpe;
  } catch (const NumericError&) {
    return 0.0;
  }
}

}  // namespace

TrainResult train(const MarketPanel& panel, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Rng init_rng = Rng::substream(cfg.seed, "init");
  return train(panel, cfg, PolicyParams::init(cfg.policy, init_rng, cfg.init_gain), on_epoch);
}

TrainResult train(const MarketPanel& panel, const TrainConfig& cfg, PolicyParams initial,
                  const EpochCallback& on_epoch) {
  if (cfg.horizon < 2) throw UsageError("train: horizon T must be >= 2");
  if (cfg.batch < 1) throw UsageError("train: batch N must be >= 1");
  if (!(cfg.init_gain > 0.0)) throw UsageError("train: init_gain must be positive");
  if (!(cfg.learning_rate >= 0.0)) throw UsageError("train: learning rate must be non-negative");
  if (cfg.val_periods > 0 && cfg.val_periods < 2) throw UsageError("train: val_periods must be 0 or >= 2");
  if (cfg.val_periods >= panel.num_periods()) throw DataError("train: validation range swallows the panel");

  const std::size_t fit_end = panel.num_periods() - cfg.val_periods;
  const auto starts = valid_starts(panel, cfg.lookback, cfg.horizon, fit_end);
  if (starts.empty()) throw DataError("train: training range too short for one trajectory");

  Rng sampler = Rng::substream(cfg.seed, "sampling");
  TrainResult result;
  result.final_params = std::move(initial);
  result.best_params = result.final_params;
  const bool validate = cfg.val_periods > 0;
  if (validate) result.best_validation_sharpe = validation_sharpe(panel, result.final_params, cfg, fit_end);

  std::size_t flat_epochs = 0;
  std::vector<Trajectory> batch(cfg.batch);
  std::vector<double> thresholds(cfg.batch);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double sum_h = 0.0, sum_adv = 0.0, sum_gap = 0.0;
    for (std::size_t n = 0; n < cfg.batch; ++n) {
      const std::size_t t0 = starts[sampler.index(starts.size())];
      batch[n] = simulate_trajectory(panel, t0, result.final_params, cfg, true);
      thresholds[n] = market_threshold(panel, t0, cfg.horizon, cfg.theta, cfg.tc, cfg.lookback).value;
      sum_h += batch[n].sharpe;
      sum_adv += batch[n].sharpe - thresholds[n];
      sum_gap += batch[n].mean_abs_score_gap;
    }
    const double n = static_cast<double>(cfg.batch);
    std::vector<double> weights(cfg.batch);
    for (std::size_t k = 0; k < cfg.batch; ++k) weights[k] = batch[k].sharpe - thresholds[k];
    if (cfg.center_advantage) {
      const double mean = sum_adv / n;
      for (double& w : weights) w -= mean;
    }
    ParamGrads grad = weighted_gradient(batch, weights, result.final_params);
    EpochLog entry{epoch, sum_h / n, sum_adv / n, clip_global_norm(grad, cfg.clip_norm)};
    ascend(result.final_params, grad, cfg.learning_rate);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (sum_gap / n < 1e-6 && entry.mean_advantage == 0.0) {
      if (++flat_epochs >= 10) throw NumericError("train: policy collapsed to constant scores with zero advantage");
    } else {
      flat_epochs = 0;
    }

    if (validate && (epoch % std::max<std::size_t>(cfg.val_every, 1) == 0 || epoch == cfg.epochs)) {
      const double v = validation_sharpe(panel, result.final_params, cfg, fit_end);
      if (v > result.best_validation_sharpe) {
        result.best_validation_sharpe = v;
        result.best_params = result.final_params;
      }
    }
  }
  if (!validate) result.best_params = result.final_params;
  return result;
}

void write_learning_curve(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,mean_H,mean_advantage,grad_norm\n";
  char buf[128];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", e.epoch, e.mean_sharpe, e.mean_advantage, e.grad_norm);
    out << buf;
  }
}

}  // namespace bwsl
