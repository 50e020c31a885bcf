#pragma once

// Sharpe-ratio policy gradient. Each trajectory is a T-period investment;
// its Sharpe ratio minus the market's Sharpe over the same window weights
// the gradient of the summed log portfolio weights of every period.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/market_data.hpp"
#include "bwsl/policy.hpp"
#include "bwsl/portfolio.hpp"

namespace bwsl {

// Which log-probability the score-function estimator differentiates.
//   Leg:      log b_c, the within-leg softmax weight of each held stock.
//   Universe: log of the held stock's softmax weight over the whole
//             eligible universe (s for the long side, 1 - s for the short).
enum class Surrogate { Leg, Universe };
std::string_view surrogate_name(Surrogate s);
Surrogate parse_surrogate(std::string_view text);

struct TrainConfig {
  std::size_t horizon = 12;   // T
  std::size_t batch = 16;     // N
  std::size_t epochs = 100;
  std::size_t lookback = 12;  // K
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::size_t leg_size = 0;  // 0: floor(I_t / 4) each period
  Mode mode = Mode::LongShort;
  Surrogate surrogate = Surrogate::Leg;
  double theta = 0.0;
  double tc = 0.001;
  // Trailing periods of the training panel held out for picking the best
  // parameters; 0 disables validation.
  std::size_t val_periods = 0;
  std::size_t val_every = 10;
  std::uint64_t seed = 1;
  double init_gain = 1.0;  // attention_gain of PolicyParams::init
  // Subtract the batch-mean advantage before weighting, so only
  // trajectories that beat the market by more than their batch-mates are
  // reinforced.
  bool center_advantage = false;
  PolicyConfig policy;
};

struct Trajectory {
  std::size_t t0 = 0;
  std::vector<PortfolioPair> portfolios;
  std::vector<double> returns;
  double sharpe = 0.0;
  double log_likelihood = 0.0;  // sum over periods of the surrogate
  ParamGrads log_likelihood_grad;
  double mean_abs_score_gap = 0.0;  // mean |s - 0.5| over all scored stocks
};

// Leg size actually used for a universe of I stocks.
std::size_t effective_leg_size(std::size_t configured, std::size_t universe, Mode mode);

// Surrogate log-likelihood of one period's portfolio under `scores` (I x 1).
ad::Var portfolio_log_likelihood(ad::Var scores, const PortfolioPair& pair, Surrogate surrogate);

// Runs `horizon` decisions starting at t0 (cfg.horizon when 0).
Trajectory simulate_trajectory(const MarketPanel& panel, std::size_t t0, const PolicyParams& params,
                               const TrainConfig& cfg, bool with_grad = true, std::size_t horizon = 0);

struct Threshold {
  double value = 0.0;
  bool degenerate = false;  // market returns had zero spread; value forced to 0
};

// Sharpe of the equal-weight market over the same decisions as a trajectory.
Threshold market_threshold(const MarketPanel& panel, std::size_t t0, std::size_t horizon, double theta, double tc,
                           std::size_t lookback);

// (1/N) sum_n (H_n - H0_n) * grad sum log-likelihood_n, advantages held constant.
ParamGrads batch_gradient(std::span<const Trajectory> trajectories, std::span<const double> thresholds,
                          const PolicyParams& params);

// (1/N) sum_n w_n * grad sum log-likelihood_n for given weights.
ParamGrads weighted_gradient(std::span<const Trajectory> trajectories, std::span<const double> weights,
                             const PolicyParams& params);

double global_norm(const ParamGrads& g);
// Rescales in place so the global norm is at most max_norm; returns the pre-clip norm.
double clip_global_norm(ParamGrads& g, double max_norm);
// params += lr * g
void ascend(PolicyParams& params, const ParamGrads& g, double lr);

// Decision times t0 whose trajectory fits inside [lookback, end) with one
// extra close after the last decision.
std::vector<std::size_t> valid_starts(const MarketPanel& panel, std::size_t lookback, std::size_t horizon,
                                      std::size_t end);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_sharpe = 0.0;
  double mean_advantage = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  PolicyParams final_params;
  PolicyParams best_params;
  double best_validation_sharpe = 0.0;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const MarketPanel& panel, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
TrainResult train(const MarketPanel& panel, const TrainConfig& cfg, PolicyParams initial,
                  const EpochCallback& on_epoch = {});

// CSV "epoch,mean_H,mean_advantage,grad_norm".
void write_learning_curve(std::ostream& out, std::span<const EpochLog> log);

}  // namespace bwsl
