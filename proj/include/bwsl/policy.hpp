#pragma once

// Winner-score policy: a shared LSTM encoder with attention over its own
// hidden states, followed by self-attention across all stocks whose
// coefficients are modulated by the distance between last-period
// return ranks, and a sigmoid score head.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bwsl/autodiff.hpp"
#include "bwsl/features.hpp"
#include "bwsl/rng.hpp"

namespace bwsl {

struct PolicyConfig {
  std::size_t features = kNumFeatures;
  std::size_t hidden = 32;
  std::size_t embed = 8;
  std::size_t lookup_cols = 16;
  std::size_t quant = 4;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

enum class Param : std::size_t {
  LstmWx,   // F x 4H, gate blocks [input, forget, candidate, output]
  LstmWh,   // H x 4H
  LstmB,    // 1 x 4H
  HistW1,   // H x H, applied to every hidden state
  HistW2,   // H x H, applied to the last hidden state
  HistW,    // H x 1
  CaanWq,   // H x H
  CaanWk,   // H x H
  CaanWv,   // H x H
  ScoreW,   // H x 1
  ScoreE,   // 1 x 1
  PriorL,   // E x lookup_cols, one embedding column per quantized distance
  PriorW,   // 1 x E
};
inline constexpr std::size_t kNumParams = 13;

class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(const PolicyConfig& cfg);  // all zeros

  // Uniform(+-1/sqrt(fan_in)) weights, forget-gate bias 1, other biases 0.
  // attention_gain widens the bounds of the cross-asset attention
  // projections and the score weights.
  static PolicyParams init(const PolicyConfig& cfg, Rng& rng, double attention_gain = 1.0);

  const PolicyConfig& config() const { return cfg_; }
  ad::Tensor& operator[](Param p) { return tensors_[static_cast<std::size_t>(p)]; }
  const ad::Tensor& operator[](Param p) const { return tensors_[static_cast<std::size_t>(p)]; }
  std::span<ad::Tensor> tensors() { return tensors_; }
  std::span<const ad::Tensor> tensors() const { return tensors_; }

  static std::string_view name(Param p);
  std::size_t num_values() const;
  ad::Tensor flatten() const;
  void assign_flat(const ad::Tensor& flat);

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  PolicyConfig cfg_;
  std::array<ad::Tensor, kNumParams> tensors_;
};

// Gradient buffers share the parameter layout.
using ParamGrads = std::array<ad::Tensor, kNumParams>;
ParamGrads zero_grads(const PolicyParams& params);

// Versioned text checkpoint; values are hex floats so reload is bit-exact.
void write_checkpoint(std::ostream& out, const PolicyParams& params);
PolicyParams read_checkpoint(std::istream& in);
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

// Quantized rank distance, clamped to the lookup width.
std::size_t prior_distance(int rank_i, int rank_j, std::size_t quant, std::size_t lookup_cols);

namespace graph {

struct ParamVars {
  std::array<ad::Var, kNumParams> vars;
  PolicyConfig cfg;
  ad::Var operator[](Param p) const { return vars[static_cast<std::size_t>(p)]; }
};

ParamVars bind(ad::Tape& tape, const PolicyParams& params, bool requires_grad = true);
ParamGrads collect_grads(const ParamVars& pv);

// steps[k] is I x F; returns h_1..h_K, each I x H.
std::vector<ad::Var> lstm_encode(const ParamVars& pv, std::span<const ad::Var> steps);
// I x H representations.
ad::Var history_attention(const ParamVars& pv, std::span<const ad::Var> hidden);
// I x I prior coefficients.
ad::Var prior_matrix(const ParamVars& pv, std::span<const int> ranks);
// I x H attention vectors.
ad::Var caan(const ParamVars& pv, ad::Var reps, std::span<const int> ranks);
// I x 1 scores.
ad::Var winner_scores(const ParamVars& pv, ad::Var attn);
ad::Var policy_scores(const ParamVars& pv, std::span<const ad::Var> steps, std::span<const int> ranks);

}  // namespace graph

// Value-level entry points. Each builds a throwaway tape.
ad::Tensor lstm_encode(const StockWindow& window, const PolicyParams& params);  // K x H
ad::Tensor history_attention(const ad::Tensor& hidden, const PolicyParams& params);  // K x H -> 1 x H
double prior_weight(int rank_i, int rank_j, const PolicyParams& params);
ad::Tensor caan_forward(const ad::Tensor& reps, std::span<const int> ranks, const PolicyParams& params);
std::vector<double> winner_scores(const ad::Tensor& attn, const PolicyParams& params);
std::vector<double> policy_forward(std::span<const StockWindow> windows, std::span<const int> ranks,
                                   const PolicyParams& params);

}  // namespace bwsl
