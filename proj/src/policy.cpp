#include "bwsl/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "bwsl/errors.hpp"

namespace bwsl {

namespace {

constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "lstm.Wx", "lstm.Wh", "lstm.b",  "hist.W1", "hist.W2", "hist.w",  "caan.Wq",
    "caan.Wk", "caan.Wv", "score.w", "score.e", "prior.L", "prior.w",
};

ad::Shape param_shape(Param p, const PolicyConfig& c) {
  const std::size_t h = c.hidden;
  switch (p) {
    case Param::LstmWx: return {c.features, 4 * h};
    case Param::LstmWh: return {h, 4 * h};
    case Param::LstmB: return {1, 4 * h};
    case Param::HistW1:
    case Param::HistW2:
    case Param::CaanWq:
    case Param::CaanWk:
    case Param::CaanWv: return {h, h};
    case Param::HistW:
    case Param::ScoreW: return {h, 1};
    case Param::ScoreE: return {1, 1};
    case Param::PriorL: return {c.embed, c.lookup_cols};
    case Param::PriorW: return {1, c.embed};
  }
  return {};
}

void check_config(const PolicyConfig& c) {
  if (c.features == 0 || c.hidden == 0 || c.embed == 0 || c.lookup_cols == 0 || c.quant == 0) {
    throw UsageError("policy config: every dimension and the quantization must be >= 1");
  }
}

}  // namespace

PolicyParams::PolicyParams(const PolicyConfig& cfg) : cfg_(cfg) {
  check_config(cfg);
  for (std::size_t i = 0; i < kNumParams; ++i) tensors_[i] = ad::Tensor(param_shape(static_cast<Param>(i), cfg));
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg, Rng& rng, double attention_gain) {
  PolicyParams p(cfg);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto which = static_cast<Param>(i);
    if (which == Param::LstmB || which == Param::ScoreE) continue;
    ad::Tensor& t = p.tensors_[i];
    // Contraction runs over rows, except for the 1 x E prior weight.
    const std::size_t fan_in = which == Param::PriorW ? t.cols() : t.rows();
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (which == Param::CaanWq || which == Param::CaanWk || which == Param::CaanWv || which == Param::ScoreW) {
      bound *= attention_gain;
    }
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
  }
  ad::Tensor& b = p[Param::LstmB];
  for (std::size_t j = cfg.hidden; j < 2 * cfg.hidden; ++j) b[j] = 1.0;
  return p;
}

std::string_view PolicyParams::name(Param p) { return kParamNames[static_cast<std::size_t>(p)]; }

std::size_t PolicyParams::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ad::Tensor PolicyParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_values());
  for (const auto& t : tensors_) flat.insert(flat.end(), t.data().begin(), t.data().end());
  return ad::Tensor::vector(std::move(flat));
}

void PolicyParams::assign_flat(const ad::Tensor& flat) {
  if (flat.size() != num_values()) throw ShapeError("assign_flat: length does not match parameter count");
  std::size_t off = 0;
  for (auto& t : tensors_) {
    std::copy_n(flat.data().begin() + static_cast<std::ptrdiff_t>(off), t.size(), t.data().begin());
    off += t.size();
  }
}

ParamGrads zero_grads(const PolicyParams& params) {
  ParamGrads g;
  for (std::size_t i = 0; i < kNumParams; ++i) g[i] = ad::Tensor(params.tensors()[i].shape());
  return g;
}

// ---- checkpoint --------------------------------------------------------------

void write_checkpoint(std::ostream& out, const PolicyParams& params) {
  const PolicyConfig& c = params.config();
  out << "bwsl-policy 1\n";
  out << "features " << c.features << "\nhidden " << c.hidden << "\nembed " << c.embed << "\nlookup_cols "
      << c.lookup_cols << "\nquant " << c.quant << "\n";
  char buf[64];
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const ad::Tensor& t = params.tensors()[i];
    out << "tensor " << kParamNames[i] << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t col = 0; col < t.cols(); ++col) {
        auto res = std::to_chars(buf, buf + sizeof buf, t.at(r, col), std::chars_format::hex);
        if (col) out << ' ';
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

PolicyParams read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "bwsl-policy") throw DataError("checkpoint: bad magic '" + magic + "'");
  if (version != 1) throw DataError("checkpoint: unsupported version " + std::to_string(version));

  PolicyConfig c;
  std::map<std::string, std::size_t*> dims = {{"features", &c.features},
                                              {"hidden", &c.hidden},
                                              {"embed", &c.embed},
                                              {"lookup_cols", &c.lookup_cols},
                                              {"quant", &c.quant}};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    std::string key;
    std::size_t value = 0;
    if (!(in >> key >> value) || !dims.count(key)) throw DataError("checkpoint: bad header key '" + key + "'");
    *dims[key] = value;
  }
  PolicyParams params(c);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    in >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != kParamNames[i]) {
      throw DataError("checkpoint: expected tensor " + std::string(kParamNames[i]) + ", found '" + name + "'");
    }
    ad::Tensor& t = params.tensors()[i];
    if (rows != t.rows() || cols != t.cols()) throw DataError("checkpoint: shape mismatch for " + name);
    for (double& v : t.data()) {
      std::string tok;
      in >> tok;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw DataError("checkpoint: bad value '" + tok + "' in " + name);
      }
    }
  }
  std::string tail;
  in >> tail;
  if (tail != "end") throw DataError("checkpoint: missing end marker");
  return params;
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::size_t prior_distance(int rank_i, int rank_j, std::size_t quant, std::size_t lookup_cols) {
  const auto gap = static_cast<std::size_t>(std::abs(rank_i - rank_j));
  return std::min(gap / quant, lookup_cols - 1);
}

// ---- graph construction --------------------------------------------------------

namespace graph {

using ad::Var;

ParamVars bind(ad::Tape& tape, const PolicyParams& params, bool requires_grad) {
  ParamVars pv;
  pv.cfg = params.config();
  for (std::size_t i = 0; i < kNumParams; ++i) pv.vars[i] = tape.leaf(params.tensors()[i], requires_grad);
  return pv;
}

ParamGrads collect_grads(const ParamVars& pv) {
  ParamGrads g;
  for (std::size_t i = 0; i < kNumParams; ++i) g[i] = pv.vars[i].grad();
  return g;
}

std::vector<Var> lstm_encode(const ParamVars& pv, std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("lstm_encode: empty window");
  const std::size_t h = pv.cfg.hidden;
  const std::size_t n = steps[0].value().rows();
  for (const Var& x : steps) {
    if (x.value().rank() != 2 || x.value().cols() != pv.cfg.features) {
      throw ShapeError("lstm_encode: step input " + ad::shape_string(x.shape()) + " does not have F=" +
                       std::to_string(pv.cfg.features) + " columns");
    }
  }
  ad::Tape& tape = *steps[0].tape;
  Var hidden = tape.constant(ad::Tensor(ad::Shape{n, h}));
  Var cell = tape.constant(ad::Tensor(ad::Shape{n, h}));
  std::vector<Var> out;
  out.reserve(steps.size());
  for (const Var& x : steps) {
    Var z = ad::matmul(x, pv[Param::LstmWx]) + ad::matmul(hidden, pv[Param::LstmWh]) + pv[Param::LstmB];
    Var in_gate = ad::sigmoid(ad::slice(z, 1, 0, h));
    Var forget = ad::sigmoid(ad::slice(z, 1, h, 2 * h));
    Var cand = ad::tanh(ad::slice(z, 1, 2 * h, 3 * h));
    Var out_gate = ad::sigmoid(ad::slice(z, 1, 3 * h, 4 * h));
    cell = forget * cell + in_gate * cand;
    hidden = out_gate * ad::tanh(cell);
    out.push_back(hidden);
  }
  return out;
}

Var history_attention(const ParamVars& pv, std::span<const Var> hidden) {
  if (hidden.empty()) throw ShapeError("history_attention: no hidden states");
  Var last = ad::matmul(hidden.back(), pv[Param::HistW2]);
  std::vector<Var> logits;
  logits.reserve(hidden.size());
  for (const Var& hk : hidden) {
    logits.push_back(ad::matmul(ad::tanh(ad::matmul(hk, pv[Param::HistW1]) + last), pv[Param::HistW]));
  }
  Var weights = ad::softmax_rows(ad::concat(logits, 1));
  Var r = ad::slice(weights, 1, 0, 1) * hidden[0];
  for (std::size_t k = 1; k < hidden.size(); ++k) r = r + ad::slice(weights, 1, k, k + 1) * hidden[k];
  return r;
}

Var prior_matrix(const ParamVars& pv, std::span<const int> ranks) {
  const std::size_t n = ranks.size();
  Var coeff = ad::sigmoid(ad::matmul(pv[Param::PriorW], pv[Param::PriorL]));  // 1 x lookup_cols
  std::vector<std::size_t> index(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      index[i * n + j] = prior_distance(ranks[i], ranks[j], pv.cfg.quant, pv.cfg.lookup_cols);
    }
  }
  return ad::gather(coeff, std::move(index), ad::Shape{n, n});
}

Var caan(const ParamVars& pv, Var reps, std::span<const int> ranks) {
  const std::size_t n = reps.value().rows();
  if (n < 2) throw ShapeError("caan: needs at least 2 stocks");
  if (ranks.size() != n) throw ShapeError("caan: rank vector does not match stock count");
  Var q = ad::matmul(reps, pv[Param::CaanWq]);
  Var k = ad::matmul(reps, pv[Param::CaanWk]);
  Var v = ad::matmul(reps, pv[Param::CaanWv]);
  Var affinity = ad::matmul(q, ad::transpose(k));
  Var beta = ad::scale(prior_matrix(pv, ranks) * affinity, 1.0 / std::sqrt(static_cast<double>(pv.cfg.hidden)));
  return ad::matmul(ad::softmax_rows(beta), v);
}

Var winner_scores(const ParamVars& pv, Var attn) {
  return ad::sigmoid(ad::matmul(attn, pv[Param::ScoreW]) + pv[Param::ScoreE]);
}

Var policy_scores(const ParamVars& pv, std::span<const Var> steps, std::span<const int> ranks) {
  const auto hidden = lstm_encode(pv, steps);
  return winner_scores(pv, caan(pv, history_attention(pv, hidden), ranks));
}

}  // namespace graph

// ---- value-level wrappers -------------------------------------------------------

ad::Tensor lstm_encode(const StockWindow& window, const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  const std::size_t steps = window.x.rows();
  const std::size_t feats = window.x.cols();
  std::vector<ad::Var> xs;
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> row(window.x.data().begin() + static_cast<std::ptrdiff_t>(k * feats),
                            window.x.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * feats));
    xs.push_back(tape.constant(ad::Tensor::matrix(1, feats, std::move(row))));
  }
  const auto hs = graph::lstm_encode(pv, xs);
  ad::Tensor out(ad::Shape{steps, params.config().hidden});
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t j = 0; j < out.cols(); ++j) out.at(k, j) = hs[k].value()[j];
  }
  return out;
}

ad::Tensor history_attention(const ad::Tensor& hidden, const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  std::vector<ad::Var> hs;
  for (std::size_t k = 0; k < hidden.rows(); ++k) {
    std::vector<double> row(hidden.data().begin() + static_cast<std::ptrdiff_t>(k * hidden.cols()),
                            hidden.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * hidden.cols()));
    hs.push_back(tape.constant(ad::Tensor::matrix(1, hidden.cols(), std::move(row))));
  }
  return graph::history_attention(pv, hs).value();
}

double prior_weight(int rank_i, int rank_j, const PolicyParams& params) {
  const PolicyConfig& c = params.config();
  const std::size_t d = prior_distance(rank_i, rank_j, c.quant, c.lookup_cols);
  double dot = 0.0;
  for (std::size_t e = 0; e < c.embed; ++e) dot += params[Param::PriorW][e] * params[Param::PriorL].at(e, d);
  return 1.0 / (1.0 + std::exp(-dot));
}

ad::Tensor caan_forward(const ad::Tensor& reps, std::span<const int> ranks, const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  return graph::caan(pv, tape.constant(reps), ranks).value();
}

std::vector<double> winner_scores(const ad::Tensor& attn, const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  const ad::Tensor s = graph::winner_scores(pv, tape.constant(attn)).value();
  return {s.data().begin(), s.data().end()};
}

std::vector<double> policy_forward(std::span<const StockWindow> windows, std::span<const int> ranks,
                                   const PolicyParams& params) {
  ad::Tape tape;
  const auto pv = graph::bind(tape, params, false);
  std::vector<ad::Var> steps;
  for (ad::Tensor& x : stack_steps(windows)) steps.push_back(tape.constant(std::move(x)));
  const ad::Tensor s = graph::policy_scores(pv, steps, ranks).value();
  return {s.data().begin(), s.data().end()};
}

}  // namespace bwsl
