#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "bwsl/errors.hpp"
#include "bwsl/policy.hpp"
#include "helpers.hpp"

using namespace bwsl;
using ad::Tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

// row vector times matrix
std::vector<double> vecmat(const std::vector<double>& v, const Tensor& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t c = 0; c < w.cols(); ++c) {
    for (std::size_t r = 0; r < w.rows(); ++r) out[c] += v[r] * w.at(r, c);
  }
  return out;
}

std::vector<double> softmax(std::vector<double> v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double& x : v) z += (x = std::exp(x - m));
  for (double& x : v) x /= z;
  return v;
}

// Gate by gate, one stock at a time.
Mat lstm_ref(const Tensor& x, const PolicyParams& p) {
  const std::size_t h = p.config().hidden;
  std::vector<double> hid(h, 0.0), cell(h, 0.0);
  Mat out;
  for (std::size_t k = 0; k < x.rows(); ++k) {
    std::vector<double> xr(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) xr[f] = x.at(k, f);
    const auto a = vecmat(xr, p[Param::LstmWx]);
    const auto b = vecmat(hid, p[Param::LstmWh]);
    for (std::size_t j = 0; j < h; ++j) {
      auto z = [&](std::size_t gate) { return a[gate * h + j] + b[gate * h + j] + p[Param::LstmB][gate * h + j]; };
      const double i = sig(z(0)), f = sig(z(1)), g = std::tanh(z(2)), o = sig(z(3));
      cell[j] = f * cell[j] + i * g;
      hid[j] = o * std::tanh(cell[j]);
    }
    out.push_back(hid);
  }
  return out;
}

std::vector<double> history_ref(const Mat& hs, const PolicyParams& p) {
  const auto last = vecmat(hs.back(), p[Param::HistW2]);
  std::vector<double> logits;
  for (const auto& hk : hs) {
    auto a = vecmat(hk, p[Param::HistW1]);
    double l = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) l += std::tanh(a[j] + last[j]) * p[Param::HistW][j];
    logits.push_back(l);
  }
  const auto w = softmax(logits);
  std::vector<double> r(hs[0].size(), 0.0);
  for (std::size_t k = 0; k < hs.size(); ++k) {
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += w[k] * hs[k][j];
  }
  return r;
}

Mat caan_ref(const Mat& reps, const std::vector<int>& ranks, const PolicyParams& p) {
  const std::size_t n = reps.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.config().hidden));
  Mat q, k, v, out;
  for (const auto& r : reps) {
    q.push_back(vecmat(r, p[Param::CaanWq]));
    k.push_back(vecmat(r, p[Param::CaanWk]));
    v.push_back(vecmat(r, p[Param::CaanWv]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> beta(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double dot = std::inner_product(q[i].begin(), q[i].end(), k[j].begin(), 0.0);
      beta[j] = prior_weight(ranks[i], ranks[j], p) * dot * scale;
    }
    const auto w = softmax(beta);
    std::vector<double> a(v[0].size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < a.size(); ++c) a[c] += w[j] * v[j][c];
    }
    out.push_back(a);
  }
  return out;
}

Tensor from_mat(const Mat& m) {
  Tensor t(ad::Shape{m.size(), m[0].size()});
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m[0].size(); ++c) t.at(r, c) = m[r][c];
  }
  return t;
}

std::vector<StockWindow> random_windows(std::size_t stocks, std::size_t k, Rng& rng) {
  std::vector<StockWindow> ws(stocks);
  for (std::size_t i = 0; i < stocks; ++i) {
    ws[i].stock = i;
    ws[i].x = testing::random_tensor({k, kNumFeatures}, rng, -2.0, 2.0);
  }
  return ws;
}

double max_abs_diff(const Mat& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) worst = std::max(worst, std::abs(a[r][c] - b.at(r, c)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("parameter shapes and initialization") {
    const PolicyParams p = testing::small_params(6, 1, 4, 8);
    CHECK(p[Param::LstmWx].shape() == ad::Shape{kNumFeatures, 24});
    CHECK(p[Param::LstmWh].shape() == ad::Shape{6, 24});
    CHECK(p[Param::PriorL].shape() == ad::Shape{4, 8});
    CHECK(p[Param::PriorW].shape() == ad::Shape{1, 4});
    CHECK(p[Param::ScoreE].item() == 0.0);
    for (std::size_t j = 0; j < 24; ++j) CHECK(p[Param::LstmB][j] == (j >= 6 && j < 12 ? 1.0 : 0.0));
    const double bound = 1.0 / std::sqrt(6.0);
    for (double v : p[Param::CaanWq].data()) CHECK(std::abs(v) <= bound);
    Tensor flat = p.flatten();
    CHECK(flat.size() == p.num_values());
    PolicyParams q(p.config());
    q.assign_flat(flat);
    CHECK(q == p);
  }

  TEST_CASE("attention gain widens only the attention and score weights") {
    PolicyConfig cfg;
    cfg.hidden = 5;
    Rng a(3), b(3);
    const PolicyParams base = PolicyParams::init(cfg, a);
    const PolicyParams wide = PolicyParams::init(cfg, b, 3.0);
    for (std::size_t i = 0; i < kNumParams; ++i) {
      const auto which = static_cast<Param>(i);
      const bool scaled = which == Param::CaanWq || which == Param::CaanWk || which == Param::CaanWv ||
                          which == Param::ScoreW;
      for (std::size_t j = 0; j < base.tensors()[i].size(); ++j) {
        const double expect = scaled ? 3.0 * base.tensors()[i][j] : base.tensors()[i][j];
        CHECK(std::abs(wide.tensors()[i][j] - expect) <= 1e-15);
      }
    }
  }

  TEST_CASE("encoder matches a gate-by-gate recurrence") {
    Rng rng(2);
    const PolicyParams p = testing::small_params(5, 3);
    const auto ws = random_windows(1, 6, rng);
    const Tensor h = lstm_encode(ws[0], p);
    const Mat ref = lstm_ref(ws[0].x, p);
    CHECK(max_abs_diff(ref, h) <= 1e-14);
  }

  TEST_CASE("history attention matches the weighted sum of hidden states") {
    Rng rng(4);
    const PolicyParams p = testing::small_params(5, 5);
    const Tensor hs = testing::random_tensor({7, 5}, rng);
    const auto r = history_attention(hs, p);
    const auto ref = history_ref(to_mat(hs), p);
    CHECK(max_abs_diff(Mat{ref}, r) <= 1e-14);
  }

  TEST_CASE("prior distance quantizes and clamps") {
    CHECK(prior_distance(1, 1, 4, 8) == 0);
    CHECK(prior_distance(1, 4, 4, 8) == 0);
    CHECK(prior_distance(1, 5, 4, 8) == 1);
    CHECK(prior_distance(9, 1, 4, 8) == 2);
    CHECK(prior_distance(1, 100, 4, 8) == 7);
    CHECK(prior_distance(3, 2, 1, 16) == 1);
  }

  TEST_CASE("cross-asset attention matches the direct formula") {
    Rng rng(6);
    const PolicyParams p = testing::small_params(4, 7);
    const Tensor reps = testing::random_tensor({5, 4}, rng);
    const std::vector<int> ranks{3, 1, 5, 2, 4};
    const Tensor a = caan_forward(reps, ranks, p);
    CHECK(max_abs_diff(caan_ref(to_mat(reps), ranks, p), a) <= 1e-14);
  }

  TEST_CASE("full forward matches the composed references") {
    Rng rng(8);
    const PolicyParams p = testing::small_params(4, 9);
    const auto ws = random_windows(6, 5, rng);
    const std::vector<int> ranks{2, 6, 1, 4, 3, 5};
    Mat reps;
    for (const auto& w : ws) reps.push_back(history_ref(lstm_ref(w.x, p), p));
    const Mat attn = caan_ref(reps, ranks, p);
    const auto scores = policy_forward(ws, ranks, p);
    const auto head = winner_scores(from_mat(attn), p);
    for (std::size_t i = 0; i < 6; ++i) {
      double z = p[Param::ScoreE].item();
      for (std::size_t c = 0; c < 4; ++c) z += attn[i][c] * p[Param::ScoreW][c];
      CHECK(std::abs(scores[i] - sig(z)) <= 1e-14);
      CHECK(std::abs(head[i] - sig(z)) <= 1e-14);
      CHECK(scores[i] > 0.0);
      CHECK(scores[i] < 1.0);
    }
  }

  TEST_CASE("property: permuting stocks permutes scores") {
    Rng rng(10);
    const PolicyParams p = testing::small_params(5, 11);
    auto ws = random_windows(9, 4, rng);
    std::vector<int> ranks(9);
    std::iota(ranks.begin(), ranks.end(), 1);
    for (std::size_t i = 8; i > 0; --i) std::swap(ranks[i], ranks[rng.index(i + 1)]);
    const auto base = policy_forward(ws, ranks, p);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::size_t> perm(9);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = 8; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
      std::vector<StockWindow> pw;
      std::vector<int> pr;
      for (std::size_t i : perm) {
        pw.push_back(ws[i]);
        pr.push_back(ranks[i]);
      }
      const auto s = policy_forward(pw, pr, p);
      for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(s[i] - base[perm[i]]) <= 1e-10);
    }
  }

  TEST_CASE("score gradients match central differences") {
    Rng rng(12);
    const PolicyParams p = testing::small_params(4, 13);
    const auto ws = random_windows(5, 3, rng);
    const std::vector<int> ranks{1, 2, 3, 4, 5};
    for (std::size_t which = 0; which < kNumParams; ++which) {
      CAPTURE(which);
      const double err = ad::finite_diff_check(
          [&](ad::Tape& tape, ad::Var x) {
            auto pv = graph::bind(tape, p, false);
            pv.vars[which] = x;
            std::vector<ad::Var> steps;
            for (Tensor& s : stack_steps(ws)) steps.push_back(tape.constant(std::move(s)));
            return ad::sum(graph::policy_scores(pv, steps, ranks));
          },
          p.tensors()[which], 1e-6);
      CHECK(err <= 1e-4);
    }
  }

  TEST_CASE("checkpoints reload bit-exactly") {
    const PolicyParams p = testing::small_params(6, 14, 3, 5);
    std::stringstream ss;
    write_checkpoint(ss, p);
    const std::string text = ss.str();
    const PolicyParams q = read_checkpoint(ss);
    CHECK(q == p);
    std::stringstream again;
    write_checkpoint(again, q);
    CHECK(again.str() == text);
  }

  TEST_CASE("damaged checkpoints are rejected") {
    const PolicyParams p = testing::small_params(3, 15);
    std::stringstream ss;
    write_checkpoint(ss, p);
    std::string text = ss.str();
    std::istringstream bad_magic("nope 1\n");
    CHECK_THROWS_AS(read_checkpoint(bad_magic), DataError);
    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
    std::string wrong = text;
    wrong.replace(wrong.find("bwsl-policy 1"), 13, "bwsl-policy 9");
    std::istringstream version(wrong);
    CHECK_THROWS_AS(read_checkpoint(version), DataError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/policy.ckpt"), DataError);
  }

  TEST_CASE("input width must match the configured feature count") {
    const PolicyParams p = testing::small_params(3, 16);
    StockWindow w;
    w.x = Tensor(ad::Shape{4, 3});
    CHECK_THROWS_AS(lstm_encode(w, p), ShapeError);
    CHECK_THROWS_AS(caan_forward(Tensor(ad::Shape{1, 3}), std::vector<int>{1}, p), ShapeError);
  }
}
