// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failed criteria.
//
//   acceptance            all criteria
//   acceptance 1 3 5      a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "bwsl/backtester.hpp"
#include "bwsl/interpreter.hpp"
#include "bwsl/metrics.hpp"
#include "bwsl/trainer.hpp"

namespace fs = std::filesystem;
using namespace bwsl;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::vector<StockWindow> random_windows(std::size_t stocks, std::size_t k, Rng& rng) {
  std::vector<StockWindow> ws(stocks);
  for (std::size_t i = 0; i < stocks; ++i) {
    ws[i].stock = i;
    ws[i].x = ad::Tensor(ad::Shape{k, kNumFeatures});
    for (double& v : ws[i].x.data()) v = rng.normal();
  }
  return ws;
}

std::vector<int> random_ranks(std::size_t n, Rng& rng) {
  std::vector<int> r(n);
  std::iota(r.begin(), r.end(), 1);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(r[i], r[rng.index(i + 1)]);
  return r;
}

// Parameters drawn from U(-0.5, 0.5): attention is far from uniform while
// the LSTM gates stay out of saturation. Query, key and score weights are
// wider so scores, and hence leg weights, differ visibly across stocks.
PolicyParams random_params(const PolicyConfig& cfg, Rng& rng) {
  PolicyParams p(cfg);
  for (ad::Tensor& t : p.tensors()) {
    for (double& v : t.data()) v = rng.uniform(-0.5, 0.5);
  }
  for (Param w : {Param::CaanWq, Param::CaanWk}) {
    for (double& v : p[w].data()) v = rng.uniform(-4.0, 4.0);
  }
  for (double& v : p[Param::ScoreW].data()) v = rng.uniform(-8.0, 8.0);
  return p;
}

struct FdStats {
  std::size_t coords = 0;
  std::size_t small = 0;  // |analytic| below the floor
  double worst = 0.0;
};

// Central differences over every parameter coordinate; relative error is
// |a - n| / max(|a|, |n|, 1e-6). Differences of O(1) values at h = 1e-5
// carry about 1e-11 of rounding noise, so the floor keeps near-zero
// coordinates from being judged on noise alone.
FdStats check_all(const PolicyParams& params, const std::function<double(const PolicyParams&)>& value,
                  const ParamGrads& analytic) {
  FdStats st;
  const double h = 1e-5;
  PolicyParams probe = params;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    for (std::size_t j = 0; j < params.tensors()[i].size(); ++j) {
      const double x0 = params.tensors()[i][j];
      probe.tensors()[i][j] = x0 + h;
      const double up = value(probe);
      probe.tensors()[i][j] = x0 - h;
      const double down = value(probe);
      probe.tensors()[i][j] = x0;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double e = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      if (std::abs(a) < 1e-6) ++st.small;
      st.worst = std::max(st.worst, e);
      ++st.coords;
    }
  }
  return st;
}

std::vector<ad::Var> constants(ad::Tape& tape, const std::vector<StockWindow>& ws) {
  std::vector<ad::Var> out;
  for (ad::Tensor& x : stack_steps(ws)) out.push_back(tape.constant(std::move(x)));
  return out;
}

Outcome criterion1() {
  const auto start = std::chrono::steady_clock::now();
  PolicyConfig cfg;
  cfg.hidden = 8;
  cfg.embed = 4;
  cfg.lookup_cols = 8;
  FdStats score, surrogate;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const PolicyParams params = random_params(cfg, rng);
    const auto ws = random_windows(8, 4, rng);
    const auto ranks = random_ranks(8, rng);

    auto s1 = [&](const PolicyParams& p, bool grad, ParamGrads* out) {
      ad::Tape tape;
      const auto pv = graph::bind(tape, p, grad);
      const ad::Var s = ad::slice(graph::policy_scores(pv, constants(tape, ws), ranks), 0, 0, 1);
      if (grad) {
        tape.backward(s);
        *out = graph::collect_grads(pv);
      }
      return s.value().item();
    };
    ParamGrads g;
    s1(params, true, &g);
    const FdStats a = check_all(params, [&](const PolicyParams& p) { return s1(p, false, nullptr); }, g);

    // Positions held at the unperturbed point stay fixed while probing.
    const PortfolioPair pair = generate(policy_forward(ws, ranks, params), 2, Mode::LongShort);
    auto ll = [&](const PolicyParams& p, bool grad, ParamGrads* out) {
      ad::Tape tape;
      const auto pv = graph::bind(tape, p, grad);
      const ad::Var v =
          portfolio_log_likelihood(graph::policy_scores(pv, constants(tape, ws), ranks), pair, Surrogate::Leg);
      if (grad) {
        tape.backward(v);
        *out = graph::collect_grads(pv);
      }
      return v.value().item();
    };
    ll(params, true, &g);
    const FdStats b = check_all(params, [&](const PolicyParams& p) { return ll(p, false, nullptr); }, g);

    score.small += a.small;
    surrogate.small += b.small;
    score.coords += a.coords;
    score.worst = std::max(score.worst, a.worst);
    surrogate.coords += b.coords;
    surrogate.worst = std::max(surrogate.worst, b.worst);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = score.worst <= 1e-4 && surrogate.worst <= 1e-4 && score.coords >= 100 &&
                    surrogate.coords >= 100 && secs < 120.0;
  return {pass, format("s_1: %zu coords (%zu below 1e-6), max rel err %.2e; sum log b: %zu coords (%zu below 1e-6), "
                       "max rel err %.2e; %.1fs",
                       score.coords, score.small, score.worst, surrogate.coords, surrogate.small, surrogate.worst,
                       secs)};
}

Outcome criterion2() {
  PolicyConfig cfg;
  cfg.hidden = 8;
  cfg.embed = 4;
  cfg.lookup_cols = 8;
  Rng rng(22);
  const PolicyParams params = PolicyParams::init(cfg, rng);
  const std::size_t n = 16;
  const auto ws = random_windows(n, 6, rng);
  const auto ranks = random_ranks(n, rng);
  const auto base = policy_forward(ws, ranks, params);
  const PortfolioPair base_pair = generate(base, default_leg_size(n), Mode::LongShort);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    std::vector<StockWindow> pw;
    std::vector<int> pr;
    for (std::size_t i : perm) {
      pw.push_back(ws[i]);
      pr.push_back(ranks[i]);
    }
    const auto s = policy_forward(pw, pr, params);
    const PortfolioPair pair = generate(s, default_leg_size(n), Mode::LongShort);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(s[i] - base[perm[i]]));
      worst = std::max(worst, std::abs(pair.combined[i] - base_pair.combined[perm[i]]));
    }
  }
  return {worst <= 1e-10, format("50 permutations of 16 stocks, max deviation %.2e", worst)};
}

Outcome criterion3() {
  Rng rng(33);
  std::size_t exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> r(1 + rng.index(80));
    for (double& x : r) x = rng.uniform(-0.3, 0.3);
    const auto w = cumulative_wealth(r, 0.0);
    double brute = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t j = i; j < w.size(); ++j) brute = std::max(brute, (w[i] - w[j]) / w[i]);
    }
    if (max_drawdown(w) == brute) ++exact;
  }
  double asr_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(24 + rng.index(100));
    for (double& x : r) x = rng.uniform(-0.1, 0.12);
    const double ny = trial % 2 ? 12.0 : 52.0;
    const PerformanceReport rep = report(r, 0.0, 0.001, ny);
    asr_err = std::max(asr_err, std::abs(rep.asr - sharpe(r, 0.0, 0.001) * std::sqrt(ny)));
  }
  const double cw = report_flagged(std::vector<double>(12, 0.009), 0.0, 0.0, 12.0).cw;
  const double cw_err = std::abs(cw - std::pow(1.009, 12));
  return {exact == 1000 && asr_err <= 1e-12 && cw_err <= 1e-12,
          format("MDD exact on %zu/1000 series; ASR err %.2e; CW err %.2e", exact, asr_err, cw_err)};
}

Outcome criterion4() {
  Rng rng(44);
  double worst_r = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng.index(60);
    std::vector<double> s(n);
    for (double& v : s) v = rng.uniform();
    const PortfolioPair p = generate(s, 1 + rng.index(n / 2), Mode::LongShort);
    const std::vector<double> z(n, rng.uniform(0.7, 1.4));
    worst_r = std::max(worst_r, std::abs(realize_return(p, z)));
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.long_w.begin(), p.long_w.end(), 0.0) - 1.0));
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.short_w.begin(), p.short_w.end(), 0.0) - 1.0));
  }
  return {worst_r <= 1e-12 && worst_sum <= 1e-12,
          format("100 score vectors: max |R| %.2e, max |leg sum - 1| %.2e", worst_r, worst_sum)};
}

// ---- planted-signal experiments -------------------------------------------------

constexpr std::size_t kSplit = 159;  // last training month index; 80 held-out months follow

TrainConfig planted_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.horizon = 12;
  c.lookback = 12;
  c.batch = 16;
  c.epochs = 200;
  c.learning_rate = 0.25;
  c.surrogate = Surrogate::Universe;
  c.init_gain = 3.0;
  c.policy.hidden = 16;
  c.seed = seed;
  return c;
}

SynthConfig planted_market(std::uint64_t seed) {
  SynthConfig s;
  s.num_stocks = 50;
  s.num_periods = 240;
  s.market_vol = 0.003;
  s.seed = seed;
  return s;
}

Outcome criterion5() {
  const auto start = std::chrono::steady_clock::now();
  int beat = 0, rising = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc = planted_market(seed);
    sc.momentum = 0.03;
    sc.reversion = 0.002;
    const MarketPanel panel = synth_market(sc);
    const PanelSplit parts = split(panel, panel.period(kSplit), 12);
    const TrainResult tr = train(parts.train, planted_train_config(seed));
    BacktestConfig bc;
    const DecisionRange range = full_range(parts.test, 12);
    const double pol = run_policy(parts.test, tr.final_params, range, bc).report.asr;
    const double mkt = run_market(parts.test, range, bc).report.asr;
    const double early = tr.log[0].mean_advantage, late = tr.log[49].mean_advantage;
    beat += pol >= mkt;
    rising += late > early;
    detail += format(" [seed %llu ASR %.3f vs %.3f, adv %.3f -> %.3f]", static_cast<unsigned long long>(seed), pol,
                     mkt, early, late);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {beat >= 4 && rising >= 4 && secs < 1800.0,
          format("held-out ASR >= market in %d/5, advantage rose (epoch 1 to 50) in %d/5, %.0fs;", beat,
                 rising, secs) +
              detail};
}

Outcome criterion6() {
  const auto start = std::chrono::steady_clock::now();
  int negative = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc = planted_market(seed);
    sc.low_vol_premium = 0.01;
    sc.vol_switch = 0.05;
    const MarketPanel panel = synth_market(sc);
    const PanelSplit parts = split(panel, panel.period(kSplit), 12);
    const TrainResult tr = train(parts.train, planted_train_config(seed));
    const SensitivityReport rep =
        average_sensitivity(parts.test, tr.final_params, 12, parts.test.num_periods() - 1, 12);
    const std::size_t vol = static_cast<std::size_t>(Feature::VOL);
    std::size_t below = 0;
    double hi = -1e300;
    for (std::size_t lag = 0; lag < 12; ++lag) {
      below += rep.delta.at(vol, lag) < 0.0;
      hi = std::max(hi, rep.delta.at(vol, lag));
    }
    negative += below == 12;
    detail += format(" [seed %llu: %zu/12 lags negative, max %.2e]", static_cast<unsigned long long>(seed), below, hi);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {negative >= 4, format("VOL sensitivity negative at every lag in %d/5 seeds, %.0fs;", negative, secs) + detail};
}

Outcome criterion7() {
  SynthConfig sc = planted_market(7);
  sc.num_stocks = 20;
  sc.num_periods = 60;
  sc.momentum = 0.02;
  const MarketPanel panel = synth_market(sc);
  PolicyConfig pc;
  pc.hidden = 8;
  Rng rng(70);
  const PolicyParams params = PolicyParams::init(pc, rng, 3.0);
  BacktestConfig bc;
  const DecisionRange range = full_range(panel, 12);
  using Runner = std::function<BacktestRun(const MarketPanel&)>;
  const std::map<std::string, Runner> strategies = {
      {"policy", [&](const MarketPanel& p) { return run_policy(p, params, range, bc); }},
      {"market", [&](const MarketPanel& p) { return run_market(p, range, bc); }},
      {"tsm", [&](const MarketPanel& p) { return run_tsm(p, range, bc); }},
      {"csm", [&](const MarketPanel& p) { return run_csm(p, range, bc); }},
  };
  std::size_t compared = 0, changed = 0, cuts = 0;
  for (const auto& [name, run] : strategies) {
    const BacktestRun base = run(panel);
    for (std::size_t cut = range.first; cut <= range.last; cut += 5) {
      ++cuts;
      MarketPanel bad = panel;
      Rng noise(cut);
      for (std::size_t s = 0; s < bad.num_stocks(); ++s) {
        for (std::size_t t = cut + 1; t < bad.num_periods(); ++t) {
          Bar b = bad.bar(s, t);
          b.close *= noise.uniform(0.8, 1.25);
          b.vol *= noise.uniform(0.5, 2.0);
          b.volume *= noise.uniform(0.5, 2.0);
          b.mcap *= noise.uniform(0.5, 2.0);
          b.pe = noise.uniform(-10.0, 40.0);
          b.bm = noise.uniform(0.1, 3.0);
          b.div = noise.uniform(0.0, 1.0);
          bad.set_bar(s, t, b);
        }
        if (s % 4 == 0 && cut + 1 < bad.num_periods()) bad.clear_bar(s, cut + 1);
      }
      const BacktestRun after = run(bad);
      for (std::size_t t = range.first; t <= cut; ++t) {
        ++compared;
        changed += !(after.portfolios[t - range.first] == base.portfolios[t - range.first]) ||
                   after.universe[t - range.first] != base.universe[t - range.first];
      }
    }
  }
  return {changed == 0 && compared > 0,
          format("%zu corruptions over 4 strategies, %zu dated portfolios compared, %zu changed", cuts, compared,
                 changed)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome criterion8() {
  const fs::path dir = fs::temp_directory_path() / "bwsl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = BWSL_CLI;
  const std::string common = " --out " + dir.string() +
                             " --seed 8 --stocks 16 --periods 72 --momentum 0.02 --hidden 6 --epochs 4 --batch 4"
                             " --train_end 1974-12 --learning_rate 0.5 --init_gain 3";
  const std::string panel = " --panel " + (dir / "panel.csv").string();
  const std::string ckpt = " --checkpoint " + (dir / "policy.ckpt").string();
  int rc = sh(cli + " synth" + common);
  rc |= sh(cli + " train" + common + panel);
  rc |= sh(cli + " backtest" + common + panel + ckpt);
  rc |= sh(cli + " interpret" + common + panel + ckpt);
  if (rc != 0) return {false, "pipeline failed to run"};
  const auto first = snapshot(dir);
  for (const char* cmd : {"synth", "train", "backtest", "interpret"}) {
    rc |= sh(cli + " " + cmd + " --config " + (dir / ("manifest_" + std::string(cmd) + ".txt")).string());
  }
  if (rc != 0) return {false, "re-run from manifests failed"};
  const auto second = snapshot(dir);
  std::size_t same = 0;
  std::string differing;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it != second.end() && it->second == bytes) {
      ++same;
    } else {
      differing += " " + name;
    }
  }
  const bool pass = same == first.size() && second.size() == first.size();
  return {pass, format("%zu/%zu output files byte-identical after re-running every manifest", same, first.size()) +
                    (differing.empty() ? "" : ";" + differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8};
  std::vector<std::size_t> chosen;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: acceptance [criterion 1-8 ...]\n");
      return 64;
    }
    chosen.push_back(static_cast<std::size_t>(k));
  }
  if (chosen.empty()) {
    for (std::size_t k = 1; k <= criteria.size(); ++k) chosen.push_back(k);
  }
  int failed = 0;
  for (std::size_t k : chosen) {
    Outcome o{false, ""};
    try {
      o = criteria[k - 1]();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %zu: %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed;
}
