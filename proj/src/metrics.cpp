#include "bwsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bwsl/errors.hpp"

namespace bwsl {

namespace {

struct Moments {
  double mean_net;  // mean of R - tc
  double std;       // population std of R
};

Moments moments(std::span<const double> r, double tc) {
  const double n = static_cast<double>(r.size());
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= n;
  if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) return {r[0] - tc, 0.0};
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  return {mean - tc, std::sqrt(var / n)};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

PerformanceReport build(std::span<const double> returns, double theta, double tc, double ny, bool strict) {
  PerformanceReport out;
  out.returns.assign(returns.begin(), returns.end());
  out.theta = theta;
  out.tc = tc;
  out.periods_per_year = ny;
  out.wealth = cumulative_wealth(returns, tc);
  out.cw = out.wealth.back();
  out.mdd = max_drawdown(out.wealth);
  if (returns.empty()) {
    if (strict) throw NumericError("report: no returns");
    out.vol_degenerate = out.cr_degenerate = out.ddr_degenerate = true;
    out.mean = out.volatility = out.sharpe = out.apr = out.avol = out.asr = out.cr = out.ddr =
        std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  const Moments m = moments(returns, tc);
  out.mean = m.mean_net;
  out.volatility = m.std;
  out.apr = m.mean_net * ny;
  out.avol = m.std * std::sqrt(ny);
  if (returns.size() < 2 || m.std == 0.0) {
    if (strict) throw NumericError("zero volatility: returns have no spread");
    out.vol_degenerate = true;
    out.sharpe = out.asr = std::numeric_limits<double>::quiet_NaN();
  } else {
    out.sharpe = (m.mean_net - theta) / m.std;
    out.asr = out.apr / out.avol;
  }

  out.cr = out.apr / out.mdd;
  out.cr_degenerate = out.mdd == 0.0;

  double down = 0.0;
  bool any_below = false;
  for (double x : returns) {
    const double d = std::min(x, 0.0);
    any_below = any_below || x < 0.0;
    down += d * d;
  }
  const double downside = std::sqrt(down / static_cast<double>(returns.size()));
  out.ddr = out.apr / downside;
  out.ddr_degenerate = !any_below;
  return out;
}

}  // namespace

double sharpe(std::span<const double> returns, double theta, double tc) {
  if (returns.size() < 2) throw NumericError("sharpe: need at least 2 returns");
  const Moments m = moments(returns, tc);
  if (m.std == 0.0) throw NumericError("zero volatility: returns have no spread");
  return (m.mean_net - theta) / m.std;
}

std::vector<double> cumulative_wealth(std::span<const double> returns, double tc) {
  std::vector<double> w;
  w.reserve(returns.size() + 1);
  w.push_back(1.0);
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const double factor = returns[t] + 1.0 - tc;
    if (!(factor > 0.0)) {
      throw NumericError("ruin: wealth factor " + fmt(factor) + " at period " + std::to_string(t + 1));
    }
    w.push_back(w.back() * factor);
  }
  return w;
}

double max_drawdown(std::span<const double> wealth) {
  double peak = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < wealth.size(); ++i) {
    if (i == 0 || wealth[i] > peak) peak = wealth[i];
    worst = std::max(worst, (peak - wealth[i]) / peak);
  }
  return worst;
}

PerformanceReport report(std::span<const double> returns, double theta, double tc, double periods_per_year) {
  if (returns.size() < 2) throw NumericError("report: need at least 2 returns");
  return build(returns, theta, tc, periods_per_year, true);
}

PerformanceReport report_flagged(std::span<const double> returns, double theta, double tc,
                                 double periods_per_year) {
  return build(returns, theta, tc, periods_per_year, false);
}

std::string to_key_value(const PerformanceReport& r) {
  std::ostringstream os;
  os << "periods=" << r.returns.size() << '\n'
     << "theta=" << fmt(r.theta) << '\n'
     << "tc=" << fmt(r.tc) << '\n'
     << "periods_per_year=" << fmt(r.periods_per_year) << '\n'
     << "A=" << fmt(r.mean) << '\n'
     << "V=" << fmt(r.volatility) << '\n'
     << "H=" << fmt(r.sharpe) << '\n'
     << "APR=" << fmt(r.apr) << '\n'
     << "AVOL=" << fmt(r.avol) << '\n'
     << "ASR=" << fmt(r.asr) << '\n'
     << "MDD=" << fmt(r.mdd) << '\n'
     << "CR=" << fmt(r.cr) << '\n'
     << "DDR=" << fmt(r.ddr) << '\n'
     << "CW=" << fmt(r.cw) << '\n'
     << "vol_degenerate=" << r.vol_degenerate << '\n'
     << "cr_degenerate=" << r.cr_degenerate << '\n'
     << "ddr_degenerate=" << r.ddr_degenerate << '\n';
  return os.str();
}

std::string report_csv_header() {
  return "strategy,periods,APR,AVOL,ASR,MDD,CR,DDR,CW,H,vol_degenerate,cr_degenerate,ddr_degenerate";
}

std::string report_csv_row(const std::string& strategy, const PerformanceReport& r) {
  std::ostringstream os;
  os << strategy << ',' << r.returns.size() << ',' << fmt(r.apr) << ',' << fmt(r.avol) << ',' << fmt(r.asr) << ','
     << fmt(r.mdd) << ',' << fmt(r.cr) << ',' << fmt(r.ddr) << ',' << fmt(r.cw) << ',' << fmt(r.sharpe) << ','
     << r.vol_degenerate << ',' << r.cr_degenerate << ',' << r.ddr_degenerate;
  return os.str();
}

}  // namespace bwsl
