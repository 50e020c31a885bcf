#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bwsl {

// (mean(R - tc) - theta) / population_std(R). Throws NumericError when the
// returns have zero spread or fewer than two entries.
double sharpe(std::span<const double> returns, double theta, double tc);

// wealth[0] = 1, wealth[t] = prod_{tau<=t} (R_tau + 1 - tc).
std::vector<double> cumulative_wealth(std::span<const double> returns, double tc);

// Largest peak-to-trough loss as a fraction of the running peak.
double max_drawdown(std::span<const double> wealth);

struct PerformanceReport {
  std::vector<double> returns;
  std::vector<double> wealth;
  double theta = 0.0;
  double tc = 0.0;
  double periods_per_year = 12.0;

  double mean = 0.0;       // A: average of R_t - tc
  double volatility = 0.0;  // V: population std of R_t
  double sharpe = 0.0;
  double apr = 0.0;
  double avol = 0.0;
  double asr = 0.0;
  double mdd = 0.0;
  double cr = 0.0;
  double ddr = 0.0;
  double cw = 1.0;

  // Degenerate denominators are flagged instead of thrown.
  bool vol_degenerate = false;  // V == 0 or fewer than two returns
  bool cr_degenerate = false;   // MDD == 0
  bool ddr_degenerate = false;  // no return below the zero MAR
};

// Strict: throws like sharpe() on zero volatility.
PerformanceReport report(std::span<const double> returns, double theta, double tc, double periods_per_year);
// Same measures, but zero volatility or a short series is flagged.
PerformanceReport report_flagged(std::span<const double> returns, double theta, double tc,
                                 double periods_per_year);

// "key=value" lines.
std::string to_key_value(const PerformanceReport& r);
// Column order of report_csv_row().
std::string report_csv_header();
std::string report_csv_row(const std::string& strategy, const PerformanceReport& r);

}  // namespace bwsl
