#pragma once

#include <string>
#include <vector>

// Minimal static SVG charts. Output depends only on the inputs, so files
// are byte-stable across runs.
namespace bwsl::svg {

struct Series {
  std::string name;
  std::vector<double> values;
};

// Multi-series line chart; x is the point index, labels mark a few ticks.
std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::vector<std::string>& x_labels);

// Bars around a zero baseline.
std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

}  // namespace bwsl::svg
