#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bwsl/market_data.hpp"

namespace bwsl {

enum class Mode { LongShort, LongOnly };

std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view text);

// Positions index into the score vector the pair was generated from.
struct PortfolioPair {
  Mode mode = Mode::LongShort;
  std::size_t leg_size = 0;
  std::vector<std::size_t> long_idx;
  std::vector<double> long_w;
  std::vector<std::size_t> short_idx;
  std::vector<double> short_w;
  std::vector<double> combined;  // b_c: leg weight where held, 0 elsewhere

  friend bool operator==(const PortfolioPair&, const PortfolioPair&) = default;
};

// floor(I/4), at least 1.
std::size_t default_leg_size(std::size_t universe);

// Order of positions by descending score, ties to the lower position.
std::vector<std::size_t> descending_order(std::span<const double> scores);

// Top G by score form the long leg with softmax(s) weights; bottom G form
// the short leg with softmax(1 - s) weights.
PortfolioPair generate(std::span<const double> scores, std::size_t leg_size, Mode mode);

// Rate of return over one holding period given z = p_{t+1}/p_t per position.
double realize_return(const PortfolioPair& pair, std::span<const double> z);

// Price rising rates z = close_{t+1}/close_t for the given stocks. A stock
// without a bar at t+1 is treated as exited at its last close (z = 1) and
// reported in `substituted`.
struct ForwardReturns {
  std::vector<double> z;
  std::vector<std::size_t> substituted;  // positions
};
ForwardReturns forward_returns(const MarketPanel& panel, std::span<const std::size_t> stocks, std::size_t t);

}  // namespace bwsl
