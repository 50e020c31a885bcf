#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bwsl {

// 64-bit FNV-1a over bytes; also used for file digests in run manifests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seedable generator. The engine is std::mt19937_64 (bit-exact by the
// C++ standard); uniform and normal draws are derived here rather than
// through std:: distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named purpose ("data", "init", "sampling", ...).
  static Rng substream(std::uint64_t seed, std::string_view name) { return Rng(mix64(seed ^ fnv1a64(name))); }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                              // [0, 1), 53-bit resolution
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n);              // uniform in [0, n)
  double normal();                               // Box-Muller, standard normal

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bwsl
