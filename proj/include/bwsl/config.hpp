#pragma once

// Flat key=value run configuration shared by every subcommand. Every key
// has a default; files and command-line overrides may only set known keys.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwsl/backtester.hpp"
#include "bwsl/market_data.hpp"
#include "bwsl/trainer.hpp"

namespace bwsl {

enum class KeyKind { Count, Real, Flag, Text, Month, ModeName, SurrogateName, Seed };

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  KeyKind kind;
  std::string_view help;
};

// Every recognised key, in manifest order.
std::span<const ConfigKey> config_keys();

class RunConfig {
 public:
  RunConfig();  // all defaults

  // UsageError on an unknown key or a value that does not parse.
  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  std::size_t count(std::string_view key) const;
  double real(std::string_view key) const;
  std::uint64_t seed() const;

  // Lines "key=value"; '#' starts a comment line.
  void merge_file(const std::filesystem::path& path);
  void merge_stream(std::istream& in, const std::string& source);

  SynthConfig synth() const;
  PolicyConfig policy() const;
  TrainConfig train() const;
  BacktestConfig backtest() const;

  // Every key in config_keys() order as "key=value" lines.
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

struct InputDigest {
  std::string role;
  std::string path;
  std::uint64_t fnv1a64 = 0;
};

// Digest of a file's bytes; DataError if unreadable.
InputDigest digest_file(std::string role, const std::filesystem::path& path);

// Manifest: comment lines for the subcommand and input digests, followed by
// the full effective config. Loadable again with RunConfig::merge_file.
void write_manifest(std::ostream& out, std::string_view subcommand, const RunConfig& cfg,
                    std::span<const InputDigest> inputs);

}  // namespace bwsl
