#include "bwsl/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "bwsl/errors.hpp"
#include "bwsl/rng.hpp"

namespace bwsl {

namespace {

constexpr std::array kKeys = {
    ConfigKey{"seed", "1", KeyKind::Seed, "master seed; data, init and sampling streams derive from it"},
    ConfigKey{"out", "bwsl-out", KeyKind::Text, "output directory"},
    ConfigKey{"panel", "", KeyKind::Text, "panel CSV (synth: output path, default <out>/panel.csv)"},
    ConfigKey{"checkpoint", "", KeyKind::Text, "policy checkpoint (train: output path, default <out>/policy.ckpt)"},
    ConfigKey{"returns", "", KeyKind::Text, "returns CSV for the metrics subcommand"},
    ConfigKey{"train_end", "", KeyKind::Month, "last training month YYYY-MM; empty uses the whole panel"},

    ConfigKey{"stocks", "50", KeyKind::Count, "synthetic universe size"},
    ConfigKey{"periods", "240", KeyKind::Count, "synthetic months"},
    ConfigKey{"start", "1970-01", KeyKind::Month, "first synthetic month"},
    ConfigKey{"sub_steps", "21", KeyKind::Count, "simulated steps per month"},
    ConfigKey{"momentum", "0", KeyKind::Real, "std of the persistent per-stock monthly drift"},
    ConfigKey{"momentum_persistence", "0.95", KeyKind::Real, "monthly AR(1) coefficient of the drift"},
    ConfigKey{"reversion", "0", KeyKind::Real, "per-step pull toward the trailing price anchor"},
    ConfigKey{"anchor_halflife", "21", KeyKind::Real, "anchor half-life in steps"},
    ConfigKey{"vol_lo", "0.01", KeyKind::Real, "lowest per-step volatility"},
    ConfigKey{"vol_hi", "0.03", KeyKind::Real, "highest per-step volatility"},
    ConfigKey{"vol_switch", "0", KeyKind::Real, "monthly probability of redrawing a stock's volatility"},
    ConfigKey{"low_vol_premium", "0", KeyKind::Real, "monthly drift bonus of calm stocks over volatile ones"},
    ConfigKey{"market_drift", "0", KeyKind::Real, "common monthly log drift"},
    ConfigKey{"market_vol", "0", KeyKind::Real, "common per-step shock std"},

    ConfigKey{"lookback", "12", KeyKind::Count, "window length K"},
    ConfigKey{"hidden", "32", KeyKind::Count, "hidden size H"},
    ConfigKey{"embed", "8", KeyKind::Count, "rank-prior embedding size E"},
    ConfigKey{"lookup_cols", "16", KeyKind::Count, "rank-prior lookup columns"},
    ConfigKey{"quant", "4", KeyKind::Count, "rank-distance quantization Q"},

    ConfigKey{"horizon", "12", KeyKind::Count, "periods per trajectory T"},
    ConfigKey{"batch", "16", KeyKind::Count, "trajectories per batch N"},
    ConfigKey{"epochs", "100", KeyKind::Count, "training epochs"},
    ConfigKey{"learning_rate", "0.001", KeyKind::Real, "gradient-ascent step"},
    ConfigKey{"clip_norm", "5", KeyKind::Real, "global gradient-norm bound"},
    ConfigKey{"init_gain", "1", KeyKind::Real, "scale of the initial attention and score weights"},
    ConfigKey{"center_advantage", "0", KeyKind::Flag, "1 subtracts the batch-mean advantage"},
    ConfigKey{"surrogate", "leg", KeyKind::SurrogateName, "log-probability surrogate: leg | universe"},
    ConfigKey{"val_periods", "0", KeyKind::Count, "trailing training months held out for validation"},
    ConfigKey{"val_every", "10", KeyKind::Count, "epochs between validation passes"},

    ConfigKey{"leg_size", "0", KeyKind::Count, "stocks per leg G; 0 uses a quarter of the universe"},
    ConfigKey{"mode", "long-short", KeyKind::ModeName, "long-short | long-only"},
    ConfigKey{"theta", "0", KeyKind::Real, "Sharpe threshold return"},
    ConfigKey{"tc", "0.001", KeyKind::Real, "per-period transaction cost"},
    ConfigKey{"periods_per_year", "12", KeyKind::Real, "annualization factor"},
    ConfigKey{"baselines", "market,tsm,csm", KeyKind::Text, "baselines run next to the policy"},
};

const ConfigKey* find_key(std::string_view name) {
  for (const ConfigKey& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_whole(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

void validate(const ConfigKey& key, std::string_view value) {
  const std::string where = "config key '" + std::string(key.name) + "': ";
  switch (key.kind) {
    case KeyKind::Count: {
      std::size_t v = 0;
      if (!parse_whole(value, v)) throw UsageError(where + "expected a non-negative integer, got '" + std::string(value) + "'");
      break;
    }
    case KeyKind::Seed: {
      std::uint64_t v = 0;
      if (!parse_whole(value, v)) throw UsageError(where + "expected an unsigned 64-bit seed, got '" + std::string(value) + "'");
      break;
    }
    case KeyKind::Real: {
      double v = 0.0;
      if (!parse_whole(value, v) || !std::isfinite(v)) {
        throw UsageError(where + "expected a finite number, got '" + std::string(value) + "'");
      }
      break;
    }
    case KeyKind::Flag:
      if (value != "0" && value != "1") throw UsageError(where + "expected 0 or 1, got '" + std::string(value) + "'");
      break;
    case KeyKind::Month:
      if (value.empty() && key.default_value.empty()) break;
      try {
        (void)YearMonth::parse(value);
      } catch (const Error& e) {
        throw UsageError(where + e.what());
      }
      break;
    case KeyKind::ModeName:
      (void)parse_mode(value);
      break;
    case KeyKind::SurrogateName:
      (void)parse_surrogate(value);
      break;
    case KeyKind::Text:
      if (value.find('\n') != std::string_view::npos) throw UsageError(where + "value contains a newline");
      break;
  }
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

RunConfig::RunConfig() {
  for (const ConfigKey& k : kKeys) values_.emplace(std::string(k.name), std::string(k.default_value));
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const ConfigKey* k = find_key(key);
  if (k == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  validate(*k, value);
  values_.find(key)->second = std::string(value);
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::size_t RunConfig::count(std::string_view key) const {
  std::size_t v = 0;
  if (!parse_whole(std::string_view(get(key)), v)) throw UsageError("config key '" + std::string(key) + "' is not a count");
  return v;
}

double RunConfig::real(std::string_view key) const {
  double v = 0.0;
  if (!parse_whole(std::string_view(get(key)), v)) throw UsageError("config key '" + std::string(key) + "' is not a number");
  return v;
}

std::uint64_t RunConfig::seed() const {
  std::uint64_t v = 0;
  parse_whole(std::string_view(get("seed")), v);
  return v;
}

void RunConfig::merge_stream(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  merge_stream(in, path.string());
}

SynthConfig RunConfig::synth() const {
  SynthConfig c;
  c.num_stocks = count("stocks");
  c.num_periods = count("periods");
  c.sub_steps = count("sub_steps");
  c.lookback = count("lookback");
  c.momentum = real("momentum");
  c.momentum_persistence = real("momentum_persistence");
  c.reversion = real("reversion");
  c.anchor_halflife = real("anchor_halflife");
  c.vol_lo = real("vol_lo");
  c.vol_hi = real("vol_hi");
  c.vol_switch = real("vol_switch");
  c.low_vol_premium = real("low_vol_premium");
  c.market_drift = real("market_drift");
  c.market_vol = real("market_vol");
  c.start = YearMonth::parse(get("start"));
  c.seed = seed();
  return c;
}

PolicyConfig RunConfig::policy() const {
  PolicyConfig c;
  c.hidden = count("hidden");
  c.embed = count("embed");
  c.lookup_cols = count("lookup_cols");
  c.quant = count("quant");
  if (c.hidden == 0 || c.embed == 0 || c.lookup_cols == 0 || c.quant == 0) {
    throw UsageError("hidden, embed, lookup_cols and quant must be positive");
  }
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.horizon = count("horizon");
  c.batch = count("batch");
  c.epochs = count("epochs");
  c.lookback = count("lookback");
  c.learning_rate = real("learning_rate");
  c.clip_norm = real("clip_norm");
  c.init_gain = real("init_gain");
  c.center_advantage = get("center_advantage") == "1";
  c.leg_size = count("leg_size");
  c.mode = parse_mode(get("mode"));
  c.surrogate = parse_surrogate(get("surrogate"));
  c.theta = real("theta");
  c.tc = real("tc");
  c.val_periods = count("val_periods");
  c.val_every = count("val_every");
  c.seed = seed();
  c.policy = policy();
  if (c.lookback == 0) throw UsageError("lookback must be positive");
  return c;
}

BacktestConfig RunConfig::backtest() const {
  BacktestConfig c;
  c.lookback = count("lookback");
  c.leg_size = count("leg_size");
  c.mode = parse_mode(get("mode"));
  c.theta = real("theta");
  c.tc = real("tc");
  c.periods_per_year = real("periods_per_year");
  if (c.lookback == 0) throw UsageError("lookback must be positive");
  if (!(c.periods_per_year > 0.0)) throw UsageError("periods_per_year must be positive");
  return c;
}

void RunConfig::write(std::ostream& out) const {
  for (const ConfigKey& k : kKeys) out << k.name << '=' << get(k.name) << '\n';
}

InputDigest digest_file(std::string role, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {std::move(role), path.string(), fnv1a64(bytes)};
}

void write_manifest(std::ostream& out, std::string_view subcommand, const RunConfig& cfg,
                    std::span<const InputDigest> inputs) {
  out << "# bwsl manifest\n# subcommand " << subcommand << '\n';
  char hex[17];
  for (const InputDigest& d : inputs) {
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(d.fnv1a64));
    out << "# input " << d.role << ' ' << d.path << " fnv1a64=" << hex << '\n';
  }
  cfg.write(out);
}

}  // namespace bwsl
