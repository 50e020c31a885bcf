#include "bwsl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bwsl/backtester.hpp"
#include "bwsl/config.hpp"
#include "bwsl/errors.hpp"
#include "bwsl/interpreter.hpp"
#include "bwsl/market_data.hpp"
#include "bwsl/metrics.hpp"
#include "bwsl/policy.hpp"
#include "bwsl/trainer.hpp"

namespace fs = std::filesystem;

namespace bwsl {

namespace {

struct Context {
  std::string subcommand;
  RunConfig cfg;
  std::vector<InputDigest> inputs;
  std::ostream& out;

  fs::path out_dir() const { return fs::path(cfg.get("out")); }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed for " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_text(path, os.str());
}

void finish(Context& ctx) {
  write_with(ctx.out_dir() / ("manifest_" + ctx.subcommand + ".txt"),
             [&](std::ostream& os) { write_manifest(os, ctx.subcommand, ctx.cfg, ctx.inputs); });
}

const std::string& required(const Context& ctx, std::string_view key) {
  const std::string& v = ctx.cfg.get(key);
  if (v.empty()) throw UsageError(ctx.subcommand + " needs --" + std::string(key));
  return v;
}

MarketPanel load_input_panel(Context& ctx) {
  const std::string& path = required(ctx, "panel");
  ctx.inputs.push_back(digest_file("panel", path));
  return load_panel(path);
}

PolicyParams load_input_checkpoint(Context& ctx) {
  const std::string& path = required(ctx, "checkpoint");
  ctx.inputs.push_back(digest_file("checkpoint", path));
  return load_checkpoint(path);
}

// Training data for train, evaluation data for backtest and interpret.
MarketPanel select_part(const Context& ctx, const MarketPanel& panel, bool training) {
  const std::string& end = ctx.cfg.get("train_end");
  if (end.empty()) return panel;
  PanelSplit parts = split(panel, YearMonth::parse(end), ctx.cfg.count("lookback"));
  return training ? std::move(parts.train) : std::move(parts.test);
}

void cmd_synth(Context& ctx) {
  const MarketPanel panel = synth_market(ctx.cfg.synth());
  ensure_dir(ctx.out_dir());
  const std::string& p = ctx.cfg.get("panel");
  const fs::path path = p.empty() ? ctx.out_dir() / "panel.csv" : fs::path(p);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  save_panel(panel, path);
  finish(ctx);
  ctx.out << "wrote " << path.string() << " stocks=" << panel.num_stocks() << " periods=" << panel.num_periods()
          << '\n';
}

void cmd_train(Context& ctx) {
  const TrainConfig tcfg = ctx.cfg.train();
  const MarketPanel panel = select_part(ctx, load_input_panel(ctx), true);
  const TrainResult result = train(panel, tcfg);
  ensure_dir(ctx.out_dir());
  const std::string& c = ctx.cfg.get("checkpoint");
  const fs::path ckpt = c.empty() ? ctx.out_dir() / "policy.ckpt" : fs::path(c);
  if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path());
  save_checkpoint(result.best_params, ckpt);
  write_with(ctx.out_dir() / "learning_curve.csv", [&](std::ostream& os) { write_learning_curve(os, result.log); });
  finish(ctx);
  const EpochLog last = result.log.empty() ? EpochLog{} : result.log.back();
  ctx.out << "wrote " << ckpt.string() << " epochs=" << result.log.size() << " last_mean_H=" << last.mean_sharpe
          << " last_mean_advantage=" << last.mean_advantage << '\n';
}

std::vector<std::string> parse_baselines(const std::string& text) {
  std::vector<std::string> names;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item != "market" && item != "tsm" && item != "csm") {
      throw UsageError("unknown baseline '" + item + "' (market | tsm | csm)");
    }
    names.push_back(item);
  }
  return names;
}

void write_portfolios(std::ostream& os, const MarketPanel& panel, const BacktestRun& run) {
  os << "period,side,stock_id,weight\n";
  char buf[64];
  for (std::size_t t = 0; t < run.portfolios.size(); ++t) {
    const PortfolioPair& p = run.portfolios[t];
    const auto& uni = run.universe[t];
    auto emit = [&](const char* side, const std::vector<std::size_t>& idx, const std::vector<double>& w) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g\n", w[k]);
        os << run.periods[t].str() << ',' << side << ',' << panel.stock_id(uni[idx[k]]) << buf;
      }
    };
    emit("long", p.long_idx, p.long_w);
    emit("short", p.short_idx, p.short_w);
  }
}

void cmd_backtest(Context& ctx) {
  const BacktestConfig bcfg = ctx.cfg.backtest();
  const auto baselines = parse_baselines(ctx.cfg.get("baselines"));
  const MarketPanel full = load_input_panel(ctx);
  const PolicyParams params = load_input_checkpoint(ctx);
  const MarketPanel panel = select_part(ctx, full, false);
  const DecisionRange range = full_range(panel, bcfg.lookback);

  std::vector<BacktestRun> runs;
  runs.push_back(run_policy(panel, params, range, bcfg));
  for (const std::string& b : baselines) {
    if (b == "market") runs.push_back(run_market(panel, range, bcfg));
    if (b == "tsm") runs.push_back(run_tsm(panel, range, bcfg));
    if (b == "csm") runs.push_back(run_csm(panel, range, bcfg));
  }

  ensure_dir(ctx.out_dir());
  std::ostringstream summary, blocks, events;
  summary << report_csv_header() << '\n';
  events << "strategy,period,kind,detail\n";
  for (const BacktestRun& r : runs) {
    write_with(ctx.out_dir() / ("returns_" + r.strategy + ".csv"), [&](std::ostream& os) { write_run_csv(os, r); });
    summary << report_csv_row(r.strategy, r.report) << '\n';
    blocks << "[" << r.strategy << "]\n" << to_key_value(r.report) << '\n';
    for (const BacktestEvent& e : r.events) {
      events << r.strategy << ',' << e.period.str() << ',' << e.kind << ",\"" << e.detail << "\"\n";
    }
  }
  write_with(ctx.out_dir() / "portfolios_policy.csv",
             [&](std::ostream& os) { write_portfolios(os, panel, runs.front()); });
  write_text(ctx.out_dir() / "report.csv", summary.str());
  write_text(ctx.out_dir() / "report.txt", blocks.str());
  write_text(ctx.out_dir() / "events.csv", events.str());
  write_text(ctx.out_dir() / "wealth.svg", wealth_svg(runs));
  finish(ctx);
  ctx.out << summary.str();
}

void cmd_interpret(Context& ctx) {
  const std::size_t lookback = ctx.cfg.count("lookback");
  const MarketPanel full = load_input_panel(ctx);
  const PolicyParams params = load_input_checkpoint(ctx);
  const MarketPanel panel = select_part(ctx, full, false);
  if (panel.num_periods() <= lookback) throw DataError("interpret: panel shorter than one look-back window");
  const SensitivityReport rep = average_sensitivity(panel, params, lookback, panel.num_periods() - 1, lookback);

  ensure_dir(ctx.out_dir());
  std::ostringstream csv;
  write_sensitivity_csv(csv, rep);
  write_text(ctx.out_dir() / "sensitivity.csv", csv.str());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    write_text(ctx.out_dir() / ("sensitivity_" + std::string(kFeatureNames[f]) + ".svg"), sensitivity_svg(rep, f));
  }
  finish(ctx);
  ctx.out << csv.str();
}

std::vector<double> read_returns(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> r;
  std::string line;
  std::size_t lineno = 0;
  std::size_t column = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.empty()) continue;
    if (r.empty() && lineno == 1) {
      double probe = 0.0;
      const auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), probe);
      if (ec != std::errc() || p != cells[0].data() + cells[0].size()) {
        const auto it = std::find(cells.begin(), cells.end(), "return");
        column = it == cells.end() ? 0 : static_cast<std::size_t>(it - cells.begin());
        continue;
      }
    }
    double v = 0.0;
    const std::string& c = column < cells.size() ? cells[column] : std::string();
    const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
    if (ec != std::errc() || p != c.data() + c.size() || !std::isfinite(v)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed return '" + c + "'");
    }
    r.push_back(v);
  }
  if (r.empty()) throw DataError(path.string() + ": no returns");
  return r;
}

void cmd_metrics(Context& ctx) {
  const std::string& path = required(ctx, "returns");
  ctx.inputs.push_back(digest_file("returns", path));
  const auto returns = read_returns(path);
  const PerformanceReport rep =
      report_flagged(returns, ctx.cfg.real("theta"), ctx.cfg.real("tc"), ctx.cfg.real("periods_per_year"));
  const std::string text = to_key_value(rep);
  ensure_dir(ctx.out_dir());
  write_text(ctx.out_dir() / "metrics.txt", text);
  finish(ctx);
  ctx.out << text;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

int fail(std::ostream& err, ErrorKind kind, const std::string& reason) {
  const char* name = kind == ErrorKind::Usage ? "usage" : kind == ErrorKind::Data ? "data" : "numeric";
  err << "bwsl: error=" << name << " reason=\"" << one_line(reason) << "\"\n";
  return static_cast<int>(kind);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long/short buy-winners-sell-losers portfolio engine"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::string config_path;
    std::vector<std::pair<std::string, CLI::Option*>> keys;
  };
  const std::pair<const char*, const char*> names[] = {
      {"synth", "write a synthetic panel CSV"},
      {"train", "train a policy on a panel and write a checkpoint"},
      {"backtest", "evaluate a checkpoint and baselines over the test range"},
      {"interpret", "average input sensitivities of the winner score"},
      {"metrics", "performance report of a returns CSV"},
  };
  std::vector<Sub> subs;
  subs.reserve(std::size(names));
  std::vector<std::string> values(config_keys().size() * std::size(names));
  std::size_t slot = 0;
  for (const auto& [name, help] : names) {
    Sub& s = subs.emplace_back();
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", s.config_path, "key=value config file; flags override it");
    for (const ConfigKey& k : config_keys()) {
      std::string desc(k.help);
      if (!k.default_value.empty()) desc += " [" + std::string(k.default_value) + "]";
      s.keys.emplace_back(std::string(k.name), s.app->add_option("--" + std::string(k.name), values[slot++], desc));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, ErrorKind::Usage, e.what());
  }

  try {
    for (Sub& s : subs) {
      if (!s.app->parsed()) continue;
      Context ctx{s.app->get_name(), RunConfig{}, {}, out};
      if (!s.config_path.empty()) ctx.cfg.merge_file(s.config_path);
      for (const auto& [key, opt] : s.keys) {
        if (opt->count() > 0) ctx.cfg.set(key, opt->as<std::string>());
      }
      if (ctx.subcommand == "synth") cmd_synth(ctx);
      if (ctx.subcommand == "train") cmd_train(ctx);
      if (ctx.subcommand == "backtest") cmd_backtest(ctx);
      if (ctx.subcommand == "interpret") cmd_interpret(ctx);
      if (ctx.subcommand == "metrics") cmd_metrics(ctx);
    }
  } catch (const Error& e) {
    return fail(err, e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(err, ErrorKind::Numeric, e.what());
  }
  return 0;
}

}  // namespace bwsl
