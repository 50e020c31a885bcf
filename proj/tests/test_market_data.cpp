#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "bwsl/errors.hpp"
#include "bwsl/market_data.hpp"
#include "helpers.hpp"

using namespace bwsl;

namespace {

const char* kTwoByThree =
    "stock_id,period,close,vol,volume,mcap,pe,bm,div\n"
    "AAA,2001-01,10,0.5,1000,1e6,12,0.4,0.01\n"
    "AAA,2001-02,11,0.6,1100,1.1e6,12,0.4,0.01\n"
    "AAA,2001-03,12,0.7,1200,1.2e6,12,0.4,0.01\n"
    "BBB,2001-01,20,0.5,1000,2e6,12,0.4,0.02\n"
    "BBB,2001-02,21,0.6,1100,2.1e6,12,0.4,0.02\n"
    "BBB,2001-03,22,0.7,1200,2.2e6,12,0.4,0.02\n";

MarketPanel parse(const std::string& text) {
  std::istringstream in(text);
  return read_panel(in, "test.csv");
}

}  // namespace

TEST_SUITE("market-data") {
  TEST_CASE("year-month arithmetic and parsing") {
    const YearMonth m = YearMonth::parse("1990-01");
    CHECK(m.year == 1990);
    CHECK(m.month == 1);
    CHECK(m.plus(-1).str() == "1989-12");
    CHECK(m.plus(13).str() == "1991-02");
    CHECK_THROWS_AS(YearMonth::parse("1990-13"), DataError);
    CHECK_THROWS_AS(YearMonth::parse("1990/01"), DataError);
  }

  TEST_CASE("well-formed two-stock file") {
    const MarketPanel p = parse(kTwoByThree);
    CHECK(p.num_stocks() == 2);
    CHECK(p.num_periods() == 3);
    CHECK(p.start() == YearMonth{2001, 1});
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t t = 0; t < 3; ++t) CHECK(p.present(s, t));
    }
    CHECK(p.bar(1, 2).close == 22.0);
    CHECK(p.bar(0, 1).vol == 0.6);
  }

  TEST_CASE("negative close names the row") {
    std::string text = kTwoByThree;
    text.replace(text.find("AAA,2001-02,11"), 14, "AAA,2001-02,-1");
    try {
      parse(text);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("a missing month is masked exactly there") {
    std::string text = kTwoByThree;
    const auto pos = text.find("BBB,2001-02");
    text.erase(pos, text.find('\n', pos) - pos + 1);
    const MarketPanel p = parse(text);
    CHECK(p.num_periods() == 3);
    CHECK_FALSE(p.present(1, 1));
    CHECK(p.present(1, 0));
    CHECK(p.present(1, 2));
    CHECK(p.present(0, 1));
    CHECK_THROWS_AS(p.bar(1, 1), DataError);
  }

  TEST_CASE("malformed input") {
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("id,period\nA,2001-01\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(kTwoByThree) + "AAA,2001-03,12,0.7,1200,1.2e6,12,0.4,0.01\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(kTwoByThree) + "CCC,2001-03,12,0.7,1200\n"), DataError);
    CHECK_THROWS_AS(parse(std::string(kTwoByThree) + "CCC,2001-03,abc,0.7,1200,1.2e6,12,0.4,0.01\n"), DataError);
    CHECK_THROWS_AS(load_panel("/nonexistent/panel.csv"), DataError);
  }

  TEST_CASE("byte-order mark and CRLF line endings are accepted") {
    std::string text = "\xEF\xBB\xBF";
    for (char c : std::string(kTwoByThree)) {
      if (c == '\n') text += '\r';
      text += c;
    }
    CHECK(parse(text) == parse(kTwoByThree));
  }

  TEST_CASE("save of a loaded file reproduces it") {
    const MarketPanel p = testing::random_panel(6, 20, 4);
    std::ostringstream first;
    write_panel(first, p);
    std::ostringstream second;
    write_panel(second, parse(first.str()));
    CHECK(first.str() == second.str());
  }

  TEST_CASE("synthetic panels are deterministic and fully populated") {
    SynthConfig cfg;
    cfg.num_stocks = 8;
    cfg.num_periods = 30;
    cfg.seed = 7;
    const MarketPanel a = synth_market(cfg);
    CHECK(a == synth_market(cfg));
    CHECK(a.num_stocks() == 8);
    CHECK(a.num_periods() == 30);
    for (std::size_t s = 0; s < 8; ++s) {
      for (std::size_t t = 0; t < 30; ++t) CHECK(a.present(s, t));
    }
    cfg.seed = 8;
    CHECK_FALSE(a == synth_market(cfg));
  }

  TEST_CASE("monthly volatility tracks the configured step volatility") {
    SynthConfig cfg;
    cfg.num_stocks = 20;
    cfg.num_periods = 60;
    cfg.vol_lo = cfg.vol_hi = 0.01;
    const MarketPanel p = synth_market(cfg);
    for (std::size_t s = 0; s < p.num_stocks(); ++s) {
      double vol = 0.0;
      for (std::size_t t = 0; t < p.num_periods(); ++t) vol += p.bar(s, t).vol;
      vol /= static_cast<double>(p.num_periods());
      CHECK(vol >= 0.9 * cfg.vol_lo);
      CHECK(vol <= 1.1 * cfg.vol_hi);
    }
  }

  TEST_CASE("synthetic configuration is validated") {
    SynthConfig cfg;
    cfg.num_stocks = 3;
    CHECK_THROWS_AS(synth_market(cfg), UsageError);
    cfg = SynthConfig{};
    cfg.vol_lo = 0.05;
    cfg.vol_hi = 0.01;
    CHECK_THROWS_AS(synth_market(cfg), UsageError);
  }

  TEST_CASE("split at 1990-01 of a 47-year panel") {
    SynthConfig cfg;
    cfg.num_stocks = 4;
    cfg.num_periods = 47 * 12;
    cfg.sub_steps = 2;
    const MarketPanel p = synth_market(cfg);
    const std::size_t k = 12;
    const PanelSplit sp = split(p, YearMonth{1990, 1}, k);
    CHECK(sp.train.period(sp.train.num_periods() - 1) == YearMonth{1990, 1});
    // The first test decision sits at index K and has a complete window.
    CHECK(sp.test.period(k) == YearMonth{1990, 2});
    CHECK(sp.test.period(0) == YearMonth{1990, 1}.plus(-11));
    CHECK(sp.train.num_periods() + sp.test.num_periods() - k == p.num_periods());
    CHECK(sp.test.bar(2, k) == p.bar(2, *p.index_of(YearMonth{1990, 2})));
    CHECK_THROWS_AS(split(p, p.period(p.num_periods() - 1), k), DataError);
    CHECK_THROWS_AS(split(p, YearMonth{1960, 1}, k), DataError);
  }

  TEST_CASE("bars are validated on insertion") {
    MarketPanel p(testing::ids(1), {2000, 1}, 2);
    Bar b = testing::bar(10.0);
    b.mcap = 0.0;
    CHECK_THROWS_AS(p.set_bar(0, 0, b), DataError);
    b = testing::bar(10.0);
    b.vol = -1.0;
    CHECK_THROWS_AS(p.set_bar(0, 0, b), DataError);
    b = testing::bar(10.0);
    b.pe = NAN;
    CHECK_THROWS_AS(p.set_bar(0, 0, b), DataError);
  }
}
