#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "easi/ingest.hpp"
#include "easi/rng.hpp"

using namespace easi;
using namespace easi::ingest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TariffSchedule schedule(Utility u, std::vector<TariffSchedule::Block> blocks,
                        double fixed = 0.0, int stratum = 4, int masl = 0,
                        const std::string& provider = "prov") {
  TariffSchedule s;
  s.utility = u;
  s.provider = provider;
  s.stratum = stratum;
  s.masl_band = masl;
  s.fixed_charge = fixed;
  s.blocks = std::move(blocks);
  return s;
}

// Brute-force biller: marches through consumption in tiny steps; used only
// as an independent oracle.
double brute_force_bill(const TariffSchedule& s, double q, int steps = 200000) {
  double total = 0.0;
  double dq = q / steps;
  for (int i = 0; i < steps; ++i) {
    double point = (i + 0.5) * dq;
    double lower = 0.0;
    for (const auto& blk : s.blocks) {
      if (point <= blk.upper) {
        total += dq * blk.price;
        break;
      }
      lower = blk.upper;
      (void)lower;
    }
  }
  return total;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

}  // namespace

TEST_CASE("variable expenditure: published means, electricity, and underflow") {
  auto v = variable_expenditure(19.61, 2.96);
  CHECK(v.value == doctest::Approx(16.65).epsilon(1e-12));
  CHECK(!v.underflow);

  auto e = variable_expenditure(41.06, 0.0);
  CHECK(e.value == 41.06);

  auto u = variable_expenditure(1.00, 2.86);
  CHECK(u.value == 0.0);
  CHECK(u.underflow);

  CHECK_THROWS_AS(variable_expenditure(-1.0, 0.0), DataError);
}

TEST_CASE("block tariff inversion: single block, two blocks, zero expenditure") {
  TariffSchedule one = schedule(Utility::Water, {{kInf, 0.67}}, 2.96);
  auto r = invert_block_tariff(6.70, one);
  CHECK(r.quantity == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(r.avg_price == doctest::Approx(0.67).epsilon(1e-12));

  // 16 m3 at 0.50 then 0.80: V = 11.20 lands 4 m3 into the second block.
  TariffSchedule two = schedule(Utility::Water, {{16.0, 0.50}, {kInf, 0.80}}, 2.96);
  auto r2 = invert_block_tariff(11.20, two);
  CHECK(r2.quantity == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(r2.avg_price == doctest::Approx(0.56).epsilon(1e-12));
  CHECK(bill(two, r2.quantity) == doctest::Approx(11.20).epsilon(1e-12));
  CHECK(brute_force_bill(two, 20.0) == doctest::Approx(11.20).epsilon(1e-4));

  auto z = invert_block_tariff(0.0, two);
  CHECK(z.quantity == 0.0);
  CHECK(z.zero_quantity);
  CHECK(z.avg_price == 0.50);
}

TEST_CASE("block tariff round trip: 1000 randomized schedules") {
  Rng rng(2027);
  int colombian = 0;
  for (int t = 0; t < 1000; ++t) {
    TariffSchedule s;
    s.utility = Utility::Water;
    s.provider = "p";
    s.stratum = 4;
    int nblocks = 1 + static_cast<int>(rng.uniform() * 3);
    if (t % 4 == 0) {
      // Colombian fixtures: basic block by altitude band, complementary cap,
      // then luxury price.
      const double basic[3] = {16, 13, 11};
      const double cap[3] = {32, 26, 22};
      int band = t % 3;
      s.masl_band = band;
      double p1 = rng.uniform(0.2, 1.0);
      s.blocks = {{basic[band], p1}, {cap[band], p1 * rng.uniform(1.0, 2.0)},
                  {kInf, p1 * rng.uniform(1.5, 3.0)}};
      ++colombian;
    } else {
      double ub = 0;
      s.blocks.clear();
      for (int b = 0; b < nblocks; ++b) {
        bool last = b + 1 == nblocks;
        ub += rng.uniform(1.0, 25.0);
        s.blocks.push_back({last ? kInf : ub, rng.uniform(0.05, 2.0)});
      }
    }
    s.validate();
    double qmax = 60.0;
    double v = rng.uniform(0.0, bill(s, qmax));
    auto inv = invert_block_tariff(v, s);
    double back = bill(s, inv.quantity);
    CHECK(std::abs(back - v) <= 1e-9 * std::max(v, 1e-12));

    // avg price stays between the min and max marginal price actually used.
    if (v > 0) {
      double lo = kInf, hi = 0, lower = 0;
      for (const auto& blk : s.blocks) {
        lo = std::min(lo, blk.price);
        hi = std::max(hi, blk.price);
        if (inv.quantity <= blk.upper) break;
        lower = blk.upper;
        (void)lower;
      }
      CHECK(inv.avg_price >= lo - 1e-12);
      CHECK(inv.avg_price <= hi + 1e-12);
    }
  }
  CHECK(colombian == 250);
}

TEST_CASE("schedule validation rejects malformed inputs") {
  TariffSchedule bad = schedule(Utility::Water, {{10.0, 0.5}, {8.0, 0.6}, {kInf, 0.7}});
  CHECK_THROWS_AS(bad.validate(), SchemaError);
  TariffSchedule neg = schedule(Utility::Water, {{kInf, -0.5}});
  CHECK_THROWS_AS(neg.validate(), SchemaError);
  TariffSchedule efix = schedule(Utility::Electricity, {{kInf, 0.17}}, 1.0);
  CHECK_THROWS_AS(efix.validate(), SchemaError);
}

namespace {

const char* kTariffsCsv =
    "utility,provider,stratum,masl_band,fixed_charge,block1_ub,block1_p,block2_ub,block2_p,"
    "block3_p\n"
    "electricity,mtown,4,0,0,,0.16,,,\n"
    "water,mtown,4,0,2.96,16,0.50,32,0.80,1.20\n"
    "sewerage,mtown,4,0,1.79,16,0.40,32,0.70,1.00\n"
    "gas,mtown,4,0,0.95,,0.50,,,\n"
    "electricity,mtown,5,0,0,,0.18,,,\n"
    "water,mtown,5,0,3.40,16,0.60,32,0.95,1.40\n"
    "sewerage,mtown,5,0,2.10,16,0.50,32,0.80,1.10\n"
    "gas,mtown,5,0,1.10,,0.60,,,\n";

std::string households_csv() {
  std::string head =
      "hid,stratum,municipality,masl_band,age_head,male_head,members,educ,exp_elec,exp_water,"
      "exp_sewer,exp_gas,fixed_water,fixed_sewer,fixed_gas,total_income,survey_month,weight\n";
  // Amounts in COP at fx 3038.26; fixed charges match the schedules in USD.
  auto cop = [](double usd) { return std::to_string(usd * 3038.26); };
  std::string rows;
  rows += "h1,4,mtown,0,55,1,3,4," + cop(41.06) + "," + cop(19.61) + "," + cop(3.94) + "," +
          cop(7.54) + "," + cop(2.96) + "," + cop(1.79) + "," + cop(0.95) +
          ",6000000,2017-03,1.0\n";
  rows += "h2,5,mtown,0,48,0,2,5," + cop(52.0) + "," + cop(25.0) + "," + cop(8.0) + "," +
          cop(9.0) + "," + cop(3.40) + "," + cop(2.10) + "," + cop(1.10) +
          ",9000000,2017-05,1.5\n";
  // h3: sewerage bill equals the fixed charge -> zero variable share.
  rows += "h3,4,mtown,0,60,1,4,3," + cop(30.0) + "," + cop(15.0) + "," + cop(1.79) + "," +
          cop(5.0) + "," + cop(2.96) + "," + cop(1.79) + "," + cop(0.95) +
          ",4500000,2017-01,1.0\n";
  // h4: water expenditure below the fixed charge -> underflow.
  rows += "h4,4,mtown,0,35,0,1,2," + cop(20.0) + "," + cop(1.00) + "," + cop(2.5) + "," +
          cop(4.0) + "," + cop(2.96) + "," + cop(1.79) + "," + cop(0.95) +
          ",3000000,2017-02,1.0\n";
  return head + rows;
}

}  // namespace

TEST_CASE("build_households: currency conversion, shares, exclusions, log prices") {
  write_file("/tmp/easi_tariffs.csv", kTariffsCsv);
  write_file("/tmp/easi_households.csv", households_csv());
  auto tariffs = read_tariffs_csv("/tmp/easi_tariffs.csv");
  auto records = read_households_csv("/tmp/easi_households.csv");
  REQUIRE(tariffs.size() == 8);
  REQUIRE(records.size() == 4);

  IngestOptions opt;
  auto res = build_households(records, tariffs, ProviderMap{}, opt);

  CHECK(res.analysis.size() == 2);
  REQUIRE(res.excluded_zero_share.size() == 1);
  CHECK(res.excluded_zero_share[0] == "h3");
  REQUIRE(res.excluded_underflow.size() == 1);
  CHECK(res.excluded_underflow[0] == "h4");

  const Household& h1 = res.analysis[0];
  CHECK(h1.id == "h1");
  // Variable expenditures: 41.06, 16.65, 2.15, 6.59 -> sum 66.45.
  double total = 41.06 + (19.61 - 2.96) + (3.94 - 1.79) + (7.54 - 0.95);
  CHECK(std::abs(h1.w.sum() - 1.0) < 1e-9);
  CHECK(h1.w(0) == doctest::Approx(41.06 / total).epsilon(1e-9));
  CHECK((h1.w.array() > 0).all());
  CHECK(h1.weight == 1.0);
  CHECK(h1.stratum == "4");

  // Demographics centered at the representative household.
  CHECK(h1.z(0) == 0.0);   // 3 members
  CHECK(h1.z(1) == 0.0);   // 55-year-old head
  CHECK(h1.z(2) == 0.0);   // male head
  CHECK(h1.z(6) == 0.0);   // undergraduate base level
  const Household& h2 = res.analysis[1];
  CHECK(h2.z(0) == -1.0);
  CHECK(h2.z(6) == 1.0);  // postgraduate dummy
  CHECK(h2.z(7) == 1.0);  // stratum 5 dummy

  // Log prices are relative to the reference tariffs.
  for (int u = 0; u < 4; ++u) CHECK(res.reference_prices(u) > 0);
  // h1 electricity price is 0.16 USD/kWh flat.
  CHECK(h1.p(0) == doctest::Approx(std::log(0.16 / res.reference_prices(0))).epsilon(1e-12));

  // COP conversion oracle: 100000 COP at 3038.26 is 32.91 USD.
  CHECK(100000.0 / opt.fx_rate == doctest::Approx(32.91).epsilon(1e-3));

  std::string report = res.to_report_json();
  CHECK(report.find("excluded_zero_share") != std::string::npos);

  std::remove("/tmp/easi_tariffs.csv");
  std::remove("/tmp/easi_households.csv");
}

TEST_CASE("missing tariff match raises ImputationError with the offending key") {
  write_file("/tmp/easi_tariffs2.csv", kTariffsCsv);
  auto tariffs = read_tariffs_csv("/tmp/easi_tariffs2.csv");
  RawRecord r;
  r.hid = "x1";
  r.stratum = 6;  // no stratum-6 schedules in the fixture
  r.municipality = "mtown";
  r.masl_band = 0;
  r.educ = 4;
  r.exp[0] = 100000;
  r.exp[1] = 80000;
  r.exp[2] = 30000;
  r.exp[3] = 20000;
  r.survey_month = "2017-01";
  r.weight = 1;
  IngestOptions opt;
  CHECK_THROWS_WITH_AS(build_households({r}, tariffs, ProviderMap{}, opt),
                       doctest::Contains("mtown"), ImputationError);
  std::remove("/tmp/easi_tariffs2.csv");
}

TEST_CASE("provider map picks the dominant provider") {
  write_file("/tmp/easi_prov.csv",
             "municipality,utility,provider,subscribers\n"
             "mtown,water,small,1000\n"
             "mtown,water,big,50000\n"
             "mtown,water,big2,50000\n");
  ProviderMap m = read_providers_csv("/tmp/easi_prov.csv");
  CHECK(m.provider_for("mtown", Utility::Water) == "big");
  CHECK(m.provider_for("other", Utility::Water) == "other");  // identity fallback
  std::remove("/tmp/easi_prov.csv");
}

TEST_CASE("deflators are applied by survey month") {
  write_file("/tmp/easi_tariffs3.csv", kTariffsCsv);
  auto tariffs = read_tariffs_csv("/tmp/easi_tariffs3.csv");
  RawRecord r;
  r.hid = "d1";
  r.stratum = 4;
  r.municipality = "mtown";
  r.masl_band = 0;
  r.educ = 4;
  r.age_head = 55;
  r.male_head = 1;
  r.members = 3;
  r.exp[0] = 100000;
  r.exp[1] = 80000;
  r.exp[2] = 30000;
  r.exp[3] = 20000;
  r.fixed_water = 0;
  r.fixed_sewer = 0;
  r.fixed_gas = 0;
  r.survey_month = "2016-12";
  r.weight = 1;

  IngestOptions opt;
  opt.deflators["2016-12"] = 1.10;
  auto res = build_households({r}, tariffs, ProviderMap{}, opt);
  REQUIRE(res.analysis.size() == 1);
  // Shares are deflator-invariant; the reference expenditure captures scale.
  double total = (100000 + 80000 + 30000 + 20000) * 1.10 / opt.fx_rate;
  CHECK(res.reference_expenditure == doctest::Approx(total).epsilon(1e-12));

  opt.deflators.clear();
  opt.deflators["2017-01"] = 1.0;
  CHECK_THROWS_WITH_AS(build_households({r}, tariffs, ProviderMap{}, opt),
                       doctest::Contains("2016-12"), DataError);
}
