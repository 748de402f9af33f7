#include "easi/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "easi/csv.hpp"
#include "json.hpp"

namespace easi::ingest {

const char* utility_name(Utility u) {
  switch (u) {
    case Utility::Electricity: return "electricity";
    case Utility::Water: return "water";
    case Utility::Sewerage: return "sewerage";
    case Utility::Gas: return "gas";
  }
  return "?";
}

Utility utility_from_string(const std::string& s) {
  for (int u = 0; u < kNumUtilities; ++u)
    if (s == utility_name(static_cast<Utility>(u))) return static_cast<Utility>(u);
  throw SchemaError("unknown utility '" + s + "'");
}

void TariffSchedule::validate() const {
  if (blocks.empty()) throw SchemaError("tariff schedule without blocks");
  double prev = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (!(blocks[k].price > 0)) throw SchemaError("tariff block price must be > 0");
    bool last = k + 1 == blocks.size();
    if (last) {
      if (std::isfinite(blocks[k].upper)) throw SchemaError("last tariff block must be unbounded");
    } else {
      if (!(blocks[k].upper > prev)) throw SchemaError("tariff block bounds must increase");
      prev = blocks[k].upper;
    }
  }
  if (fixed_charge < 0) throw SchemaError("negative fixed charge");
  if (utility == Utility::Electricity && fixed_charge != 0.0)
    throw SchemaError("electricity schedules have no fixed charge");
}

double bill(const TariffSchedule& schedule, double q) {
  double total = 0.0;
  double lower = 0.0;
  for (const auto& blk : schedule.blocks) {
    double hi = std::min(q, blk.upper);
    if (hi > lower) total += (hi - lower) * blk.price;
    if (q <= blk.upper) break;
    lower = blk.upper;
  }
  return total;
}

VariableExpenditure variable_expenditure(double E, double F) {
  if (E < 0 || F < 0) throw DataError("variable_expenditure: negative input");
  VariableExpenditure v;
  v.underflow = E < F;
  v.value = v.underflow ? 0.0 : E - F;
  return v;
}

Inversion invert_block_tariff(double V, const TariffSchedule& schedule) {
  schedule.validate();
  if (V < 0) throw DataError("invert_block_tariff: negative expenditure");
  Inversion r;
  if (V == 0.0) {
    r.zero_quantity = true;
    r.avg_price = schedule.blocks.front().price;
    return r;
  }
  double lower = 0.0;
  double spent = 0.0;
  for (const auto& blk : schedule.blocks) {
    double cap = std::isfinite(blk.upper) ? (blk.upper - lower) * blk.price
                                          : std::numeric_limits<double>::infinity();
    if (V - spent <= cap || !std::isfinite(blk.upper)) {
      r.quantity = lower + (V - spent) / blk.price;
      r.avg_price = V / r.quantity;
      return r;
    }
    spent += cap;
    lower = blk.upper;
  }
  throw NumericError("invert_block_tariff: unreachable");
}

std::vector<RawRecord> read_households_csv(const std::string& path) {
  csv::Table t = csv::read(path);
  const char* req[] = {"hid", "stratum", "municipality", "masl_band", "age_head",
                       "male_head", "members", "educ", "exp_elec", "exp_water",
                       "exp_sewer", "exp_gas", "fixed_water", "fixed_sewer",
                       "fixed_gas", "total_income", "survey_month", "weight"};
  for (const char* c : req)
    if (!t.has_column(c)) throw SchemaError(path + ": missing column " + c);

  std::vector<RawRecord> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    RawRecord& r = out[i];
    r.hid = t.cell(i, "hid");
    r.stratum = static_cast<int>(t.num(i, "stratum"));
    r.municipality = t.cell(i, "municipality");
    r.masl_band = static_cast<int>(t.num(i, "masl_band"));
    r.age_head = t.num(i, "age_head");
    r.male_head = t.num(i, "male_head");
    r.members = t.num(i, "members");
    r.educ = static_cast<int>(t.num(i, "educ"));
    r.exp[0] = t.num(i, "exp_elec");
    r.exp[1] = t.num(i, "exp_water");
    r.exp[2] = t.num(i, "exp_sewer");
    r.exp[3] = t.num(i, "exp_gas");
    r.fixed_water = t.num(i, "fixed_water");
    r.fixed_sewer = t.num(i, "fixed_sewer");
    r.fixed_gas = t.num(i, "fixed_gas");
    r.total_income = t.num(i, "total_income");
    r.survey_month = t.cell(i, "survey_month");
    r.weight = t.num(i, "weight");
    for (double e : r.exp)
      if (e < 0) throw DataError(path + ": negative expenditure for hid " + r.hid);
  }
  return out;
}

std::vector<TariffSchedule> read_tariffs_csv(const std::string& path) {
  csv::Table t = csv::read(path);
  const char* req[] = {"utility", "provider",  "stratum",   "masl_band", "fixed_charge",
                       "block1_ub", "block1_p", "block2_ub", "block2_p",  "block3_p"};
  for (const char* c : req)
    if (!t.has_column(c)) throw SchemaError(path + ": missing column " + c);

  std::vector<TariffSchedule> out(t.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    TariffSchedule& s = out[i];
    s.utility = utility_from_string(t.cell(i, "utility"));
    s.provider = t.cell(i, "provider");
    s.stratum = static_cast<int>(t.num(i, "stratum"));
    s.masl_band = static_cast<int>(t.num(i, "masl_band"));
    s.fixed_charge = t.num(i, "fixed_charge");
    bool has2 = !t.empty_cell(i, "block2_p");
    bool has3 = !t.empty_cell(i, "block3_p");
    if (!has2) {
      s.blocks = {{inf, t.num(i, "block1_p")}};
    } else if (!has3) {
      s.blocks = {{t.num(i, "block1_ub"), t.num(i, "block1_p")},
                  {inf, t.num(i, "block2_p")}};
    } else {
      s.blocks = {{t.num(i, "block1_ub"), t.num(i, "block1_p")},
                  {t.num(i, "block2_ub"), t.num(i, "block2_p")},
                  {inf, t.num(i, "block3_p")}};
    }
    s.validate();
  }
  return out;
}

std::string ProviderMap::provider_for(const std::string& municipality, Utility u) const {
  auto it = chosen.find({municipality, static_cast<int>(u)});
  if (it != chosen.end()) return it->second;
  return municipality;  // identity convention when no map is supplied
}

ProviderMap read_providers_csv(const std::string& path) {
  csv::Table t = csv::read(path);
  for (const char* c : {"municipality", "utility", "provider", "subscribers"})
    if (!t.has_column(c)) throw SchemaError(path + ": missing column " + c);
  // Dominant provider: largest subscriber count, ties to the lexicographically
  // smallest provider id.
  std::map<std::pair<std::string, int>, std::pair<double, std::string>> best;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto key = std::make_pair(t.cell(i, "municipality"),
                              static_cast<int>(utility_from_string(t.cell(i, "utility"))));
    double subs = t.num(i, "subscribers");
    std::string prov = t.cell(i, "provider");
    auto it = best.find(key);
    if (it == best.end() || subs > it->second.first ||
        (subs == it->second.first && prov < it->second.second))
      best[key] = {subs, prov};
  }
  ProviderMap m;
  for (const auto& [key, val] : best) m.chosen[key] = val.second;
  return m;
}

namespace {

double weighted_median(std::vector<std::pair<double, double>>& vw) {
  if (vw.empty()) throw DataError("weighted_median: empty");
  std::sort(vw.begin(), vw.end());
  double total = 0;
  for (auto& [v, w] : vw) total += w;
  double acc = 0;
  for (auto& [v, w] : vw) {
    acc += w;
    if (acc >= total / 2) return v;
  }
  return vw.back().first;
}

struct Imputed {
  Vec V = Vec::Zero(kNumUtilities);
  Vec avg_price = Vec::Zero(kNumUtilities);
  bool underflow = false;
  bool zero = false;
};

}  // namespace

IngestResult build_households(const std::vector<RawRecord>& records,
                              const std::vector<TariffSchedule>& schedules,
                              const ProviderMap& providers, const IngestOptions& options) {
  if (options.fx_rate <= 0) throw DataError("build_households: fx_rate must be > 0");

  // Schedule lookup keyed by (utility, provider, stratum, masl_band).
  std::map<std::tuple<int, std::string, int, int>, const TariffSchedule*> by_key;
  for (const auto& s : schedules) {
    s.validate();
    auto key = std::make_tuple(static_cast<int>(s.utility), s.provider, s.stratum, s.masl_band);
    if (by_key.count(key)) throw SchemaError("duplicate tariff schedule for provider " + s.provider);
    by_key[key] = &s;
  }

  auto deflate = [&](double cop, const std::string& month) {
    double f = 1.0;
    if (!options.deflators.empty()) {
      auto it = options.deflators.find(month);
      if (it == options.deflators.end())
        throw DataError("no deflator for survey month " + month);
      f = it->second;
    }
    return cop * f / options.fx_rate;
  };

  std::vector<Imputed> imp(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawRecord& r = records[i];
    double fixed[kNumUtilities] = {0.0, deflate(r.fixed_water, r.survey_month),
                                   deflate(r.fixed_sewer, r.survey_month),
                                   deflate(r.fixed_gas, r.survey_month)};
    for (int u = 0; u < kNumUtilities; ++u) {
      double E = deflate(r.exp[u], r.survey_month);
      VariableExpenditure ve = variable_expenditure(E, fixed[u]);
      imp[i].underflow = imp[i].underflow || ve.underflow;
      imp[i].V(u) = ve.value;

      Utility util = static_cast<Utility>(u);
      std::string prov = providers.provider_for(r.municipality, util);
      auto key = std::make_tuple(u, prov, r.stratum, r.masl_band);
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        std::ostringstream os;
        os << "no tariff schedule for (" << r.municipality << ", " << utility_name(util)
           << ") stratum " << r.stratum << " masl_band " << r.masl_band;
        throw ImputationError(os.str());
      }
      Inversion inv = invert_block_tariff(imp[i].V(u), *it->second);
      imp[i].avg_price(u) = inv.avg_price;
      imp[i].zero = imp[i].zero || inv.zero_quantity;
    }
  }

  // Reference tariffs and expenditure: weighted medians over the analysis
  // candidates ("representative household with median expenditure").
  IngestResult out;
  out.reference_prices = Vec::Zero(kNumUtilities);
  std::vector<std::size_t> analysis_idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (imp[i].underflow || imp[i].zero || (imp[i].V.array() <= 0).any()) continue;
    analysis_idx.push_back(i);
  }
  if (analysis_idx.empty()) throw DataError("build_households: no analysis households");

  if (options.reference_prices) {
    if (options.reference_prices->size() != kNumUtilities)
      throw DataError("reference_prices must have 4 entries");
    out.reference_prices = *options.reference_prices;
  } else {
    for (int u = 0; u < kNumUtilities; ++u) {
      std::vector<std::pair<double, double>> vw;
      for (std::size_t i : analysis_idx) vw.push_back({imp[i].avg_price(u), records[i].weight});
      out.reference_prices(u) = weighted_median(vw);
    }
  }
  {
    std::vector<std::pair<double, double>> vw;
    for (std::size_t i : analysis_idx) vw.push_back({imp[i].V.sum(), records[i].weight});
    out.reference_expenditure = weighted_median(vw);
  }

  // Demographics: members, age, gender, education dummies (undergraduate is
  // the base level), stratum 5/6 dummies, masl band dummies; centered at the
  // representative household (3 members, 55-year-old male head, stratum 4,
  // undergraduate, <1000 m.a.s.l).
  out.z_names = {"members",   "age_head",   "male_head", "educ_elementary",
                 "educ_high", "educ_vocational", "educ_postgrad", "stratum5",
                 "stratum6",  "masl_1000_2000", "masl_gt2000"};
  const int L = static_cast<int>(out.z_names.size());
  out.z_center = Vec::Zero(L);
  out.z_center(0) = 3;
  out.z_center(1) = 55;
  out.z_center(2) = 1;

  auto encode_z = [&](const RawRecord& r) {
    Vec z = Vec::Zero(L);
    z(0) = r.members - out.z_center(0);
    z(1) = r.age_head - out.z_center(1);
    z(2) = r.male_head - out.z_center(2);
    z(3) = r.educ == 1 ? 1 : 0;
    z(4) = r.educ == 2 ? 1 : 0;
    z(5) = r.educ == 3 ? 1 : 0;
    z(6) = r.educ == 5 ? 1 : 0;
    z(7) = r.stratum == 5 ? 1 : 0;
    z(8) = r.stratum == 6 ? 1 : 0;
    z(9) = r.masl_band == 1 ? 1 : 0;
    z(10) = r.masl_band == 2 ? 1 : 0;
    return z;
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawRecord& r = records[i];
    if (imp[i].underflow) {
      out.excluded_underflow.push_back(r.hid);
      continue;
    }
    if (imp[i].zero || (imp[i].V.array() <= 0).any()) {
      out.excluded_zero_share.push_back(r.hid);
      continue;
    }
    Household h;
    h.id = r.hid;
    h.stratum = std::to_string(r.stratum);
    double total = imp[i].V.sum();
    h.w = imp[i].V / total;
    h.p = (imp[i].avg_price.array() / out.reference_prices.array()).log().matrix();
    h.z = encode_z(r);
    h.x = std::log(total) - std::log(out.reference_expenditure);
    h.weight = r.weight;
    out.analysis.push_back(std::move(h));
  }
  return out;
}

std::string IngestResult::to_report_json() const {
  nlohmann::json j;
  j["analysis_households"] = analysis.size();
  j["excluded_zero_share"] = excluded_zero_share;
  j["excluded_underflow"] = excluded_underflow;
  j["excluded_zero_share_count"] = excluded_zero_share.size();
  j["excluded_underflow_count"] = excluded_underflow.size();
  std::vector<double> rp(reference_prices.data(),
                         reference_prices.data() + reference_prices.size());
  j["reference_prices_usd"] = rp;
  j["reference_expenditure_usd"] = reference_expenditure;
  std::vector<double> zc(z_center.data(), z_center.data() + z_center.size());
  j["z_center"] = zc;
  j["z_names"] = z_names;
  return j.dump(2);
}

}  // namespace easi::ingest
