#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "easi/model.hpp"

namespace easi::ingest {

enum class Utility { Electricity = 0, Water = 1, Sewerage = 2, Gas = 3 };
inline constexpr int kNumUtilities = 4;
const char* utility_name(Utility u);
Utility utility_from_string(const std::string& s);

// Block tariff: ordered marginal-price blocks, last block unbounded.
// masl_band: 0 = <1000, 1 = 1000-2000, 2 = >2000 m.a.s.l.
struct TariffSchedule {
  Utility utility = Utility::Electricity;
  std::string provider;
  int stratum = 0;
  int masl_band = 0;
  double fixed_charge = 0.0;  // USD/month

  struct Block {
    double upper;  // cumulative upper bound; +inf on the last block
    double price;  // USD per unit
  };
  std::vector<Block> blocks;

  void validate() const;
};

// Variable bill for consuming q units.
double bill(const TariffSchedule& schedule, double q);

struct VariableExpenditure {
  double value = 0.0;
  bool underflow = false;  // E < F
};

// V = max(E - F, 0), flagged when the fixed charge exceeds the bill.
VariableExpenditure variable_expenditure(double E, double F);

struct Inversion {
  double quantity = 0.0;
  double avg_price = 0.0;
  bool zero_quantity = false;
};

// Unique consumption whose variable bill equals V, and the implied average
// price V/Q (first-block price when V = 0).
Inversion invert_block_tariff(double V, const TariffSchedule& schedule);

struct RawRecord {
  std::string hid;
  int stratum = 0;
  std::string municipality;
  int masl_band = 0;
  double age_head = 0, male_head = 0, members = 0;
  int educ = 0;  // 1 elementary .. 5 postgraduate
  double exp[kNumUtilities] = {0, 0, 0, 0};  // COP/month
  double fixed_water = 0, fixed_sewer = 0, fixed_gas = 0;  // COP/month
  double total_income = 0;  // COP/month
  std::string survey_month;
  double weight = 1.0;
};

std::vector<RawRecord> read_households_csv(const std::string& path);
std::vector<TariffSchedule> read_tariffs_csv(const std::string& path);

// Optional municipality -> provider map; identity when absent.
struct ProviderMap {
  // (municipality, utility) -> provider chosen by largest subscribers, then
  // lexicographic provider id.
  std::map<std::pair<std::string, int>, std::string> chosen;
  std::string provider_for(const std::string& municipality, Utility u) const;
};
ProviderMap read_providers_csv(const std::string& path);

struct IngestOptions {
  double fx_rate = 3038.26;  // COP per USD, 30/06/2017
  std::map<std::string, double> deflators;  // survey_month -> factor; identity default
  std::optional<Vec> reference_prices;      // USD per unit, one per utility
};

struct IngestResult {
  std::vector<Household> analysis;   // strictly positive shares, model-ready
  std::vector<std::string> excluded_zero_share;
  std::vector<std::string> excluded_underflow;
  Vec reference_prices;  // USD per unit used for log-price normalization
  double reference_expenditure = 0.0;  // USD, x centering
  Vec z_center;                        // raw-unit representative offsets
  std::vector<std::string> z_names;
  std::string to_report_json() const;
};

// Full pipeline: currency conversion, fixed-charge subtraction, block-tariff
// inversion, share construction, log prices relative to the representative
// tariffs, demographic encoding centered at the representative household.
IngestResult build_households(const std::vector<RawRecord>& records,
                              const std::vector<TariffSchedule>& schedules,
                              const ProviderMap& providers, const IngestOptions& options);

}  // namespace easi::ingest
