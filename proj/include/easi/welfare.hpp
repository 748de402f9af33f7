#pragma once

#include <optional>
#include <string>
#include <vector>

#include "easi/model.hpp"

namespace easi::welfare {

enum class EvMode { Exact, Linearized };
EvMode ev_mode_from_string(const std::string& s);

// Money-metric cost difference for a price move P0 -> P1 at expenditure
// level x:
//   EV = x * (1 - exp(-Delta)),
//   Delta = sum_j (w1_j ln P1_j - w0_j ln P0_j)
//         - 1/2 sum_ij a_ij (ln P1_i ln P1_j - ln P0_i ln P0_j).
// With w1, w0 the compensated shares at the post-change utility and a the
// compensated price semielasticity matrix at that utility, this equals
// exp(log_cost(u,p1)) - exp(log_cost(u,p0)) identically.
double equivalent_variation(double x_level, const Vec& P0, const Vec& P1, const Vec& w0,
                            const Vec& w1, const Mat& a);

// Same evaluator on log prices (avoids exp/log round trips).
double ev_from_log_prices(double x_level, const Vec& p0, const Vec& p1, const Vec& w0,
                          const Vec& w1, const Mat& a);

struct ShareUpdate {
  Vec w1;
  bool large_change = false;  // any |dP%| above 5%
};

// First-order update of every share from all changed prices:
// w1 = w0 + (grad_p w^M) dpct. Single-good changes reduce to the scalar
// rule w1 = w0 (1 + eps^w dP%).
ShareUpdate updated_share(const Vec& w0, const Mat& marshall_p_semi, const Vec& dpct);

// Q1 = Q0 (1 + eps_m * dP%).
double quantity_response(double q0, double eps_m, double dpct);

// Exact EV for one household facing model log prices p0 -> p1 with centered
// log expenditure x. Returned in level units of exp(x); multiply by the
// reference expenditure for currency. Positive for welfare-losing changes.
double household_ev_exact(const EasiParams& params, double x, const Vec& z, const Vec& eps,
                          const Vec& p0, const Vec& p1);

// Linearized counterpart (first-order share update at the household's point).
double household_ev_linearized(const EasiParams& params, double x, const Vec& z,
                               const Vec& eps, const Vec& p0, const Vec& p1);

struct StratumScenario {
  std::string label;
  double theta = 0.0;   // proportional tariff increase on the taxed good
  double price0 = 0.0;  // USD per unit, taxed good
  double q0 = 0.0;      // units per month per user
  double users = 0.0;
  double eps_m = 0.0;   // Marshallian own-price elasticity for quantities
  double x_rep = 0.0;   // USD per month, representative in-system expenditure
  Vec w0;               // representative share vector
};

struct TaxScenario {
  int tax_good = 0;
  double tax_per_unit = 0.0;  // USD per unit; used for baseline collections when > 0
  std::vector<StratumScenario> strata;
  std::optional<Mat> a_matrix;  // defaults to the params' A_0

  void validate(int J) const;
  std::string to_json() const;
  static TaxScenario from_json(const std::string& text);
  static TaxScenario load(const std::string& path);
};

struct StratumOutcome {
  std::string label;
  double theta = 0.0;
  double price1 = 0.0;
  double q1 = 0.0;
  double collection = 0.0;     // USD/month
  double ev_household = 0.0;   // USD/month
  double ev_total = 0.0;       // USD/month
  double ev_over_exp = 0.0;    // EV / representative expenditure
};

struct WelfareReport {
  std::vector<StratumOutcome> strata;
  double total_collection = 0.0;
  double total_ev = 0.0;
  double total_users = 0.0;
  std::string to_json() const;
};

// Representative-household evaluation: per-stratum EV times users, plus the
// revenue arithmetic. thetas override the scenario's baseline rates when
// non-empty. When use_tax_per_unit is true (baseline reproduction) the
// collection uses the scenario's flat tax; otherwise theta_k * price0_k.
WelfareReport evaluate_representative(const TaxScenario& scenario, const EasiParams& params,
                                      const std::vector<double>& thetas, EvMode mode,
                                      bool use_tax_per_unit);

// Per-household EV over a population; theta is looked up by stratum label
// (households in unlisted strata see no price change). Weighted aggregation
// runs as an ordered chunked reduction.
struct PopulationEv {
  std::vector<double> ev;  // per household, level units of exp(x)
  double total = 0.0;      // weight-summed
  double total_weight = 0.0;
};
PopulationEv aggregate_population(const std::vector<Household>& hh, const EasiParams& params,
                                  const TaxScenario& scenario, EvMode mode,
                                  bool parallel = true);

}  // namespace easi::welfare
