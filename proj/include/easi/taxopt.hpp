#pragma once

#include <string>
#include <vector>

#include "easi/welfare.hpp"

namespace easi::taxopt {

struct OptimizerConfig {
  double theta_max = 0.05;
  double revenue_tolerance = 1e-6;  // relative
  int grid_n = 200;                 // per free rate dimension
  double pattern_shrink = 0.5;
  double pattern_min_step = 1e-7;
  bool strict_ordering = false;
  double min_gap = 1e-6;  // enforced between rates when strict
  bool gross_revenue_constraint = false;
  welfare::EvMode objective_mode = welfare::EvMode::Linearized;

  double gap() const { return strict_ordering ? min_gap : 0.0; }
  std::string to_json() const;
  static OptimizerConfig from_json(const std::string& text);
  static OptimizerConfig load(const std::string& path);
};

// Tax-component revenue at the given per-stratum rates:
//   sum_k theta_k P0_k Q0_k (1 + eps_k theta_k) users_k,
// or the gross form sum_k P1_k Q1_k users_k when gross = true.
double revenue_at(const welfare::TaxScenario& scenario, const std::vector<double>& thetas,
                  bool gross);

// Asserts d(revenue)/d(theta_k) > 0 over [0, theta_max]; throws LafferRegion
// otherwise (collection would bend backwards inside the search box).
void check_revenue_monotone(const welfare::TaxScenario& scenario, double theta_max);

// Bisection for the last stratum's rate over [lo, theta_max] given the other
// rates; requires the revenue bracket to contain the target.
double solve_last_theta_for_revenue(const welfare::TaxScenario& scenario,
                                    std::vector<double> thetas, double lo, double target,
                                    const OptimizerConfig& config);

// Common rate across all strata meeting the revenue target; the ordered
// revenue projection of a flat-tax scenario.
double uniform_rate_for_revenue(const welfare::TaxScenario& scenario, double target,
                                const OptimizerConfig& config);

struct OptimizeResult {
  std::vector<double> theta;
  double revenue = 0.0;
  double revenue_target = 0.0;
  double objective = 0.0;           // total EV, USD/month
  double baseline_objective = 0.0;  // flat-tax scenario objective
  welfare::WelfareReport baseline;
  welfare::WelfareReport alternative;
  std::string to_json() const;
};

// Deterministic dimension-reduced search: the last rate is pinned by the
// revenue equality, a coarse grid scans the remaining rates under the
// ordering constraint, and a compass pattern search refines the best cell.
OptimizeResult optimize(const welfare::TaxScenario& baseline, const EasiParams& params,
                        const OptimizerConfig& config, bool parallel = true);

// Table-13-shaped comparison, one block per stratum plus totals.
std::string compare_scenarios_csv(const welfare::WelfareReport& baseline,
                                  const welfare::WelfareReport& alternative);

}  // namespace easi::taxopt
