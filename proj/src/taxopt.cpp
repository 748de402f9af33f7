#include "easi/taxopt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "easi/csv.hpp"
#include "easi/parallel.hpp"
#include "json.hpp"

namespace easi::taxopt {

using nlohmann::json;
using welfare::TaxScenario;
using welfare::WelfareReport;

std::string OptimizerConfig::to_json() const {
  json j;
  j["theta_max"] = theta_max;
  j["revenue_tolerance"] = revenue_tolerance;
  j["grid_n"] = grid_n;
  j["pattern_shrink"] = pattern_shrink;
  j["pattern_min_step"] = pattern_min_step;
  j["strict_ordering"] = strict_ordering;
  j["min_gap"] = min_gap;
  j["gross_revenue_constraint"] = gross_revenue_constraint;
  j["objective_mode"] = objective_mode == welfare::EvMode::Exact ? "exact" : "linearized";
  return j.dump(2);
}

OptimizerConfig OptimizerConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("optimizer config: ") + e.what());
  }
  OptimizerConfig c;
  c.theta_max = j.value("theta_max", 0.05);
  c.revenue_tolerance = j.value("revenue_tolerance", 1e-6);
  c.grid_n = j.value("grid_n", 200);
  c.pattern_shrink = j.value("pattern_shrink", 0.5);
  c.pattern_min_step = j.value("pattern_min_step", 1e-7);
  c.strict_ordering = j.value("strict_ordering", false);
  c.min_gap = j.value("min_gap", 1e-6);
  c.gross_revenue_constraint = j.value("gross_revenue_constraint", false);
  c.objective_mode = welfare::ev_mode_from_string(j.value("objective_mode", "linearized"));
  if (c.theta_max <= 0 || c.revenue_tolerance <= 0 || c.grid_n < 2)
    throw DataError("optimizer config: bad bounds");
  return c;
}

OptimizerConfig OptimizerConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

double revenue_at(const TaxScenario& scenario, const std::vector<double>& thetas, bool gross) {
  if (thetas.size() != scenario.strata.size())
    throw DataError("revenue_at: theta count mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < scenario.strata.size(); ++k) {
    const auto& s = scenario.strata[k];
    double th = thetas[k];
    double q1 = welfare::quantity_response(s.q0, s.eps_m, th);
    total += gross ? s.price0 * (1.0 + th) * q1 * s.users : th * s.price0 * q1 * s.users;
  }
  return total;
}

void check_revenue_monotone(const TaxScenario& scenario, double theta_max) {
  for (const auto& s : scenario.strata) {
    // d/dth [th (1 + eps th)] = 1 + 2 eps th must stay positive on the box.
    if (1.0 + 2.0 * s.eps_m * theta_max <= 0.0)
      throw LafferRegion("stratum " + s.label +
                         ": collection not increasing on [0, theta_max]");
  }
}

double solve_last_theta_for_revenue(const TaxScenario& scenario, std::vector<double> thetas,
                                    double lo, double target, const OptimizerConfig& config) {
  const std::size_t last = scenario.strata.size() - 1;
  double hi = config.theta_max;
  if (lo > hi) throw Infeasible("solve_theta_for_revenue: empty interval");
  auto rev = [&](double th) {
    thetas[last] = th;
    return revenue_at(scenario, thetas, config.gross_revenue_constraint);
  };
  double tol = config.revenue_tolerance * std::abs(target);
  double rlo = rev(lo), rhi = rev(hi);
  if (target < rlo - tol || target > rhi + tol) {
    std::ostringstream os;
    os << "solve_theta_for_revenue: target " << target << " outside bracket [" << rlo
       << ", " << rhi << "]";
    throw Infeasible(os.str());
  }
  if (std::abs(rlo - target) <= tol) return lo;
  if (std::abs(rhi - target) <= tol) return hi;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double rm = rev(mid);
    if (std::abs(rm - target) <= tol || hi - lo < 1e-16) return mid;
    if (rm < target)
      lo = mid;
    else
      hi = mid;
  }
  throw Infeasible("solve_theta_for_revenue: bisection stalled");
}

double uniform_rate_for_revenue(const TaxScenario& scenario, double target,
                                const OptimizerConfig& config) {
  auto rev = [&](double t) {
    std::vector<double> th(scenario.strata.size(), t);
    return revenue_at(scenario, th, config.gross_revenue_constraint);
  };
  double lo = 0.0, hi = config.theta_max;
  double tol = config.revenue_tolerance * std::abs(target);
  if (target < rev(lo) - tol || target > rev(hi) + tol)
    throw Infeasible("uniform_rate_for_revenue: target outside bracket");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double rm = rev(mid);
    if (std::abs(rm - target) <= tol || hi - lo < 1e-16) return mid;
    if (rm < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> theta;
  bool feasible = false;
};

// Total order making argmin reductions thread-count invariant.
bool better(const Candidate& a, const Candidate& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.objective != b.objective) return a.objective < b.objective;
  return a.theta < b.theta;
}

}  // namespace

OptimizeResult optimize(const TaxScenario& scenario, const EasiParams& params,
                        const OptimizerConfig& config, bool parallel) {
  scenario.validate(params.J);
  const std::size_t K = scenario.strata.size();
  if (K > 3) throw DataError("optimize: more than 3 strata not supported");
  check_revenue_monotone(scenario, config.theta_max);

  OptimizeResult res;
  res.baseline = welfare::evaluate_representative(scenario, params, {}, config.objective_mode,
                                                  /*use_tax_per_unit=*/true);
  res.baseline_objective = res.baseline.total_ev;
  res.revenue_target = config.gross_revenue_constraint
                           ? revenue_at(scenario,
                                        [&] {
                                          std::vector<double> t;
                                          for (const auto& s : scenario.strata)
                                            t.push_back(s.theta);
                                          return t;
                                        }(),
                                        true)
                           : res.baseline.total_collection;
  const double target = res.revenue_target;
  const double gap = config.gap();

  auto objective_of = [&](const std::vector<double>& thetas) {
    WelfareReport rep = welfare::evaluate_representative(scenario, params, thetas,
                                                         config.objective_mode, false);
    return rep.total_ev;
  };

  auto evaluate_free = [&](const std::vector<double>& free_rates) -> Candidate {
    // free_rates covers strata 0..K-2; the last rate solves the revenue
    // equality.
    Candidate c;
    std::vector<double> thetas(free_rates);
    thetas.push_back(0.0);
    double lo = K >= 2 ? free_rates.back() + gap : 0.0;
    if (lo > config.theta_max) return c;
    try {
      double last = solve_last_theta_for_revenue(scenario, thetas, lo, target, config);
      thetas.back() = last;
    } catch (const Infeasible&) {
      return c;
    }
    c.theta = thetas;
    c.objective = objective_of(thetas);
    c.feasible = true;
    return c;
  };

  Candidate best;
  if (K == 1) {
    best = evaluate_free({});
    if (!best.feasible) throw Infeasible("optimize: revenue target unreachable");
  } else {
    const int n = config.grid_n;
    const double step = config.theta_max / (n - 1);
    const long long cells = K == 2 ? n : static_cast<long long>(n) * n;
    std::vector<Candidate> results(cells);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
#endif
    for (long long c = 0; c < cells; ++c) {
      double t0 = (K == 2 ? c : c / n) * step;
      if (K == 2) {
        results[c] = evaluate_free({t0});
      } else {
        double t1 = (c % n) * step;
        if (t1 < t0 + gap) continue;
        results[c] = evaluate_free({t0, t1});
      }
    }
    (void)parallel;

    for (const auto& c : results)
      if (better(c, best)) best = c;
    if (!best.feasible)
      throw Infeasible("optimize: no grid cell admits a bracketed closing rate");

    // Compass pattern search on the free rates around the best cell.
    double s = step;
    std::vector<double> cur(best.theta.begin(), best.theta.end() - 1);
    while (s >= config.pattern_min_step) {
      bool improved = false;
      for (std::size_t d = 0; d < cur.size(); ++d) {
        for (double sign : {+1.0, -1.0}) {
          std::vector<double> trial = cur;
          trial[d] += sign * s;
          if (trial[d] < 0 || trial[d] > config.theta_max) continue;
          bool ordered = true;
          for (std::size_t k = 1; k < trial.size(); ++k)
            if (trial[k] < trial[k - 1] + gap) ordered = false;
          if (!ordered) continue;
          Candidate c = evaluate_free(trial);
          if (better(c, best)) {
            best = c;
            cur = trial;
            improved = true;
          }
        }
      }
      if (!improved) s *= config.pattern_shrink;
    }
  }

  res.theta = best.theta;
  res.objective = best.objective;
  res.revenue = revenue_at(scenario, best.theta, config.gross_revenue_constraint);
  res.alternative =
      welfare::evaluate_representative(scenario, params, best.theta, config.objective_mode,
                                       /*use_tax_per_unit=*/false);
  return res;
}

std::string OptimizeResult::to_json() const {
  json j;
  j["theta"] = theta;
  j["revenue"] = revenue;
  j["revenue_target"] = revenue_target;
  j["objective"] = objective;
  j["baseline_objective"] = baseline_objective;
  j["baseline"] = json::parse(baseline.to_json());
  j["alternative"] = json::parse(alternative.to_json());
  return j.dump(2);
}

std::string compare_scenarios_csv(const WelfareReport& baseline,
                                  const WelfareReport& alternative) {
  if (baseline.strata.size() != alternative.strata.size())
    throw DataError("compare_scenarios: stratum count mismatch");
  std::ostringstream os;
  os << csv::full_precision;
  os << "scope,metric,baseline,alternative,delta\n";
  auto row = [&](const std::string& scope, const std::string& metric, double b, double a) {
    os << scope << "," << metric << "," << b << "," << a << "," << (a - b) << "\n";
  };
  row("complete", "total_ev_usd", baseline.total_ev, alternative.total_ev);
  row("complete", "collection_usd", baseline.total_collection, alternative.total_collection);
  for (std::size_t k = 0; k < baseline.strata.size(); ++k) {
    const auto& b = baseline.strata[k];
    const auto& a = alternative.strata[k];
    std::string scope = "stratum " + b.label;
    row(scope, "theta_pct", b.theta * 100, a.theta * 100);
    row(scope, "price_cents", b.price1 * 100, a.price1 * 100);
    row(scope, "ev_household_cents", b.ev_household * 100, a.ev_household * 100);
    row(scope, "total_ev_usd", b.ev_total, a.ev_total);
    row(scope, "ev_over_expenditure_pct", b.ev_over_exp * 100, a.ev_over_exp * 100);
    row(scope, "collection_usd", b.collection, a.collection);
  }
  return os.str();
}

}  // namespace easi::taxopt
