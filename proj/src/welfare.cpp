#include "easi/welfare.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "easi/elasticity.hpp"
#include "easi/parallel.hpp"
#include "json.hpp"

namespace easi::welfare {

using nlohmann::json;

EvMode ev_mode_from_string(const std::string& s) {
  if (s == "exact") return EvMode::Exact;
  if (s == "linearized") return EvMode::Linearized;
  throw DataError("unknown EV mode '" + s + "' (expected exact|linearized)");
}

double ev_from_log_prices(double x_level, const Vec& p0, const Vec& p1, const Vec& w0,
                          const Vec& w1, const Mat& a) {
  double delta = w1.dot(p1) - w0.dot(p0);
  delta -= 0.5 * (p1.dot(a * p1) - p0.dot(a * p0));
  return x_level * (1.0 - std::exp(-delta));
}

double equivalent_variation(double x_level, const Vec& P0, const Vec& P1, const Vec& w0,
                            const Vec& w1, const Mat& a) {
  if ((P0.array() <= 0).any() || (P1.array() <= 0).any())
    throw NonPositivePrice("equivalent_variation: prices must be positive");
  return ev_from_log_prices(x_level, P0.array().log().matrix(), P1.array().log().matrix(),
                            w0, w1, a);
}

ShareUpdate updated_share(const Vec& w0, const Mat& marshall_p_semi, const Vec& dpct) {
  ShareUpdate u;
  u.w1 = w0 + marshall_p_semi * dpct;
  u.large_change = (dpct.array().abs() > 0.05).any();
  return u;
}

double quantity_response(double q0, double eps_m, double dpct) {
  if (q0 < 0) throw DataError("quantity_response: q0 must be >= 0");
  return q0 * (1.0 + eps_m * dpct);
}

double household_ev_exact(const EasiParams& params, double x, const Vec& z, const Vec& eps,
                          const Vec& p0, const Vec& p1) {
  MarshallianSolution at_new = solve_marshallian_shares(x, p1, z, eps, params);
  Vec w1 = at_new.w;
  Vec w0c = hicksian_shares(at_new.y, p0, z, eps, params);  // compensated base shares
  Mat a = compensated_price_semi(at_new.y, z, params);
  return ev_from_log_prices(std::exp(x), p0, p1, w0c, w1, a);
}

double household_ev_linearized(const EasiParams& params, double x, const Vec& z,
                               const Vec& eps, const Vec& p0, const Vec& p1) {
  MarshallianSolution at_old = solve_marshallian_shares(x, p0, z, eps, params);
  Mat gamma = compensated_price_semi(at_old.y, z, params);
  Vec wx = marshallian_expenditure_semi(at_old.y, p0, z, params);
  Mat dpw = marshallian_price_semi(gamma, wx, at_old.w);
  Vec dpct = (p1 - p0).array().exp().matrix() - Vec::Ones(params.J);
  ShareUpdate upd = updated_share(at_old.w, dpw, dpct);
  return ev_from_log_prices(std::exp(x), p0, p1, at_old.w, upd.w1, gamma);
}

void TaxScenario::validate(int J) const {
  if (strata.empty()) throw DataError("scenario: no strata");
  if (tax_good < 0 || tax_good >= J) throw DataError("scenario: tax_good out of range");
  for (const auto& s : strata) {
    if (s.theta <= -1.0) throw DataError("scenario: theta must exceed -1");
    if (s.users < 0 || s.q0 < 0) throw DataError("scenario: users and q0 must be >= 0");
    if (s.price0 <= 0) throw NonPositivePrice("scenario: price0 must be positive");
    if (s.x_rep <= 0) throw DataError("scenario: x_rep must be positive");
    if (s.w0.size() != J) throw DataError("scenario: w0 length mismatch");
  }
  if (a_matrix && (a_matrix->rows() != J || a_matrix->cols() != J))
    throw DataError("scenario: a_matrix must be J x J");
}

WelfareReport evaluate_representative(const TaxScenario& scenario, const EasiParams& params,
                                      const std::vector<double>& thetas, EvMode mode,
                                      bool use_tax_per_unit) {
  scenario.validate(params.J);
  if (!thetas.empty() && thetas.size() != scenario.strata.size())
    throw DataError("evaluate_representative: theta count mismatch");

  const int J = params.J;
  const int g = scenario.tax_good;
  Mat a_ref = scenario.a_matrix ? *scenario.a_matrix
                                : compensated_price_semi(0.0, Vec::Zero(params.L), params);
  Vec wx_rep = marshallian_expenditure_semi(0.0, Vec::Zero(J), Vec::Zero(params.L), params);

  WelfareReport rep;
  for (std::size_t k = 0; k < scenario.strata.size(); ++k) {
    const StratumScenario& s = scenario.strata[k];
    double theta = thetas.empty() ? s.theta : thetas[k];
    StratumOutcome o;
    o.label = s.label;
    o.theta = theta;
    o.price1 = s.price0 * (1.0 + theta);
    o.q1 = quantity_response(s.q0, s.eps_m, theta);
    double tax_unit = use_tax_per_unit && scenario.tax_per_unit > 0 ? scenario.tax_per_unit
                                                                    : theta * s.price0;
    o.collection = tax_unit * o.q1 * s.users;

    Vec p0 = Vec::Zero(J);
    Vec p1 = Vec::Zero(J);
    p1(g) = std::log1p(theta);
    if (mode == EvMode::Linearized) {
      // Published update rule: shares move by the Marshallian semielasticities at the
      // representative point, built from the stratum's own share vector.
      Mat dpw = marshallian_price_semi(a_ref, wx_rep, s.w0);
      Vec dpct = Vec::Zero(J);
      dpct(g) = theta;
      ShareUpdate upd = updated_share(s.w0, dpw, dpct);
      o.ev_household = ev_from_log_prices(s.x_rep, p0, p1, s.w0, upd.w1, a_ref);
    } else {
      // Self-consistent representative: eps reproduces the stratum share
      // vector at the centered point.
      Vec eps = s.w0 - hicksian_shares(0.0, p0, Vec::Zero(params.L), Vec::Zero(J), params);
      o.ev_household =
          s.x_rep * household_ev_exact(params, 0.0, Vec::Zero(params.L), eps, p0, p1);
    }
    o.ev_total = o.ev_household * s.users;
    o.ev_over_exp = o.ev_household / s.x_rep;
    rep.total_collection += o.collection;
    rep.total_ev += o.ev_total;
    rep.total_users += s.users;
    rep.strata.push_back(std::move(o));
  }
  return rep;
}

PopulationEv aggregate_population(const std::vector<Household>& hh, const EasiParams& params,
                                  const TaxScenario& scenario, EvMode mode, bool parallel) {
  scenario.validate(params.J);
  std::map<std::string, double> theta_by_label;
  for (const auto& s : scenario.strata) theta_by_label[s.label] = s.theta;

  PopulationEv out;
  out.ev.assign(hh.size(), 0.0);
  std::vector<std::string> errors(hh.size());

  struct Acc {
    double total = 0.0;
    double weight = 0.0;
  };
  Acc acc = chunked_reduce<Acc>(
      hh.size(), kDefaultChunk,
      [&](Acc& a, std::size_t i) {
        const Household& h = hh[i];
        auto it = theta_by_label.find(h.stratum);
        double theta = it == theta_by_label.end() ? 0.0 : it->second;
        Vec p1 = h.p;
        p1(scenario.tax_good) += std::log1p(theta);
        Vec eps = h.eps.size() > 0 ? h.eps : Vec::Zero(params.J);
        double ev = 0.0;
        try {
          ev = mode == EvMode::Exact
                   ? household_ev_exact(params, h.x, h.z, eps, h.p, p1)
                   : household_ev_linearized(params, h.x, h.z, eps, h.p, p1);
        } catch (const std::exception& e) {
          errors[i] = e.what();
          return;
        }
        out.ev[i] = ev;
        a.total += h.weight * ev;
        a.weight += h.weight;
      },
      [](Acc& t, const Acc& p) {
        t.total += p.total;
        t.weight += p.weight;
      },
      parallel);

  for (const auto& e : errors)
    if (!e.empty()) throw NumericError("aggregate_population: " + e);
  out.total = acc.total;
  out.total_weight = acc.weight;
  return out;
}

// ---------------------------------------------------------------------------
// JSON

std::string TaxScenario::to_json() const {
  json j;
  j["tax_good"] = tax_good;
  j["tax_per_unit"] = tax_per_unit;
  json ss = json::array();
  for (const auto& s : strata) {
    json sj;
    sj["label"] = s.label;
    sj["theta"] = s.theta;
    sj["price0"] = s.price0;
    sj["q0"] = s.q0;
    sj["users"] = s.users;
    sj["eps_m"] = s.eps_m;
    sj["x_rep"] = s.x_rep;
    sj["w0"] = std::vector<double>(s.w0.data(), s.w0.data() + s.w0.size());
    ss.push_back(sj);
  }
  j["strata"] = ss;
  if (a_matrix) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < a_matrix->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < a_matrix->cols(); ++k) row.push_back((*a_matrix)(i, k));
      rows.push_back(row);
    }
    j["a_matrix"] = rows;
  }
  return j.dump(2);
}

TaxScenario TaxScenario::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("scenario json: ") + e.what());
  }
  TaxScenario sc;
  try {
    sc.tax_good = j.value("tax_good", 0);
    sc.tax_per_unit = j.value("tax_per_unit", 0.0);
    for (const auto& sj : j.at("strata")) {
      StratumScenario s;
      s.label = sj.at("label").get<std::string>();
      s.theta = sj.at("theta").get<double>();
      s.price0 = sj.at("price0").get<double>();
      s.q0 = sj.value("q0", 0.0);
      s.users = sj.value("users", 0.0);
      s.eps_m = sj.value("eps_m", 0.0);
      s.x_rep = sj.value("x_rep", 1.0);
      auto wv = sj.at("w0").get<std::vector<double>>();
      s.w0 = Eigen::Map<const Vec>(wv.data(), wv.size());
      sc.strata.push_back(std::move(s));
    }
    if (j.contains("a_matrix")) {
      const auto& rows = j["a_matrix"];
      Mat a(rows.size(), rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) a(i, k) = rows[i][k].get<double>();
      sc.a_matrix = a;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scenario json: ") + e.what());
  }
  return sc;
}

TaxScenario TaxScenario::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

std::string WelfareReport::to_json() const {
  json j;
  json ss = json::array();
  for (const auto& o : strata) {
    json sj;
    sj["label"] = o.label;
    sj["theta"] = o.theta;
    sj["price1"] = o.price1;
    sj["q1"] = o.q1;
    sj["collection"] = o.collection;
    sj["ev_household"] = o.ev_household;
    sj["ev_total"] = o.ev_total;
    sj["ev_over_expenditure"] = o.ev_over_exp;
    ss.push_back(sj);
  }
  j["strata"] = ss;
  j["total_collection"] = total_collection;
  j["total_ev"] = total_ev;
  j["total_users"] = total_users;
  return j.dump(2);
}

}  // namespace easi::welfare
