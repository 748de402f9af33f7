#include "easi/elasticity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "json.hpp"

namespace easi {

Mat compensated_price_semi(double y, const Vec& z, const EasiParams& params) {
  Mat g = params.A[0];
  if (params.has_interactions())
    for (int l = 0; l < params.L; ++l) g += z(l) * params.A[l + 1];
  g += y * params.B;
  return g;
}

Vec real_expenditure_semi(double y, const Vec& p, const Vec& z, const EasiParams& params) {
  Vec v = Vec::Zero(params.J);
  double yr = 1.0;
  for (int r = 1; r <= params.R; ++r) {
    v += (r * yr) * params.b.row(r).transpose();
    yr *= y;
  }
  if (params.L > 0) v += params.D.transpose() * z;
  v += params.B * p;
  return v;
}

Mat demographic_semi(double y, const Vec& p, const EasiParams& params) {
  Mat m(params.L, params.J);
  for (int l = 0; l < params.L; ++l) {
    Vec row = params.C.row(l).transpose() + y * params.D.row(l).transpose();
    if (params.has_interactions()) row += params.A[l + 1] * p;
    m.row(l) = row.transpose();
  }
  return m;
}

SlutskyResult normalized_slutsky(const Mat& gamma, const Vec& w) {
  SlutskyResult r;
  r.S = gamma + w * w.transpose();
  r.S.diagonal() -= w;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (r.S + r.S.transpose()));
  r.eigenvalues = es.eigenvalues();
  return r;
}

ConcavityResult check_concavity(const Mat& S, double tolerance) {
  ConcavityResult r;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  r.eigenvalues = es.eigenvalues();
  r.max_eigenvalue = r.eigenvalues(r.eigenvalues.size() - 1);
  r.pass = r.max_eigenvalue <= tolerance;
  return r;
}

Vec marshallian_expenditure_semi(double y, const Vec& p, const Vec& z,
                                 const EasiParams& params) {
  Vec wy = real_expenditure_semi(y, p, z, params);
  double d = 1.0 - p.dot(params.B * p) / 2.0 + p.dot(wy);
  if (std::abs(d) < 1e-12)
    throw SingularJacobian("marshallian_expenditure_semi: singular system");
  return wy / d;
}

Mat marshallian_price_semi(const Mat& gamma, const Vec& marshall_x_semi, const Vec& w) {
  return gamma - marshall_x_semi * w.transpose();
}

ElasticityValues elasticities(const Mat& marshall_p_semi, const Vec& marshall_x_semi,
                              const Vec& w) {
  int J = static_cast<int>(w.size());
  for (int i = 0; i < J; ++i)
    if (w(i) < 1e-10) throw ZeroShare("elasticities: share too close to zero");
  ElasticityValues v;
  v.full = Mat(J, J);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j)
      v.full(i, j) = marshall_p_semi(i, j) / w(i) - (i == j ? 1.0 : 0.0);
  v.ope = v.full.diagonal();
  v.ee = marshall_x_semi.cwiseQuotient(w) + Vec::Ones(J);
  return v;
}

Mat engel_curve(const EasiParams& params, const Vec& z, const Vec& eps,
                const std::vector<double>& x_grid) {
  Vec p0 = Vec::Zero(params.J);
  Vec e = eps.size() > 0 ? eps : Vec::Zero(params.J);
  Mat curves(x_grid.size(), params.J);
  for (std::size_t i = 0; i < x_grid.size(); ++i)
    curves.row(i) = hicksian_shares(x_grid[i], p0, z, e, params).transpose();
  return curves;
}

ElasticityReport evaluate_elasticities(const EvalPoint& pt, const EasiParams& params) {
  MarshallianSolution sol = resolve_point(pt, params);
  ElasticityReport rep;
  rep.y = sol.y;
  rep.w = sol.w;
  rep.gamma = compensated_price_semi(sol.y, pt.z, params);
  rep.real_exp_semi = real_expenditure_semi(sol.y, pt.p, pt.z, params);
  rep.demo_semi = demographic_semi(sol.y, pt.p, params);
  SlutskyResult sl = normalized_slutsky(rep.gamma, sol.w);
  rep.slutsky = sl.S;
  rep.slutsky_eigs = sl.eigenvalues;
  rep.concave = check_concavity(sl.S).pass;
  rep.marshall_x_semi = marshallian_expenditure_semi(sol.y, pt.p, pt.z, params);
  rep.marshall_p_semi = marshallian_price_semi(rep.gamma, rep.marshall_x_semi, sol.w);
  ElasticityValues ev = elasticities(rep.marshall_p_semi, rep.marshall_x_semi, sol.w);
  rep.ope = ev.ope;
  rep.ee = ev.ee;
  rep.marshall_elasticity = ev.full;
  return rep;
}

namespace {

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::string ElasticityReport::to_json(const EasiParams& params) const {
  nlohmann::json j;
  j["y"] = y;
  j["shares"] = vec_json(w);
  j["compensated_price_semi"] = mat_json(gamma);
  j["real_expenditure_semi"] = vec_json(real_exp_semi);
  j["demographic_semi"] = mat_json(demo_semi);
  j["slutsky"] = mat_json(slutsky);
  j["slutsky_eigenvalues"] = vec_json(slutsky_eigs);
  j["concave"] = concave;
  j["marshallian_expenditure_semi"] = vec_json(marshall_x_semi);
  j["marshallian_price_semi"] = mat_json(marshall_p_semi);
  j["own_price_elasticity"] = vec_json(ope);
  j["expenditure_elasticity"] = vec_json(ee);
  j["marshallian_elasticity"] = mat_json(marshall_elasticity);
  if (!params.good_names.empty()) j["goods"] = params.good_names;
  if (!params.z_names.empty()) j["demographics"] = params.z_names;
  return j.dump(2);
}

}  // namespace easi
