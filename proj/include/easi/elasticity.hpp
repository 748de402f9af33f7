#pragma once

#include <string>
#include <vector>

#include "easi/model.hpp"

namespace easi {

// Every derivative object evaluated at one point.
struct ElasticityReport {
  double y = 0.0;
  Vec w;                 // fitted shares at the point
  Mat gamma;             // J x J compensated price semielasticities
  Vec real_exp_semi;     // d w / d y
  Mat demo_semi;         // L x J
  Mat slutsky;           // normalized Slutsky S = gamma + ww' - diag(w)
  Vec slutsky_eigs;      // ascending
  bool concave = false;  // max eigenvalue <= 1e-8
  Vec marshall_x_semi;   // d w / d x
  Mat marshall_p_semi;   // J x J, d w_i / d p_j at fixed x
  Vec ope;               // own-price elasticities
  Vec ee;                // expenditure elasticities
  Mat marshall_elasticity;  // full epsilon^M matrix

  std::string to_json(const EasiParams& params) const;
};

// Gamma = sum_l z_l A_l + B y  (z_0 = 1).
Mat compensated_price_semi(double y, const Vec& z, const EasiParams& params);

// d w / d y = sum_r r b_r y^(r-1) + D'z + Bp.
Vec real_expenditure_semi(double y, const Vec& p, const Vec& z, const EasiParams& params);

// Row l = c_l + d_l y + A_l p (A_l only when interactions are enabled).
Mat demographic_semi(double y, const Vec& p, const EasiParams& params);

struct SlutskyResult {
  Mat S;
  Vec eigenvalues;  // ascending
};

SlutskyResult normalized_slutsky(const Mat& gamma, const Vec& w);

struct ConcavityResult {
  bool pass = false;
  Vec eigenvalues;
  double max_eigenvalue = 0.0;
};

ConcavityResult check_concavity(const Mat& S, double tolerance = 1e-8);

// d w / d x from the implicit Marshallian system:
//   dw/dx = grad_y w / (D + p' grad_y w),  D = 1 - p'Bp/2.
// Throws SingularJacobian when the scalar denominator vanishes.
Vec marshallian_expenditure_semi(double y, const Vec& p, const Vec& z,
                                 const EasiParams& params);

// Slutsky decomposition: grad_p w^M = Gamma - (grad_x w) w'.
Mat marshallian_price_semi(const Mat& gamma, const Vec& marshall_x_semi, const Vec& w);

struct ElasticityValues {
  Vec ope;
  Vec ee;
  Mat full;  // epsilon^M_{ij} = (grad_p w)_{ij}/w_i - 1{i=j}
};

// Throws ZeroShare when any w_i < 1e-10.
ElasticityValues elasticities(const Mat& marshall_p_semi, const Vec& marshall_x_semi,
                              const Vec& w);

// Shares along an expenditure grid at base prices (p = 0, y = x).
// Result is grid.size() x J; rows sum to 1 (+ 1'eps).
Mat engel_curve(const EasiParams& params, const Vec& z, const Vec& eps,
                const std::vector<double>& x_grid);

// Full report at one evaluation point.
ElasticityReport evaluate_elasticities(const EvalPoint& pt, const EasiParams& params);

}  // namespace easi
