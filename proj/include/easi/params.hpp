#pragma once

#include <string>
#include <vector>

#include "easi/types.hpp"

namespace easi {

// Full coefficient set of the demand system.
//
// Shares are polynomials of order R in the implicit utility y:
//   w = sum_r b_r y^r + C'z + D'z y + sum_l z_l A_l p + B p y + eps
// with z_0 = 1 attached to A_0. A has size 1 (A_0 only) or L+1 when
// price-demographic interactions are enabled.
struct EasiParams {
  int J = 0;  // goods
  int L = 0;  // demographic variables
  int R = 0;  // polynomial order in y

  Mat b;               // (R+1) x J, row r holds b_r
  Mat C;               // L x J
  Mat D;               // L x J
  std::vector<Mat> A;  // J x J symmetric, A[0] mandatory
  Mat B;               // J x J symmetric

  // Centering of demographics / log expenditure at the representative
  // household (raw-unit offsets; data fed to the model is already centered).
  Vec z_center;
  double x_center = 0.0;

  std::vector<std::string> good_names;
  std::vector<std::string> z_names;

  bool has_interactions() const { return A.size() > 1; }

  // Zero-initialized shell with valid dimensions (b_0 uniform so adding-up
  // holds).
  static EasiParams zeros(int J, int L, int R, bool interactions = false);

  // Throws DataError when any adding-up / homogeneity / symmetry invariant
  // fails (tolerance 1e-12, symmetry exact).
  void validate() const;

  // Max |violation| over all constraints; used by tests and validate().
  double constraint_violation() const;

  std::string to_json() const;
  static EasiParams from_json(const std::string& text);
  void save(const std::string& path) const;
  static EasiParams load(const std::string& path);
};

// Symmetric J x J matrix with zero row/column sums from the half-vectorized
// free block: v holds vech of the leading (J-1)x(J-1) symmetric block in
// row-major lower-triangle order; the last row/column is filled by
// homogeneity (row sums zero) and symmetry.
Mat sym_from_free(const Vec& v, int J);

// Inverse of sym_from_free (extracts vech of the leading block).
Vec free_from_sym(const Mat& M);

inline int n_free_sym(int J) { return J * (J - 1) / 2; }

}  // namespace easi
