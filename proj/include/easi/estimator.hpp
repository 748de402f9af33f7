#pragma once

#include <string>
#include <vector>

#include "easi/model.hpp"

namespace easi::est {

struct FitConfig {
  int R = 5;
  bool interactions = false;  // enable A_l, l >= 1
  double y_tolerance = 1e-8;
  int max_outer_iterations = 100;
  double ridge = 0.0;     // added to the 3SLS normal matrix on rank trouble
  int drop_good = -1;     // equation omitted by adding-up; default last good
  bool exclude_zero_shares = true;

  std::string to_json() const;
  static FitConfig from_json(const std::string& text);
  static FitConfig load(const std::string& path);
};

// Restricted coordinates: adding-up drops one equation, homogeneity turns
// price regressors into differences against the dropped good, symmetry
// half-vectorizes the shared A/B blocks. reconstruct() therefore returns
// full matrices satisfying every EasiParams invariant by construction.
class DesignMap {
public:
  DesignMap(int J, int L, int R, bool interactions, int drop_good = -1);

  int J, L, R;
  bool interactions;
  int drop;  // external index of the omitted good

  int per_eq() const { return 1 + R + 2 * L; }
  int n_eq() const { return J - 1; }
  int n_free() const;
  int n_instruments() const;
  int a_offset() const { return n_eq() * per_eq(); }
  int b_offset() const { return a_offset() + n_free_sym(J); }
  int al_offset(int l) const { return b_offset() + (1 + l) * n_free_sym(J); }

  // (J-1) x n_free() regressor rows at implicit utility y.
  void design_rows(const Vec& p, const Vec& z, double y, Mat& X) const;

  // 1, ytil..ytil^R, z, z*ytil, ptil, ptil*ytil [, z (x) ptil].
  Vec instrument_row(const Vec& p, const Vec& z, double ytilde) const;

  EasiParams reconstruct(const Vec& free) const;
  Vec extract(const EasiParams& params) const;

  // Affine map full = T free + t0 over the flattened full-parameter layout
  // (for delta-method standard errors of dependent coefficients).
  void full_affine(Mat& T, Vec& t0) const;
  int n_full() const;
  std::vector<std::string> full_labels(const std::vector<std::string>& goods) const;
  std::vector<std::string> labels(const std::vector<std::string>& goods) const;

  Vec price_diffs(const Vec& p) const;  // ptil_k = p_k - p_drop over kept goods

private:
  std::vector<int> kept_;  // external indices of kept goods, in order
};

// Weighted cross-moment sums for the stacked system with a common
// instrument set. Addable; empty until first fold.
struct Moments {
  Mat Mhh;              // m x m
  std::vector<Mat> G;   // per equation: m x K
  std::vector<Vec> v;   // per equation: m
  double wsum = 0.0;

  bool empty() const { return Mhh.size() == 0; }
  void init(int m, int K, int neq);
  void add(const Moments& other);
};

struct ThreeSlsSolution {
  Vec coef;
  Mat vcov;
  double min_singular_value = 0.0;  // of the projected stacked design
};

// GMM/3SLS solve of the stacked system with weighting Sigma^{-1} (x)
// instrument projection. Collapses to stacked OLS when instruments equal
// regressors and Sigma = I.
ThreeSlsSolution three_sls_step(const Moments& mom, const Mat& sigma, double ridge);

struct EstimationData {
  std::vector<Household> households;  // analysis set (after exclusions)
  Mat H;                              // n x m instrument rows (fixed across iterations)
  Vec w_bar;                          // weighted mean shares
  std::vector<std::string> excluded_ids;
};

EstimationData prepare_data(const std::vector<Household>& input, const DesignMap& map,
                            const FitConfig& config);

// Moment accumulation over households at the current y vector. This is the
// OpenMP kernel; parallel=false runs the serial reference. Both use the same
// fixed chunking, so results are bit-identical for any thread count.
Moments accumulate_moments(const EstimationData& data, const DesignMap& map,
                           const Vec& y, bool parallel = true);

// Weighted residual covariance at coefficients `coef` and utilities `y`.
Mat residual_covariance(const EstimationData& data, const DesignMap& map, const Vec& y,
                        const Vec& coef, bool parallel = true);

struct ParamsSE {
  Mat b;
  Mat C;
  Mat D;
  std::vector<Mat> A;
  Mat B;
};

struct FitResult {
  EasiParams params;
  Vec free;
  Mat vcov;
  Vec free_se;
  ParamsSE se;
  Mat sigma;  // (J-1) x (J-1) residual covariance
  int outer_iterations = 0;
  bool converged = false;
  std::vector<double> y_path_norms;  // max |dy| per outer iteration
  double min_singular_value = 0.0;
  std::vector<std::string> labels;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;

  std::string diagnostics_json() const;
};

// Iterative linear 3SLS with additivity, homogeneity and symmetry imposed:
// y0 = x - p'w, then alternate {3SLS step, y update via the fitted A/B,
// Sigma update from residuals} until max |dy| < y_tolerance.
FitResult fit(const std::vector<Household>& data, const FitConfig& config,
              bool parallel = true);

ParamsSE standard_errors(const DesignMap& map, const Mat& vcov);

}  // namespace easi::est
