#include "easi/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "easi/parallel.hpp"
#include "json.hpp"

namespace easi::est {

using nlohmann::json;

// ---------------------------------------------------------------------------
// FitConfig

std::string FitConfig::to_json() const {
  json j;
  j["R"] = R;
  j["interactions"] = interactions;
  j["y_tolerance"] = y_tolerance;
  j["max_outer_iterations"] = max_outer_iterations;
  j["ridge"] = ridge;
  j["drop_good"] = drop_good;
  j["exclude_zero_shares"] = exclude_zero_shares;
  return j.dump(2);
}

FitConfig FitConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("fit config: ") + e.what());
  }
  FitConfig c;
  c.R = j.value("R", 5);
  c.interactions = j.value("interactions", false);
  c.y_tolerance = j.value("y_tolerance", 1e-8);
  c.max_outer_iterations = j.value("max_outer_iterations", 100);
  c.ridge = j.value("ridge", 0.0);
  c.drop_good = j.value("drop_good", -1);
  c.exclude_zero_shares = j.value("exclude_zero_shares", true);
  if (c.y_tolerance <= 0 || c.ridge < 0 || c.max_outer_iterations <= 0)
    throw DataError("fit config: tolerances must be positive");
  return c;
}

FitConfig FitConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// DesignMap

DesignMap::DesignMap(int J_, int L_, int R_, bool inter, int drop_good)
    : J(J_), L(L_), R(R_), interactions(inter), drop(drop_good < 0 ? J_ - 1 : drop_good) {
  if (drop < 0 || drop >= J) throw DataError("DesignMap: drop_good out of range");
  for (int j = 0; j < J; ++j)
    if (j != drop) kept_.push_back(j);
}

int DesignMap::n_free() const {
  int shared = 2 * n_free_sym(J) + (interactions ? L * n_free_sym(J) : 0);
  return n_eq() * per_eq() + shared;
}

int DesignMap::n_instruments() const {
  return 1 + R + 2 * L + 2 * (J - 1) + (interactions ? L * (J - 1) : 0);
}

Vec DesignMap::price_diffs(const Vec& p) const {
  Vec pt(J - 1);
  for (int k = 0; k < J - 1; ++k) pt(k) = p(kept_[k]) - p(drop);
  return pt;
}

namespace {

// Regressor of the symmetric free block: contribution of free element
// (a,b), a >= b, to equation e (all internal indices).
inline double sym_regressor(int e, int a, int b, const Vec& pt) {
  double v = 0.0;
  if (e == a) v += pt(b);
  if (e == b && a != b) v += pt(a);
  return v;
}

}  // namespace

void DesignMap::design_rows(const Vec& p, const Vec& z, double y, Mat& X) const {
  const int K = n_free();
  if (X.rows() != n_eq() || X.cols() != K) X.resize(n_eq(), K);
  X.setZero();
  Vec pt = price_diffs(p);

  for (int e = 0; e < n_eq(); ++e) {
    int off = e * per_eq();
    X(e, off) = 1.0;
    double yr = 1.0;
    for (int r = 1; r <= R; ++r) {
      yr *= y;
      X(e, off + r) = yr;
    }
    for (int l = 0; l < L; ++l) {
      X(e, off + 1 + R + l) = z(l);
      X(e, off + 1 + R + L + l) = z(l) * y;
    }
    int idx = 0;
    for (int a = 0; a < J - 1; ++a) {
      for (int b = 0; b <= a; ++b, ++idx) {
        double g = sym_regressor(e, a, b, pt);
        X(e, a_offset() + idx) = g;
        X(e, b_offset() + idx) = g * y;
        if (interactions)
          for (int l = 0; l < L; ++l) X(e, al_offset(l) + idx) = g * z(l);
      }
    }
  }
}

Vec DesignMap::instrument_row(const Vec& p, const Vec& z, double ytilde) const {
  Vec h(n_instruments());
  int k = 0;
  h(k++) = 1.0;
  double yr = 1.0;
  for (int r = 1; r <= R; ++r) {
    yr *= ytilde;
    h(k++) = yr;
  }
  for (int l = 0; l < L; ++l) h(k++) = z(l);
  for (int l = 0; l < L; ++l) h(k++) = z(l) * ytilde;
  Vec pt = price_diffs(p);
  for (int j = 0; j < J - 1; ++j) h(k++) = pt(j);
  for (int j = 0; j < J - 1; ++j) h(k++) = pt(j) * ytilde;
  if (interactions)
    for (int l = 0; l < L; ++l)
      for (int j = 0; j < J - 1; ++j) h(k++) = z(l) * pt(j);
  return h;
}

EasiParams DesignMap::reconstruct(const Vec& free) const {
  if (free.size() != n_free()) throw DataError("reconstruct: wrong coefficient count");
  EasiParams p = EasiParams::zeros(J, L, R, interactions);
  p.b.setZero();

  // Equation blocks; the dropped good's column comes from adding-up.
  for (int e = 0; e < n_eq(); ++e) {
    int g = kept_[e];
    int off = e * per_eq();
    for (int r = 0; r <= R; ++r) p.b(r, g) = r == 0 ? free(off) : free(off + r);
    for (int l = 0; l < L; ++l) {
      p.C(l, g) = free(off + 1 + R + l);
      p.D(l, g) = free(off + 1 + R + L + l);
    }
  }
  for (int r = 0; r <= R; ++r) {
    double s = 0;
    for (int g : kept_) s += p.b(r, g);
    p.b(r, drop) = (r == 0 ? 1.0 : 0.0) - s;
  }
  for (int l = 0; l < L; ++l) {
    double sc = 0, sd = 0;
    for (int g : kept_) {
      sc += p.C(l, g);
      sd += p.D(l, g);
    }
    p.C(l, drop) = -sc;
    p.D(l, drop) = -sd;
  }

  // Shared symmetric blocks in internal order, then permuted to external.
  auto place = [&](const Mat& Mint) {
    Mat M = Mat::Zero(J, J);
    auto ext = [&](int i) { return i < J - 1 ? kept_[i] : drop; };
    for (int i = 0; i < J; ++i)
      for (int j = 0; j < J; ++j) M(ext(i), ext(j)) = Mint(i, j);
    return M;
  };
  p.A[0] = place(sym_from_free(free.segment(a_offset(), n_free_sym(J)), J));
  p.B = place(sym_from_free(free.segment(b_offset(), n_free_sym(J)), J));
  if (interactions)
    for (int l = 0; l < L; ++l)
      p.A[l + 1] = place(sym_from_free(free.segment(al_offset(l), n_free_sym(J)), J));
  return p;
}

Vec DesignMap::extract(const EasiParams& params) const {
  Vec free = Vec::Zero(n_free());
  for (int e = 0; e < n_eq(); ++e) {
    int g = kept_[e];
    int off = e * per_eq();
    for (int r = 0; r <= R; ++r) free(off + r) = params.b(r, g);
    for (int l = 0; l < L; ++l) {
      free(off + 1 + R + l) = params.C(l, g);
      free(off + 1 + R + L + l) = params.D(l, g);
    }
  }
  auto take = [&](const Mat& M, int off) {
    int idx = 0;
    for (int a = 0; a < J - 1; ++a)
      for (int b = 0; b <= a; ++b, ++idx) free(off + idx) = M(kept_[a], kept_[b]);
  };
  take(params.A[0], a_offset());
  take(params.B, b_offset());
  if (interactions)
    for (int l = 0; l < L; ++l) take(params.A[l + 1], al_offset(l));
  return free;
}

int DesignMap::n_full() const {
  int nA = interactions ? L + 1 : 1;
  return (R + 1) * J + 2 * L * J + (nA + 1) * J * J;
}

namespace {

Vec flatten_params(const EasiParams& p) {
  std::vector<double> out;
  for (int r = 0; r <= p.R; ++r)
    for (int j = 0; j < p.J; ++j) out.push_back(p.b(r, j));
  for (int l = 0; l < p.L; ++l)
    for (int j = 0; j < p.J; ++j) out.push_back(p.C(l, j));
  for (int l = 0; l < p.L; ++l)
    for (int j = 0; j < p.J; ++j) out.push_back(p.D(l, j));
  for (const Mat& Al : p.A)
    for (int i = 0; i < p.J; ++i)
      for (int j = 0; j < p.J; ++j) out.push_back(Al(i, j));
  for (int i = 0; i < p.J; ++i)
    for (int j = 0; j < p.J; ++j) out.push_back(p.B(i, j));
  return Eigen::Map<const Vec>(out.data(), out.size());
}

}  // namespace

void DesignMap::full_affine(Mat& T, Vec& t0) const {
  // reconstruct() is affine in the free vector, so columns of T follow from
  // unit perturbations.
  int K = n_free();
  t0 = flatten_params(reconstruct(Vec::Zero(K)));
  T.resize(t0.size(), K);
  for (int k = 0; k < K; ++k) {
    Vec e = Vec::Zero(K);
    e(k) = 1.0;
    T.col(k) = flatten_params(reconstruct(e)) - t0;
  }
}

std::vector<std::string> DesignMap::labels(const std::vector<std::string>& goods) const {
  auto gname = [&](int j) {
    return j < static_cast<int>(goods.size()) ? goods[j] : "good" + std::to_string(j + 1);
  };
  std::vector<std::string> out;
  for (int e = 0; e < n_eq(); ++e) {
    std::string g = gname(kept_[e]);
    out.push_back("b0[" + g + "]");
    for (int r = 1; r <= R; ++r) out.push_back("b" + std::to_string(r) + "[" + g + "]");
    for (int l = 0; l < L; ++l) out.push_back("C" + std::to_string(l + 1) + "[" + g + "]");
    for (int l = 0; l < L; ++l) out.push_back("D" + std::to_string(l + 1) + "[" + g + "]");
  }
  auto sym_labels = [&](const std::string& name) {
    for (int a = 0; a < J - 1; ++a)
      for (int b = 0; b <= a; ++b)
        out.push_back(name + "[" + gname(kept_[a]) + "," + gname(kept_[b]) + "]");
  };
  sym_labels("A");
  sym_labels("B");
  if (interactions)
    for (int l = 0; l < L; ++l) sym_labels("A_z" + std::to_string(l + 1));
  return out;
}

std::vector<std::string> DesignMap::full_labels(const std::vector<std::string>& goods) const {
  auto gname = [&](int j) {
    return j < static_cast<int>(goods.size()) ? goods[j] : "good" + std::to_string(j + 1);
  };
  std::vector<std::string> out;
  for (int r = 0; r <= R; ++r)
    for (int j = 0; j < J; ++j)
      out.push_back("b" + std::to_string(r) + "[" + gname(j) + "]");
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < J; ++j)
      out.push_back("C" + std::to_string(l + 1) + "[" + gname(j) + "]");
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < J; ++j)
      out.push_back("D" + std::to_string(l + 1) + "[" + gname(j) + "]");
  int nA = interactions ? L + 1 : 1;
  for (int a = 0; a < nA; ++a)
    for (int i = 0; i < J; ++i)
      for (int j = 0; j < J; ++j)
        out.push_back("A" + (a == 0 ? std::string() : "_z" + std::to_string(a)) + "[" +
                      gname(i) + "," + gname(j) + "]");
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) out.push_back("B[" + gname(i) + "," + gname(j) + "]");
  return out;
}

// ---------------------------------------------------------------------------
// Moments

void Moments::init(int m, int K, int neq) {
  Mhh = Mat::Zero(m, m);
  G.assign(neq, Mat::Zero(m, K));
  v.assign(neq, Vec::Zero(m));
  wsum = 0.0;
}

void Moments::add(const Moments& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  Mhh += other.Mhh;
  for (std::size_t e = 0; e < G.size(); ++e) {
    G[e] += other.G[e];
    v[e] += other.v[e];
  }
  wsum += other.wsum;
}

// ---------------------------------------------------------------------------
// Data preparation

EstimationData prepare_data(const std::vector<Household>& input, const DesignMap& map,
                            const FitConfig& config) {
  EstimationData data;
  data.households.reserve(input.size());
  for (const auto& h : input) {
    if (h.w.size() != map.J || h.p.size() != map.J || h.z.size() != map.L)
      throw DataError("fit: household dimensions do not match the design");
    if (config.exclude_zero_shares && (h.w.array() <= 0.0).any()) {
      data.excluded_ids.push_back(h.id);
      continue;
    }
    data.households.push_back(h);
  }
  std::size_t n = data.households.size();
  if (static_cast<int>(n) <= map.n_free())
    throw DataError("fit: fewer observations than free coefficients");

  // Constant regressor columns cannot be identified next to the intercept.
  for (int l = 0; l < map.L; ++l) {
    double mn = data.households[0].z(l), mx = mn;
    for (const auto& h : data.households) {
      mn = std::min(mn, h.z(l));
      mx = std::max(mx, h.z(l));
    }
    if (mx - mn < 1e-14)
      throw DataError("fit: demographic column z" + std::to_string(l + 1) + " is constant");
  }

  double wsum = 0.0;
  Vec wbar = Vec::Zero(map.J);
  for (const auto& h : data.households) {
    wbar += h.weight * h.w;
    wsum += h.weight;
  }
  if (wsum <= 0) throw DataError("fit: total weight is zero");
  data.w_bar = wbar / wsum;

  data.H.resize(n, map.n_instruments());
  for (std::size_t i = 0; i < n; ++i) {
    const Household& h = data.households[i];
    double ytilde = h.x - h.p.dot(data.w_bar);
    data.H.row(i) = map.instrument_row(h.p, h.z, ytilde).transpose();
  }
  return data;
}

// ---------------------------------------------------------------------------
// Kernels

Moments accumulate_moments(const EstimationData& data, const DesignMap& map,
                           const Vec& y, bool parallel) {
  const int m = map.n_instruments();
  const int K = map.n_free();
  const int neq = map.n_eq();
  const std::size_t n = data.households.size();

  return chunked_reduce<Moments>(
      n, kDefaultChunk,
      [&](Moments& acc, std::size_t i) {
        if (acc.empty()) acc.init(m, K, neq);
        const Household& h = data.households[i];
        thread_local Mat X;
        map.design_rows(h.p, h.z, y(i), X);
        Vec hi = data.H.row(i).transpose();
        double wt = h.weight;
        acc.Mhh.noalias() += wt * hi * hi.transpose();
        for (int e = 0; e < neq; ++e) {
          acc.G[e].noalias() += wt * hi * X.row(e);
          acc.v[e].noalias() += (wt * h.w(e < map.drop ? e : e + 1)) * hi;
        }
        acc.wsum += wt;
      },
      [](Moments& total, const Moments& part) { total.add(part); }, parallel);
}

namespace {

// Internal equation index -> external good index for shares/residuals.
inline int eq_good(const DesignMap& map, int e) { return e < map.drop ? e : e + 1; }

}  // namespace

Mat residual_covariance(const EstimationData& data, const DesignMap& map, const Vec& y,
                        const Vec& coef, bool parallel) {
  const int neq = map.n_eq();
  struct Acc {
    Mat S;
    double wsum = 0.0;
  };
  Acc total = chunked_reduce<Acc>(
      data.households.size(), kDefaultChunk,
      [&](Acc& acc, std::size_t i) {
        if (acc.S.size() == 0) acc.S = Mat::Zero(neq, neq);
        const Household& h = data.households[i];
        thread_local Mat X;
        map.design_rows(h.p, h.z, y(i), X);
        Vec eps(neq);
        for (int e = 0; e < neq; ++e) eps(e) = h.w(eq_good(map, e)) - X.row(e).dot(coef);
        acc.S.noalias() += h.weight * eps * eps.transpose();
        acc.wsum += h.weight;
      },
      [](Acc& t, const Acc& p) {
        if (p.S.size() == 0) return;
        if (t.S.size() == 0) {
          t = p;
          return;
        }
        t.S += p.S;
        t.wsum += p.wsum;
      },
      parallel);
  if (total.wsum <= 0) throw DataError("residual_covariance: zero total weight");
  return total.S / total.wsum;
}

// ---------------------------------------------------------------------------
// 3SLS solve

ThreeSlsSolution three_sls_step(const Moments& mom, const Mat& sigma, double ridge) {
  if (mom.empty()) throw DataError("three_sls_step: empty moments");
  const int neq = static_cast<int>(mom.G.size());
  const int K = static_cast<int>(mom.G[0].cols());

  // Instrument Gram conditioning.
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(mom.Mhh);
    double lmax = es.eigenvalues().maxCoeff();
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmax > 0) || lmin < -1e-9 * lmax || lmin <= 1e-14 * lmax)
      throw SingularMoments("three_sls_step: instrument moment matrix is rank-deficient");
  }
  Eigen::LDLT<Mat> hh(mom.Mhh);

  // Sigma^{-1}; jitter the diagonal if the residual covariance degenerates
  // (exactly fitting data drives it to zero scale).
  Mat sig = sigma;
  double mean_diag = sig.trace() / neq;
  Eigen::LLT<Mat> sig_llt(sig);
  for (int tries = 0; sig_llt.info() != Eigen::Success && tries < 8; ++tries) {
    sig += Mat::Identity(neq, neq) * std::max(mean_diag, 1e-30) * 1e-10;
    sig_llt.compute(sig);
  }
  if (sig_llt.info() != Eigen::Success)
    throw SingularMoments("three_sls_step: residual covariance not positive definite");
  Mat sig_inv = sig_llt.solve(Mat::Identity(neq, neq));

  std::vector<Mat> P(neq);  // Mhh^{-1} G_e
  for (int e = 0; e < neq; ++e) P[e] = hh.solve(mom.G[e]);

  Mat M = Mat::Zero(K, K);
  Vec rhs = Vec::Zero(K);
  Mat gram = Mat::Zero(K, K);
  for (int j = 0; j < neq; ++j) {
    gram.noalias() += mom.G[j].transpose() * P[j];
    for (int k = 0; k < neq; ++k) {
      M.noalias() += sig_inv(j, k) * (mom.G[j].transpose() * P[k]);
      rhs.noalias() += sig_inv(j, k) * (P[j].transpose() * mom.v[k]);
    }
  }

  ThreeSlsSolution out;
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    out.min_singular_value = std::sqrt(std::max(es.eigenvalues().minCoeff(), 0.0));
  }

  Eigen::SelfAdjointEigenSolver<Mat> esM(M);
  double lmax = esM.eigenvalues().maxCoeff();
  double lmin = esM.eigenvalues().minCoeff();
  if (lmin <= 1e-13 * std::max(lmax, 1e-300)) {
    if (ridge > 0) {
      M += ridge * Mat::Identity(K, K);
    } else {
      throw SingularMoments("three_sls_step: projected design rank-deficient (" +
                            std::to_string(lmin) + " vs " + std::to_string(lmax) + ")");
    }
  }
  Eigen::LDLT<Mat> mld(M);
  out.coef = mld.solve(rhs);
  out.vcov = mld.solve(Mat::Identity(K, K));
  out.vcov = (0.5 * (out.vcov + out.vcov.transpose())).eval();
  return out;
}

// ---------------------------------------------------------------------------
// Standard errors

ParamsSE standard_errors(const DesignMap& map, const Mat& vcov) {
  Mat T;
  Vec t0;
  map.full_affine(T, t0);
  Vec var = ((T * vcov).cwiseProduct(T)).rowwise().sum();  // diag(T V T')
  Vec se = var.cwiseMax(0.0).cwiseSqrt();

  ParamsSE out;
  int J = map.J, L = map.L, R = map.R;
  int k = 0;
  out.b.resize(R + 1, J);
  for (int r = 0; r <= R; ++r)
    for (int j = 0; j < J; ++j) out.b(r, j) = se(k++);
  out.C.resize(L, J);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < J; ++j) out.C(l, j) = se(k++);
  out.D.resize(L, J);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < J; ++j) out.D(l, j) = se(k++);
  int nA = map.interactions ? L + 1 : 1;
  out.A.assign(nA, Mat(J, J));
  for (int a = 0; a < nA; ++a)
    for (int i = 0; i < J; ++i)
      for (int j = 0; j < J; ++j) out.A[a](i, j) = se(k++);
  out.B.resize(J, J);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) out.B(i, j) = se(k++);
  return out;
}

// ---------------------------------------------------------------------------
// Outer loop

FitResult fit(const std::vector<Household>& input, const FitConfig& config, bool parallel) {
  if (input.empty()) throw DataError("fit: no data");
  const int J = static_cast<int>(input.front().w.size());
  const int L = static_cast<int>(input.front().z.size());
  DesignMap map(J, L, config.R, config.interactions, config.drop_good);

  EstimationData data = prepare_data(input, map, config);
  const std::size_t n = data.households.size();

  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Household& h = data.households[i];
    y(i) = h.x - h.p.dot(h.w);
  }

  FitResult res;
  res.n_used = n;
  res.n_excluded = data.excluded_ids.size();
  res.labels = map.labels({});

  Mat sigma = Mat::Identity(map.n_eq(), map.n_eq());
  ThreeSlsSolution sol;
  EasiParams params;
  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    Moments mom = accumulate_moments(data, map, y, parallel);
    sol = three_sls_step(mom, sigma, config.ridge);
    params = map.reconstruct(sol.coef);

    sigma = residual_covariance(data, map, y, sol.coef, parallel);

    double dy_max = 0.0;
    Vec y_next(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Household& h = data.households[i];
      y_next(i) = implicit_utility(h.x, h.p, h.w, h.z, params);
      dy_max = std::max(dy_max, std::abs(y_next(i) - y(i)));
    }
    y = y_next;
    res.y_path_norms.push_back(dy_max);
    res.outer_iterations = outer + 1;
    if (dy_max < config.y_tolerance) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) {
    std::size_t k = res.y_path_norms.size();
    std::ostringstream os;
    os << "fit: y iteration did not converge; last norms "
       << (k >= 2 ? res.y_path_norms[k - 2] : -1.0) << ", " << res.y_path_norms[k - 1];
    throw NoConvergence(os.str());
  }

  res.params = params;
  res.free = sol.coef;
  res.vcov = sol.vcov;
  res.free_se = sol.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.se = standard_errors(map, sol.vcov);
  res.sigma = sigma;
  res.min_singular_value = sol.min_singular_value;
  res.params.validate();
  return res;
}

std::string FitResult::diagnostics_json() const {
  json j;
  j["outer_iterations"] = outer_iterations;
  j["converged"] = converged;
  j["y_path_norms"] = y_path_norms;
  j["min_singular_value"] = min_singular_value;
  j["n_used"] = n_used;
  j["n_excluded"] = n_excluded;
  json sig = json::array();
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < sigma.cols(); ++k) row.push_back(sigma(i, k));
    sig.push_back(row);
  }
  j["sigma"] = sig;
  json se = json::array();
  for (Eigen::Index i = 0; i < free_se.size(); ++i) se.push_back(free_se(i));
  j["free_se"] = se;
  j["labels"] = labels;
  return j.dump(2);
}

}  // namespace easi::est
