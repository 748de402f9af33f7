#include "easi/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace easi {

using nlohmann::json;

EasiParams EasiParams::zeros(int J, int L, int R, bool interactions) {
  EasiParams p;
  p.J = J;
  p.L = L;
  p.R = R;
  p.b = Mat::Zero(R + 1, J);
  p.b.row(0).setConstant(1.0 / J);
  p.C = Mat::Zero(L, J);
  p.D = Mat::Zero(L, J);
  p.A.assign(interactions ? L + 1 : 1, Mat::Zero(J, J));
  p.B = Mat::Zero(J, J);
  p.z_center = Vec::Zero(L);
  return p;
}

double EasiParams::constraint_violation() const {
  double v = 0.0;
  auto upd = [&v](double x) { v = std::max(v, std::abs(x)); };

  upd(b.row(0).sum() - 1.0);
  for (int r = 1; r <= R; ++r) upd(b.row(r).sum());
  for (int l = 0; l < L; ++l) {
    upd(C.row(l).sum());
    upd(D.row(l).sum());
  }
  for (const Mat& Al : A) {
    for (int j = 0; j < J; ++j) {
      upd(Al.row(j).sum());
      upd(Al.col(j).sum());
    }
    upd((Al - Al.transpose()).cwiseAbs().maxCoeff());
  }
  for (int j = 0; j < J; ++j) {
    upd(B.row(j).sum());
    upd(B.col(j).sum());
  }
  upd((B - B.transpose()).cwiseAbs().maxCoeff());
  return v;
}

void EasiParams::validate() const {
  if (J < 2) throw DataError("EasiParams: J must be >= 2");
  if (R < 1 || R > 5) throw DataError("EasiParams: R must be in 1..5");
  if (b.rows() != R + 1 || b.cols() != J) throw DataError("EasiParams: b must be (R+1) x J");
  if (C.rows() != L || C.cols() != J) throw DataError("EasiParams: C must be L x J");
  if (D.rows() != L || D.cols() != J) throw DataError("EasiParams: D must be L x J");
  if (A.empty()) throw DataError("EasiParams: A_0 is mandatory");
  if (A.size() != 1 && static_cast<int>(A.size()) != L + 1)
    throw DataError("EasiParams: A must hold 1 or L+1 matrices");
  for (const Mat& Al : A)
    if (Al.rows() != J || Al.cols() != J) throw DataError("EasiParams: A_l must be J x J");
  if (B.rows() != J || B.cols() != J) throw DataError("EasiParams: B must be J x J");
  if (z_center.size() != L) throw DataError("EasiParams: z_center must have length L");

  double v = constraint_violation();
  if (v > 1e-12) {
    std::ostringstream os;
    os << "EasiParams: constraint violation " << v << " exceeds 1e-12";
    throw DataError(os.str());
  }
}

Mat sym_from_free(const Vec& v, int J) {
  if (v.size() != n_free_sym(J)) throw DataError("sym_from_free: wrong free-vector length");
  Mat M = Mat::Zero(J, J);
  int idx = 0;
  for (int i = 0; i < J - 1; ++i) {
    for (int j = 0; j <= i; ++j) {
      M(i, j) = v(idx);
      M(j, i) = v(idx);
      ++idx;
    }
  }
  for (int i = 0; i < J - 1; ++i) {
    double s = M.row(i).head(J - 1).sum();
    M(i, J - 1) = -s;
    M(J - 1, i) = -s;
  }
  M(J - 1, J - 1) = -M.row(J - 1).head(J - 1).sum();
  return M;
}

Vec free_from_sym(const Mat& M) {
  int J = static_cast<int>(M.rows());
  Vec v(n_free_sym(J));
  int idx = 0;
  for (int i = 0; i < J - 1; ++i)
    for (int j = 0; j <= i; ++j) v(idx++) = M(i, j);
  return v;
}

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw SchemaError("params json: expected matrix");
  Mat m(j.size(), j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw SchemaError("params json: ragged matrix");
    for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

std::string EasiParams::to_json() const {
  json j;
  j["J"] = J;
  j["L"] = L;
  j["R"] = R;
  j["b"] = mat_to_json(b);
  j["C"] = mat_to_json(C);
  j["D"] = mat_to_json(D);
  json as = json::array();
  for (const Mat& Al : A) as.push_back(mat_to_json(Al));
  j["A"] = as;
  j["B"] = mat_to_json(B);
  json zc = json::array();
  for (int l = 0; l < L; ++l) zc.push_back(z_center(l));
  j["z_center"] = zc;
  j["x_center"] = x_center;
  if (!good_names.empty()) j["good_names"] = good_names;
  if (!z_names.empty()) j["z_names"] = z_names;
  return j.dump(2);
}

EasiParams EasiParams::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("params json: ") + e.what());
  }
  EasiParams p;
  try {
    p.J = j.at("J").get<int>();
    p.L = j.at("L").get<int>();
    p.R = j.at("R").get<int>();
    p.b = mat_from_json(j.at("b"));
    p.C = p.L > 0 ? mat_from_json(j.at("C")) : Mat::Zero(0, p.J);
    p.D = p.L > 0 ? mat_from_json(j.at("D")) : Mat::Zero(0, p.J);
    for (const auto& a : j.at("A")) p.A.push_back(mat_from_json(a));
    p.B = mat_from_json(j.at("B"));
    p.z_center = Vec::Zero(p.L);
    if (j.contains("z_center"))
      for (int l = 0; l < p.L; ++l) p.z_center(l) = j["z_center"][l].get<double>();
    p.x_center = j.value("x_center", 0.0);
    if (j.contains("good_names")) p.good_names = j["good_names"].get<std::vector<std::string>>();
    if (j.contains("z_names")) p.z_names = j["z_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("params json: ") + e.what());
  }
  // Input matrices may carry print-level asymmetry; snap to exact symmetry
  // before validating.
  for (Mat& Al : p.A) {
    if ((Al - Al.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DataError("params json: A_l not symmetric");
    Al = ((Al + Al.transpose()) / 2.0).eval();
  }
  if ((p.B - p.B.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw DataError("params json: B not symmetric");
  p.B = ((p.B + p.B.transpose()) / 2.0).eval();
  p.validate();
  return p;
}

void EasiParams::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << to_json() << "\n";
}

EasiParams EasiParams::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

}  // namespace easi
