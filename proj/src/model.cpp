#include "easi/model.hpp"

#include <cmath>
#include <sstream>

namespace easi {

void Household::check(const EasiParams& params) const {
  if (w.size() != params.J || p.size() != params.J || z.size() != params.L)
    throw DataError("Household: dimension mismatch with params");
  double sw = w.sum();
  if (std::abs(sw - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "Household " << id << ": shares sum to " << sw;
    throw DataError(os.str());
  }
  if (eps.size() > 0) {
    if (eps.size() != params.J) throw DataError("Household: eps length mismatch");
    if (std::abs(eps.sum()) > 1e-12) throw DataError("Household: eps does not sum to 0");
  }
  if (weight < 0) throw DataError("Household: negative weight");
}

EvalPoint EvalPoint::at_x(Vec p, Vec z, double x, Vec eps) {
  EvalPoint pt;
  pt.p = std::move(p);
  pt.z = std::move(z);
  pt.eps = std::move(eps);
  pt.x = x;
  return pt;
}

EvalPoint EvalPoint::at_y(Vec p, Vec z, double y, Vec eps) {
  EvalPoint pt;
  pt.p = std::move(p);
  pt.z = std::move(z);
  pt.eps = std::move(eps);
  pt.y = y;
  return pt;
}

double price_quadratic(const Vec& p, const Vec& z, const EasiParams& params) {
  double q = p.dot(params.A[0] * p);
  if (params.has_interactions())
    for (int l = 0; l < params.L; ++l) q += z(l) * p.dot(params.A[l + 1] * p);
  return q;
}

namespace {

double denominator(const Vec& p, const EasiParams& params) {
  double d = 1.0 - p.dot(params.B * p) / 2.0;
  if (std::abs(d) < 1e-12) throw DegenerateDenominator("1 - p'Bp/2 is numerically zero");
  return d;
}

}  // namespace

double implicit_utility(double x, const Vec& p, const Vec& w, const Vec& z,
                        const EasiParams& params) {
  if (p.size() != params.J || w.size() != params.J || z.size() != params.L)
    throw DataError("implicit_utility: dimension mismatch");
  double num = x - p.dot(w) + price_quadratic(p, z, params) / 2.0;
  return num / denominator(p, params);
}

Vec hicksian_shares(double y, const Vec& p, const Vec& z, const Vec& eps,
                    const EasiParams& params) {
  if (p.size() != params.J || z.size() != params.L)
    throw DataError("hicksian_shares: dimension mismatch");
  Vec w = params.b.row(0).transpose();
  double yr = 1.0;
  for (int r = 1; r <= params.R; ++r) {
    yr *= y;
    w += yr * params.b.row(r).transpose();
  }
  if (params.L > 0) {
    w += params.C.transpose() * z;
    w += (params.D.transpose() * z) * y;
  }
  w += params.A[0] * p;
  if (params.has_interactions())
    for (int l = 0; l < params.L; ++l) w += z(l) * (params.A[l + 1] * p);
  w += (params.B * p) * y;
  if (eps.size() > 0) w += eps;
  return w;
}

MarshallianSolution solve_marshallian_shares(double x, const Vec& p, const Vec& z,
                                             const Vec& eps, const EasiParams& params,
                                             const SolveOptions& opt, const Vec* w_start) {
  double d = denominator(p, params);
  double quad = price_quadratic(p, z, params) / 2.0;

  double y = w_start ? (x - p.dot(*w_start))
                     : (x - p.dot(params.b.row(0).transpose()));
  MarshallianSolution sol;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vec w = hicksian_shares(y, p, z, eps, params);
    double y_raw = (x - p.dot(w) + quad) / d;
    double y_next = y + opt.damping * (y_raw - y);
    double dy = std::abs(y_next - y);
    y = y_next;
    if (dy < opt.tolerance) {
      sol.w = hicksian_shares(y, p, z, eps, params);
      sol.y = y;
      sol.iterations = it + 1;
      return sol;
    }
  }
  std::ostringstream os;
  os << "solve_marshallian_shares: no convergence after " << opt.max_iterations
     << " iterations (x=" << x << ")";
  throw NoConvergence(os.str());
}

double log_cost(double u, const Vec& p, const Vec& z, const Vec& eps,
                const EasiParams& params) {
  Vec w = hicksian_shares(u, p, z, eps, params);
  return u * (1.0 - p.dot(params.B * p) / 2.0) + p.dot(w) -
         price_quadratic(p, z, params) / 2.0;
}

MarshallianSolution resolve_point(const EvalPoint& pt, const EasiParams& params) {
  Vec eps = pt.eps.size() > 0 ? pt.eps : Vec::Zero(params.J);
  if (pt.x.has_value() == pt.y.has_value())
    throw DataError("EvalPoint: exactly one of {x, y} must be set");
  if (pt.y) {
    MarshallianSolution s;
    s.y = *pt.y;
    s.w = hicksian_shares(s.y, pt.p, pt.z, eps, params);
    return s;
  }
  return solve_marshallian_shares(*pt.x, pt.p, pt.z, eps, params);
}

}  // namespace easi
