#pragma once

#include <optional>
#include <string>

#include "easi/params.hpp"
#include "easi/types.hpp"

namespace easi {

// One observation: shares, log prices (base prices have log 0), centered
// demographics, centered log expenditure, survey weight. eps is known only
// for synthetic data.
struct Household {
  std::string id;
  std::string stratum;
  Vec w;  // length J, nonnegative, sums to 1
  Vec p;  // length J, log prices
  Vec z;  // length L
  double x = 0.0;
  Vec eps;  // length J, sums to 0; empty when unobserved
  double weight = 1.0;

  void check(const EasiParams& params) const;
};

// Point at which derivatives / elasticities are evaluated. Exactly one of
// {x, y} is the independent input.
struct EvalPoint {
  Vec p;
  Vec z;
  Vec eps;
  std::optional<double> x;
  std::optional<double> y;

  static EvalPoint at_x(Vec p, Vec z, double x, Vec eps = Vec());
  static EvalPoint at_y(Vec p, Vec z, double y, Vec eps = Vec());
};

struct MarshallianSolution {
  Vec w;
  double y = 0.0;
  int iterations = 0;
};

// y = (x - p'w + sum_l z_l p'A_l p / 2) / (1 - p'Bp / 2).
// Throws DegenerateDenominator when |1 - p'Bp/2| < 1e-12.
double implicit_utility(double x, const Vec& p, const Vec& w, const Vec& z,
                        const EasiParams& params);

// w = sum_r b_r y^r + C'z + D'z y + sum_l z_l A_l p + B p y + eps.
Vec hicksian_shares(double y, const Vec& p, const Vec& z, const Vec& eps,
                    const EasiParams& params);

struct SolveOptions {
  double damping = 0.5;
  double tolerance = 1e-12;
  int max_iterations = 200;
};

// Damped scalar fixed point on y; shares are affine in powers of y so only
// y iterates. Returned (w, y) satisfy both equations to < 1e-10.
MarshallianSolution solve_marshallian_shares(double x, const Vec& p, const Vec& z,
                                             const Vec& eps, const EasiParams& params,
                                             const SolveOptions& opt = {},
                                             const Vec* w_start = nullptr);

// x = u(1 - p'Bp/2) + p' hicksian_shares(u,...) - sum_l z_l p'A_l p / 2.
// Inverse of implicit_utility at fixed (p, z, eps).
double log_cost(double u, const Vec& p, const Vec& z, const Vec& eps,
                const EasiParams& params);

// Resolves an EvalPoint to (w, y): solves the fixed point when x is given,
// evaluates Hicksian shares when y is given.
MarshallianSolution resolve_point(const EvalPoint& pt, const EasiParams& params);

// p' A_l p aggregate: sum_l z_l p'A_l p with z_0 = 1.
double price_quadratic(const Vec& p, const Vec& z, const EasiParams& params);

}  // namespace easi
