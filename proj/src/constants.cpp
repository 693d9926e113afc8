#include "geomavg/constants.hpp"

#include <cmath>

#include "geomavg/errors.hpp"

namespace geomavg::constants {

double f_of_r(double r) { return std::cos(r) - 1.5 * std::sin(r); }

double delta(double eps, double Lgamma) {
  if (eps < 0.0) fail(Err::DomainError, "delta: negative epsilon");
  if (Lgamma > 0.1 + 1e-15) fail(Err::DomainError, "delta: curve length above 0.1");
  const double r = 100.0 * eps + 0.5 * Lgamma;
  const double fr = f_of_r(r);
  if (fr <= 0.0) fail(Err::DomainError, "delta: f(r) not positive");
  const double arg = (100.0 / 99.0) * (3150.0 * eps / fr + 500.0 * eps + 3.0 * r +
                                       (8.0 / 3.0) * Lgamma * (r + (r + 1.5) / fr));
  if (arg < -1.0 || arg > 1.0) fail(Err::DomainError, "delta: arcsin argument out of range");
  return 0.25 * eps + std::asin(arg);
}

double L_eps(double eps) { return 0.25 * (0.1 - 4100.0 * eps); }

double D_of(double eps, double L) { return 4.0 * L + 4100.0 * eps; }

double R_of(double eps, double L) {
  return std::sin(L) * std::cos(delta(eps, 2.0 * L) + 2.0 * L * L);
}

bool check_containment(double eps) {
  const double L = L_eps(eps);
  if (L <= 0.0) return false;
  try {
    return 842.0 * eps < R_of(eps, L);
  } catch (const GeomError&) {
    return false;
  }
}

double containment_crossing(double hi, double tol) {
  if (!check_containment(0.0)) return 0.0;
  double lo = 0.0;
  if (check_containment(hi)) return hi;  // no crossing inside the bracket
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (check_containment(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ConstantsTable make_table(double eps, double L) {
  ConstantsTable t;
  t.epsilon = eps;
  t.L = L;
  t.r = 100.0 * eps + L;  // r at curve length 2L
  t.f_r = f_of_r(t.r);
  t.delta = delta(eps, 2.0 * L);
  t.L_eps = L_eps(eps);
  t.D = D_of(eps, L);
  t.R = R_of(eps, L);
  t.R_at_L_eps = t.L_eps > 0.0 ? R_of(eps, t.L_eps) : 0.0;
  t.speed_escape = 842.0 * eps;
  return t;
}

ConstantsTable make_table(double eps) {
  const double L = L_eps(eps);
  if (L <= 0.0) fail(Err::DomainError, "constants table: canonical fiber radius not positive");
  return make_table(eps, L);
}

std::map<std::string, double> ConstantsTable::thresholds() const {
  return {
      {"eps_small", 1.0 / 20000.0},
      {"eps_feasible", 1.0 / 70000.0},
      {"tube_scale", 100.0},
      {"lift_distance", 2500.0},
      {"average_distance", 1000.0},
      {"displacement", 842.0},
      {"speed", 374.0},
      {"speed_exponent", 1.45},
      {"inverse_norm", 1.53},
      {"hessian_cross_small", 125.0},
      {"hessian_mixed", 200.0},
      {"shape_a", 3200.0},
      {"shape_b", 3700.0},
      {"shape_c", 4100.0},
      {"lift_angle", 2702.0},
      {"curve_factor", 3150.0},
      {"pushforward", 1950.0},
      {"hessian_cross", 16.0},
  };
}

}  // namespace geomavg::constants
