#pragma once

#include <map>
#include <string>

namespace geomavg::constants {

/// The derived-constant chain used by the deformation stage. All closed-form;
/// delta (and everything built on it) is only defined for curve lengths
/// L < 0.1 (inclusive boundary accepted: the chain evaluates delta at 2L with
/// L up to 0.05).
struct ConstantsTable {
  double epsilon = 0.0;
  double L = 0.0;        // fiber-radius scale the table was built for
  double r = 0.0;        // 100 eps + L(gamma)/2 at L(gamma) = 2L
  double f_r = 0.0;      // cos r - 1.5 sin r
  double delta = 0.0;    // angle bound delta(eps, 2L)
  double L_eps = 0.0;    // (0.1 - 4100 eps) / 4
  double D = 0.0;        // 4L + 4100 eps
  double R = 0.0;        // sin(L) cos(delta(eps, 2L) + 2 L^2)
  double R_at_L_eps = 0.0;
  double speed_escape = 0.0;  // 842 eps (time-one displacement ceiling)

  std::map<std::string, double> thresholds() const;
};

double f_of_r(double r);

/// delta(eps, Lgamma) = eps/4 + arcsin{(100/99)[3150 eps / f(r) + 500 eps
///   + 3r + (8/3) Lgamma (r + (r + 3/2)/f(r))]},  r = 100 eps + Lgamma/2.
/// Throws DomainError for Lgamma > 0.1 or when the arcsin argument leaves
/// [-1, 1] (or f(r) <= 0).
double delta(double eps, double Lgamma);

double L_eps(double eps);                 // (0.1 - 4100 eps) / 4
double D_of(double eps, double L);        // 4 L + 4100 eps
double R_of(double eps, double L);        // sin(L) cos(delta(eps, 2L) + 2 L^2)

/// 842 eps < R(eps, L_eps(eps)); false (no throw) when L_eps <= 0 or the
/// delta chain leaves its domain.
bool check_containment(double eps);

/// Largest eps at which containment still holds, located by bisection on
/// [0, hi]; requires check_containment(0) and returns 0 if containment
/// already fails at the left end.
double containment_crossing(double hi = 1e-4, double tol = 1e-12);

ConstantsTable make_table(double eps, double L);

/// Table at the canonical fiber radius L_eps(eps).
ConstantsTable make_table(double eps);

}  // namespace geomavg::constants
