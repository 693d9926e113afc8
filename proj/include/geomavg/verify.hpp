#pragma once

#include <map>
#include <string>
#include <vector>

#include "geomavg/moser.hpp"

namespace geomavg::verify {

using avg::WeightedFamily;
using sub::ParamSubmanifold;

/// Outcome of one randomized estimate suite. A trial can pass, be rejected
/// (hypotheses not met — not counted against the estimate), fail, or be
/// inconclusive (violation smaller than 3x the estimated FD noise floor).
struct VerifyReport {
  std::string name;
  int trials = 0;
  int rejected = 0;
  int inconclusive = 0;
  std::vector<std::string> failures;
  double worst_margin = 1e18;  // min over trials of (bound - measured)
  std::map<std::string, double> values;

  bool ok() const { return failures.empty(); }
};

/// Shape operator of the distance-t tube in the radial direction, assembled
/// from normal Jacobi fields; checks the blockwise deviation of t S(t) from
/// [[I, 0], [0, t B]] against the error envelope
/// [[16 t^2, 16 t^2], [16 t^2, (22 + 2|B|^2) t^2]].
VerifyReport verify_tube_shape_operator(const AlmostKaehlerModel& M,
                                        const ParamSubmanifold& s, double t, int trials,
                                        const SolverConfig& cfg = {});

/// Mixed horizontal-vertical entries of the Hessian of the half-squared
/// distance at radius t <= 1/3: |<H v, w>| <= 16 t^2 |v||w|.
VerifyReport verify_hessian_cross(const AlmostKaehlerModel& M, const ParamSubmanifold& s,
                                  double t, int trials, const SolverConfig& cfg = {});

/// Geodesic-triangle lower bound: instances (A, B, C, P_A, P_C) with
/// d(C,A) < 0.15, d(C,B) < 0.5, near-orthogonal P_A and transported-close
/// P_C must satisfy d(C,B) >= (10/11) / ((Ccal + 6) sqrt(1 + tan^2 delta)).
/// Also spot-checks the lifted-chord angle (< 4 d(C,A)) and the
/// chord/geodesic length ratio (<= 11/10).
VerifyReport verify_triangle_bound(const AlmostKaehlerModel& M, int trials,
                                   const SolverConfig& cfg = {});

/// Pushforward deviation |phi_g* X - transported X| classified by vector
/// type: tangent (3200 eps), almost-vertical (2 (sinh L - L)/sin L),
/// strong-Jacobi ((18/5) L + 3700 eps, needs L < 0.08), general
/// (4 L + 4100 eps).
VerifyReport verify_pushforward_bounds(const AlmostKaehlerModel& M,
                                       const WeightedFamily& family,
                                       const ParamSubmanifold& N, int samples,
                                       const SolverConfig& cfg = {});

/// Growth estimates for curves gamma on the average against their
/// normal-bundle sections over a member: length ratio, angle propagation,
/// section derivative bounds, and the almost-horizontal vs connection
/// distance arcsin(9L/5).
VerifyReport verify_curve_growth(const AlmostKaehlerModel& M, const WeightedFamily& family,
                                 const ParamSubmanifold& N, int n_pairs,
                                 const SolverConfig& cfg = {});

/// Form closeness / nondegeneracy / inverse norm / speed on tube samples:
///   |omega_g(X,Y) - omega(X,Y)|  <= Dr (Dr + 2) + 2L + 100 eps,  Dr = D/(1-D)
///   omega_t(X, I X)              >= 1 - that bound (unit X)
///   |omega_t^{-1}|_op            <= 1.53
///   |v_t(q)|_g                   <= 1.45 d(q, N) + 374 eps
VerifyReport verify_form_and_speed(const AlmostKaehlerModel& M, const moser::PrimitiveData& P,
                                   int samples, const SolverConfig& cfg = {});

/// Linear circle-type Hamiltonian action data: infinitesimal generator(s) in
/// the chart and the moment map value.
struct MomentMapSpec {
  std::vector<Mat> lie_basis;              // generators (unit-normalized)
  std::function<double(const Vec&)> J;     // moment map paired with the basis
  std::string label;
};

/// Diagonal circle action on flat R^4 with J = |x|^2 / 2.
MomentMapSpec diag_circle_moment_map();

/// Spread of J over the grid of L against the invariant-average value mu
/// (mean of J over N); C = sup over tube samples and unit generators of the
/// induced vector field's g-norm. Asserts spread <= 1000 eps C when eps is
/// in range.
VerifyReport moment_map_spread(const AlmostKaehlerModel& M, const MomentMapSpec& spec,
                               const ParamSubmanifold& L, const ParamSubmanifold& N,
                               double eps, const SolverConfig& cfg = {});

}  // namespace geomavg::verify
