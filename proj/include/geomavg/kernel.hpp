#pragma once

#include "geomavg/config.hpp"
#include "geomavg/model.hpp"

namespace geomavg::kernel {

/// Christoffel symbols at x: gamma[k](i,j) = Gamma^k_ij.
std::vector<Mat> christoffels(const AlmostKaehlerModel& M, const Vec& x,
                              const SolverConfig& cfg = {});

/// Coordinate derivatives of the metric (analytic when available, else
/// central differences with step cfg.metric_h * M.fd_scale).
std::vector<Mat> metric_derivatives(const AlmostKaehlerModel& M, const Vec& x,
                                    const SolverConfig& cfg = {});

/// Almost-complex structure I at x solving omega(., I .) = g(., .).
/// Throws NotCompatible when I^2 + Id exceeds tolerance.
Mat acs_at(const AlmostKaehlerModel& M, const Vec& x, double tol = 1e-6);

/// Compatible metric built from a (possibly incompatible) SPD matrix and a
/// nondegenerate antisymmetric pairing by the polar construction
///   G = S^{1/2} (S^{-1/2} (-W S^{-1} W) S^{-1/2})^{1/2} S^{1/2},  S = g_tilde.
/// The result G is SPD, W^{-1} G squares to -Id, and the construction
/// commutes with linear maps preserving both inputs.
Mat canonical_compatible_metric(const Mat& g_tilde, const Mat& W);

/// Geodesic from p with initial velocity v, integrated with n RK4 steps
/// (n <= 0 picks steps from |v|_g). Throws LeftDomain if the path exits the
/// chart box.
GeodesicPath exp_map(const AlmostKaehlerModel& M, const Vec& p, const Vec& v,
                     int n_steps = -1, const SolverConfig& cfg = {});

/// Endpoint-only variant of exp_map.
Vec exp_point(const AlmostKaehlerModel& M, const Vec& p, const Vec& v,
              int n_steps = -1, const SolverConfig& cfg = {});

/// Initial velocity v with exp_p(v) = q, by damped shooting iteration.
/// Throws NoConvergence past the iteration cap or the injectivity guard.
Vec log_map(const AlmostKaehlerModel& M, const Vec& p, const Vec& q,
            const SolverConfig& cfg = {}, const Vec* warm_start = nullptr);

/// Geodesic distance d(p, q) = |log_p q|_g.
double distance(const AlmostKaehlerModel& M, const Vec& p, const Vec& q,
                const SolverConfig& cfg = {});

/// Parallel transport of `v` along the geodesic from p with velocity w
/// (joint RK4 integration of the geodesic and transport equations).
Vec transport_along_geodesic(const AlmostKaehlerModel& M, const Vec& p, const Vec& w,
                             const Vec& v, int n_steps = -1, const SolverConfig& cfg = {});

/// Transport of several vectors (columns) along the same geodesic.
Mat transport_basis_along_geodesic(const AlmostKaehlerModel& M, const Vec& p, const Vec& w,
                                   const Mat& basis, int n_steps = -1,
                                   const SolverConfig& cfg = {});

/// Parallel transport along a sampled curve (piecewise-linear velocity).
Mat transport_along_curve(const AlmostKaehlerModel& M, const std::vector<Vec>& points,
                          const Mat& basis, const SolverConfig& cfg = {});

/// Parallel transport of v along a stored geodesic (start point + initial
/// velocity determine the curve; re-integrated jointly).
inline Vec parallel_transport(const AlmostKaehlerModel& M, const GeodesicPath& path,
                              const Vec& v, const SolverConfig& cfg = {}) {
  return transport_along_geodesic(M, path.start(), path.velocities.front(), v,
                                  static_cast<int>(path.times.size()) - 1, cfg);
}

/// Jacobi field along the geodesic t -> exp_p(t w), with covariant initial
/// data J(0) = J0, (D_t J)(0) = J0dot; returns J(t_eval) and (D_t J)(t_eval).
struct JacobiResult {
  Vec value;
  Vec derivative;
  Vec base;      // gamma(t_eval)
  Vec velocity;  // gamma'(t_eval)
};
JacobiResult jacobi_field(const AlmostKaehlerModel& M, const Vec& p, const Vec& w,
                          const Vec& J0, const Vec& J0dot, double t_eval,
                          const SolverConfig& cfg = {});

inline JacobiResult jacobi_field(const AlmostKaehlerModel& M, const GeodesicPath& path,
                                 const Vec& J0, const Vec& J0dot, double t_eval,
                                 const SolverConfig& cfg = {}) {
  return jacobi_field(M, path.start(), path.velocities.front(), J0, J0dot, t_eval, cfg);
}

/// Riemann curvature operator R(u, v) w at x,
/// R(u,v)w = nabla_u nabla_v w - nabla_v nabla_u w - nabla_[u,v] w.
Vec curvature_operator(const AlmostKaehlerModel& M, const Vec& x, const Vec& u,
                       const Vec& v, const Vec& w, const SolverConfig& cfg = {});

/// Sectional curvature of span{u, v} at x.
double sectional_curvature(const AlmostKaehlerModel& M, const Vec& x, const Vec& u,
                           const Vec& v, const SolverConfig& cfg = {});

/// Distance between two equal-dimensional subspaces at the same point:
/// the largest principal angle of their g-orthonormal bases, in [0, pi/2].
double subspace_distance(const AlmostKaehlerModel& M, const SubspaceBasis& F,
                         const SubspaceBasis& Fp);

/// g-orthonormalization (modified Gram-Schmidt, two passes) of the columns.
Mat g_orthonormalize(const Mat& G, const Mat& cols);

/// g-orthonormal completion of a g-orthonormal frame to a full basis;
/// returns the m x (m-k) complement.
Mat g_orthonormal_complement(const Mat& G, const Mat& frame);

/// Covariant derivative tensor (nabla_k omega)_ij at x, index order [k](i,j).
std::vector<Mat> nabla_omega(const AlmostKaehlerModel& M, const Vec& x,
                             const SolverConfig& cfg = {});

/// Sup over sample points of the g-operator norm of nabla omega; the norm at
/// a point is estimated over a fixed deterministic direction set.
double nabla_omega_sup(const AlmostKaehlerModel& M, const std::vector<Vec>& samples,
                       const SolverConfig& cfg = {});

/// |X|_g at x.
double norm_g(const AlmostKaehlerModel& M, const Vec& x, const Vec& X);

}  // namespace geomavg::kernel
