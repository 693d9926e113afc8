#pragma once

#include <functional>
#include <vector>

#include "geomavg/averaging.hpp"
#include "geomavg/constants.hpp"
#include "geomavg/submanifold.hpp"

namespace geomavg::moser {

using avg::WeightedFamily;
using sub::ParamSubmanifold;

/// Orthogonal splittings of the tangent space at a tube point q of N_g:
/// Vert  = parallel translate of the normal space along the foot geodesic,
/// aVert = tangent space of the normal slice through the foot,
/// Hor / aHor = g-orthocomplements.
struct BundleSplitting {
  sub::FootPointResult foot;
  SubspaceBasis Vert, Hor, aVert, aHor;
};

BundleSplitting bundle_splitting(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                                 const Vec& q, const SolverConfig& cfg = {});

/// Warm-start state for the slice-map solvers (one per member per trajectory;
/// never shared across threads).
struct PhiCache {
  bool valid = false;
  Vec foot_param;   // parameter of the foot on N_g
  Vec lift_param;   // parameter of the section point on N
  Vec inverse_pt;   // last preimage found by phi_g_inverse
};

/// Where the section N sits over N_g: the unique point of N on the normal
/// slice of N_g through p0. Returns the chart point and N-parameter.
struct LiftResult {
  Vec point;
  Vec param;
};
LiftResult lift_to_section(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                           const ParamSubmanifold& N, const Vec& p0,
                           const SolverConfig& cfg = {}, PhiCache* cache = nullptr);

/// Normal-slice map exp_{p0}(v) -> exp_{q0}(parallel transport of v), where
/// p0 is the foot of p on N_g and q0 the section lift of p0.
Vec phi_g(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng, const ParamSubmanifold& N,
          const Vec& p, const SolverConfig& cfg = {}, PhiCache* cache = nullptr);

/// Inverse slice map (chord iteration with damped-Newton fallback).
Vec phi_g_inverse(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                  const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg = {},
                  PhiCache* cache = nullptr);

/// Differential of phi_g at p applied to X, by central differences along
/// exp_p(+-h X) with the contractual step cfg.pushforward_h.
Vec pushforward_phi(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                    const ParamSubmanifold& N, const Vec& p, const Vec& X,
                    const SolverConfig& cfg = {}, PhiCache* cache = nullptr);

/// Matrix of the pulled-back form (phi_g^{-1})^* omega at q (antisymmetric).
Mat omega_g_matrix(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                   const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg = {},
                   PhiCache* cache = nullptr);

double omega_g_at(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                  const ParamSubmanifold& N, const Vec& q, const Vec& X, const Vec& Y,
                  const SolverConfig& cfg = {}, PhiCache* cache = nullptr);

Mat omega_avg_matrix(const AlmostKaehlerModel& M, const WeightedFamily& family,
                     const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg = {});

/// omega + t (omega_avg - omega) at q.
Mat omega_t_matrix(const AlmostKaehlerModel& M, const WeightedFamily& family,
                   const ParamSubmanifold& N, const Vec& q, double t,
                   const SolverConfig& cfg = {});

/// Radial homotopy operator over the normal-exponential tube of `base`:
/// (Qf)_p(X) = int_0^1 f_{rho_t(p)}(w_t, D rho_t X) dt with rho_t the
/// fiberwise geodesic scaling onto the base and w_t its t-velocity.
/// f(x) is the matrix of a 2-form at x.
double homotopy_Q(const AlmostKaehlerModel& M, const ParamSubmanifold& base,
                  const std::function<Mat(const Vec&)>& f, const Vec& p, const Vec& X,
                  const SolverConfig& cfg = {});

/// The covector X -> (Qf)_p(X) assembled in one pass.
Vec homotopy_Q_covector(const AlmostKaehlerModel& M, const ParamSubmanifold& base,
                        const std::function<Mat(const Vec&)>& f, const Vec& p,
                        const SolverConfig& cfg = {});

/// Primitive data of the deformation stage: per-member boundary forms
/// beta_g stored on N's parameter grid, the measured epsilon, and the
/// constants table at that epsilon.
struct PrimitiveData {
  WeightedFamily family;       // canonical order
  ParamSubmanifold N;
  double epsilon = 0.0;
  constants::ConstantsTable table;
  double tube_L = 0.0;                      // fiber radius used for certificates
  std::vector<std::vector<Vec>> beta;       // [member][N grid node] param covector
  std::vector<std::vector<Vec>> beta_fine;  // 10x-node diagnostic build (optional)
};

PrimitiveData build_primitive(const AlmostKaehlerModel& M, const WeightedFamily& family,
                              const ParamSubmanifold& N, const SolverConfig& cfg = {});

/// beta_g as a parameter-space covector at parameter u of N (multilinear
/// interpolation of the stored grid values).
Vec beta_g_at(const PrimitiveData& P, int member, const Vec& u);

/// alpha^g covector at q (quadrature over the slice contraction minus the
/// pulled-back boundary form); alpha = weighted sum over members.
Vec alpha_g_at(const AlmostKaehlerModel& M, const PrimitiveData& P, int member, const Vec& q,
               const SolverConfig& cfg = {}, PhiCache* cache = nullptr);

Vec alpha_at(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& q,
             const SolverConfig& cfg = {}, std::vector<PhiCache>* caches = nullptr);

/// Deformation vector field: solves omega_t(v, .) = -alpha at q.
/// Throws Degenerate when the sampled nondegeneracy certificate fails.
Vec moser_velocity(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& q, double t,
                   const SolverConfig& cfg = {}, std::vector<PhiCache>* caches = nullptr);

struct FlowReport {
  double max_displacement = 0.0;
  double isotropy_defect_L = 0.0;
  std::vector<double> d0_members_to_L;
  double nondegeneracy_min = 1e9;    // min sampled omega_t(X, IX) over unit X
  double tube_margin = 1e9;          // min (R - d(x, N)) along trajectories
  double speed_sup = 0.0;            // max |v_t|_g observed
  int flow_steps = 0;
};

/// Time-one flow of -v_{1-t} applied to every grid node of N; the image
/// submanifold L is returned over N's parameter grid.
/// Preconditions: containment certificate (842 eps < R(eps, L_eps)) unless
/// cfg.override_containment; nondegeneracy sampled along the way.
std::pair<ParamSubmanifold, FlowReport> moser_flow(const AlmostKaehlerModel& M,
                                                   const PrimitiveData& P,
                                                   const SolverConfig& cfg = {});

}  // namespace geomavg::moser
