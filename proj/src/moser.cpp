#include "geomavg/moser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geomavg/parallel.hpp"

namespace geomavg::moser {

namespace {

using kernel::distance;
using kernel::exp_map;
using kernel::exp_point;
using kernel::log_map;
using kernel::transport_along_geodesic;
using kernel::transport_basis_along_geodesic;
using sub::closest_point;
using sub::FootPointResult;

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [0, 1]
// ---------------------------------------------------------------------------

struct QuadRule {
  std::vector<double> t, w;
};

QuadRule build_gauss_legendre_01(int n) {
  if (n < 1) fail(Err::ConfigError, "quadrature needs at least one node");
  QuadRule q;
  q.t.resize(n);
  q.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on the Legendre polynomial from the Chebyshev-like initial guess
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double wi = 2.0 / ((1.0 - x * x) * pp * pp);
    q.t[i] = 0.5 * (1.0 - x);
    q.w[i] = 0.5 * wi;
    q.t[n - 1 - i] = 0.5 * (1.0 + x);
    q.w[n - 1 - i] = 0.5 * wi;
  }
  return q;
}

const QuadRule& gauss_legendre_01(int n) {
  static const QuadRule rule16 = build_gauss_legendre_01(16);
  if (n == 16) return rule16;
  thread_local QuadRule custom;
  thread_local int custom_n = -1;
  if (custom_n != n) {
    custom = build_gauss_legendre_01(n);
    custom_n = n;
  }
  return custom;
}

// ---------------------------------------------------------------------------
// Radial geodesic sampling: positions and velocities of t -> exp_p(t v) at the
// quadrature nodes, from one integration pass plus cubic Hermite interpolation
// on the stored states.
// ---------------------------------------------------------------------------

struct RadialSamples {
  std::vector<Vec> x, dx;
};

RadialSamples sample_radial(const AlmostKaehlerModel& M, const Vec& p, const Vec& v,
                            const QuadRule& qr, const SolverConfig& cfg) {
  const int nq = static_cast<int>(qr.t.size());
  RadialSamples S;
  S.x.resize(nq);
  S.dx.resize(nq);
  if (v.size() == 0 || v.squaredNorm() == 0.0) {
    for (int k = 0; k < nq; ++k) {
      S.x[k] = p;
      S.dx[k] = Vec::Zero(p.size());
    }
    return S;
  }
  const GeodesicPath path = exp_map(M, p, v, -1, cfg);
  const int steps = static_cast<int>(path.times.size()) - 1;
  for (int k = 0; k < nq; ++k) {
    const double s = qr.t[k] * steps;
    const int seg = std::min(static_cast<int>(std::floor(s)), steps - 1);
    const double tau = s - seg;
    const Vec& x0 = path.points[seg];
    const Vec& x1 = path.points[seg + 1];
    const Vec m0 = path.velocities[seg] / steps;  // slopes w.r.t. the segment parameter
    const Vec m1 = path.velocities[seg + 1] / steps;
    const double t2 = tau * tau, t3 = t2 * tau;
    S.x[k] = (2.0 * t3 - 3.0 * t2 + 1.0) * x0 + (t3 - 2.0 * t2 + tau) * m0 +
             (-2.0 * t3 + 3.0 * t2) * x1 + (t3 - t2) * m1;
    S.dx[k] = ((6.0 * t2 - 6.0 * tau) * x0 + (3.0 * t2 - 4.0 * tau + 1.0) * m0 +
               (-6.0 * t2 + 6.0 * tau) * x1 + (3.0 * t2 - 2.0 * tau) * m1) *
              steps;
  }
  return S;
}

// ---------------------------------------------------------------------------
// Parameter-box utilities (periodic axes wrap, the rest clamp)
// ---------------------------------------------------------------------------

Vec wrap_param(const ParamSubmanifold& N, Vec u) {
  for (int a = 0; a < N.dim; ++a) {
    const double lo = N.param_domain.lo[a], hi = N.param_domain.hi[a];
    if (!N.periodic.empty() && N.periodic[a]) {
      const double per = hi - lo;
      u[a] = lo + std::fmod(u[a] - lo, per);
      if (u[a] < lo) u[a] += per;
    } else {
      u[a] = std::min(std::max(u[a], lo), hi);
    }
  }
  return u;
}

Vec param_diff(const ParamSubmanifold& N, const Vec& a, const Vec& b) {
  Vec d = a - b;
  for (int ax = 0; ax < N.dim; ++ax) {
    if (!N.periodic.empty() && N.periodic[ax]) {
      const double per = N.param_domain.hi[ax] - N.param_domain.lo[ax];
      d[ax] -= per * std::round(d[ax] / per);
    }
  }
  return d;
}

// At a non-periodic parameter edge the foot clamps, so the probe on the
// blocked side reproduces the center and a central difference halves the
// derivative. Returns +1 when the +h probe is blocked (pair the center with
// the -h probe), -1 when the -h probe is blocked, 0 for a clean stencil.
int blocked_side(const ParamSubmanifold& S, const Vec& u0, const Vec& ua, const Vec& ub) {
  bool blk_a = false, blk_b = false;
  for (int j = 0; j < S.dim; ++j) {
    if (!S.periodic.empty() && S.periodic[j]) continue;
    const double lo = S.param_domain.lo[j], hi = S.param_domain.hi[j];
    const double tol = 1e-12 * (1.0 + std::abs(hi - lo));
    if (std::abs(u0[j] - lo) > tol && std::abs(u0[j] - hi) > tol) continue;
    const double da = std::abs(ua[j] - u0[j]);
    const double db = std::abs(ub[j] - u0[j]);
    if (da <= tol && db > 10.0 * tol) blk_a = true;
    if (db <= tol && da > 10.0 * tol) blk_b = true;
  }
  if (blk_a && !blk_b) return +1;
  if (blk_b && !blk_a) return -1;
  return 0;
}

// ---------------------------------------------------------------------------
// Section lift: Newton on the parameters of N for the slice condition
// T^t G log_{p0}(N(u)) = 0, i.e. the connecting geodesic leaves p0 normally.
// ---------------------------------------------------------------------------

struct LiftNewton {
  Vec u;
  double resid = std::numeric_limits<double>::infinity();
  bool ok = false;
};

LiftNewton lift_newton(const AlmostKaehlerModel& M, const ParamSubmanifold& N, const Mat& T,
                       const Mat& G0, const Vec& p0, Vec u, const SolverConfig& cfg) {
  const int n = N.dim;
  Vec vwarm;
  bool have_warm = false;
  const auto F = [&](const Vec& uu) -> Vec {
    const Vec l = log_map(M, p0, N.point(uu), cfg, have_warm ? &vwarm : nullptr);
    vwarm = l;
    have_warm = true;
    return T.transpose() * (G0 * l);
  };

  LiftNewton out;
  const double tol = std::max(cfg.lift_tol, 1e-13);
  Vec Fu = F(u);
  double fn = Fu.norm();
  out.u = u;
  out.resid = fn;
  for (int it = 0; it < cfg.lift_max_iter; ++it) {
    if (fn <= tol) break;
    Mat J(n, n);
    const double h = 1e-6;
    for (int a = 0; a < n; ++a) {
      Vec up = u, um = u;
      up[a] += h;
      um[a] -= h;
      J.col(a) = (F(up) - F(um)) / (2.0 * h);
    }
    const Vec du = J.partialPivLu().solve(-Fu);
    if (!du.allFinite()) break;
    double step = 1.0;
    bool accepted = false;
    for (int halve = 0; halve < 10; ++halve) {
      const Vec un = wrap_param(N, u + step * du);
      const Vec Fn = F(un);
      if (Fn.norm() < fn) {
        u = un;
        Fu = Fn;
        fn = Fu.norm();
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (fn < out.resid) {
      out.u = u;
      out.resid = fn;
    }
  }
  out.ok = out.resid <= 1e-9;
  return out;
}

// Slice lift about a base point whose foot parameter is already known. The
// cold path polishes several spread-out seeds and reports MultipleLifts when
// they reach macroscopically distinct slice points.
LiftResult lift_impl(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                     const ParamSubmanifold& N, const Vec& p0, const Vec& foot_param,
                     const SolverConfig& cfg, PhiCache* cache) {
  const Mat T = Ng.tangent_frame(M, foot_param);
  const Mat G0 = M.g(p0);

  // The slice geodesic can re-enter a closed section far outside the bundle
  // (the opposite side of a sphere or torus); only points within the fiber
  // radius of the base qualify as lifts.
  const auto within_fiber = [&](const Vec& u) -> bool {
    try {
      return distance(M, p0, N.point(u), cfg) <= Ng.tube_radius;
    } catch (const GeomError&) {
      return false;
    }
  };

  if (cache && cache->lift_param.size() == N.dim) {
    const LiftNewton r = lift_newton(M, N, T, G0, p0, cache->lift_param, cfg);
    if (r.ok && within_fiber(r.u)) {
      cache->lift_param = r.u;
      return {N.point(r.u), r.u};
    }
  }

  std::vector<Vec> seeds;
  seeds.push_back(closest_point(M, N, p0, cfg).parameter);
  const std::vector<Vec> nodes = N.grid_nodes();
  const size_t stride = std::max<size_t>(1, nodes.size() / static_cast<size_t>(std::max(1, cfg.cp_polish_seeds)));
  for (size_t i = 0; i < nodes.size(); i += stride) seeds.push_back(nodes[i]);

  std::vector<LiftNewton> sols;
  const double distinct_tol = 1e-7 * (1.0 + p0.norm());
  for (const Vec& s : seeds) {
    const LiftNewton r = lift_newton(M, N, T, G0, p0, s, cfg);
    if (!r.ok) continue;
    if (!within_fiber(r.u)) continue;
    bool merged = false;
    for (LiftNewton& kept : sols) {
      if ((N.point(kept.u) - N.point(r.u)).norm() <= distinct_tol) {
        if (r.resid < kept.resid) kept = r;
        merged = true;
        break;
      }
    }
    if (!merged) sols.push_back(r);
  }
  if (sols.empty())
    fail(Err::NoConvergence, "no section point found on the normal slice of '" + Ng.name + "'");
  if (sols.size() > 1)
    fail(Err::MultipleLifts, "normal slice meets '" + N.name + "' at " +
                                 std::to_string(sols.size()) + " points; not a section here");
  if (cache) cache->lift_param = sols.front().u;
  return {N.point(sols.front().u), sols.front().u};
}

// ---------------------------------------------------------------------------
// Forward slice map with its decomposition, and the chord/Gauss-Newton inverse
// ---------------------------------------------------------------------------

struct SliceDecomp {
  Vec p;     // preimage in the base tube
  Vec p0;    // foot on N_g
  Vec f0;    // N_g-parameter of the foot (clamps at non-periodic edges)
  Vec v;     // normal velocity at p0 (p = exp_{p0}(v))
  Vec u0;    // N-parameter of the section lift
  Vec q0;    // lift point on N
  Vec vpar;  // transported velocity at q0 (phi(p) = exp_{q0}(vpar))
};

Vec phi_forward(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                const ParamSubmanifold& N, const Vec& p, const SolverConfig& cfg, PhiCache* cache,
                SliceDecomp* D) {
  const FootPointResult fp =
      closest_point(M, Ng, p, cfg, cache && cache->foot_param.size() > 0 ? &cache->foot_param : nullptr);
  if (cache) cache->foot_param = fp.parameter;
  const LiftResult lift = lift_impl(M, Ng, N, fp.foot, fp.parameter, cfg, cache);
  const Vec w = log_map(M, fp.foot, lift.point, cfg);

  Vec vpar;
  if (fp.distance == 0.0 || fp.normal_vector.squaredNorm() == 0.0)
    vpar = Vec::Zero(M.dim);
  else if (w.squaredNorm() == 0.0)
    vpar = fp.normal_vector;
  else
    vpar = transport_along_geodesic(M, fp.foot, w, fp.normal_vector, -1, cfg);

  const Vec q = vpar.squaredNorm() == 0.0 ? lift.point : exp_point(M, lift.point, vpar, -1, cfg);
  if (D) {
    D->p = p;
    D->p0 = fp.foot;
    D->f0 = fp.parameter;
    D->v = fp.normal_vector;
    D->u0 = lift.param;
    D->q0 = lift.point;
    D->vpar = vpar;
  }
  return q;
}

// The slice map is a small perturbation of the identity on the tubes we
// certify, so the inverse is found by pushing the chart residual straight
// back (chord iteration), with one polish step past the tolerance so the
// result is a smooth function of q; a damped Gauss-Newton pass catches the
// strongly curved cases.
SliceDecomp inverse_decomp(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                           const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg,
                           PhiCache* cache) {
  const int m = M.dim;
  const double tol = 1e-12 * (1.0 + q.norm());

  Vec p;
  if (cache && cache->valid && cache->inverse_pt.size() == m) {
    p = cache->inverse_pt;
  } else {
    // seed from the nearest section point, pulled down to the base
    const FootPointResult fN = closest_point(M, N, q, cfg);
    const FootPointResult f0 = closest_point(
        M, Ng, fN.foot, cfg, cache && cache->foot_param.size() > 0 ? &cache->foot_param : nullptr);
    Vec vb = log_map(M, fN.foot, q, cfg);
    const Vec wdn = log_map(M, fN.foot, f0.foot, cfg);
    if (wdn.squaredNorm() > 0.0) vb = transport_along_geodesic(M, fN.foot, wdn, vb, -1, cfg);
    const Mat T = Ng.tangent_frame(M, f0.parameter);
    vb -= T * (T.transpose() * (M.g(f0.foot) * vb));
    p = vb.squaredNorm() > 0.0 ? exp_point(M, f0.foot, vb, -1, cfg) : f0.foot;
    if (cache) cache->foot_param = f0.parameter;
  }

  SliceDecomp best;
  double best_r = std::numeric_limits<double>::infinity();
  Vec best_p = p;
  bool passed = false;
  for (int it = 0; it < cfg.cp_max_iter; ++it) {
    SliceDecomp D;
    const Vec qhat = phi_forward(M, Ng, N, p, cfg, cache, &D);
    const double r = (q - qhat).norm();
    if (r < best_r) {
      best_r = r;
      best = D;
      best_p = p;
    }
    if (passed || r <= 1e-15 * (1.0 + q.norm())) {
      if (cache) {
        cache->valid = true;
        cache->inverse_pt = best_p;
      }
      return best;
    }
    if (r <= tol) passed = true;  // take one more contraction step, then stop
    p += q - qhat;
  }

  // Gauss-Newton fallback on the forward map
  p = best_p;
  const double h = cfg.pushforward_h;
  for (int it = 0; it < 25; ++it) {
    SliceDecomp D;
    const Vec qhat = phi_forward(M, Ng, N, p, cfg, cache, &D);
    const Vec r = q - qhat;
    if (r.norm() <= tol) {
      if (cache) {
        cache->valid = true;
        cache->inverse_pt = p;
      }
      return D;
    }
    Mat J(m, m);
    for (int i = 0; i < m; ++i) {
      Vec pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      PhiCache ca = cache ? *cache : PhiCache{};
      PhiCache cb = ca;
      J.col(i) = (phi_forward(M, Ng, N, pp, cfg, cache ? &ca : nullptr, nullptr) -
                  phi_forward(M, Ng, N, pm, cfg, cache ? &cb : nullptr, nullptr)) /
                 (2.0 * h);
    }
    const Vec dp = J.partialPivLu().solve(r);
    if (!dp.allFinite()) break;
    double step = 1.0;
    bool accepted = false;
    for (int halve = 0; halve < 8; ++halve) {
      const Vec pn = p + step * dp;
      PhiCache ct = cache ? *cache : PhiCache{};
      const Vec qn = phi_forward(M, Ng, N, pn, cfg, cache ? &ct : nullptr, nullptr);
      if ((q - qn).norm() < r.norm()) {
        p = pn;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  fail(Err::NoConvergence,
       "slice-map inversion stalled (best residual " + std::to_string(best_r) + ")");
}

// ---------------------------------------------------------------------------
// Combined per-member evaluation at q: the alpha^g covector (quadrature of the
// two homotopy contractions minus the pulled-back boundary form) and the
// matrix of the pulled-back two-form, sharing one set of slice inversions.
// ---------------------------------------------------------------------------

struct MemberEval {
  Vec alpha;
  Mat omega_g;
};

MemberEval member_eval(const AlmostKaehlerModel& M, const PrimitiveData& P, int g, const Vec& q,
                       const SolverConfig& cfg, PhiCache* cache) {
  const ParamSubmanifold& Ng = P.family.members[g].N;
  const ParamSubmanifold& N = P.N;
  const int m = M.dim;
  const double h = cfg.pushforward_h;
  const QuadRule& qr = gauss_legendre_01(cfg.quad_nodes);
  const int nq = static_cast<int>(qr.t.size());

  PhiCache local = cache ? *cache : PhiCache{};
  const SliceDecomp D0 = inverse_decomp(M, Ng, N, q, cfg, &local);
  if (cache) *cache = local;

  const RadialSamples dn = sample_radial(M, D0.p0, D0.v, qr, cfg);
  const RadialSamples up = sample_radial(M, D0.q0, D0.vpar, qr, cfg);
  std::vector<Mat> Wdn(nq), Wup(nq);
  for (int k = 0; k < nq; ++k) {
    Wdn[k] = M.omega(dn.x[k]);
    Wup[k] = M.omega(up.x[k]);
  }
  const Vec beta0 = beta_g_at(P, g, D0.u0);

  MemberEval out;
  out.alpha = Vec::Zero(m);
  Mat J(m, m);
  for (int i = 0; i < m; ++i) {
    Vec qa = q, qb = q;
    qa[i] += h;
    qb[i] -= h;
    PhiCache ca = local, cb = local;
    const SliceDecomp Da = inverse_decomp(M, Ng, N, qa, cfg, &ca);
    const SliceDecomp Db = inverse_decomp(M, Ng, N, qb, cfg, &cb);
    int side = blocked_side(N, D0.u0, Da.u0, Db.u0);
    if (side == 0) side = blocked_side(Ng, D0.f0, Da.f0, Db.f0);
    const SliceDecomp& Dp_ = (side == +1) ? D0 : Da;
    const SliceDecomp& Dm_ = (side == -1) ? D0 : Db;
    const double denom = (side == 0) ? 2.0 * h : h;
    J.col(i) = (Dp_.p - Dm_.p) / denom;

    const RadialSamples dnp = (side == +1) ? dn : sample_radial(M, Da.p0, Da.v, qr, cfg);
    const RadialSamples dnm = (side == -1) ? dn : sample_radial(M, Db.p0, Db.v, qr, cfg);
    const RadialSamples upp = (side == +1) ? up : sample_radial(M, Da.q0, Da.vpar, qr, cfg);
    const RadialSamples upm = (side == -1) ? up : sample_radial(M, Db.q0, Db.vpar, qr, cfg);
    double acc = 0.0;
    for (int k = 0; k < nq; ++k) {
      const Vec dP = (dnp.x[k] - dnm.x[k]) / denom;
      const Vec dZ = (upp.x[k] - upm.x[k]) / denom;
      acc += qr.w[k] * (dn.dx[k].dot(Wdn[k] * dP) - up.dx[k].dot(Wup[k] * dZ));
    }
    acc -= beta0.dot(param_diff(N, Dp_.u0, Dm_.u0) / denom);
    out.alpha[i] = acc;
  }
  const Mat W = M.omega(D0.p);
  const Mat O = J.transpose() * W * J;
  out.omega_g = 0.5 * (O - O.transpose());
  return out;
}

struct VelocityEval {
  Vec v;
  double nondeg = 0.0;
  double speed = 0.0;
};

VelocityEval velocity_full(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& q,
                           double t, const SolverConfig& cfg, std::vector<PhiCache>* caches) {
  const int m = M.dim;
  if (caches && static_cast<int>(caches->size()) != P.family.size())
    fail(Err::ConfigError, "cache list does not match the family size");
  Vec a = Vec::Zero(m);
  Mat Oavg = Mat::Zero(m, m);
  for (int g = 0; g < P.family.size(); ++g) {
    const MemberEval e = member_eval(M, P, g, q, cfg, caches ? &(*caches)[g] : nullptr);
    const double w = P.family.members[g].weight;
    a += w * e.alpha;
    Oavg += w * e.omega_g;
  }
  const Mat W = M.omega(q);
  const Mat Wt = W + t * (Oavg - W);

  // nondegeneracy certificate: min over g-unit X of omega_t(X, I X), which is
  // the smallest eigenvalue of the g-normalized symmetric part of Wt * I
  const Mat G = M.g(q);
  const Mat I = kernel::acs_at(M, q);
  Eigen::SelfAdjointEigenSolver<Mat> gs(G);
  const Mat Gih = gs.operatorInverseSqrt();
  const Mat S = Wt * I;
  Eigen::SelfAdjointEigenSolver<Mat> es(Gih * (0.5 * (S + S.transpose())) * Gih);
  const double nd = es.eigenvalues().minCoeff();
  if (nd <= 0.0)
    fail(Err::Degenerate, "interpolated two-form lost nondegeneracy at t=" + std::to_string(t) +
                              " (min omega_t(X, IX) = " + std::to_string(nd) + ")");

  VelocityEval out;
  out.v = Wt.partialPivLu().solve(a);
  out.nondeg = nd;
  out.speed = kernel::norm_g(M, q, out.v);
  return out;
}

struct TrajStats {
  double disp = 0.0;
  double speed = 0.0;
  double nd = 1e9;
  double margin = 1e9;
  int steps = 0;
};

// Time-one integration of dx/ds = -v_{1-s}(x) by fixed-step RK4, restarting
// with doubled resolution whenever one step moves farther than R/8.
Vec flow_one(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& x0,
             const SolverConfig& cfg, TrajStats* st) {
  int steps = std::max(1, cfg.flow_steps);
  const double R = P.table.R;
  for (int attempt = 0;; ++attempt) {
    Vec x = x0;
    std::vector<PhiCache> caches(P.family.size());
    double speed = 0.0, nd = 1e9, margin = 1e9;
    Vec warmN;
    bool have_warm = false;
    bool redo = false;
    const double ds = 1.0 / steps;
    for (int k = 0; k < steps && !redo; ++k) {
      const double s = k * ds;
      const auto f = [&](double ss, const Vec& xx) -> Vec {
        const VelocityEval e = velocity_full(M, P, xx, 1.0 - ss, cfg, &caches);
        nd = std::min(nd, e.nondeg);
        speed = std::max(speed, e.speed);
        return -e.v;
      };
      const Vec k1 = f(s, x);
      const Vec k2 = f(s + 0.5 * ds, x + (0.5 * ds) * k1);
      const Vec k3 = f(s + 0.5 * ds, x + (0.5 * ds) * k2);
      const Vec k4 = f(s + ds, x + ds * k3);
      const Vec xn = x + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const Vec dxs = xn - x;
      const double dstep = std::sqrt(std::max(0.0, dxs.dot(M.g(x) * dxs)));
      if (dstep > R / 8.0) {
        if (attempt < 4) {
          redo = true;
          break;
        }
        fail(Err::NoConvergence, "flow step displacement still exceeds R/8 at " +
                                     std::to_string(steps) + " steps");
      }
      const FootPointResult fp = closest_point(M, P.N, xn, cfg, have_warm ? &warmN : nullptr);
      warmN = fp.parameter;
      have_warm = true;
      margin = std::min(margin, R - fp.distance);
      if (fp.distance > P.tube_L)
        fail(Err::LeftTube, "flow trajectory left the certified fiber (distance " +
                                std::to_string(fp.distance) + " > " + std::to_string(P.tube_L) + ")");
      x = xn;
    }
    if (!redo) {
      if (st) {
        st->disp = kernel::distance(M, x0, x, cfg);
        st->speed = speed;
        st->nd = nd;
        st->margin = margin;
        st->steps = steps;
      }
      return x;
    }
    steps *= 2;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

BundleSplitting bundle_splitting(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                                 const Vec& q, const SolverConfig& cfg) {
  BundleSplitting B;
  B.foot = closest_point(M, Ng, q, cfg);
  const Mat NF = Ng.normal_frame(M, B.foot.parameter);
  const Mat G = M.g(q);

  Mat vert = NF;
  if (B.foot.distance > 0.0)
    vert = transport_basis_along_geodesic(M, B.foot.foot, B.foot.normal_vector, NF, -1, cfg);
  vert = kernel::g_orthonormalize(G, vert);
  B.Vert = {q, vert};
  B.Hor = {q, kernel::g_orthonormal_complement(G, vert)};

  // actual vertical space: tangent of the normal slice c -> exp_{p0}(NF c)
  const int cod = static_cast<int>(NF.cols());
  const Vec c0 = NF.transpose() * (M.g(B.foot.foot) * B.foot.normal_vector);
  Mat av(M.dim, cod);
  const double h = cfg.pushforward_h;
  for (int j = 0; j < cod; ++j) {
    Vec cp = c0, cm = c0;
    cp[j] += h;
    cm[j] -= h;
    av.col(j) =
        (exp_point(M, B.foot.foot, NF * cp, -1, cfg) - exp_point(M, B.foot.foot, NF * cm, -1, cfg)) /
        (2.0 * h);
  }
  av = kernel::g_orthonormalize(G, av);
  B.aVert = {q, av};
  B.aHor = {q, kernel::g_orthonormal_complement(G, av)};
  return B;
}

LiftResult lift_to_section(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                           const ParamSubmanifold& N, const Vec& p0, const SolverConfig& cfg,
                           PhiCache* cache) {
  const FootPointResult f0 = closest_point(
      M, Ng, p0, cfg, cache && cache->foot_param.size() > 0 ? &cache->foot_param : nullptr);
  if (f0.distance > 1e-6 * (1.0 + p0.norm()))
    fail(Err::DomainError, "lift base point does not lie on '" + Ng.name + "'");
  if (cache) cache->foot_param = f0.parameter;
  return lift_impl(M, Ng, N, f0.foot, f0.parameter, cfg, cache);
}

Vec phi_g(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng, const ParamSubmanifold& N,
          const Vec& p, const SolverConfig& cfg, PhiCache* cache) {
  return phi_forward(M, Ng, N, p, cfg, cache, nullptr);
}

Vec phi_g_inverse(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                  const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg,
                  PhiCache* cache) {
  return inverse_decomp(M, Ng, N, q, cfg, cache).p;
}

Vec pushforward_phi(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                    const ParamSubmanifold& N, const Vec& p, const Vec& X, const SolverConfig& cfg,
                    PhiCache* cache) {
  const double h = cfg.pushforward_h;
  const Vec pp = exp_point(M, p, h * X, -1, cfg);
  const Vec pm = exp_point(M, p, -h * X, -1, cfg);
  PhiCache ca = cache ? *cache : PhiCache{};
  PhiCache cb = ca;
  const Vec qa = phi_forward(M, Ng, N, pp, cfg, cache ? &ca : nullptr, nullptr);
  const Vec qb = phi_forward(M, Ng, N, pm, cfg, cache ? &cb : nullptr, nullptr);
  if (cache) *cache = ca;
  return (qa - qb) / (2.0 * h);
}

Mat omega_g_matrix(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                   const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg,
                   PhiCache* cache) {
  const int m = M.dim;
  const double h = cfg.pushforward_h;
  PhiCache local = cache ? *cache : PhiCache{};
  const SliceDecomp D0 = inverse_decomp(M, Ng, N, q, cfg, &local);
  if (cache) *cache = local;
  Mat J(m, m);
  for (int i = 0; i < m; ++i) {
    Vec qa = q, qb = q;
    qa[i] += h;
    qb[i] -= h;
    PhiCache ca = local, cb = local;
    J.col(i) = (inverse_decomp(M, Ng, N, qa, cfg, &ca).p - inverse_decomp(M, Ng, N, qb, cfg, &cb).p) /
               (2.0 * h);
  }
  const Mat O = J.transpose() * M.omega(D0.p) * J;
  return 0.5 * (O - O.transpose());
}

double omega_g_at(const AlmostKaehlerModel& M, const ParamSubmanifold& Ng,
                  const ParamSubmanifold& N, const Vec& q, const Vec& X, const Vec& Y,
                  const SolverConfig& cfg, PhiCache* cache) {
  return X.dot(omega_g_matrix(M, Ng, N, q, cfg, cache) * Y);
}

Mat omega_avg_matrix(const AlmostKaehlerModel& M, const WeightedFamily& family,
                     const ParamSubmanifold& N, const Vec& q, const SolverConfig& cfg) {
  WeightedFamily fam = family;
  fam.canonicalize();
  Mat O = Mat::Zero(M.dim, M.dim);
  for (const auto& mem : fam.members) O += mem.weight * omega_g_matrix(M, mem.N, N, q, cfg);
  return O;
}

Mat omega_t_matrix(const AlmostKaehlerModel& M, const WeightedFamily& family,
                   const ParamSubmanifold& N, const Vec& q, double t, const SolverConfig& cfg) {
  const Mat W = M.omega(q);
  return W + t * (omega_avg_matrix(M, family, N, q, cfg) - W);
}

Vec homotopy_Q_covector(const AlmostKaehlerModel& M, const ParamSubmanifold& base,
                        const std::function<Mat(const Vec&)>& f, const Vec& p,
                        const SolverConfig& cfg) {
  const int m = M.dim;
  const FootPointResult fp = closest_point(M, base, p, cfg);
  if (fp.distance <= 1e-13 * (1.0 + p.norm())) return Vec::Zero(m);

  const QuadRule& qr = gauss_legendre_01(cfg.quad_nodes);
  const int nq = static_cast<int>(qr.t.size());
  const RadialSamples C = sample_radial(M, fp.foot, fp.normal_vector, qr, cfg);
  std::vector<Mat> F(nq);
  for (int k = 0; k < nq; ++k) F[k] = f(C.x[k]);

  const double h = cfg.pushforward_h;
  Vec out = Vec::Zero(m);
  Vec warm = fp.parameter;
  for (int i = 0; i < m; ++i) {
    Vec pa = p, pb = p;
    pa[i] += h;
    pb[i] -= h;
    const FootPointResult fa = closest_point(M, base, pa, cfg, &warm);
    warm = fa.parameter;
    const FootPointResult fb = closest_point(M, base, pb, cfg, &warm);
    warm = fb.parameter;
    const int side = blocked_side(base, fp.parameter, fa.parameter, fb.parameter);
    const RadialSamples Sa =
        (side == +1) ? C : sample_radial(M, fa.foot, fa.normal_vector, qr, cfg);
    const RadialSamples Sb =
        (side == -1) ? C : sample_radial(M, fb.foot, fb.normal_vector, qr, cfg);
    const double denom = (side == 0) ? 2.0 * h : h;
    for (int k = 0; k < nq; ++k) {
      const Vec dP = (Sa.x[k] - Sb.x[k]) / denom;
      out[i] += qr.w[k] * C.dx[k].dot(F[k] * dP);
    }
  }
  return out;
}

double homotopy_Q(const AlmostKaehlerModel& M, const ParamSubmanifold& base,
                  const std::function<Mat(const Vec&)>& f, const Vec& p, const Vec& X,
                  const SolverConfig& cfg) {
  const FootPointResult fp = closest_point(M, base, p, cfg);
  if (fp.distance <= 1e-13 * (1.0 + p.norm())) return 0.0;

  const QuadRule& qr = gauss_legendre_01(cfg.quad_nodes);
  const int nq = static_cast<int>(qr.t.size());
  const RadialSamples C = sample_radial(M, fp.foot, fp.normal_vector, qr, cfg);

  const double h = cfg.pushforward_h;
  Vec warm = fp.parameter;
  const FootPointResult fa = closest_point(M, base, Vec(p + h * X), cfg, &warm);
  warm = fa.parameter;
  const FootPointResult fb = closest_point(M, base, Vec(p - h * X), cfg, &warm);
  const int side = blocked_side(base, fp.parameter, fa.parameter, fb.parameter);
  const RadialSamples Sa = (side == +1) ? C : sample_radial(M, fa.foot, fa.normal_vector, qr, cfg);
  const RadialSamples Sb = (side == -1) ? C : sample_radial(M, fb.foot, fb.normal_vector, qr, cfg);
  const double denom = (side == 0) ? 2.0 * h : h;

  double out = 0.0;
  for (int k = 0; k < nq; ++k) {
    const Vec dP = (Sa.x[k] - Sb.x[k]) / denom;
    out += qr.w[k] * C.dx[k].dot(f(C.x[k]) * dP);
  }
  return out;
}

PrimitiveData build_primitive(const AlmostKaehlerModel& M, const WeightedFamily& family,
                              const ParamSubmanifold& N, const SolverConfig& cfg) {
  if (!M.has_symplectic())
    fail(Err::NotCompatible, "model '" + M.name + "' carries no symplectic form");
  PrimitiveData P;
  P.family = family;
  P.family.canonicalize();
  P.N = N;

  if (P.family.size() > 1) {
    std::vector<ParamSubmanifold> ms;
    for (const auto& mem : P.family.members) ms.push_back(mem.N);
    P.epsilon = sub::measured_epsilon(M, ms, cfg);
  }

  if (cfg.tube_L > 0.0) {
    P.tube_L = cfg.tube_L;
  } else {
    const double le = constants::L_eps(P.epsilon);
    if (!(le > 0.0))
      fail(Err::DomainError, "measured epsilon " + std::to_string(P.epsilon) +
                                 " admits no canonical fiber radius; set tube_L");
    P.tube_L = le;
  }
  P.table = constants::make_table(P.epsilon, P.tube_L);

  const std::vector<Vec> nodes = P.N.grid_nodes();
  P.beta.assign(P.family.size(), std::vector<Vec>(nodes.size()));
  const auto omega_fn = [&M](const Vec& x) { return M.omega(x); };
  for (int g = 0; g < P.family.size(); ++g) {
    const ParamSubmanifold& Ng = P.family.members[g].N;
    parallel_for(static_cast<int>(nodes.size()), cfg.threads, [&](int i) {
      const Vec q0 = P.N.point(nodes[i]);
      const Vec ambient = homotopy_Q_covector(M, Ng, omega_fn, q0, cfg);
      P.beta[g][i] = P.N.jacobian(nodes[i]).transpose() * ambient;
    });
  }
  return P;
}

Vec beta_g_at(const PrimitiveData& P, int member, const Vec& u) {
  if (member < 0 || member >= static_cast<int>(P.beta.size()))
    fail(Err::ConfigError, "member index out of range");
  if (P.beta[member].empty())
    fail(Err::ConfigError, "primitive data carries no boundary forms; build it first");
  return sub::interpolate_on_grid(P.N, P.beta[member], u);
}

Vec alpha_g_at(const AlmostKaehlerModel& M, const PrimitiveData& P, int member, const Vec& q,
               const SolverConfig& cfg, PhiCache* cache) {
  if (member < 0 || member >= P.family.size())
    fail(Err::ConfigError, "member index out of range");
  return member_eval(M, P, member, q, cfg, cache).alpha;
}

Vec alpha_at(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& q,
             const SolverConfig& cfg, std::vector<PhiCache>* caches) {
  if (caches && static_cast<int>(caches->size()) != P.family.size())
    fail(Err::ConfigError, "cache list does not match the family size");
  Vec a = Vec::Zero(M.dim);
  for (int g = 0; g < P.family.size(); ++g)
    a += P.family.members[g].weight *
         member_eval(M, P, g, q, cfg, caches ? &(*caches)[g] : nullptr).alpha;
  return a;
}

Vec moser_velocity(const AlmostKaehlerModel& M, const PrimitiveData& P, const Vec& q, double t,
                   const SolverConfig& cfg, std::vector<PhiCache>* caches) {
  return velocity_full(M, P, q, t, cfg, caches).v;
}

std::pair<ParamSubmanifold, FlowReport> moser_flow(const AlmostKaehlerModel& M,
                                                   const PrimitiveData& P,
                                                   const SolverConfig& cfg) {
  if (!M.has_symplectic())
    fail(Err::NotCompatible, "model '" + M.name + "' carries no symplectic form");
  if (!cfg.override_containment && !constants::check_containment(P.epsilon))
    fail(Err::DomainError,
         "containment margin 842*eps < R(eps, L(eps)) fails at eps = " +
             std::to_string(P.epsilon) + "; set override_containment to run anyway");

  const std::vector<Vec> nodes = P.N.grid_nodes();
  const size_t nn = nodes.size();
  std::vector<Vec> flowed(nn);
  std::vector<TrajStats> stats(nn);
  parallel_for(static_cast<int>(nn), cfg.threads,
               [&](int i) { flowed[i] = flow_one(M, P, P.N.point(nodes[i]), cfg, &stats[i]); });

  FlowReport rep;
  rep.flow_steps = std::max(1, cfg.flow_steps);
  for (const TrajStats& st : stats) {
    rep.max_displacement = std::max(rep.max_displacement, st.disp);
    rep.speed_sup = std::max(rep.speed_sup, st.speed);
    rep.nondegeneracy_min = std::min(rep.nondegeneracy_min, st.nd);
    rep.tube_margin = std::min(rep.tube_margin, st.margin);
    rep.flow_steps = std::max(rep.flow_steps, st.steps);
  }

  ParamSubmanifold L = P.N;
  L.name = P.N.name + ":flow";
  L.chart_jac = nullptr;

  const AlmostKaehlerModel model_copy = M;  // the chart closure must own these
  const PrimitiveData P_copy = P;
  const SolverConfig cfg_copy = cfg;
  const ParamSubmanifold N_copy = P.N;
  const auto flowed_copy = flowed;

  L.chart = [=](const Vec& u) -> Vec {
    // exact lattice hits return the precomputed trajectory endpoints
    const int n = N_copy.dim;
    size_t flat = 0;
    bool on_node = true;
    for (int a = 0; a < n && on_node; ++a) {
      const double lo = N_copy.param_domain.lo[a], hi = N_copy.param_domain.hi[a];
      const int k = N_copy.grid_res[a];
      const bool wrap = !N_copy.periodic.empty() && N_copy.periodic[a];
      const double steps = wrap ? k : k - 1;
      const double tol = 1e-12 * (std::abs(hi - lo) + 1.0);
      int idx = 0;
      if (k > 1) {
        const double delta = (hi - lo) / steps;
        idx = static_cast<int>(std::lround((u[a] - lo) / delta));
        if (std::abs(u[a] - (lo + idx * delta)) > tol) on_node = false;
        if (wrap)
          idx = ((idx % k) + k) % k;
        else if (idx < 0 || idx >= k)
          on_node = false;
      } else if (std::abs(u[a] - lo) > tol) {
        on_node = false;
      }
      flat = flat * static_cast<size_t>(k) + static_cast<size_t>(idx);
    }
    if (on_node) return flowed_copy[flat];
    return flow_one(model_copy, P_copy, N_copy.point(u), cfg_copy, nullptr);
  };

  rep.isotropy_defect_L = sub::isotropy_defect(M, L, cfg);
  for (const auto& mem : P.family.members) {
    double d0 = 0.0;
    Vec warm;
    bool have_warm = false;
    for (size_t i = 0; i < nn; ++i) {
      const FootPointResult fp =
          closest_point(M, mem.N, flowed[i], cfg, have_warm ? &warm : nullptr);
      warm = fp.parameter;
      have_warm = true;
      d0 = std::max(d0, fp.distance);
    }
    rep.d0_members_to_L.push_back(d0);
  }
  return {L, rep};
}

}  // namespace geomavg::moser
