#include "geomavg/submanifold.hpp"

#include <algorithm>
#include <cmath>

namespace geomavg::sub {

namespace {

using kernel::exp_map;
using kernel::exp_point;
using kernel::g_orthonormal_complement;
using kernel::g_orthonormalize;
using kernel::log_map;
using kernel::norm_g;
using kernel::transport_basis_along_geodesic;

bool axis_periodic(const ParamSubmanifold& s, int a) {
  return !s.periodic.empty() && s.periodic[a];
}

std::vector<double> axis_nodes(const ParamSubmanifold& s, int a, int res) {
  const double lo = s.param_domain.lo[a], hi = s.param_domain.hi[a];
  std::vector<double> out;
  if (res <= 1) {
    out.push_back(0.5 * (lo + hi));
    return out;
  }
  const int denom = axis_periodic(s, a) ? res : res - 1;
  out.reserve(res);
  for (int i = 0; i < res; ++i) out.push_back(lo + (hi - lo) * i / denom);
  return out;
}

std::vector<Vec> nodes_for_res(const ParamSubmanifold& s, const std::vector<int>& res) {
  const int n = s.dim;
  std::vector<std::vector<double>> axes(n);
  size_t total = 1;
  for (int a = 0; a < n; ++a) {
    axes[a] = axis_nodes(s, a, res[a]);
    total *= axes[a].size();
  }
  std::vector<Vec> out;
  out.reserve(total);
  std::vector<size_t> idx(n, 0);
  Vec u(n);
  for (size_t k = 0; k < total; ++k) {
    for (int a = 0; a < n; ++a) u[a] = axes[a][idx[a]];
    out.push_back(u);
    for (int a = n - 1; a >= 0; --a) {  // last axis fastest
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return out;
}

// Wrap periodic axes into [lo, hi); clamp the others into the box.
Vec normalize_param(const ParamSubmanifold& s, const Vec& u) {
  Vec v = u;
  for (int a = 0; a < s.dim; ++a) {
    const double lo = s.param_domain.lo[a], hi = s.param_domain.hi[a];
    if (axis_periodic(s, a)) {
      const double P = hi - lo;
      v[a] = lo + std::fmod(v[a] - lo, P);
      if (v[a] < lo) v[a] += P;
      if (v[a] >= hi) v[a] -= P;
    } else {
      v[a] = std::min(std::max(v[a], lo), hi);
    }
  }
  return v;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - 1e-15) return true;
    if (a[i] > b[i] + 1e-15) return false;
  }
  return false;
}

struct PolishResult {
  bool ok = false;
  Vec u, foot, v;
  double dist = 0.0;
};

// Damped Gauss-Newton on the parameters for the squared-distance objective;
// the stationarity condition is J^T G log_x(p) = 0.
PolishResult polish_seed(const AlmostKaehlerModel& M, const ParamSubmanifold& s, const Vec& p,
                         Vec u, const SolverConfig& cfg) {
  PolishResult out;
  Vec warm;
  bool have_warm = false;
  u = normalize_param(s, u);
  Vec x = s.point(u);
  Vec v;
  try {
    v = log_map(M, x, p, cfg);
  } catch (const GeomError&) {
    return out;
  }
  warm = v;
  have_warm = true;
  double dist = norm_g(M, x, v);

  // Drops the components of a candidate step that push a non-periodic
  // parameter past its (active) bound; on the compact piece the minimizer can
  // sit on the boundary, where only sliding directions remain admissible.
  const auto project_feasible = [&](const Vec& uu, const Vec& step) {
    Vec f = step;
    for (int a = 0; a < s.dim; ++a) {
      if (axis_periodic(s, a)) continue;
      const double lo = s.param_domain.lo[a], hi = s.param_domain.hi[a];
      const double slack = 1e-12 * (1.0 + std::abs(hi - lo));
      if ((uu[a] <= lo + slack && f[a] < 0.0) || (uu[a] >= hi - slack && f[a] > 0.0)) f[a] = 0.0;
    }
    return f;
  };

  const auto try_direction = [&](const Vec& dir) -> bool {
    double lam = 1.0;
    for (int half = 0; half < 12; ++half) {
      const Vec u_try = normalize_param(s, u + lam * dir);
      const Vec x_try = s.point(u_try);
      try {
        const Vec v_try = log_map(M, x_try, p, cfg, have_warm ? &warm : nullptr);
        const double d_try = norm_g(M, x_try, v_try);
        if (d_try < dist - 1e-16 * (1.0 + dist)) {
          u = u_try;
          x = x_try;
          v = v_try;
          warm = v_try;
          dist = d_try;
          return true;
        }
      } catch (const GeomError&) {
        // shrink and retry
      }
      lam *= 0.5;
    }
    return false;
  };

  for (int iter = 0; iter < cfg.cp_max_iter; ++iter) {
    const Mat J = s.jacobian(u);
    const Mat G = M.g(x);
    const Vec grad = J.transpose() * (G * v);  // ascent direction of -dist^2/2
    Mat H = J.transpose() * G * J;
    const Vec step = project_feasible(u, H.ldlt().solve(grad));
    if (!step.allFinite()) return out;
    if (step.norm() <= cfg.cp_tol * (1.0 + u.norm())) {
      out.ok = true;
      out.u = u;
      out.foot = x;
      out.v = v;
      out.dist = dist;
      return out;
    }
    // Quadratic terminal phase: near the minimizer the distance decrease
    // falls below measurement precision and the damped search cannot accept
    // anything, while the undamped Newton step on the stationarity system
    // still contracts. Take it outright once the step is small.
    if (step.norm() <= 1e-5 * (1.0 + u.norm())) {
      const Vec u_try = normalize_param(s, u + step);
      const Vec x_try = s.point(u_try);
      bool stepped = false;
      try {
        const Vec v_try = log_map(M, x_try, p, cfg, have_warm ? &warm : nullptr);
        u = u_try;
        x = x_try;
        v = v_try;
        warm = v_try;
        dist = norm_g(M, x_try, v_try);
        stepped = true;
      } catch (const GeomError&) {
        // fall back to the damped search below
      }
      if (stepped) continue;
    }
    if (try_direction(step)) continue;
    // Gauss-Newton stalled: fall back to the projected gradient, then accept
    // the point if it is stationary at working precision.
    const Vec pgrad = project_feasible(u, grad);
    if (pgrad.norm() > cfg.cp_tol * (1.0 + u.norm()) && try_direction(pgrad)) continue;
    if (pgrad.norm() <= 1e-8 * (1.0 + dist)) {
      out.ok = true;
      out.u = u;
      out.foot = x;
      out.v = v;
      out.dist = dist;
      return out;
    }
    return out;
  }
  return out;
}

FootPointResult finish_foot(const ParamSubmanifold& s, const PolishResult& best) {
  FootPointResult r;
  r.parameter = best.u;
  r.foot = best.foot;
  r.distance = best.dist;
  r.normal_vector = best.v;
  if (r.distance > s.tube_radius)
    fail(Err::OutsideTube, "closest point at distance " + std::to_string(r.distance) +
                               " exceeds the tube radius " + std::to_string(s.tube_radius));
  return r;
}

}  // namespace

Mat ParamSubmanifold::jacobian(const Vec& u, double h) const {
  if (chart_jac) return chart_jac(u);
  Mat J(ambient_dim, dim);
  Vec up = u, um = u;
  for (int a = 0; a < dim; ++a) {
    up[a] = u[a] + h;
    um[a] = u[a] - h;
    J.col(a) = (chart(up) - chart(um)) / (2.0 * h);
    up[a] = u[a];
    um[a] = u[a];
  }
  return J;
}

Mat ParamSubmanifold::tangent_frame(const AlmostKaehlerModel& M, const Vec& u) const {
  return kernel::g_orthonormalize(M.g(point(u)), jacobian(u));
}

Mat ParamSubmanifold::normal_frame(const AlmostKaehlerModel& M, const Vec& u) const {
  const Mat G = M.g(point(u));
  return kernel::g_orthonormal_complement(G, kernel::g_orthonormalize(G, jacobian(u)));
}

std::vector<Vec> ParamSubmanifold::grid_nodes() const { return nodes_for_res(*this, grid_res); }

std::vector<Vec> ParamSubmanifold::refined_grid_nodes() const {
  return refined().grid_nodes();
}

ParamSubmanifold ParamSubmanifold::refined() const {
  ParamSubmanifold s = *this;
  for (size_t a = 0; a < s.grid_res.size(); ++a) {
    const int k = s.grid_res[a];
    if (k <= 1) continue;
    s.grid_res[a] = axis_periodic(*this, static_cast<int>(a)) ? 2 * k : 2 * k - 1;
  }
  return s;
}

FootPointResult closest_point(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                              const Vec& p, const SolverConfig& cfg, const Vec* warm_param) {
  if (warm_param) {
    const PolishResult r = polish_seed(M, sub, p, *warm_param, cfg);
    if (r.ok) return finish_foot(sub, r);
  }

  const std::vector<Vec> nodes = sub.grid_nodes();
  std::vector<std::pair<double, size_t>> score;
  score.reserve(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i)
    score.emplace_back((sub.point(nodes[i]) - p).norm(), i);
  std::sort(score.begin(), score.end());
  const size_t n_seed = std::min<size_t>(std::max(1, cfg.cp_polish_seeds), score.size());

  bool any = false;
  PolishResult best;
  for (size_t k = 0; k < n_seed; ++k) {
    const PolishResult r = polish_seed(M, sub, p, nodes[score[k].second], cfg);
    if (!r.ok) continue;
    if (!any) {
      best = r;
      any = true;
      continue;
    }
    const double tol = 1e-9 * (1.0 + best.dist);
    if (r.dist < best.dist - tol ||
        (std::abs(r.dist - best.dist) <= tol && lex_less(r.u, best.u)))
      best = r;
  }
  if (!any) fail(Err::NoConvergence, "foot-point projection: no seed converged");
  return finish_foot(sub, best);
}

Mat second_fundamental_form(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                            const Vec& u, const Vec& xi, const SolverConfig& cfg) {
  const int n = sub.dim;
  const Vec x = sub.point(u);
  const Mat G = M.g(x);
  const double xin = std::sqrt(std::max(1e-300, xi.dot(G * xi)));
  const Vec nu = xi / xin;

  const Mat J = sub.jacobian(u);
  const auto gamma = kernel::christoffels(M, x, cfg);

  // chart second derivatives d^2 X / du_a du_b
  const double h = 1e-5 * (1.0 + u.norm());
  std::vector<std::vector<Vec>> d2(n, std::vector<Vec>(n));
  if (sub.chart_jac) {
    Vec up = u, um = u;
    for (int a = 0; a < n; ++a) {
      up[a] = u[a] + h;
      um[a] = u[a] - h;
      const Mat dJ = (sub.chart_jac(up) - sub.chart_jac(um)) / (2.0 * h);
      up[a] = u[a];
      um[a] = u[a];
      for (int b = 0; b < n; ++b) d2[a][b] = dJ.col(b);
    }
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        Vec val;
        if (a == b) {
          Vec up = u, um = u;
          up[a] += h;
          um[a] -= h;
          val = (sub.chart(up) - 2.0 * x + sub.chart(um)) / (h * h);
        } else {
          Vec upp = u, upm = u, ump = u, umm = u;
          upp[a] += h;
          upp[b] += h;
          upm[a] += h;
          upm[b] -= h;
          ump[a] -= h;
          ump[b] += h;
          umm[a] -= h;
          umm[b] -= h;
          val = (sub.chart(upp) - sub.chart(upm) - sub.chart(ump) + sub.chart(umm)) /
                (4.0 * h * h);
        }
        d2[a][b] = val;
        d2[b][a] = val;
      }
  }

  // coordinate second fundamental form: II_ab = g(d2_ab + Gamma(J_a, J_b), nu)
  Mat II(n, n);
  const int m = M.dim;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Vec cov = d2[a][b];
      for (int k = 0; k < m; ++k) cov[k] += J.col(a).dot(gamma[k] * J.col(b));
      II(a, b) = cov.dot(G * nu);
    }

  // re-express on the g-orthonormal tangent frame E = J C
  const Mat E = g_orthonormalize(G, J);
  const Mat C = (J.transpose() * G * J).ldlt().solve(J.transpose() * G * E);
  Mat A = C.transpose() * II * C;
  return 0.5 * (A + A.transpose());
}

namespace {

struct SupPair {
  double d0 = 0.0;
  double angle = 0.0;
};

SupPair c1_sups(const AlmostKaehlerModel& M, const ParamSubmanifold& N,
                const ParamSubmanifold& Np, const std::vector<Vec>& nodes,
                const SolverConfig& cfg) {
  SupPair out;
  bool have_warm = false;
  Vec warm;
  for (const Vec& up : nodes) {
    const Vec q = Np.point(up);
    const FootPointResult fp =
        closest_point(M, N, q, cfg, have_warm ? &warm : nullptr);
    warm = fp.parameter;
    have_warm = true;
    out.d0 = std::max(out.d0, fp.distance);

    Mat frame = N.tangent_frame(M, fp.parameter);
    if (fp.distance > 0.0)
      frame = transport_basis_along_geodesic(M, fp.foot, fp.normal_vector, frame);
    SubspaceBasis moved{q, frame};
    SubspaceBasis target{q, Np.tangent_frame(M, up)};
    out.angle = std::max(out.angle, kernel::subspace_distance(M, target, moved));
  }
  return out;
}

}  // namespace

C1Distance c1_distance(const AlmostKaehlerModel& M, const ParamSubmanifold& N,
                       const ParamSubmanifold& Nprime, const SolverConfig& cfg) {
  const SupPair coarse = c1_sups(M, N, Nprime, Nprime.grid_nodes(), cfg);
  const SupPair fine = c1_sups(M, N, Nprime, Nprime.refined_grid_nodes(), cfg);
  const double d1_c = std::max(coarse.d0, coarse.angle);
  const double d1_f = std::max(fine.d0, fine.angle);
  // resolution floor: sups below ~1e-9 are indistinguishable from zero for
  // the iterative foot-point and transport solvers
  const double floor_v = 1e-9;
  if (std::abs(d1_f - d1_c) > 0.05 * std::max(d1_f, floor_v))
    fail(Err::NoConvergence, "grid sup not stable under refinement (" + std::to_string(d1_c) +
                                 " vs " + std::to_string(d1_f) + ")");
  if (std::abs(fine.d0 - coarse.d0) > 0.05 * std::max(fine.d0, floor_v))
    fail(Err::NoConvergence, "distance sup not stable under refinement");
  C1Distance out;
  out.d0 = fine.d0;
  out.d1 = d1_f;
  if (out.d1 < floor_v) out = C1Distance{0.0, 0.0};
  return out;
}

C1Distance c1_distance_nodes(const AlmostKaehlerModel& M, const ParamSubmanifold& N,
                             const ParamSubmanifold& Nprime, const SolverConfig& cfg) {
  const SupPair s = c1_sups(M, N, Nprime, Nprime.grid_nodes(), cfg);
  C1Distance out{std::max(s.d0, s.angle), s.d0};
  if (out.d1 < 1e-9) out = C1Distance{0.0, 0.0};  // below solver resolution
  return out;
}

GentleReport gentle_check(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                          const SolverConfig& cfg, double scan_radius) {
  GentleReport rep;
  rep.injectivity_proxy = M.injectivity_guard;

  std::vector<Vec> nodes = sub.grid_nodes();
  // cap the scan cost on dense grids
  if (nodes.size() > 64) {
    const size_t stride = (nodes.size() + 63) / 64;
    std::vector<Vec> picked;
    for (size_t i = 0; i < nodes.size(); i += stride) picked.push_back(nodes[i]);
    nodes.swap(picked);
  }
  const size_t nn = nodes.size();
  std::vector<Vec> base_pts(nn);
  for (size_t i = 0; i < nn; ++i) base_pts[i] = sub.point(nodes[i]);

  // chart-space resolution: smallest distance between distinct scan bases
  double spacing = 1e18;
  for (size_t i = 0; i < nn; ++i)
    for (size_t j = i + 1; j < nn; ++j) {
      const double d = (base_pts[i] - base_pts[j]).norm();
      if (d > 1e-12) spacing = std::min(spacing, d);
    }
  if (!(spacing < 1e17)) spacing = 1.0;
  const double exclusion = 3.0 * spacing;

  // normal ray bundle: frame directions, their negatives, and diagonal mixes
  const double dt = 0.05;
  const int n_t = std::max(1, static_cast<int>(std::lround(scan_radius / dt)));
  struct Ray {
    size_t node;
    std::vector<Vec> pts;  // sampled at t = dt, 2dt, ...
  };
  std::vector<Ray> rays;
  for (size_t i = 0; i < nn; ++i) {
    const Mat nf = sub.normal_frame(M, nodes[i]);
    std::vector<Vec> dirs;
    for (int c = 0; c < nf.cols(); ++c) {
      dirs.push_back(nf.col(c));
      dirs.push_back(-nf.col(c));
    }
    if (nf.cols() >= 2) {
      const double s = 1.0 / std::sqrt(2.0);
      dirs.push_back(s * (nf.col(0) + nf.col(1)));
      dirs.push_back(-s * (nf.col(0) + nf.col(1)));
      dirs.push_back(s * (nf.col(0) - nf.col(1)));
      dirs.push_back(-s * (nf.col(0) - nf.col(1)));
    }
    for (const Vec& d : dirs) {
      Ray ray;
      ray.node = i;
      double target = scan_radius;
      for (int attempt = 0; attempt < 6 && ray.pts.empty(); ++attempt) {
        const int steps = std::max(1, static_cast<int>(std::lround(target / dt)));
        try {
          const GeodesicPath path = exp_map(M, base_pts[i], target * d, steps, cfg);
          ray.pts.assign(path.points.begin() + 1, path.points.end());
        } catch (const GeomError&) {
          target *= 0.5;  // ray exits the chart; keep the surviving stub
        }
      }
      if (!ray.pts.empty()) rays.push_back(std::move(ray));
    }
  }

  // A collision is two rays from well-separated bases whose equal-radius
  // points nearly coincide — either in absolute terms (a transversal
  // crossing inside one step) or relative to their base separation (a focal
  // collapse, where whole ray bundles converge to one point).
  double margin = scan_radius;
  bool collided = false;
  for (int s = 0; s < n_t && !collided; ++s) {
    for (size_t i = 0; i < rays.size() && !collided; ++i) {
      if (s >= static_cast<int>(rays[i].pts.size())) continue;
      for (size_t j = i + 1; j < rays.size(); ++j) {
        if (s >= static_cast<int>(rays[j].pts.size())) continue;
        const double d0 = (base_pts[rays[i].node] - base_pts[rays[j].node]).norm();
        if (d0 < exclusion) continue;
        const double tol = std::max(0.4 * dt, std::min(0.03 * d0, 10.0 * dt));
        if ((rays[i].pts[s] - rays[j].pts[s]).norm() < tol) {
          margin = (s + 1) * dt;
          collided = true;
          break;
        }
      }
    }
  }
  rep.normal_injectivity_margin = margin;

  // curvature sampling in the unit tube
  std::vector<Vec> probes;
  {
    const size_t stride = std::max<size_t>(1, nn / 24);
    for (size_t i = 0; i < nn; i += stride) {
      const Mat nf = sub.normal_frame(M, nodes[i]);
      probes.push_back(base_pts[i]);
      for (double t : {0.5, 1.0}) {
        for (int c = 0; c < std::min<int>(nf.cols(), 2); ++c) {
          for (double sgn : {1.0, -1.0}) {
            try {
              probes.push_back(exp_point(M, base_pts[i], sgn * t * nf.col(c), -1, cfg));
            } catch (const GeomError&) {
              // outside the chart: skip the probe
            }
          }
        }
      }
    }
  }
  double curv = 0.0;
  const int m = M.dim;
  for (const Vec& x : probes) {
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) {
        Vec ua = Vec::Zero(m), ub = Vec::Zero(m);
        ua[a] = 1.0;
        ub[b] = 1.0;
        curv = std::max(curv, std::abs(kernel::sectional_curvature(M, x, ua, ub, cfg)));
        if (m > 2) {
          Vec mix = Vec::Zero(m);
          mix[a] = 1.0;
          mix[(b + 1) % m] = 0.7;
          if ((b + 1) % m != a)
            curv = std::max(curv, std::abs(kernel::sectional_curvature(M, x, ua + 0.3 * ub, mix, cfg)));
        }
      }
  }
  rep.curvature_sup_in_tube = curv;

  rep.passed = (rep.normal_injectivity_margin >= 1.0 - 1e-9) &&
               (rep.curvature_sup_in_tube <= 1.0 + 1e-6) && (rep.injectivity_proxy >= 1.0);
  return rep;
}

double isotropy_defect(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                       const SolverConfig& cfg) {
  (void)cfg;
  double sup = 0.0;
  for (const Vec& u : sub.grid_nodes()) {
    const Vec x = sub.point(u);
    const Mat E = sub.tangent_frame(M, u);
    const Mat W = M.omega(x);
    for (int i = 0; i < E.cols(); ++i)
      for (int j = i + 1; j < E.cols(); ++j)
        sup = std::max(sup, std::abs(E.col(i).dot(W * E.col(j))));
  }
  return sup;
}

Vec interpolate_on_grid(const ParamSubmanifold& s, const std::vector<Vec>& values, const Vec& u,
                        size_t* anchor_flat) {
  const int n = s.dim;
  if (u.size() != n) fail(Err::DimensionMismatch, "interpolation parameter size");
  size_t nn = 1;
  for (int r : s.grid_res) nn *= static_cast<size_t>(r);
  if (values.size() != nn)
    fail(Err::DimensionMismatch, "interpolation values do not match the grid");

  // per-axis cell index pair and blend weight
  std::vector<int> i0(n), i1(n);
  std::vector<double> w(n);
  for (int a = 0; a < n; ++a) {
    const double lo = s.param_domain.lo[a], hi = s.param_domain.hi[a];
    const int k = s.grid_res[a];
    const bool wrap = !s.periodic.empty() && s.periodic[a];
    if (k <= 1) {
      i0[a] = i1[a] = 0;
      w[a] = 0.0;
      continue;
    }
    const double steps = wrap ? k : k - 1;
    double t = (u[a] - lo) / (hi - lo) * steps;
    if (wrap) {
      t = std::fmod(t, static_cast<double>(k));
      if (t < 0.0) t += k;
    } else {
      t = std::min(std::max(t, 0.0), static_cast<double>(k - 1));
    }
    i0[a] = std::min(static_cast<int>(std::floor(t)), wrap ? k - 1 : k - 2);
    i1[a] = wrap ? (i0[a] + 1) % k : i0[a] + 1;
    w[a] = t - i0[a];
  }

  // blend over the 2^n cell corners (flat indices in grid_nodes order:
  // last axis fastest)
  Vec out = Vec::Zero(values.front().size());
  const int corners = 1 << n;
  for (int mask = 0; mask < corners; ++mask) {
    double weight = 1.0;
    size_t flat = 0;
    for (int a = 0; a < n; ++a) {
      const bool hi_corner = (mask >> a) & 1;
      weight *= hi_corner ? w[a] : (1.0 - w[a]);
      flat = flat * static_cast<size_t>(s.grid_res[a]) + static_cast<size_t>(hi_corner ? i1[a] : i0[a]);
    }
    if (mask == 0 && anchor_flat) *anchor_flat = flat;
    if (weight != 0.0) out += weight * values[flat];
  }
  return out;
}

double measured_epsilon(const AlmostKaehlerModel& M, const std::vector<ParamSubmanifold>& members,
                        const SolverConfig& cfg) {
  double eps = 0.0;
  for (size_t i = 0; i < members.size(); ++i)
    for (size_t j = 0; j < members.size(); ++j) {
      if (i == j) continue;
      eps = std::max(eps, c1_distance(M, members[i], members[j], cfg).d1);
    }
  return eps;
}

}  // namespace geomavg::sub
