#include "geomavg/kernel.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace geomavg::kernel {

namespace {

double fd_step(const AlmostKaehlerModel& M, const SolverConfig& cfg) {
  return cfg.metric_h * M.fd_scale;
}

// Geodesic acceleration a^k = -Gamma^k_ij v^i v^j.
Vec geodesic_acc(const std::vector<Mat>& gamma, const Vec& v) {
  const int m = static_cast<int>(gamma.size());
  Vec a(m);
  for (int k = 0; k < m; ++k) a[k] = -v.dot(gamma[k] * v);
  return a;
}

// Covariant correction (Gamma(v) u)^k = Gamma^k_ij v^i u^j.
Vec gamma_apply(const std::vector<Mat>& gamma, const Vec& v, const Vec& u) {
  const int m = static_cast<int>(gamma.size());
  Vec r(m);
  for (int k = 0; k < m; ++k) r[k] = v.dot(gamma[k] * u);
  return r;
}

int pick_steps(const AlmostKaehlerModel& M, const Vec& p, const Vec& v, int n_steps,
               const SolverConfig& cfg) {
  if (n_steps > 0) return n_steps;
  const double len = std::sqrt(std::max(0.0, v.dot(M.g(p) * v)));
  const int by_len = static_cast<int>(std::ceil(cfg.exp_steps_per_unit * len));
  return std::max(cfg.exp_min_steps, by_len);
}

}  // namespace

std::vector<Mat> metric_derivatives(const AlmostKaehlerModel& M, const Vec& x,
                                    const SolverConfig& cfg) {
  if (M.metric_jac) return M.metric_jac(x);
  const int m = M.dim;
  const double h = fd_step(M, cfg);
  std::vector<Mat> dg(m);
  Vec xp = x, xm = x;
  for (int k = 0; k < m; ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    dg[k] = (M.metric(xp) - M.metric(xm)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return dg;
}

std::vector<Mat> christoffels(const AlmostKaehlerModel& M, const Vec& x,
                              const SolverConfig& cfg) {
  const int m = M.dim;
  const std::vector<Mat> dg = metric_derivatives(M, x, cfg);
  bool all_zero = true;
  for (const Mat& d : dg)
    if (d.squaredNorm() != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return std::vector<Mat>(m, Mat::Zero(m, m));
  const Mat G = M.g(x);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) fail(Err::Degenerate, "metric not positive definite");

  // lower-index symbols: L[l](i,j) = (d_i g_lj + d_j g_li - d_l g_ij) / 2
  std::vector<Mat> gamma(m, Mat::Zero(m, m));
  Mat rhs(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      for (int l = 0; l < m; ++l) rhs(l, 0) = 0.5 * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
      Vec col = llt.solve(rhs.col(0));
      for (int k = 0; k < m; ++k) {
        gamma[k](i, j) = col[k];
        gamma[k](j, i) = col[k];
      }
    }
  }
  return gamma;
}

Mat acs_at(const AlmostKaehlerModel& M, const Vec& x, double tol) {
  const Mat G = M.g(x);
  const Mat W = M.omega(x);
  Eigen::PartialPivLU<Mat> lu(W);
  const Mat I = lu.solve(G);
  const double defect = (I * I + Mat::Identity(M.dim, M.dim)).norm();
  if (!(defect <= tol))
    fail(Err::NotCompatible, "pairing and metric are not compatible (|I^2+Id| = " +
                                 std::to_string(defect) + ")");
  return I;
}

Mat canonical_compatible_metric(const Mat& g_tilde, const Mat& W) {
  const int m = static_cast<int>(g_tilde.rows());
  if (W.rows() != m || W.cols() != m) fail(Err::DimensionMismatch, "pairing size mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es_g(0.5 * (g_tilde + g_tilde.transpose()));
  if (es_g.info() != Eigen::Success || es_g.eigenvalues().minCoeff() <= 0.0)
    fail(Err::Degenerate, "input metric not positive definite");
  const Vec ev = es_g.eigenvalues();
  const Mat U = es_g.eigenvectors();
  const Mat g_half = U * ev.cwiseSqrt().asDiagonal() * U.transpose();
  const Mat g_half_inv = U * ev.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose();

  // S = -W g^{-1} W is SPD exactly when W is nondegenerate.
  const Mat g_inv = U * ev.cwiseInverse().asDiagonal() * U.transpose();
  const Mat S = -W * g_inv * W;
  const Mat Msym = g_half_inv * S * g_half_inv;
  Eigen::SelfAdjointEigenSolver<Mat> es_m(0.5 * (Msym + Msym.transpose()));
  if (es_m.info() != Eigen::Success || es_m.eigenvalues().minCoeff() <= 1e-14)
    fail(Err::Degenerate, "pairing degenerate: polar factor has non-positive spectrum");
  const Mat m_half =
      es_m.eigenvectors() * es_m.eigenvalues().cwiseSqrt().asDiagonal() * es_m.eigenvectors().transpose();
  return g_half * m_half * g_half;
}

GeodesicPath exp_map(const AlmostKaehlerModel& M, const Vec& p, const Vec& v, int n_steps,
                     const SolverConfig& cfg) {
  const int m = M.dim;
  if (v.size() != m || p.size() != m) fail(Err::DimensionMismatch, "exp_map operand size");
  const int n = pick_steps(M, p, v, n_steps, cfg);
  const double h = 1.0 / n;

  GeodesicPath path;
  path.times.reserve(n + 1);
  path.points.reserve(n + 1);
  path.velocities.reserve(n + 1);
  path.length = std::sqrt(std::max(0.0, v.dot(M.g(p) * v)));

  Vec x = p, w = v;
  path.times.push_back(0.0);
  path.points.push_back(x);
  path.velocities.push_back(w);

  for (int s = 0; s < n; ++s) {
    const auto f = [&](const Vec& xs, const Vec& ws, Vec& dx, Vec& dw) {
      dx = ws;
      dw = geodesic_acc(christoffels(M, xs, cfg), ws);
    };
    Vec k1x(m), k1w(m), k2x(m), k2w(m), k3x(m), k3w(m), k4x(m), k4w(m);
    f(x, w, k1x, k1w);
    f(x + 0.5 * h * k1x, w + 0.5 * h * k1w, k2x, k2w);
    f(x + 0.5 * h * k2x, w + 0.5 * h * k2w, k3x, k3w);
    f(x + h * k3x, w + h * k3w, k4x, k4w);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    if (!M.chart_domain.contains(x))
      fail(Err::LeftDomain, "geodesic left the chart of '" + M.name + "'");
    path.times.push_back((s + 1) * h);
    path.points.push_back(x);
    path.velocities.push_back(w);
  }
  return path;
}

Vec exp_point(const AlmostKaehlerModel& M, const Vec& p, const Vec& v, int n_steps,
              const SolverConfig& cfg) {
  const int m = M.dim;
  const int n = pick_steps(M, p, v, n_steps, cfg);
  const double h = 1.0 / n;
  Vec x = p, w = v;
  for (int s = 0; s < n; ++s) {
    const auto acc = [&](const Vec& xs, const Vec& ws) {
      return geodesic_acc(christoffels(M, xs, cfg), ws);
    };
    Vec k1x = w, k1w = acc(x, w);
    Vec k2x = w + 0.5 * h * k1w, k2w = acc(x + 0.5 * h * k1x, k2x);
    Vec k3x = w + 0.5 * h * k2w, k3w = acc(x + 0.5 * h * k2x, k3x);
    Vec k4x = w + h * k3w, k4w = acc(x + h * k3x, k4x);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    if (!M.chart_domain.contains(x))
      fail(Err::LeftDomain, "geodesic left the chart of '" + M.name + "'");
  }
  (void)m;
  return x;
}

Vec log_map(const AlmostKaehlerModel& M, const Vec& p, const Vec& q, const SolverConfig& cfg,
            const Vec* warm_start) {
  const int m = M.dim;
  const Mat Gp = M.g(p);
  const auto glen = [&](const Vec& u) { return std::sqrt(std::max(0.0, u.dot(Gp * u))); };

  const auto attempt = [&](Vec v) -> Vec {
    // Automatic step selection jumps at discrete thresholds of |v|, so
    // v -> exp_p(v) is discontinuous across a threshold and a tolerance
    // below the integrator gap can never be met there. Solve against a
    // frozen count, re-freezing when the solution lands in another regime.
    int n_frozen = pick_steps(M, p, v, -1, cfg);
    for (int round = 0; round < 3; ++round) {
      const auto residual = [&](const Vec& vv) -> Vec {
        return q - exp_point(M, p, vv, n_frozen, cfg);
      };

      // Chord phase: exp is a near-identity perturbation of chart translation
      // at tube scales, so the plain update v += r contracts quickly.
      Vec r = residual(v);
      double rn = r.norm();
      int used = 0;
      for (; used < cfg.log_max_iter && rn > cfg.log_tol; ++used) {
        const Vec v_try = v + r;
        if (glen(v_try) > M.injectivity_guard)
          fail(Err::NoConvergence, "geodesic inversion exceeded the injectivity guard");
        const Vec r_try = residual(v_try);
        if (r_try.norm() > 0.9 * rn) break;  // stalled; switch to Newton
        v = v_try;
        r = r_try;
        rn = r.norm();
      }

      // Damped Newton with finite-difference jacobian of v -> exp_p(v).
      while (rn > cfg.log_tol) {
        if (used >= cfg.log_max_iter)
          fail(Err::NoConvergence, "geodesic inversion: no convergence in iteration budget");
        const double h = 1e-6 * (1.0 + v.norm());
        Mat J(m, m);
        for (int k = 0; k < m; ++k) {
          Vec dv = Vec::Zero(m);
          dv[k] = h;
          J.col(k) =
              (exp_point(M, p, v + dv, n_frozen, cfg) - exp_point(M, p, v - dv, n_frozen, cfg)) /
              (2.0 * h);
        }
        const Vec step = J.partialPivLu().solve(r);
        double lam = 1.0;
        bool accepted = false;
        for (int half = 0; half < 8; ++half) {
          const Vec v_try = v + lam * step;
          if (glen(v_try) <= M.injectivity_guard) {
            const Vec r_try = residual(v_try);
            if (r_try.norm() < rn) {
              v = v_try;
              r = r_try;
              rn = r.norm();
              accepted = true;
              break;
            }
          }
          lam *= 0.5;
        }
        ++used;
        if (!accepted)
          fail(Err::NoConvergence, "geodesic inversion stalled (target may be out of range)");
      }

      const int n_next = pick_steps(M, p, v, -1, cfg);
      if (n_next == n_frozen) break;
      n_frozen = n_next;
    }
    return v;
  };

  if (warm_start) {
    try {
      return attempt(*warm_start);
    } catch (const GeomError&) {
      // A stale warm vector can start the solve in the wrong basin; fall
      // through to the cold initialization before giving up.
    }
  }
  return attempt(Vec(q - p));
}

double distance(const AlmostKaehlerModel& M, const Vec& p, const Vec& q,
                const SolverConfig& cfg) {
  if ((q - p).norm() == 0.0) return 0.0;
  const Vec v = log_map(M, p, q, cfg);
  return std::sqrt(std::max(0.0, v.dot(M.g(p) * v)));
}

Mat transport_basis_along_geodesic(const AlmostKaehlerModel& M, const Vec& p, const Vec& w,
                                   const Mat& basis, int n_steps, const SolverConfig& cfg) {
  const int m = M.dim;
  const int n = pick_steps(M, p, w, n_steps, cfg);
  const double h = 1.0 / n;
  Vec x = p, vel = w;
  Mat V = basis;
  for (int s = 0; s < n; ++s) {
    const auto f = [&](const Vec& xs, const Vec& vs, const Mat& Vs, Vec& dx, Vec& dv, Mat& dV) {
      const auto gamma = christoffels(M, xs, cfg);
      dx = vs;
      dv = geodesic_acc(gamma, vs);
      dV.resize(m, V.cols());
      for (int c = 0; c < V.cols(); ++c) dV.col(c) = -gamma_apply(gamma, vs, Vs.col(c));
    };
    Vec k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
    Mat k1V, k2V, k3V, k4V;
    f(x, vel, V, k1x, k1v, k1V);
    f(x + 0.5 * h * k1x, vel + 0.5 * h * k1v, V + 0.5 * h * k1V, k2x, k2v, k2V);
    f(x + 0.5 * h * k2x, vel + 0.5 * h * k2v, V + 0.5 * h * k2V, k3x, k3v, k3V);
    f(x + h * k3x, vel + h * k3v, V + h * k3V, k4x, k4v, k4V);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    vel += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    V += (h / 6.0) * (k1V + 2.0 * k2V + 2.0 * k3V + k4V);
  }
  return V;
}

Vec transport_along_geodesic(const AlmostKaehlerModel& M, const Vec& p, const Vec& w,
                             const Vec& v, int n_steps, const SolverConfig& cfg) {
  return transport_basis_along_geodesic(M, p, w, v, n_steps, cfg);
}

Mat transport_along_curve(const AlmostKaehlerModel& M, const std::vector<Vec>& points,
                          const Mat& basis, const SolverConfig& cfg) {
  Mat V = basis;
  const int m = M.dim;
  for (size_t s = 0; s + 1 < points.size(); ++s) {
    const Vec vel = points[s + 1] - points[s];  // segment parametrized on [0,1]
    if (vel.norm() == 0.0) continue;
    const int sub = 2;
    const double h = 1.0 / sub;
    for (int j = 0; j < sub; ++j) {
      const auto f = [&](double t, const Mat& Vs, Mat& dV) {
        const Vec xs = points[s] + t * vel;
        const auto gamma = christoffels(M, xs, cfg);
        dV.resize(m, V.cols());
        for (int c = 0; c < V.cols(); ++c) dV.col(c) = -gamma_apply(gamma, vel, Vs.col(c));
      };
      const double t0 = j * h;
      Mat k1, k2, k3, k4;
      f(t0, V, k1);
      f(t0 + 0.5 * h, V + 0.5 * h * k1, k2);
      f(t0 + 0.5 * h, V + 0.5 * h * k2, k3);
      f(t0 + h, V + h * k3, k4);
      V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return V;
}

Vec curvature_operator(const AlmostKaehlerModel& M, const Vec& x, const Vec& u, const Vec& v,
                       const Vec& w, const SolverConfig& cfg) {
  const int m = M.dim;
  const double h = fd_step(M, cfg);
  // dG[i][l](j,k) = d_i Gamma^l_jk
  std::vector<std::vector<Mat>> dG(m);
  Vec xs = x;
  for (int i = 0; i < m; ++i) {
    xs[i] = x[i] + h;
    auto gp = christoffels(M, xs, cfg);
    xs[i] = x[i] - h;
    auto gm = christoffels(M, xs, cfg);
    xs[i] = x[i];
    dG[i].resize(m);
    for (int l = 0; l < m; ++l) dG[i][l] = (gp[l] - gm[l]) / (2.0 * h);
  }
  const auto gamma = christoffels(M, x, cfg);

  Vec out = Vec::Zero(m);
  const Vec gw_v = gamma_apply(gamma, v, w);  // Gamma^m_jk v^j w^k
  const Vec gw_u = gamma_apply(gamma, u, w);
  for (int l = 0; l < m; ++l) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const Vec Aiw = dG[i][l] * w;  // d_i Gamma^l_jk w^k
      acc += u[i] * v.dot(Aiw) - v[i] * u.dot(Aiw);
    }
    acc += u.dot(gamma[l] * gw_v) - v.dot(gamma[l] * gw_u);
    out[l] = acc;
  }
  return out;
}

double sectional_curvature(const AlmostKaehlerModel& M, const Vec& x, const Vec& u, const Vec& v,
                           const SolverConfig& cfg) {
  const Mat G = M.g(x);
  const Vec Ruvv = curvature_operator(M, x, u, v, v, cfg);
  const double num = Ruvv.dot(G * u);
  const double uu = u.dot(G * u), vv = v.dot(G * v), uv = u.dot(G * v);
  const double den = uu * vv - uv * uv;
  if (den <= 1e-14) fail(Err::Degenerate, "sectional curvature of a degenerate plane");
  return num / den;
}

JacobiResult jacobi_field(const AlmostKaehlerModel& M, const Vec& p, const Vec& w, const Vec& J0,
                          const Vec& J0dot, double t_eval, const SolverConfig& cfg) {
  const int m = M.dim;
  const double wlen = std::sqrt(std::max(0.0, w.dot(M.g(p) * w)));
  const int n = std::max(cfg.exp_min_steps,
                         static_cast<int>(std::ceil(cfg.exp_steps_per_unit * wlen * std::abs(t_eval))));
  const double h = t_eval / n;

  Vec x = p, vel = w, J = J0, Wc = J0dot;  // Wc = covariant derivative of J
  for (int s = 0; s < n; ++s) {
    const auto f = [&](const Vec& xs, const Vec& vs, const Vec& Js, const Vec& Ws, Vec& dx,
                       Vec& dv, Vec& dJ, Vec& dW) {
      const auto gamma = christoffels(M, xs, cfg);
      dx = vs;
      dv = geodesic_acc(gamma, vs);
      dJ = Ws - gamma_apply(gamma, vs, Js);
      dW = -curvature_operator(M, xs, Js, vs, vs, cfg) - gamma_apply(gamma, vs, Ws);
    };
    Vec k1x(m), k1v(m), k1J(m), k1W(m), k2x(m), k2v(m), k2J(m), k2W(m);
    Vec k3x(m), k3v(m), k3J(m), k3W(m), k4x(m), k4v(m), k4J(m), k4W(m);
    f(x, vel, J, Wc, k1x, k1v, k1J, k1W);
    f(x + 0.5 * h * k1x, vel + 0.5 * h * k1v, J + 0.5 * h * k1J, Wc + 0.5 * h * k1W, k2x, k2v, k2J, k2W);
    f(x + 0.5 * h * k2x, vel + 0.5 * h * k2v, J + 0.5 * h * k2J, Wc + 0.5 * h * k2W, k3x, k3v, k3J, k3W);
    f(x + h * k3x, vel + h * k3v, J + h * k3J, Wc + h * k3W, k4x, k4v, k4J, k4W);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    vel += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    J += (h / 6.0) * (k1J + 2.0 * k2J + 2.0 * k3J + k4J);
    Wc += (h / 6.0) * (k1W + 2.0 * k2W + 2.0 * k3W + k4W);
  }
  return JacobiResult{J, Wc, x, vel};
}

Mat g_orthonormalize(const Mat& G, const Mat& cols) {
  Mat Q = cols;
  const int k = static_cast<int>(cols.cols());
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < j; ++i) Q.col(j) -= Q.col(i).dot(G * Q.col(j)) * Q.col(i);
      const double n2 = Q.col(j).dot(G * Q.col(j));
      if (n2 < 1e-24) fail(Err::Degenerate, "orthonormalization of a rank-deficient frame");
      Q.col(j) /= std::sqrt(n2);
    }
  }
  return Q;
}

Mat g_orthonormal_complement(const Mat& G, const Mat& frame) {
  const int m = static_cast<int>(G.rows());
  const int k = static_cast<int>(frame.cols());
  Mat out(m, m - k);
  int got = 0;
  // Fixed-order axis sweep with a coarse stability threshold keeps the
  // selection locally constant along smooth frame families.
  for (int axis = 0; axis < m && got < m - k; ++axis) {
    Vec cand = Vec::Zero(m);
    cand[axis] = 1.0;
    for (int i = 0; i < k; ++i) cand -= frame.col(i).dot(G * cand) * frame.col(i);
    for (int i = 0; i < got; ++i) cand -= out.col(i).dot(G * cand) * out.col(i);
    const double n2 = cand.dot(G * cand);
    if (n2 < 0.01) continue;
    out.col(got++) = cand / std::sqrt(n2);
  }
  for (int axis = 0; axis < m && got < m - k; ++axis) {  // fallback, lower bar
    Vec cand = Vec::Zero(m);
    cand[axis] = 1.0;
    for (int i = 0; i < k; ++i) cand -= frame.col(i).dot(G * cand) * frame.col(i);
    for (int i = 0; i < got; ++i) cand -= out.col(i).dot(G * cand) * out.col(i);
    const double n2 = cand.dot(G * cand);
    if (n2 < 1e-20) continue;
    out.col(got++) = cand / std::sqrt(n2);
  }
  if (got != m - k) fail(Err::Degenerate, "could not complete frame to a basis");
  // polish with a second orthogonalization pass
  Mat joint(m, m);
  joint.leftCols(k) = frame;
  joint.rightCols(m - k) = out;
  return g_orthonormalize(G, joint).rightCols(m - k);
}

double subspace_distance(const AlmostKaehlerModel& M, const SubspaceBasis& F,
                         const SubspaceBasis& Fp) {
  if (F.dim() != Fp.dim()) fail(Err::DimensionMismatch, "subspace dimensions differ");
  if ((F.base - Fp.base).norm() > 1e-6)
    fail(Err::DimensionMismatch, "subspace distance requires a common base point");
  const Mat G = M.g(F.base);
  const Mat A = g_orthonormalize(G, F.columns);
  const Mat B = g_orthonormalize(G, Fp.columns);
  // Largest principal angle via the g-orthogonal residual of B against
  // span(A): its g-singular values are sin(theta_i). Stable near zero, where
  // the cosine formulation amplifies roundoff through acos.
  const Mat R = B - A * (A.transpose() * G * B);
  Eigen::SelfAdjointEigenSolver<Mat> es(R.transpose() * G * R);
  const double smax = std::sqrt(std::clamp(es.eigenvalues().maxCoeff(), 0.0, 1.0));
  if (smax <= 1e-14) return 0.0;  // identical up to roundoff
  return std::asin(smax);
}

std::vector<Mat> nabla_omega(const AlmostKaehlerModel& M, const Vec& x, const SolverConfig& cfg) {
  const int m = M.dim;
  const double h = fd_step(M, cfg);
  const auto gamma = christoffels(M, x, cfg);
  std::vector<Mat> T(m);
  Vec xs = x;
  for (int k = 0; k < m; ++k) {
    xs[k] = x[k] + h;
    const Mat wp = M.omega(xs);
    xs[k] = x[k] - h;
    const Mat wm = M.omega(xs);
    xs[k] = x[k];
    T[k] = (wp - wm) / (2.0 * h);
  }
  const Mat W = M.omega(x);
  for (int k = 0; k < m; ++k) {
    Mat corr = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int l = 0; l < m; ++l) acc += gamma[l](k, i) * W(l, j) + gamma[l](k, j) * W(i, l);
        corr(i, j) = acc;
      }
    T[k] -= corr;
  }
  return T;
}

double norm_g(const AlmostKaehlerModel& M, const Vec& x, const Vec& X) {
  return std::sqrt(std::max(0.0, X.dot(M.g(x) * X)));
}

double nabla_omega_sup(const AlmostKaehlerModel& M, const std::vector<Vec>& samples,
                       const SolverConfig& cfg) {
  const int m = M.dim;
  // Deterministic direction set: frame axes, pairwise mixes, and a fixed
  // pseudo-random batch (independent of cfg.seed so the estimator is pure).
  std::vector<Vec> dirs;
  for (int a = 0; a < m; ++a) {
    Vec d = Vec::Zero(m);
    d[a] = 1.0;
    dirs.push_back(d);
  }
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      Vec d = Vec::Zero(m);
      d[a] = d[b] = 1.0;
      dirs.push_back(d / d.norm());
      d[b] = -1.0;
      dirs.push_back(d / d.norm());
    }
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  const auto next_unit = [&]() {
    Vec d(m);
    for (int i = 0; i < m; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      d[i] = static_cast<double>(static_cast<std::int64_t>(state >> 11)) / 4.6116860184273879e18;
    }
    return Vec(d / d.norm());
  };
  for (int r = 0; r < 4 * m; ++r) dirs.push_back(next_unit());

  double sup = 0.0;
  for (const Vec& x : samples) {
    const auto T = nabla_omega(M, x, cfg);
    const Mat G = M.g(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Mat E = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
    // orthonormal-frame components: That[a](b,c)
    std::vector<Mat> That(m, Mat::Zero(m, m));
    for (int a = 0; a < m; ++a) {
      Mat acc = Mat::Zero(m, m);
      for (int k = 0; k < m; ++k) acc += E(k, a) * T[k];
      That[a] = E.transpose() * acc * E;
    }
    for (const Vec& d : dirs) {
      Mat Md = Mat::Zero(m, m);
      for (int a = 0; a < m; ++a) Md += d[a] * That[a];
      sup = std::max(sup, Eigen::JacobiSVD<Mat>(Md).singularValues()(0));
    }
  }
  return sup;
}

}  // namespace geomavg::kernel
