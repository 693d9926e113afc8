#include "geomavg/catalog.hpp"

#include <cmath>
#include <complex>
#include <random>

namespace geomavg::catalog {

namespace {

Mat standard_pairing(int m) {
  // omega = sum_i dx_i ^ dx_{i+k}, k = m/2: pairs (i, i+k).
  const int k = m / 2;
  Mat W = Mat::Zero(m, m);
  for (int i = 0; i < k; ++i) {
    W(i, i + k) = 1.0;
    W(i + k, i) = -1.0;
  }
  return W;
}

std::vector<Mat> zero_jac(int m) { return std::vector<Mat>(m, Mat::Zero(m, m)); }

}  // namespace

AlmostKaehlerModel flat_model(int m, bool with_pairing) {
  if (m < 1) fail(Err::ConfigError, "flat model needs dim >= 1");
  AlmostKaehlerModel M;
  M.dim = m;
  M.name = "flat";
  M.chart_domain = Box::cube(m, -50.0, 50.0);
  M.metric = [m](const Vec&) { return Mat::Identity(m, m); };
  M.metric_jac = [m](const Vec&) { return zero_jac(m); };
  if (with_pairing && m % 2 == 0) {
    const Mat W = standard_pairing(m);
    M.symplectic = [W](const Vec&) { return W; };
  }
  M.injectivity_guard = 1e9;
  M.curvature_bound_hint = 0.0;
  return M;
}

AlmostKaehlerModel sphere_model(double radius) {
  if (radius <= 0.0) fail(Err::ConfigError, "sphere radius must be positive");
  AlmostKaehlerModel M;
  M.dim = 2;
  M.name = "sphere2";
  M.chart_domain = Box::cube(2, -2.2, 2.2);  // chart of the open lower-|u| hemisphere side
  const double R2 = radius * radius;
  M.metric = [R2](const Vec& u) {
    const double c = 4.0 * R2 / std::pow(1.0 + u.squaredNorm(), 2);
    return Mat(c * Mat::Identity(2, 2));
  };
  M.metric_jac = [R2](const Vec& u) {
    const double s = 1.0 + u.squaredNorm();
    const double dc = -16.0 * R2 / std::pow(s, 3);
    std::vector<Mat> dg(2);
    for (int k = 0; k < 2; ++k) dg[k] = dc * u[k] * Mat::Identity(2, 2);
    return dg;
  };
  M.symplectic = [R2](const Vec& u) {
    const double c = 4.0 * R2 / std::pow(1.0 + u.squaredNorm(), 2);
    Mat W(2, 2);
    W << 0.0, c, -c, 0.0;
    return W;
  };
  M.injectivity_guard = M_PI * radius - 0.05;
  M.curvature_bound_hint = 1.0 / R2;
  return M;
}

AlmostKaehlerModel torus_model() {
  AlmostKaehlerModel M = flat_model(2, true);
  M.name = "torus2";
  M.chart_domain.lo = Vec::Constant(2, -4.0);
  M.chart_domain.hi = Vec::Constant(2, 2.0 * M_PI + 4.0);
  return M;
}

AlmostKaehlerModel perturbed_model(double a) {
  if (std::abs(a) >= 0.5) fail(Err::ConfigError, "perturbation amplitude too large");
  AlmostKaehlerModel M;
  M.dim = 4;
  M.name = "perturbed_r4";
  M.chart_domain = Box::cube(4, -3.0, 3.0);
  // The raw metric (1 + a bump) Id on the pairing-plane axes is not
  // compatible with the constant pairing; its canonical compatible partner
  // has the closed form diag(sqrt(c) I2, I2 / sqrt(c)).
  const auto conf = [a](const Vec& x) { return 1.0 + a * std::exp(-0.5 * x.squaredNorm()); };
  M.metric = [conf](const Vec& x) {
    const double c = conf(x);
    Vec d(4);
    const double sc = std::sqrt(c);
    d << sc, sc, 1.0 / sc, 1.0 / sc;
    return Mat(d.asDiagonal());
  };
  M.metric_jac = [conf, a](const Vec& x) {
    const double c = conf(x);
    const double sc = std::sqrt(c);
    std::vector<Mat> dg(4, Mat::Zero(4, 4));
    for (int k = 0; k < 4; ++k) {
      const double dck = -x[k] * (c - 1.0);  // d_k c for the Gaussian bump
      (void)a;
      const double d_sc = 0.5 * dck / sc;
      const double d_isc = -0.5 * dck / (sc * c);
      Vec d(4);
      d << d_sc, d_sc, d_isc, d_isc;
      dg[k] = d.asDiagonal();
    }
    return dg;
  };
  const Mat W = standard_pairing(4);
  M.symplectic = [W](const Vec&) { return W; };
  M.injectivity_guard = 10.0;
  M.curvature_bound_hint = 0.25;
  return M;
}

AlmostKaehlerModel make_model(const std::string& id, const std::vector<double>& params) {
  if (id == "flat") {
    if (params.empty()) fail(Err::ConfigError, "flat: missing dim parameter");
    return flat_model(static_cast<int>(params[0]));
  }
  if (id == "sphere2") return sphere_model(params.empty() ? 1.0 : params[0]);
  if (id == "torus2") return torus_model();
  if (id == "perturbed_r4") return perturbed_model(params.empty() ? 0.05 : params[0]);
  fail(Err::ConfigError, "unknown manifold id '" + id + "'");
}

// ---- submanifolds -------------------------------------------------------

sub::ParamSubmanifold linear_graph(int ambient_dim, const Mat& A, const Vec& offset,
                                   const Box& param_box, const std::vector<int>& res) {
  const int n = param_box.dim();
  if (A.cols() != n || A.rows() + n != ambient_dim || offset.size() != A.rows())
    fail(Err::DimensionMismatch, "linear_graph: inconsistent sizes");
  sub::ParamSubmanifold s;
  s.name = "linear_graph";
  s.ambient_dim = ambient_dim;
  s.dim = n;
  s.param_domain = param_box;
  s.grid_res = res;
  const int cod = ambient_dim - n;
  s.chart = [n, cod, A, offset](const Vec& u) {
    Vec x(n + cod);
    x.head(n) = u;
    x.tail(cod) = A * u + offset;
    return x;
  };
  s.chart_jac = [n, cod, A](const Vec&) {
    Mat J(n + cod, n);
    J.topRows(n) = Mat::Identity(n, n);
    J.bottomRows(cod) = A;
    return J;
  };
  s.tube_radius = 25.0;
  return s;
}

sub::ParamSubmanifold affine_lagrangian(const Vec& c) {
  if (c.size() != 2) fail(Err::DimensionMismatch, "affine_lagrangian: offset must be 2-dim");
  sub::ParamSubmanifold s =
      linear_graph(4, Mat::Zero(2, 2), c, Box::cube(2, -2.0, 2.0), {9, 9});
  s.name = "affine_lagrangian";
  return s;
}

sub::ParamSubmanifold circle_flat(double radius, const Vec& center, int res) {
  if (radius <= 0.0) fail(Err::ConfigError, "circle radius must be positive");
  sub::ParamSubmanifold s;
  s.name = "circle_flat";
  s.ambient_dim = 2;
  s.dim = 1;
  s.param_domain.lo = Vec::Constant(1, 0.0);
  s.param_domain.hi = Vec::Constant(1, 2.0 * M_PI);
  s.grid_res = {res};
  s.periodic = {true};
  s.chart = [radius, center](const Vec& u) {
    Vec x(2);
    x << center[0] + radius * std::cos(u[0]), center[1] + radius * std::sin(u[0]);
    return x;
  };
  s.chart_jac = [radius](const Vec& u) {
    Mat J(2, 1);
    J << -radius * std::sin(u[0]), radius * std::cos(u[0]);
    return J;
  };
  s.tube_radius = 0.9 * radius;
  return s;
}

sub::ParamSubmanifold sphere_cap_curve(double theta0, int res, double radius) {
  if (theta0 <= 0.0 || theta0 >= M_PI) fail(Err::ConfigError, "latitude angle out of (0, pi)");
  // Stereographic image of the polar-angle-theta0 circle: radius tan(theta0/2).
  const double rho = std::tan(0.5 * theta0);
  sub::ParamSubmanifold s = circle_flat(rho, Vec::Zero(2), res);
  s.name = "sphere_cap_curve";
  // Normal injectivity on the sphere: the circle's focal points are the poles,
  // at geodesic distance radius*min(theta0, pi - theta0).
  s.tube_radius = 0.95 * radius * std::min(theta0, M_PI - theta0);
  return s;
}

sub::ParamSubmanifold lagrangian_torus_r4(double r1, double r2, int res) {
  sub::ParamSubmanifold s;
  s.name = "lagrangian_torus_r4";
  s.ambient_dim = 4;
  s.dim = 2;
  s.param_domain = Box::cube(2, 0.0, 2.0 * M_PI);
  s.grid_res = {res, res};
  s.periodic = {true, true};
  s.chart = [r1, r2](const Vec& u) {
    Vec x(4);
    // pairing planes (x1, x3) and (x2, x4)
    x << r1 * std::cos(u[0]), r2 * std::cos(u[1]), r1 * std::sin(u[0]), r2 * std::sin(u[1]);
    return x;
  };
  s.chart_jac = [r1, r2](const Vec& u) {
    Mat J = Mat::Zero(4, 2);
    J(0, 0) = -r1 * std::sin(u[0]);
    J(2, 0) = r1 * std::cos(u[0]);
    J(1, 1) = -r2 * std::sin(u[1]);
    J(3, 1) = r2 * std::cos(u[1]);
    return J;
  };
  s.tube_radius = 0.9 * std::min(r1, r2);
  return s;
}

sub::ParamSubmanifold perturbed_torus(double r1, double r2, double a1, double a2, int res,
                                      double phase1, double phase2) {
  sub::ParamSubmanifold s;
  s.name = "perturbed_torus";
  s.ambient_dim = 4;
  s.dim = 2;
  s.param_domain = Box::cube(2, 0.0, 2.0 * M_PI);
  s.grid_res = {res, res};
  s.periodic = {true, true};
  // Action-angle graph of the closed 1-form dF, F = a1 sin(th1 - phase1)
  // + a2 cos(th2 - phase2): actions I_i = r_i^2/2 + dF/dth_i stay positive for
  // small a, and the image is exactly Lagrangian for the standard pairing.
  const auto action = [=](const Vec& u) {
    Vec I(2);
    I << 0.5 * r1 * r1 + a1 * std::cos(u[0] - phase1),
        0.5 * r2 * r2 - a2 * std::sin(u[1] - phase2);
    if (I[0] <= 0.0 || I[1] <= 0.0) fail(Err::DomainError, "perturbed torus: action <= 0");
    return I;
  };
  s.chart = [action](const Vec& u) {
    const Vec I = action(u);
    const double s1 = std::sqrt(2.0 * I[0]), s2 = std::sqrt(2.0 * I[1]);
    Vec x(4);
    x << s1 * std::cos(u[0]), s2 * std::cos(u[1]), s1 * std::sin(u[0]), s2 * std::sin(u[1]);
    return x;
  };
  s.tube_radius = 0.45 * std::min(r1, r2);
  return s;
}

sub::ParamSubmanifold make_submanifold(const std::string& id, const std::vector<double>& params,
                                       int ambient_dim) {
  const auto need = [&](size_t k) {
    if (params.size() < k) fail(Err::ConfigError, id + ": missing parameters");
  };
  if (id == "affine_lagrangian") {
    need(2);
    Vec c(2);
    c << params[0], params[1];
    return affine_lagrangian(c);
  }
  if (id == "circle_flat") {
    need(1);
    Vec c = Vec::Zero(2);
    if (params.size() >= 3) c << params[1], params[2];
    return circle_flat(params[0], c, params.size() >= 4 ? static_cast<int>(params[3]) : 48);
  }
  if (id == "sphere_cap_curve") {
    need(1);
    return sphere_cap_curve(params[0], params.size() >= 2 ? static_cast<int>(params[1]) : 48);
  }
  if (id == "lagrangian_torus_r4") {
    need(2);
    return lagrangian_torus_r4(params[0], params[1],
                               params.size() >= 3 ? static_cast<int>(params[2]) : 24);
  }
  if (id == "perturbed_torus") {
    need(4);
    return perturbed_torus(params[0], params[1], params[2], params[3],
                           params.size() >= 5 ? static_cast<int>(params[4]) : 24,
                           params.size() >= 6 ? params[5] : 0.0,
                           params.size() >= 7 ? params[6] : 0.0);
  }
  if (id == "linear_graph") {
    // params: n, then row-major A ((m-n) x n), then offset (m-n), then res per axis
    need(1);
    const int n = static_cast<int>(params[0]);
    const int cod = ambient_dim - n;
    need(1 + cod * n + cod + n);
    Mat A(cod, n);
    size_t k = 1;
    for (int i = 0; i < cod; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = params[k++];
    Vec off(cod);
    for (int i = 0; i < cod; ++i) off[i] = params[k++];
    std::vector<int> res(n);
    for (int i = 0; i < n; ++i) res[i] = static_cast<int>(params[k++]);
    return linear_graph(ambient_dim, A, off, Box::cube(n, -2.0, 2.0), res);
  }
  fail(Err::ConfigError, "unknown submanifold id '" + id + "'");
}

// ---- isometries ---------------------------------------------------------

Isometry Isometry::inverse() const {
  Isometry inv;
  inv.label = label + "_inv";
  inv.linear = linear.inverse();
  inv.offset = -(inv.linear * offset);
  inv.symplectic = symplectic;
  return inv;
}

Isometry flat_translation(const Vec& t) {
  Isometry iso;
  iso.label = "flat_translation";
  iso.linear = Mat::Identity(t.size(), t.size());
  iso.offset = t;
  iso.symplectic = true;
  return iso;
}

Isometry diag_circle_rotation(double theta) {
  Isometry iso;
  iso.label = "diag_circle_rotation";
  const double c = std::cos(theta), s = std::sin(theta);
  Mat R = Mat::Zero(4, 4);
  // rotates the (x1, x3) and (x2, x4) pairing planes simultaneously
  R(0, 0) = c;
  R(0, 2) = -s;
  R(2, 0) = s;
  R(2, 2) = c;
  R(1, 1) = c;
  R(1, 3) = -s;
  R(3, 1) = s;
  R(3, 3) = c;
  iso.linear = R;
  iso.offset = Vec::Zero(4);
  iso.symplectic = true;
  return iso;
}

Isometry sphere_rotation_z(double theta) {
  Isometry iso;
  iso.label = "sphere_rotation_z";
  const double c = std::cos(theta), s = std::sin(theta);
  Mat R(2, 2);
  R << c, -s, s, c;
  iso.linear = R;
  iso.offset = Vec::Zero(2);
  iso.symplectic = true;  // rotations preserve the conformal area form
  return iso;
}

Isometry random_u2(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Matrix2cd Z;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) Z(i, j) = std::complex<double>(gauss(rng), gauss(rng));
  Eigen::HouseholderQR<Eigen::Matrix2cd> qr(Z);
  Eigen::Matrix2cd Q = qr.householderQ();
  Eigen::Matrix2cd Rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 2; ++j) {
    const std::complex<double> d = Rr(j, j) / std::abs(Rr(j, j));
    Q.col(j) *= d;  // fix the phase so Q is uniquely determined
  }
  Isometry iso;
  iso.label = "random_u2";
  Mat R = Mat::Zero(4, 4);
  // complex coordinates z_j = x_j + i x_{j+2}; Q = A + iB acts as [[A,-B],[B,A]]
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      R(i, j) = Q(i, j).real();
      R(i, j + 2) = -Q(i, j).imag();
      R(i + 2, j) = Q(i, j).imag();
      R(i + 2, j + 2) = Q(i, j).real();
    }
  iso.linear = R;
  iso.offset = Vec::Zero(4);
  iso.symplectic = true;
  return iso;
}

std::vector<Isometry> cyclic_diag_group(int k) {
  std::vector<Isometry> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    Isometry iso = diag_circle_rotation(2.0 * M_PI * j / k);
    iso.label = "diag_rot_" + std::to_string(j);
    out.push_back(std::move(iso));
  }
  return out;
}

Isometry make_isometry(const std::string& id, const std::vector<double>& params,
                       int ambient_dim) {
  if (id == "flat_translation") {
    if (static_cast<int>(params.size()) != ambient_dim)
      fail(Err::ConfigError, "flat_translation: need one offset per coordinate");
    Vec t(ambient_dim);
    for (int i = 0; i < ambient_dim; ++i) t[i] = params[i];
    return flat_translation(t);
  }
  if (id == "diag_circle_rotation") {
    if (params.empty()) fail(Err::ConfigError, "diag_circle_rotation: missing angle");
    return diag_circle_rotation(params[0]);
  }
  if (id == "sphere_rotation_z") {
    if (params.empty()) fail(Err::ConfigError, "sphere_rotation_z: missing angle");
    return sphere_rotation_z(params[0]);
  }
  fail(Err::ConfigError, "unknown isometry id '" + id + "'");
}

sub::ParamSubmanifold transform_submanifold(const sub::ParamSubmanifold& s, const Isometry& iso) {
  sub::ParamSubmanifold out = s;
  out.name = s.name + "@" + iso.label;
  const auto chart = s.chart;
  out.chart = [chart, iso](const Vec& u) { return iso.apply(chart(u)); };
  if (s.chart_jac) {
    const auto jac = s.chart_jac;
    out.chart_jac = [jac, iso](const Vec& u) { return Mat(iso.linear * jac(u)); };
  }
  return out;
}

}  // namespace geomavg::catalog
