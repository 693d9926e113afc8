#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "geomavg/averaging.hpp"
#include "geomavg/catalog.hpp"
#include "geomavg/constants.hpp"
#include "geomavg/errors.hpp"
#include "geomavg/kernel.hpp"
#include "geomavg/moser.hpp"

using namespace geomavg;
using avg::WeightedFamily;
using moser::PhiCache;

namespace {

// A single point at the origin of a flat 2-dim chart (zero-dimensional base).
sub::ParamSubmanifold origin_point() {
  sub::ParamSubmanifold s;
  s.name = "origin";
  s.ambient_dim = 2;
  s.dim = 0;
  s.param_domain = Box::cube(0, 0.0, 0.0);
  s.grid_res = {};
  s.chart = [](const Vec&) { return Vec::Zero(2); };
  s.chart_jac = [](const Vec&) { return Mat(2, 0); };
  s.tube_radius = 10.0;
  return s;
}

// Horizontal line {y = c} in a flat 2-dim chart.
sub::ParamSubmanifold flat_line(double c, int res = 9) {
  sub::ParamSubmanifold s = catalog::linear_graph(2, Mat::Zero(1, 1), (Vec(1) << c).finished(),
                                                  Box::cube(1, -2.0, 2.0), {res});
  return s;
}

// Graph {y = A x} over [-2,2]^2 in flat R^4 (Lagrangian when A is symmetric).
sub::ParamSubmanifold tilted_plane(const Mat& A) {
  return catalog::linear_graph(4, A, Vec::Zero(2), Box::cube(2, -2.0, 2.0), {9, 9});
}

WeightedFamily plane_pair(double offset, double w_plus) {
  WeightedFamily fam;
  fam.members.push_back({w_plus, catalog::affine_lagrangian((Vec(2) << offset, 0.0).finished()), "p+"});
  fam.members.push_back({1.0 - w_plus, catalog::affine_lagrangian((Vec(2) << -offset, 0.0).finished()), "p-"});
  return fam;
}

WeightedFamily line_pair(double offset, double w_plus, int res = 9) {
  WeightedFamily fam;
  fam.members.push_back({w_plus, flat_line(offset, res), "p+"});
  fam.members.push_back({1.0 - w_plus, flat_line(-offset, res), "p-"});
  return fam;
}

int member_index(const moser::PrimitiveData& P, const std::string& label) {
  for (int g = 0; g < P.family.size(); ++g)
    if (P.family.members[g].label == label) return g;
  FAIL("missing member label ", label);
  return -1;
}

Err thrown_kind(const std::function<void()>& body) {
  try {
    body();
  } catch (const GeomError& e) {
    return e.kind();
  }
  FAIL("expected a GeomError");
  return Err::ConfigError;
}

double max_abs(const Mat& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace

// ---------------------------------------------------------------------------
// radial homotopy operator
// ---------------------------------------------------------------------------

TEST_CASE("radial homotopy over a point base reproduces the rotational primitive") {
  const auto M = catalog::flat_model(2);
  const auto base = origin_point();
  const auto f = [&M](const Vec&) { return M.omega(Vec::Zero(2)); };  // dx ^ dy

  Vec p(2);
  p << 0.6, -0.3;
  // primitive of dx^dy along rays from the origin: (x dy - y dx) / 2
  // finite differencing with h ~ 1e-5 leaves a ~1e-11 cancellation floor
  const Vec q = moser::homotopy_Q_covector(M, base, f, p);
  CHECK(std::abs(q[0] - 0.15) <= 1e-10);
  CHECK(std::abs(q[1] - 0.30) <= 1e-10);

  Vec X(2);
  X << 0.7, 0.4;
  CHECK(std::abs(moser::homotopy_Q(M, base, f, p, X) - q.dot(X)) <= 1e-10);

  // on the base the contraction vanishes identically
  CHECK(moser::homotopy_Q_covector(M, base, f, Vec::Zero(2)).norm() == 0.0);

  // the quadrature rule is already converged: 8 vs 16 nodes agree
  SolverConfig c8;
  c8.quad_nodes = 8;
  CHECK((moser::homotopy_Q_covector(M, base, f, p, c8) - q).norm() <= 1e-10);

  // finite-difference exterior derivative recovers the integrand form
  const double h = 1e-3;
  auto comp = [&](double x, double y, int i) {
    Vec pp(2);
    pp << x, y;
    return moser::homotopy_Q_covector(M, base, f, pp)[i];
  };
  const double curl = (comp(p[0] + h, p[1], 1) - comp(p[0] - h, p[1], 1)) / (2 * h) -
                      (comp(p[0], p[1] + h, 0) - comp(p[0], p[1] - h, 0)) / (2 * h);
  CHECK(std::abs(curl - 1.0) <= 1e-10);
}

TEST_CASE("radial homotopy over a plane base is fiber-linear with exact derivative") {
  const auto M = catalog::flat_model(4);
  const auto base = catalog::affine_lagrangian(Vec::Zero(2));
  const auto f = [&M](const Vec& x) { return M.omega(x); };

  Vec p(4);
  p << 0.3, -0.7, 0.2, -0.4;
  const Vec q = moser::homotopy_Q_covector(M, base, f, p);
  // rays scale the normal part (y1, y2); contraction gives (-y1, -y2, 0, 0)
  CHECK(std::abs(q[0] + 0.2) <= 1e-10);
  CHECK(std::abs(q[1] - 0.4) <= 1e-10);
  CHECK(std::abs(q[2]) <= 1e-12);
  CHECK(std::abs(q[3]) <= 1e-12);

  // d(Qf) = f on the tube: the base is isotropic so no boundary term remains
  const double h = 1e-3;
  Mat d = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    Vec pa = p, pb = p;
    pa[i] += h;
    pb[i] -= h;
    const Vec qa = moser::homotopy_Q_covector(M, base, f, pa);
    const Vec qb = moser::homotopy_Q_covector(M, base, f, pb);
    d.row(i) = ((qa - qb) / (2 * h)).transpose();
  }
  const Mat ext = d.transpose() - d;  // ext(i,j) = d_i q_j - d_j q_i
  CHECK(max_abs(ext.transpose() - M.omega(p)) <= 1e-8);
}

// ---------------------------------------------------------------------------
// bundle splittings
// ---------------------------------------------------------------------------

TEST_CASE("orthogonal and adapted splittings coincide on flat tubes") {
  const auto M = catalog::flat_model(4);
  const auto Ng = catalog::affine_lagrangian(Vec::Zero(2));

  Vec q(4);
  q << 0.3, -0.2, 0.4, 0.1;
  const auto B = moser::bundle_splitting(M, Ng, q);
  CHECK(B.foot.distance == doctest::Approx(std::hypot(0.4, 0.1)).epsilon(1e-12));
  CHECK(B.Vert.columns.cols() == 2);
  CHECK(B.Hor.columns.cols() == 2);

  // both vertical spaces are the constant normal plane span(e3, e4)
  Mat NF(4, 2);
  NF.setZero();
  NF(2, 0) = 1.0;
  NF(3, 1) = 1.0;
  CHECK(kernel::subspace_distance(M, B.Vert, {q, NF}) <= 1e-9);
  CHECK(kernel::subspace_distance(M, B.aVert, {q, NF}) <= 1e-9);
  CHECK(kernel::subspace_distance(M, B.Vert, B.aVert) <= 1e-9);

  // complements are g-orthogonal to the verticals
  CHECK(max_abs(B.Vert.columns.transpose() * M.g(q) * B.Hor.columns) <= 1e-12);
  CHECK(max_abs(B.aVert.columns.transpose() * M.g(q) * B.aHor.columns) <= 1e-12);

  // a base point carries the splitting too
  Vec q0(4);
  q0 << -1.1, 0.6, 0.0, 0.0;
  const auto B0 = moser::bundle_splitting(M, Ng, q0);
  CHECK(B0.foot.distance <= 1e-12);
  CHECK(kernel::subspace_distance(M, B0.Vert, B0.aVert) <= 1e-9);
}

TEST_CASE("one-dimensional normal bundles transport onto the slice tangent exactly") {
  const auto M = catalog::sphere_model(1.0);
  const auto Ng = catalog::sphere_cap_curve(0.9, 32);
  const Vec u = (Vec(1) << 0.7).finished();
  const Vec x = Ng.point(u);
  const Mat NF = Ng.normal_frame(M, u);
  // depth chosen off the integrator's step-switch thresholds (k/64), where
  // the distance landscape carries a discretization sawtooth
  const Vec q = kernel::exp_point(M, x, 0.24 * NF.col(0));

  const auto B = moser::bundle_splitting(M, Ng, q);
  // the radial geodesic velocity is parallel, so both verticals agree
  CHECK(kernel::subspace_distance(M, B.Vert, B.aVert) <= 1e-8);
  CHECK(B.foot.distance == doctest::Approx(0.24).epsilon(1e-9));
}

TEST_CASE("adapted vertical space bends quadratically with tube depth on a curved model") {
  const auto M = catalog::perturbed_model(0.05);
  const auto Ng = catalog::lagrangian_torus_r4(1.0, 1.0);
  const Vec u = (Vec(2) << 0.9, 2.1).finished();
  const Vec x = Ng.point(u);
  const Mat NF = Ng.normal_frame(M, u);
  const Vec w = (0.6 * NF.col(0) + 0.8 * NF.col(1)).eval();

  double dist[2];
  const double depth[2] = {0.1, 0.2};
  for (int k = 0; k < 2; ++k) {
    const Vec q = kernel::exp_point(M, x, depth[k] * w);
    const auto B = moser::bundle_splitting(M, Ng, q);
    dist[k] = kernel::subspace_distance(M, B.Vert, B.aVert);
    CHECK(dist[k] <= 0.5 * depth[k] * depth[k]);
    CHECK(max_abs(B.Vert.columns.transpose() * M.g(q) * B.Hor.columns) <= 1e-10);
  }
  CHECK(dist[1] >= 1e-8);        // curvature separates the two splittings
  CHECK(dist[1] >= 2.0 * dist[0]);  // and the separation grows superlinearly
}

// ---------------------------------------------------------------------------
// section lifts
// ---------------------------------------------------------------------------

TEST_CASE("section lift lands on the section and rejects off-base or ambiguous input") {
  const auto M = catalog::flat_model(4);
  const double a = 1e-3;
  const auto Ng = catalog::affine_lagrangian((Vec(2) << a, 0.0).finished());
  const auto N = catalog::affine_lagrangian((Vec(2) << -0.4 * a, 2.0 * a).finished());

  Vec p0(4);
  p0 << 0.5, -1.0, a, 0.0;  // on Ng
  const auto lift = moser::lift_to_section(M, Ng, N, p0);
  CHECK(std::abs(lift.point[0] - 0.5) <= 1e-10);
  CHECK(std::abs(lift.point[1] + 1.0) <= 1e-10);
  CHECK(std::abs(lift.point[2] + 0.4 * a) <= 1e-12);
  CHECK(std::abs(lift.point[3] - 2.0 * a) <= 1e-12);
  CHECK((lift.param - (Vec(2) << 0.5, -1.0).finished()).norm() <= 1e-10);

  // identical section: the lift is the base point itself
  const auto self_lift = moser::lift_to_section(M, Ng, Ng, p0);
  CHECK((self_lift.point - p0).norm() <= 1e-10);

  // base point off the submanifold is refused
  Vec off = p0;
  off[2] += 0.5;
  CHECK(thrown_kind([&] { moser::lift_to_section(M, Ng, N, off); }) == Err::DomainError);

  // a slice that meets the other submanifold twice is not a section there
  const auto M2 = catalog::flat_model(2);
  const auto axis = flat_line(0.0);
  const auto circle = catalog::circle_flat(0.3, (Vec(2) << 0.0, 0.5).finished());
  CHECK(thrown_kind([&] { moser::lift_to_section(M2, axis, circle, Vec::Zero(2)); }) ==
        Err::MultipleLifts);
}

// ---------------------------------------------------------------------------
// slice maps
// ---------------------------------------------------------------------------

TEST_CASE("slice map between parallel planes is the connecting translation") {
  const auto M = catalog::flat_model(4);
  const double a = 2e-3;
  const auto Ng = catalog::affine_lagrangian((Vec(2) << a, 0.5 * a).finished());
  const auto N = catalog::affine_lagrangian((Vec(2) << -a, 2.0 * a).finished());
  Vec shift(4);
  shift << 0.0, 0.0, -2.0 * a, 1.5 * a;

  Vec p(4);
  p << 0.7, 0.2, a + 0.003, 0.5 * a - 0.002;  // point in the tube of Ng
  const Vec q = moser::phi_g(M, Ng, N, p);
  CHECK((q - (p + shift)).norm() <= 1e-12);

  // identical family: the slice map is the identity
  CHECK((moser::phi_g(M, Ng, Ng, p) - p).norm() <= 1e-10);

  // round trip and warm-cache consistency
  PhiCache cache;
  const Vec back = moser::phi_g_inverse(M, Ng, N, q, {}, &cache);
  CHECK((back - p).norm() <= 1e-10);
  const Vec back2 = moser::phi_g_inverse(M, Ng, N, q, {}, &cache);
  CHECK((back2 - back).norm() <= 1e-12);

  // the pushforward of a translation is the identity on vectors
  Vec X(4);
  X << 0.3, -0.5, 0.8, 0.1;
  CHECK((moser::pushforward_phi(M, Ng, N, p, X) - X).norm() <= 1e-9);
}

TEST_CASE("slice map round-trips and maps the base onto the section on the sphere") {
  const auto M = catalog::sphere_model(1.0);
  const auto Ng = catalog::sphere_cap_curve(0.6, 32);
  const auto N = catalog::sphere_cap_curve(0.7, 32);

  const Vec u = (Vec(1) << 1.3).finished();
  const Vec x = Ng.point(u);
  const Mat NF = Ng.normal_frame(M, u);
  const Vec p = kernel::exp_point(M, x, 0.05 * NF.col(0));

  PhiCache cache;
  const Vec q = moser::phi_g(M, Ng, N, p, {}, &cache);

  // points of the base go to the section, fibers map isometrically
  const Vec qx = moser::phi_g(M, Ng, N, x);
  CHECK(sub::closest_point(M, N, qx).distance <= 1e-9);
  CHECK(kernel::distance(M, qx, q) == doctest::Approx(0.05).epsilon(1e-7));

  const Vec back = moser::phi_g_inverse(M, Ng, N, q, {}, &cache);
  CHECK((back - p).norm() <= 1e-8);

  // pushforward is linear to finite-difference accuracy
  Vec X(2), Y(2);
  X << 0.4, -0.9;
  Y << 1.1, 0.3;
  const Vec pX = moser::pushforward_phi(M, Ng, N, p, X);
  const Vec pY = moser::pushforward_phi(M, Ng, N, p, Y);
  const Vec pXY = moser::pushforward_phi(M, Ng, N, p, (0.5 * X + 2.0 * Y).eval());
  CHECK((pXY - 0.5 * pX - 2.0 * pY).norm() <= 1e-6);
}

// ---------------------------------------------------------------------------
// pulled-back two-forms
// ---------------------------------------------------------------------------

TEST_CASE("pulled-back form equals omega for identical and translated members") {
  const auto M = catalog::flat_model(4);
  const double a = 2e-3;
  const auto Ng = catalog::affine_lagrangian((Vec(2) << a, 0.0).finished());
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));

  Vec q(4);
  q << 0.4, -0.6, 0.002, -0.001;
  // the pullback jacobian is finite-differenced, leaving a ~1e-11 floor
  CHECK(max_abs(moser::omega_g_matrix(M, Ng, Ng, (q + Vec::Constant(4, a)).eval()) -
                M.omega(q)) <= 1e-10);
  CHECK(max_abs(moser::omega_g_matrix(M, Ng, N, q) - M.omega(q)) <= 1e-10);
}

TEST_CASE("pulled-back form is compatible with the pushforward on the sphere") {
  const auto M = catalog::sphere_model(1.0);
  const auto Ng = catalog::sphere_cap_curve(0.6, 32);
  const auto N = catalog::sphere_cap_curve(0.7, 32);

  const Vec u = (Vec(1) << 0.4).finished();
  const Vec x = Ng.point(u);
  const Mat NF = Ng.normal_frame(M, u);
  const Vec p = kernel::exp_point(M, x, 0.04 * NF.col(0));

  Vec X(2), Y(2);
  X << 0.8, 0.1;
  Y << -0.2, 0.9;
  const Vec q = moser::phi_g(M, Ng, N, p);
  const double lhs = moser::omega_g_at(M, Ng, N, q, moser::pushforward_phi(M, Ng, N, p, X),
                                       moser::pushforward_phi(M, Ng, N, p, Y));
  const double rhs = X.dot(M.omega(p) * Y);
  CHECK(std::abs(lhs - rhs) <= 1e-6);
}

TEST_CASE("section tangents are isotropic for the pulled-back form of a torus pair") {
  const auto M = catalog::flat_model(4);
  const auto Ng = catalog::lagrangian_torus_r4(1.0, 1.0);
  const auto N = catalog::lagrangian_torus_r4(1.0 + 1e-5, 1.0 - 1e-5);

  for (double u1 : {0.3, 2.0}) {
    const Vec u = (Vec(2) << u1, 1.1).finished();
    const Vec q = N.point(u);
    const Mat E = N.tangent_frame(M, u);
    const Mat Og = moser::omega_g_matrix(M, Ng, N, q);
    CHECK(max_abs(E.transpose() * Og * E) <= 1e-7);
  }
}

TEST_CASE("interpolated family form is affine in the interpolation time") {
  const auto M = catalog::flat_model(4);
  WeightedFamily fam = plane_pair(1e-3, 0.4);
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));
  Vec q(4);
  q << 0.2, 0.5, 0.0004, -0.0002;

  const Mat W = M.omega(q);
  const Mat Oavg = moser::omega_avg_matrix(M, fam, N, q);
  const Mat Ot = moser::omega_t_matrix(M, fam, N, q, 0.3);
  CHECK(max_abs(Ot - (W + 0.3 * (Oavg - W))) <= 1e-12);
  CHECK(max_abs(moser::omega_t_matrix(M, fam, N, q, 0.0) - W) <= 1e-15);
  CHECK(max_abs(moser::omega_t_matrix(M, fam, N, q, 1.0) - Oavg) <= 1e-15);
}

// ---------------------------------------------------------------------------
// primitive construction
// ---------------------------------------------------------------------------

TEST_CASE("primitive of an identical pair is exactly zero with the canonical table") {
  const auto M = catalog::flat_model(4);
  const auto N0 = catalog::affine_lagrangian((Vec(2) << 0.3, -0.2).finished());
  WeightedFamily fam;
  fam.members.push_back({0.6, N0, "a"});
  fam.members.push_back({0.4, N0, "b"});

  const auto P = moser::build_primitive(M, fam, N0);
  CHECK(P.epsilon == 0.0);
  CHECK(P.tube_L == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(P.table.R == doctest::Approx(0.023894357442852593).epsilon(1e-12));

  for (const auto& bg : P.beta)
    for (const Vec& b : bg) CHECK(b.norm() == 0.0);

  Vec q(4);
  q << 0.1, -0.5, -0.2 + 0.004, 0.003;
  q[2] = -0.2 + 0.004;
  q[3] = 0.0 + 0.003;
  CHECK(moser::alpha_at(M, P, q).norm() <= 1e-10);
  CHECK(moser::moser_velocity(M, P, q, 0.5).norm() <= 1e-12);
}

TEST_CASE("boundary forms of parallel planes carry the signed member heights") {
  const auto M = catalog::flat_model(4);
  const double a = 2.5e-6;
  WeightedFamily fam = plane_pair(a, 0.5);
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));

  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.epsilon == doctest::Approx(2.0 * a).epsilon(1e-9));
  CHECK(P.tube_L == doctest::Approx((0.1 - 4100.0 * P.epsilon) / 4.0).epsilon(1e-14));

  const int gp = member_index(P, "p+");
  const int gm = member_index(P, "p-");
  const auto nodes = P.N.grid_nodes();
  for (size_t i = 0; i < nodes.size(); i += 17) {
    CHECK(std::abs(P.beta[gp][i][0] - a) <= 1e-10);
    CHECK(std::abs(P.beta[gp][i][1]) <= 1e-10);
    CHECK(std::abs(P.beta[gm][i][0] + a) <= 1e-10);
  }
  // interpolation off the lattice reproduces the constant field
  const Vec um = (Vec(2) << 0.123, -1.456).finished();
  CHECK(std::abs(moser::beta_g_at(P, gp, um)[0] - a) <= 1e-10);

  // the boundary form obeys the linear-instance bound against epsilon
  CHECK(std::abs(P.beta[gp][0][0]) < 125.0 * P.epsilon);

  CHECK(thrown_kind([&] { moser::beta_g_at(P, 5, um); }) == Err::ConfigError);
}

TEST_CASE("alpha vanishes at the weighted average and equals the imbalance elsewhere") {
  const auto M = catalog::flat_model(4);
  const double a = 2.5e-6;

  // true weighted average: heights 0.3 a and -0.7 a mean out to -0.4 a
  WeightedFamily fam = plane_pair(a, 0.3);
  const auto Nbar = catalog::affine_lagrangian((Vec(2) << -0.4 * a, 0.0).finished());
  const auto P = moser::build_primitive(M, fam, Nbar);
  const int gp = member_index(P, "p+");
  const int gm = member_index(P, "p-");
  CHECK(std::abs(P.beta[gp][0][0] - 1.4 * a) <= 1e-10);
  CHECK(std::abs(P.beta[gm][0][0] + 0.6 * a) <= 1e-10);
  for (double s : {0.0, 0.004}) {
    Vec q(4);
    q << 0.6, -0.9, -0.4 * a + s, -s;
    CHECK(moser::alpha_at(M, P, q).norm() <= 1e-10);
  }

  // off the average the covector is the weighted height imbalance
  WeightedFamily fam2 = plane_pair(a, 0.25);
  const auto N0 = catalog::affine_lagrangian(Vec::Zero(2));
  const auto P2 = moser::build_primitive(M, fam2, N0);
  Vec q(4);
  q << 0.3, -0.4, 0.001, -0.002;
  const Vec alpha = moser::alpha_at(M, P2, q);
  CHECK(std::abs(alpha[0] - 0.5 * a) <= 1e-10);
  CHECK(std::abs(alpha[1]) <= 1e-10);
  CHECK(std::abs(alpha[2]) <= 1e-10);
  CHECK(std::abs(alpha[3]) <= 1e-10);

  // the deformation field solves W v = alpha: constant vertical drift
  for (double t : {0.0, 0.7}) {
    const Vec v = moser::moser_velocity(M, P2, q, t);
    CHECK(std::abs(v[2] - 0.5 * a) <= 1e-10);
    CHECK((v - (Vec(4) << 0, 0, v[2], 0).finished()).norm() <= 1e-10);
  }
}

TEST_CASE("primitive construction refuses families too far apart for the canonical table") {
  const auto M = catalog::flat_model(4);
  WeightedFamily fam = plane_pair(2e-3, 0.5);  // epsilon = 4e-3 has no fiber radius
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));
  CHECK(thrown_kind([&] { moser::build_primitive(M, fam, N); }) == Err::DomainError);
}

TEST_CASE("alpha transforms equivariantly under the diagonal circle action") {
  const auto M = catalog::flat_model(4);
  const double a = 2.5e-6;
  WeightedFamily fam = plane_pair(a, 0.25);
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));
  const auto P = moser::build_primitive(M, fam, N);

  const auto iso = catalog::diag_circle_rotation(0.7);
  WeightedFamily fam_rot;
  for (const auto& mem : fam.members)
    fam_rot.members.push_back({mem.weight, catalog::transform_submanifold(mem.N, iso), mem.label});
  const auto P_rot = moser::build_primitive(M, fam_rot, catalog::transform_submanifold(N, iso));
  CHECK(std::abs(P_rot.epsilon - P.epsilon) <= 1e-11);

  Vec q(4);
  q << 0.3, -0.4, 0.001, -0.002;
  const Vec alpha = moser::alpha_at(M, P, q);
  const Vec alpha_rot = moser::alpha_at(M, P_rot, iso.apply(q));
  CHECK((iso.linear.transpose() * alpha_rot - alpha).norm() <= 1e-10);
}

// ---------------------------------------------------------------------------
// exactness of the primitive
// ---------------------------------------------------------------------------

namespace {

// finite-difference exterior derivative of alpha at q, as a matrix
Mat fd_d_alpha(const AlmostKaehlerModel& M, const moser::PrimitiveData& P, const Vec& q,
               const SolverConfig& cfg) {
  const int m = M.dim;
  const double h = cfg.ext_d_h;
  Mat d(m, m);
  for (int i = 0; i < m; ++i) {
    Vec qa = q, qb = q;
    qa[i] += h;
    qb[i] -= h;
    d.row(i) = ((moser::alpha_at(M, P, qa, cfg) - moser::alpha_at(M, P, qb, cfg)) / (2 * h))
                   .transpose();
  }
  return (d.transpose() - d).transpose();  // (i,j) entry: d_i alpha_j - d_j alpha_i
}

}  // namespace

TEST_CASE("exterior derivative of alpha equals the averaged-form defect for tilted planes") {
  const auto M = catalog::flat_model(4);
  // shear slopes: symmetric tilts pull back to omega exactly, so the defect
  // signal needs an antisymmetric part
  const double t = 2e-5;
  WeightedFamily fam;
  fam.members.push_back({0.5, tilted_plane((Mat(2, 2) << 0, t, 0, 0).finished()), "a"});
  fam.members.push_back({0.5, tilted_plane((Mat(2, 2) << 0, -t, 0.5 * t, 0).finished()), "b"});
  const auto N = catalog::affine_lagrangian(Vec::Zero(2));

  SolverConfig cfg;
  cfg.tube_L = 0.02;
  const auto P = moser::build_primitive(M, fam, N, cfg);

  double signal = 0.0;
  for (int k = 0; k < 3; ++k) {
    Vec q(4);
    q << -0.8 + 0.7 * k, 0.5 - 0.4 * k, 0.004, -0.006;
    const Mat defect = moser::omega_avg_matrix(M, fam, N, q, cfg) - M.omega(q);
    const Mat d = fd_d_alpha(M, P, q, cfg);
    CHECK(max_abs(d - defect) <= 1e-8);
    signal = std::max(signal, max_abs(defect));
  }
  CHECK(signal >= 1e-6);  // the comparison is not between two zeros
}

TEST_CASE("exterior derivative of alpha equals the averaged-form defect on the sphere") {
  const auto M = catalog::sphere_model(1.0);
  WeightedFamily fam;
  fam.members.push_back({0.5, catalog::sphere_cap_curve(0.6, 16), "a"});
  fam.members.push_back({0.5, catalog::sphere_cap_curve(0.6 + 2e-5, 16), "b"});

  const auto [N, rep] = avg::weinstein_average(M, fam);
  CHECK(rep.residual_sup <= 1e-10);

  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.tube_L > 2e-3);  // canonical fiber radius exists at this separation

  SolverConfig cfg;
  cfg.ext_d_h = 5e-4;
  for (double u0 : {0.5, 3.0}) {
    const Vec u = (Vec(1) << u0).finished();
    const Mat NF = N.normal_frame(M, u);
    const Vec q = kernel::exp_point(M, N.point(u), 1e-3 * NF.col(0));
    const Mat defect = moser::omega_avg_matrix(M, P.family, N, q, cfg) - M.omega(q);
    const Mat d = fd_d_alpha(M, P, q, cfg);
    CHECK(max_abs(d - defect) <= 1e-6);
    CHECK(max_abs(d - defect) <= 1e-5);
  }
}

TEST_CASE("exterior derivative of alpha equals the averaged-form defect for torus pairs") {
  const auto M = catalog::flat_model(4);
  WeightedFamily fam;
  fam.members.push_back({0.5, catalog::lagrangian_torus_r4(1.0, 1.0, 12), "a"});
  fam.members.push_back({0.5, catalog::lagrangian_torus_r4(1.0 + 1e-5, 1.0 - 1e-5, 12), "b"});

  const auto [Navg, rep] = avg::weinstein_average(M, fam);
  CHECK(rep.residual_sup <= 1e-10);
  // radial fiber averages: the mean torus
  const Vec u0 = (Vec(2) << 0.7, 2.4).finished();
  const Vec expect = catalog::lagrangian_torus_r4(1.0 + 5e-6, 1.0 - 5e-6, 12).point(u0);
  CHECK((Navg.point(u0) - expect).norm() <= 1e-10);

  // build over the first member: at the average the first-order defect of
  // this matched pair cancels by construction, leaving nothing to compare
  const auto N = catalog::lagrangian_torus_r4(1.0, 1.0, 12);
  const auto P = moser::build_primitive(M, fam, N);
  // both radii move at once, so the pointwise gap is sqrt(2) * 1e-5
  CHECK(P.epsilon == doctest::Approx(1.4142135623730953e-05).epsilon(1e-6));
  CHECK(P.tube_L == doctest::Approx(0.010504310985675775).epsilon(1e-6));
  CHECK(P.table.R == doctest::Approx(0.010338085457172469).epsilon(1e-6));

  SolverConfig cfg;
  double signal = 0.0;
  for (double u1 : {0.3, 1.9}) {
    const Vec u = (Vec(2) << u1, 1.2).finished();
    const Mat NF = N.normal_frame(M, u);
    const Vec q = kernel::exp_point(M, N.point(u), (3e-3 * (0.8 * NF.col(0) - 0.6 * NF.col(1))).eval());
    const Mat defect = moser::omega_avg_matrix(M, P.family, N, q, cfg) - M.omega(q);
    const Mat d = fd_d_alpha(M, P, q, cfg);
    CHECK(max_abs(d - defect) <= 1e-6);
    signal = std::max(signal, max_abs(defect));
  }
  CHECK(signal >= 1e-6);

  // the deformation field solves the interpolated linear system
  const Vec uq = (Vec(2) << 0.3, 1.2).finished();
  const Mat NFq = N.normal_frame(M, uq);
  const Vec q = kernel::exp_point(M, N.point(uq), (3e-3 * NFq.col(0)).eval());
  const Vec v = moser::moser_velocity(M, P, q, 0.4);
  const Mat Ot = moser::omega_t_matrix(M, P.family, N, q, 0.4);
  CHECK((Ot * v - moser::alpha_at(M, P, q)).norm() <= 1e-14);
}

// ---------------------------------------------------------------------------
// time-one deformation
// ---------------------------------------------------------------------------

TEST_CASE("deformation is stationary for an identical pair of lines") {
  const auto M = catalog::flat_model(2);
  WeightedFamily fam;
  fam.members.push_back({0.6, flat_line(0.0), "a"});
  fam.members.push_back({0.4, flat_line(0.0), "b"});
  const auto N = flat_line(0.0);

  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.epsilon == 0.0);
  CHECK(P.table.R == doctest::Approx(0.023894357442852593).epsilon(1e-12));

  const auto [L, rep] = moser::moser_flow(M, P);
  CHECK(rep.max_displacement <= 1e-14);
  CHECK(rep.speed_sup <= 1e-14);
  CHECK(rep.nondegeneracy_min == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.tube_margin == doctest::Approx(P.table.R).epsilon(1e-12));
  CHECK(rep.flow_steps == 32);
  CHECK(rep.isotropy_defect_L == 0.0);  // one-dimensional image
  REQUIRE(rep.d0_members_to_L.size() == 2);
  CHECK(rep.d0_members_to_L[0] <= 1e-12);
  CHECK(rep.d0_members_to_L[1] <= 1e-12);

  for (const Vec& u : N.grid_nodes()) CHECK((L.point(u) - N.point(u)).norm() <= 1e-13);
  CHECK(L.name == std::string(N.name) + ":flow");
}

TEST_CASE("time-one deformation carries a line onto the weighted average of the pair") {
  const auto M = catalog::flat_model(2);
  const double c = 2.5e-6;
  WeightedFamily fam = line_pair(c, 0.25);  // weighted mean height -0.5 c
  const auto N = flat_line(0.0);

  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.epsilon == doctest::Approx(2.0 * c).epsilon(1e-9));

  const auto [L, rep] = moser::moser_flow(M, P);

  // every node lands exactly on the weighted average line
  for (const Vec& u : N.grid_nodes()) {
    const Vec y = L.point(u);
    CHECK(std::abs(y[0] - u[0]) <= 1e-12);
    CHECK(std::abs(y[1] + 0.5 * c) <= 1e-12);
  }

  CHECK(rep.max_displacement == doctest::Approx(0.5 * c).epsilon(1e-9));
  CHECK(rep.max_displacement <= 842.0 * P.epsilon);
  CHECK(rep.speed_sup == doctest::Approx(0.5 * c).epsilon(1e-9));
  CHECK(rep.speed_sup <= 1.45 * P.epsilon + 374.0 * P.epsilon);
  CHECK(rep.nondegeneracy_min == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.isotropy_defect_L <= 1e-9);
  CHECK(rep.tube_margin >= P.table.R - 0.5 * c - 1e-12);

  // the members sit at the predicted heights above the deformed line
  const int gp = member_index(P, "p+");
  const int gm = member_index(P, "p-");
  CHECK(rep.d0_members_to_L[gp] == doctest::Approx(1.5 * c).epsilon(1e-9));
  CHECK(rep.d0_members_to_L[gm] == doctest::Approx(0.5 * c).epsilon(1e-9));
}

TEST_CASE("deformation refuses to run outside the containment certificate") {
  const auto M = catalog::flat_model(2);
  WeightedFamily fam = line_pair(1e-5, 0.5);  // epsilon 2e-5: table exists, margin fails
  const auto N = flat_line(0.0);
  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.tube_L > 0.0);
  CHECK(thrown_kind([&] { moser::moser_flow(M, P); }) == Err::DomainError);

  SolverConfig cfg;
  cfg.override_containment = true;
  cfg.flow_steps = 8;
  const auto [L, rep] = moser::moser_flow(M, P, cfg);
  CHECK(rep.max_displacement <= 842.0 * P.epsilon);
  (void)L;
}

TEST_CASE("curved identity deformation keeps a latitude circle in place") {
  const auto M = catalog::sphere_model(1.0);
  WeightedFamily fam;
  fam.members.push_back({1.0, catalog::sphere_cap_curve(0.6, 16), "a"});
  const auto N = catalog::sphere_cap_curve(0.6, 16);

  const auto P = moser::build_primitive(M, fam, N);
  CHECK(P.epsilon == 0.0);

  const auto [L, rep] = moser::moser_flow(M, P);
  CHECK(rep.max_displacement <= 1e-13);
  CHECK(rep.speed_sup <= 1e-13);
  CHECK(rep.nondegeneracy_min == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.tube_margin == doctest::Approx(P.table.R).epsilon(1e-10));
  REQUIRE(rep.d0_members_to_L.size() == 1);
  CHECK(rep.d0_members_to_L[0] <= 1e-12);

  for (const Vec& u : N.grid_nodes()) CHECK((L.point(u) - N.point(u)).norm() <= 1e-13);
}
