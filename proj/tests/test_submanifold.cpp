#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "geomavg/catalog.hpp"
#include "geomavg/kernel.hpp"
#include "geomavg/submanifold.hpp"

using namespace geomavg;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v4(double a, double b, double c, double d) {
  Vec v(4);
  v << a, b, c, d;
  return v;
}

std::mt19937_64 rng(777);

double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// closed-form great-circle distance in the stereographic chart (R = 1)
double sphere_dist(const Vec& a, const Vec& b) {
  const double sa = 1.0 + a.squaredNorm(), sb = 1.0 + b.squaredNorm();
  Eigen::Vector3d ea(2.0 * a[0] / sa, 2.0 * a[1] / sa, (1.0 - a.squaredNorm()) / sa);
  Eigen::Vector3d eb(2.0 * b[0] / sb, 2.0 * b[1] / sb, (1.0 - b.squaredNorm()) / sb);
  return std::acos(std::clamp(ea.dot(eb), -1.0, 1.0));
}

}  // namespace

TEST_CASE("foot point on a flat plane drops the normal coordinates") {
  auto M = catalog::flat_model(4);
  auto N = catalog::affine_lagrangian(Vec::Zero(2));
  const Vec p = v4(0.7, -1.1, 0.3, -0.2);
  const auto fp = sub::closest_point(M, N, p);
  CHECK((fp.foot - v4(0.7, -1.1, 0.0, 0.0)).norm() <= 1e-9);
  CHECK(fp.distance == doctest::Approx(std::sqrt(0.3 * 0.3 + 0.04)).epsilon(1e-10));
  // first-order condition and norm consistency
  const Mat E = N.tangent_frame(M, fp.parameter);
  const Mat G = M.g(fp.foot);
  CHECK((E.transpose() * (G * fp.normal_vector)).norm() <= 1e-6);
  CHECK(std::abs(kernel::norm_g(M, fp.foot, fp.normal_vector) - fp.distance) <= 1e-8);
}

TEST_CASE("foot point on the radius-2 circle") {
  auto M = catalog::flat_model(2, false);
  auto N = catalog::circle_flat(2.0, Vec::Zero(2));
  const auto fp = sub::closest_point(M, N, v2(3.0, 0.0));
  CHECK((fp.foot - v2(2.0, 0.0)).norm() <= 1e-9);
  CHECK(fp.distance == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("foot point outside the tube throws") {
  auto M = catalog::flat_model(2, false);
  auto N = catalog::circle_flat(2.0, Vec::Zero(2));
  CHECK_THROWS_AS(sub::closest_point(M, N, v2(8.0, 0.0)), GeomError);
}

TEST_CASE("foot point on a latitude circle matches the dense parameter scan") {
  auto M = catalog::sphere_model(1.0);
  auto N = catalog::sphere_cap_curve(M_PI / 3.0);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec p = v2(urand(-0.2, 0.9), urand(-0.6, 0.6));
    const auto fp = sub::closest_point(M, N, p);
    // dense oracle over 10^4 parameter samples, closed-form distances
    double best = 1e18;
    Vec best_u(1);
    for (int k = 0; k < 10000; ++k) {
      Vec u(1);
      u << 2.0 * M_PI * k / 10000.0;
      const double d = sphere_dist(N.point(u), p);
      if (d < best) {
        best = d;
        best_u = u;
      }
    }
    CHECK(std::abs(fp.distance - best) <= 1e-6);
    CHECK(sphere_dist(fp.foot, N.point(best_u)) <= 1e-2);
  }
}

TEST_CASE("warm-started foot point agrees with the cold start") {
  auto M = catalog::flat_model(4);
  auto N = catalog::lagrangian_torus_r4(2.0, 2.0);
  const Vec p = v4(2.05, 0.1, 0.3, 1.9);
  const auto cold = sub::closest_point(M, N, p);
  Vec warm = cold.parameter + 0.02 * Vec::Ones(2);
  const auto hot = sub::closest_point(M, N, p, {}, &warm);
  CHECK(std::abs(cold.distance - hot.distance) <= 1e-9);
  CHECK((cold.foot - hot.foot).norm() <= 1e-6);
}

TEST_CASE("second fundamental form: flat plane zero, circle 1/R, great circle 0") {
  auto M4 = catalog::flat_model(4);
  auto P = catalog::affine_lagrangian(v2(0.5, -0.5));
  const Mat nf = P.normal_frame(M4, v2(0.3, 0.3));
  const Mat A0 = sub::second_fundamental_form(M4, P, v2(0.3, 0.3), nf.col(0));
  CHECK(A0.norm() <= 1e-6);

  auto M2 = catalog::flat_model(2, false);
  for (double R : {2.0, 0.5}) {
    auto C = catalog::circle_flat(R, Vec::Zero(2));
    Vec u(1);
    u << 1.1;
    const Mat nfc = C.normal_frame(M2, u);
    const Mat A = sub::second_fundamental_form(M2, C, u, nfc.col(0));
    CHECK(std::abs(std::abs(A(0, 0)) - 1.0 / R) <= 1e-4);
  }

  auto S = catalog::sphere_model(1.0);
  auto E = catalog::sphere_cap_curve(M_PI / 2.0);  // equator: totally geodesic
  Vec u(1);
  u << 0.7;
  const Mat nfe = E.normal_frame(S, u);
  const Mat Ae = sub::second_fundamental_form(S, E, u, nfe.col(0));
  CHECK(std::abs(Ae(0, 0)) <= 1e-4);

  // non-equatorial latitude theta0: geodesic curvature cot(theta0)
  auto L = catalog::sphere_cap_curve(M_PI / 3.0);
  const Mat nfl = L.normal_frame(S, u);
  const Mat Al = sub::second_fundamental_form(S, L, u, nfl.col(0));
  CHECK(std::abs(std::abs(Al(0, 0)) - 1.0 / std::tan(M_PI / 3.0)) <= 1e-4);
}

TEST_CASE("c1 distance of parallel flat planes is the offset") {
  auto M = catalog::flat_model(4);
  auto N = catalog::affine_lagrangian(Vec::Zero(2));
  for (double c : {0.3, 0.05}) {
    auto Np = catalog::affine_lagrangian(Vec::Constant(2, c));
    const auto d = sub::c1_distance(M, N, Np);
    const double expect = c * std::sqrt(2.0);
    CHECK(d.d0 == doctest::Approx(expect).epsilon(1e-9));
    CHECK(d.d1 == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("c1 distance of a submanifold to itself vanishes exactly") {
  auto M = catalog::flat_model(4);
  auto N = catalog::lagrangian_torus_r4(2.0, 2.0, 12);
  const auto d = sub::c1_distance(M, N, N);
  CHECK(d.d0 == 0.0);
  CHECK(d.d1 == 0.0);

  auto S = catalog::sphere_model(1.0);
  auto E = catalog::sphere_cap_curve(M_PI / 2.0, 32);
  const auto ds = sub::c1_distance(S, E, E);
  CHECK(ds.d0 == 0.0);
  CHECK(ds.d1 == 0.0);
}

TEST_CASE("c1 distance of a tilted graph matches the dense oracle") {
  auto M = catalog::flat_model(4);
  auto N = catalog::affine_lagrangian(Vec::Zero(2));
  Mat S(2, 2);
  S << 0.6, 0.48, 0.48, -0.64;  // symmetric, unit spectral norm
  const double theta = 0.02;
  auto Np = catalog::linear_graph(4, theta * S, Vec::Zero(2), Box::cube(2, -2.0, 2.0), {9, 9});
  const auto d = sub::c1_distance(M, N, Np);

  // dense oracle: sup over ~10^6 samples of distance and tangent angle
  double d0_oracle = 0.0;
  for (int i = 0; i < 1000; ++i)
    for (int j = 0; j < 1000; ++j) {
      const double x1 = -2.0 + 4.0 * i / 999.0, x2 = -2.0 + 4.0 * j / 999.0;
      Vec y = theta * S * v2(x1, x2);
      d0_oracle = std::max(d0_oracle, y.norm());
    }
  // tangent angle of graph{y = B x}: largest principal angle to {y=0},
  // atan of largest singular value of B (constant over the graph)
  Eigen::JacobiSVD<Mat> svd(theta * S);
  const double angle_oracle = std::atan(svd.singularValues()(0));
  const double d1_oracle = std::max(d0_oracle, angle_oracle);
  CHECK(std::abs(d.d0 - d0_oracle) <= 0.02 * d0_oracle);
  CHECK(std::abs(d.d1 - d1_oracle) <= 0.02 * d1_oracle);
}

TEST_CASE("c1 asymmetry stays within the factor-250 envelope") {
  auto M = catalog::flat_model(4);
  auto N = catalog::affine_lagrangian(Vec::Zero(2));
  for (int trial = 0; trial < 3; ++trial) {
    Mat B(2, 2);
    B << urand(-1, 1), urand(-1, 1), urand(-1, 1), urand(-1, 1);
    B *= 0.04 / std::max(1.0, B.norm());
    auto Np = catalog::linear_graph(4, B, 0.02 * Vec::Ones(2), Box::cube(2, -2.0, 2.0), {9, 9});
    const double fwd = sub::c1_distance(M, N, Np).d1;
    const double bwd = sub::c1_distance(M, Np, N).d1;
    REQUIRE(fwd < 0.25);
    CHECK(bwd <= 250.0 * fwd);
    CHECK(fwd <= 250.0 * bwd);
  }
}

TEST_CASE("gentle check margins on the catalog examples") {
  auto M2 = catalog::flat_model(2, false);
  const auto big = sub::gentle_check(M2, catalog::circle_flat(2.0, Vec::Zero(2)));
  CHECK(big.passed);
  CHECK(std::abs(big.normal_injectivity_margin - 2.0) <= 0.1);

  const auto small = sub::gentle_check(M2, catalog::circle_flat(0.5, Vec::Zero(2)));
  CHECK_FALSE(small.passed);
  CHECK(std::abs(small.normal_injectivity_margin - 0.5) <= 0.1);

  auto S = catalog::sphere_model(1.0);
  const auto eq = sub::gentle_check(S, catalog::sphere_cap_curve(M_PI / 2.0));
  CHECK(eq.passed);
  CHECK(std::abs(eq.normal_injectivity_margin - M_PI / 2.0) <= 0.1);
  CHECK(eq.curvature_sup_in_tube == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(eq.caveat == "sampled heuristic");
}

TEST_CASE("isotropy defect: lagrangian graphs vanish, antisymmetric part shows up") {
  auto M = catalog::flat_model(4);
  CHECK(sub::isotropy_defect(M, catalog::affine_lagrangian(Vec::Zero(2))) <= 1e-12);

  Mat S(2, 2);
  S << 0.4, 0.3, 0.3, -0.2;
  auto sym = catalog::linear_graph(4, S, Vec::Zero(2), Box::cube(2, -2.0, 2.0), {9, 9});
  CHECK(sub::isotropy_defect(M, sym) <= 1e-12);

  const double a = 0.07;
  Mat A(2, 2);
  A << 0.0, a, 0.0, 0.0;
  auto skew = catalog::linear_graph(4, A, Vec::Zero(2), Box::cube(2, -2.0, 2.0), {9, 9});
  const double expect =
      a / (std::sqrt(1.0 + (A * v2(1, 0)).squaredNorm()) *
           std::sqrt(1.0 + (A * v2(0, 1)).squaredNorm()));
  CHECK(sub::isotropy_defect(M, skew) == doctest::Approx(expect).epsilon(1e-10));

  // product torus is lagrangian
  CHECK(sub::isotropy_defect(M, catalog::lagrangian_torus_r4(2.0, 2.0)) <= 1e-10);
  // exactly lagrangian perturbed torus
  CHECK(sub::isotropy_defect(M, catalog::perturbed_torus(1.5, 1.5, 0.05, 0.05)) <= 1e-9);
}

TEST_CASE("measured epsilon of a parallel pair equals their separation") {
  auto M = catalog::flat_model(4);
  std::vector<sub::ParamSubmanifold> fam = {catalog::affine_lagrangian(v2(0.0, 0.01)),
                                            catalog::affine_lagrangian(v2(0.0, -0.01))};
  const double eps = sub::measured_epsilon(M, fam);
  CHECK(eps == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("grid nodes respect periodic seams and refinement") {
  auto C = catalog::circle_flat(1.0, Vec::Zero(2), 8);
  const auto nodes = C.grid_nodes();
  CHECK(nodes.size() == 8);  // seam node dropped
  CHECK(nodes.front()[0] == doctest::Approx(0.0));
  CHECK(nodes.back()[0] == doctest::Approx(2.0 * M_PI * 7.0 / 8.0));
  CHECK(C.refined().grid_nodes().size() == 16);

  auto P = catalog::affine_lagrangian(Vec::Zero(2));
  CHECK(P.grid_nodes().size() == 81);
  CHECK(P.refined().grid_nodes().size() == 17 * 17);
  // lexicographic order, last axis fastest
  const auto pn = P.grid_nodes();
  CHECK(pn[0][0] == doctest::Approx(-2.0));
  CHECK(pn[0][1] == doctest::Approx(-2.0));
  CHECK(pn[1][0] == doctest::Approx(-2.0));
  CHECK(pn[1][1] == doctest::Approx(-1.5));
}

TEST_CASE("tangent and normal frames are orthonormal and mutually orthogonal") {
  auto M = catalog::perturbed_model(0.05);
  auto N = catalog::lagrangian_torus_r4(1.5, 1.5);
  for (const Vec& u : {v2(0.1, 0.7), v2(3.0, 5.5)}) {
    const Vec x = N.point(u);
    const Mat G = M.g(x);
    const Mat T = N.tangent_frame(M, u);
    const Mat Nf = N.normal_frame(M, u);
    Mat full(4, 4);
    full << T, Nf;
    CHECK((full.transpose() * G * full - Mat::Identity(4, 4)).norm() <= 1e-10);
  }
}
