#pragma once

#include <string>
#include <vector>

#include "geomavg/model.hpp"
#include "geomavg/submanifold.hpp"

namespace geomavg::catalog {

// ---- models -------------------------------------------------------------

/// Euclidean R^m; carries the standard pairing dx_i ^ dy_i (pairs (i, i+m/2))
/// when m is even and with_pairing is true.
AlmostKaehlerModel flat_model(int m, bool with_pairing = true);

/// Round sphere of the given radius in the stereographic chart touching the
/// north pole at u = 0; equator at |u| = 1.
AlmostKaehlerModel sphere_model(double radius = 1.0);

/// Flat 2-torus fundamental box with the standard area pairing (periodicity
/// lives in the submanifold parametrizations, the chart itself is a box).
AlmostKaehlerModel torus_model();

/// R^4 with the conformally bumped metric c(x)*Id on the first two axes
/// (c = 1 + a exp(-|x|^2/2)) replaced by its canonical compatible partner
/// diag(sqrt(c) I2, I2/sqrt(c)); analytic derivatives supplied. Not parallel:
/// the pairing has nonzero covariant derivative wherever grad c != 0.
AlmostKaehlerModel perturbed_model(double amplitude = 0.05);

/// Catalog lookup by identifier: "flat" (dim), "sphere2" (radius),
/// "torus2" (), "perturbed_r4" (amplitude).
AlmostKaehlerModel make_model(const std::string& id, const std::vector<double>& params);

// ---- submanifolds -------------------------------------------------------

/// Graph {(x, Ax + c)} over a box in the first k coordinates of flat R^m.
sub::ParamSubmanifold linear_graph(int ambient_dim, const Mat& A, const Vec& offset,
                                   const Box& param_box, const std::vector<int>& res);

/// Lagrangian plane {(x, c)} in flat R^4 over [-2, 2]^2, 9 x 9 grid.
sub::ParamSubmanifold affine_lagrangian(const Vec& c);

/// Circle of given radius/center in a flat 2-dimensional chart.
sub::ParamSubmanifold circle_flat(double radius, const Vec& center, int res = 48);

/// Latitude circle of polar angle theta0 on the sphere chart (the equator is
/// theta0 = pi/2); parametrized by the azimuth.
sub::ParamSubmanifold sphere_cap_curve(double theta0, int res = 48, double radius = 1.0);

/// Product torus |z_1| = r1, |z_2| = r2 in flat R^4 (Lagrangian for the
/// standard pairing).
sub::ParamSubmanifold lagrangian_torus_r4(double r1, double r2, int res = 24);

/// Exactly Lagrangian perturbation of the product torus via action-angle
/// coordinates: I_i(theta) = r_i^2/2 + dF/dtheta_i for the generating
/// function F = a1 sin(theta1) + a2 cos(theta2), point sqrt(2 I_i) e^{i theta_i}.
sub::ParamSubmanifold perturbed_torus(double r1, double r2, double a1, double a2,
                                      int res = 24, double phase1 = 0.0, double phase2 = 0.0);

/// Catalog lookup: "linear_graph", "affine_lagrangian", "circle_flat",
/// "sphere_cap_curve", "lagrangian_torus_r4", "perturbed_torus".
sub::ParamSubmanifold make_submanifold(const std::string& id, const std::vector<double>& params,
                                       int ambient_dim);

// ---- isometries ---------------------------------------------------------

/// Affine chart map x -> linear x + offset. All catalog entries are isometries
/// of their model; the flagged ones also preserve the pairing.
struct Isometry {
  std::string label;
  Mat linear;
  Vec offset;
  bool symplectic = false;

  Vec apply(const Vec& x) const { return linear * x + offset; }
  Vec push(const Vec& X) const { return linear * X; }
  Isometry inverse() const;
};

/// Translation of flat R^m.
Isometry flat_translation(const Vec& t);

/// Simultaneous rotation by theta of the (x_i, y_i) pairing planes of flat
/// R^4 (the diagonal circle action).
Isometry diag_circle_rotation(double theta);

/// Rotation of the sphere about the polar axis = rotation of the chart.
Isometry sphere_rotation_z(double theta);

/// Unitary map of C^2 (real 4 x 4, orthogonal + symplectic) drawn from the
/// given RNG stream by QR of a complex Gaussian matrix.
Isometry random_u2(std::uint64_t seed);

/// The cyclic group generated by diag_circle_rotation(2 pi / k).
std::vector<Isometry> cyclic_diag_group(int k);

/// Catalog lookup: "flat_translation" (t...), "diag_circle_rotation" (theta),
/// "sphere_rotation_z" (theta).
Isometry make_isometry(const std::string& id, const std::vector<double>& params, int ambient_dim);

/// Image of a parametrized submanifold under an affine isometry (same
/// parameter grid, new label).
sub::ParamSubmanifold transform_submanifold(const sub::ParamSubmanifold& s, const Isometry& iso);

}  // namespace geomavg::catalog
