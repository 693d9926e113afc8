#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "geomavg/errors.hpp"

namespace geomavg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned chart domain.
struct Box {
  Vec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& x, double slack = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
  }

  Vec clamp(const Vec& x) const {
    Vec y = x;
    for (int i = 0; i < dim(); ++i) y[i] = std::min(std::max(y[i], lo[i]), hi[i]);
    return y;
  }

  double max_side() const { return (hi - lo).maxCoeff(); }

  static Box cube(int m, double lo_v, double hi_v) {
    Box b;
    b.lo = Vec::Constant(m, lo_v);
    b.hi = Vec::Constant(m, hi_v);
    return b;
  }
};

/// Tangent vector attached to a chart point.
struct TangentVector {
  Vec base;
  Vec vec;
};

/// Discretized geodesic: nodes of the RK4 integration, with velocities.
struct GeodesicPath {
  std::vector<double> times;    // affine parameter in [0, 1]
  std::vector<Vec> points;
  std::vector<Vec> velocities;  // d(point)/d(parameter)
  double length = 0.0;          // g-arc length

  const Vec& start() const { return points.front(); }
  const Vec& end() const { return points.back(); }
};

/// g-orthonormal k-frame at a point, columns in chart coordinates.
struct SubspaceBasis {
  Vec base;
  Mat columns;  // m x k

  int dim() const { return static_cast<int>(columns.cols()); }
};

/// Single-chart Riemannian model, optionally carrying a compatible symplectic
/// structure. All geometry is derived from `metric`; `metric_jac` (per-axis
/// coordinate derivatives of the metric matrix) is optional and only improves
/// accuracy/cost of Christoffel symbols.
struct AlmostKaehlerModel {
  int dim = 0;
  std::string name;
  Box chart_domain;

  std::function<Mat(const Vec&)> metric;                   // SPD m x m
  std::function<std::vector<Mat>(const Vec&)> metric_jac;  // optional, d_k g
  std::function<Mat(const Vec&)> symplectic;               // optional, antisymmetric m x m

  double injectivity_guard = 1e9;  // length guard for geodesic inversion
  double fd_scale = 1.0;           // scales metric finite-difference step
  double curvature_bound_hint = 0.0;

  bool has_symplectic() const { return static_cast<bool>(symplectic); }

  Mat g(const Vec& x) const { return metric(x); }

  Mat omega(const Vec& x) const {
    if (!symplectic) fail(Err::DomainError, "model '" + name + "' has no symplectic structure");
    return symplectic(x);
  }
};

}  // namespace geomavg
