#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geomavg/kernel.hpp"
#include "geomavg/model.hpp"

namespace geomavg::sub {

/// Immersed submanifold given by a parametrization over a compact box,
/// sampled on a regular grid. All sup/inf quantities are grid sups (with one
/// refinement pass where the contract requires stability).
struct ParamSubmanifold {
  std::string name;
  int ambient_dim = 0;
  int dim = 0;  // n < m
  Box param_domain;
  std::vector<int> grid_res;   // nodes per axis (>= 2 per axis, or 1 for a point)
  std::vector<bool> periodic;  // per-axis wrap; empty = none. Periodic axes
                               // drop the duplicate seam node from grids.

  std::function<Vec(const Vec&)> chart;      // u -> chart point
  std::function<Mat(const Vec&)> chart_jac;  // optional analytic m x n jacobian

  double tube_radius = 1.0;  // declared normal-injectivity working radius

  Vec point(const Vec& u) const { return chart(u); }

  /// Parametrization jacobian (analytic if provided, else central FD).
  Mat jacobian(const Vec& u, double h = 1e-6) const;

  /// g-orthonormal tangent frame at chart point of u.
  Mat tangent_frame(const AlmostKaehlerModel& M, const Vec& u) const;

  /// g-orthonormal basis of the normal space at chart point of u.
  Mat normal_frame(const AlmostKaehlerModel& M, const Vec& u) const;

  /// Grid nodes in fixed lexicographic order (last axis fastest).
  std::vector<Vec> grid_nodes() const;

  /// Nodes of the once-refined grid (doubled resolution per axis).
  std::vector<Vec> refined_grid_nodes() const;

  ParamSubmanifold refined() const;
};

/// Foot-point data of a query point against a submanifold.
struct FootPointResult {
  Vec parameter;   // in the parameter box
  Vec foot;        // chart point on the submanifold
  double distance = 0.0;
  Vec normal_vector;  // log from foot to query; g-orthogonal to the frame
};

/// Sampled regularity diagnostics for the unit-tube hypotheses; margins are
/// grid heuristics, never proofs.
struct GentleReport {
  double normal_injectivity_margin = 0.0;
  double curvature_sup_in_tube = 0.0;
  double injectivity_proxy = 0.0;
  bool passed = false;
  std::string caveat = "sampled heuristic";
};

/// Global foot-point projection: screened multistart (every grid node scored
/// by chart distance, best seeds polished by projected Gauss-Newton on the
/// parameters). Returns the global best; ties broken by lexicographically
/// smallest parameter. Throws OutsideTube past sub.tube_radius.
FootPointResult closest_point(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                              const Vec& p, const SolverConfig& cfg = {},
                              const Vec* warm_param = nullptr);

/// Second fundamental form in direction of the unit normal xi at the chart
/// point of u: A_xi(v, w) = -g((nabla_v Xi)^tangential, w) on the orthonormal
/// tangent frame; returned as the symmetric n x n matrix of A_xi.
Mat second_fundamental_form(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                            const Vec& u, const Vec& xi, const SolverConfig& cfg = {});

struct C1Distance {
  double d1 = 0.0;
  double d0 = 0.0;
};

/// One-sided C^0/C^1 distance from N to Nprime: sup over Nprime's nodes of
/// foot-geodesic length and of the angle between T Nprime and the transported
/// T N. Grid sup, refined once; throws NoConvergence if the refinement moves
/// the sup by more than 5%.
C1Distance c1_distance(const AlmostKaehlerModel& M, const ParamSubmanifold& N,
                       const ParamSubmanifold& Nprime, const SolverConfig& cfg = {});

/// Single-pass variant of c1_distance over Nprime's coarse grid nodes only,
/// without the refinement-stability check. Meant for charts that interpolate
/// node data and are exact only at the nodes.
C1Distance c1_distance_nodes(const AlmostKaehlerModel& M, const ParamSubmanifold& N,
                             const ParamSubmanifold& Nprime, const SolverConfig& cfg = {});

/// Sampled tube-regularity screen (normal-exponential collision scan up to
/// scan_radius, curvature sampling in the unit tube, catalog injectivity).
GentleReport gentle_check(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                          const SolverConfig& cfg = {}, double scan_radius = 3.0);

/// Multilinear interpolation of per-node values (given in grid_nodes order)
/// at parameter u: periodic axes wrap, the rest clamp to the boundary cells.
/// Exact at the nodes. anchor_flat, when given, receives the flat index of
/// the base corner of the cell containing u.
Vec interpolate_on_grid(const ParamSubmanifold& s, const std::vector<Vec>& values,
                        const Vec& u, size_t* anchor_flat = nullptr);

/// Sup over grid nodes and frame pairs of |omega(e_i, e_j)|.
double isotropy_defect(const AlmostKaehlerModel& M, const ParamSubmanifold& sub,
                       const SolverConfig& cfg = {});

/// Measured pairwise epsilon of a list of submanifolds: max over ordered
/// pairs of c1_distance(...).d1.
double measured_epsilon(const AlmostKaehlerModel& M,
                        const std::vector<ParamSubmanifold>& members,
                        const SolverConfig& cfg = {});

}  // namespace geomavg::sub
