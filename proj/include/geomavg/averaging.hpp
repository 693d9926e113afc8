#pragma once

#include <string>
#include <vector>

#include "geomavg/submanifold.hpp"

namespace geomavg::avg {

/// Finite weighted family {(w_g, N_g)}; members are kept in canonical order
/// (sorted by label) so that reductions are reproducible under relabeling.
struct WeightedFamily {
  struct Member {
    double weight = 0.0;
    sub::ParamSubmanifold N;
    std::string label;
  };
  std::vector<Member> members;

  void canonicalize();  // sort by label, verify weights
  int size() const { return static_cast<int>(members.size()); }
};

struct AveragingReport {
  double epsilon_measured = 0.0;
  std::vector<double> d1_to_average;
  std::vector<double> d0_to_average;
  std::vector<int> iterations;  // per fiber
  double residual_sup = 0.0;
  int reference_index = 0;
};

/// Radial gradient of the half-squared distance to sub: -log_x(foot(x)),
/// length d(x, sub), pointing away from the submanifold.
Vec grad_P(const AlmostKaehlerModel& M, const sub::ParamSubmanifold& s, const Vec& x,
           const SolverConfig& cfg = {}, const Vec* warm_param = nullptr);

/// Weighted mean of grad_P over the family, in canonical member order.
Vec averaged_field(const AlmostKaehlerModel& M, const WeightedFamily& family, const Vec& x,
                   const SolverConfig& cfg = {});

/// Center-of-mass submanifold: per grid node p of the reference member,
/// solve on the normal slice exp_p(nu_p N_ref) for the point where the
/// slice-tangential projection of the averaged field vanishes (damped
/// Gauss-Newton in slice coordinates, step cfg.avg_eta); the result is the
/// multilinear interpolant of the node solutions over the reference grid.
std::pair<sub::ParamSubmanifold, AveragingReport> weinstein_average(
    const AlmostKaehlerModel& M, const WeightedFamily& family, int reference_index = 0,
    const SolverConfig& cfg = {});

}  // namespace geomavg::avg
