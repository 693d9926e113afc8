#include "geomavg/averaging.hpp"

#include <algorithm>
#include <cmath>

#include "geomavg/parallel.hpp"

namespace geomavg::avg {

namespace {

using kernel::exp_map;
using kernel::exp_point;
using kernel::norm_g;
using sub::closest_point;
using sub::FootPointResult;

// Velocity at the query end of the foot geodesic: equals -log_x(foot), the
// radial gradient of the half-squared distance.
Vec radial_gradient(const AlmostKaehlerModel& M, const FootPointResult& fp,
                    const SolverConfig& cfg) {
  if (fp.distance == 0.0) return Vec::Zero(fp.foot.size());
  const GeodesicPath path = exp_map(M, fp.foot, fp.normal_vector, -1, cfg);
  return path.velocities.back();
}

std::vector<int> canonical_order(const WeightedFamily& family) {
  std::vector<int> idx(family.members.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return family.members[a].label < family.members[b].label;
  });
  return idx;
}

// Nearest orthogonal matrix to B (polar factor); reflections allowed, so a
// frame whose pointwise construction flips sign between nodes gets realigned.
Mat polar_rotation(const Mat& B) {
  Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

// Right-multiplying a g-orthonormal frame by an orthogonal matrix keeps it
// g-orthonormal; pick the factor bringing it closest to the anchor frame.
Mat align_frame(const Mat& frame, const Mat& anchor) {
  return frame * polar_rotation(frame.transpose() * anchor);
}

}  // namespace

void WeightedFamily::canonicalize() {
  if (members.empty()) fail(Err::ConfigError, "weighted family is empty");
  std::stable_sort(members.begin(), members.end(),
                   [](const Member& a, const Member& b) { return a.label < b.label; });
  double wsum = 0.0;
  const int n = members.front().N.dim;
  for (const Member& m : members) {
    if (m.weight <= 0.0) fail(Err::ConfigError, "member weight must be positive");
    if (m.N.dim != n) fail(Err::ConfigError, "family members have mixed dimensions");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12) fail(Err::ConfigError, "member weights must sum to 1");
}

Vec grad_P(const AlmostKaehlerModel& M, const sub::ParamSubmanifold& s, const Vec& x,
           const SolverConfig& cfg, const Vec* warm_param) {
  return radial_gradient(M, closest_point(M, s, x, cfg, warm_param), cfg);
}

Vec averaged_field(const AlmostKaehlerModel& M, const WeightedFamily& family, const Vec& x,
                   const SolverConfig& cfg) {
  Vec V = Vec::Zero(M.dim);
  for (int i : canonical_order(family)) {
    const auto& m = family.members[i];
    V += m.weight * grad_P(M, m.N, x, cfg);
  }
  return V;
}

std::pair<sub::ParamSubmanifold, AveragingReport> weinstein_average(
    const AlmostKaehlerModel& M, const WeightedFamily& family_in, int reference_index,
    const SolverConfig& cfg) {
  WeightedFamily family = family_in;
  family.canonicalize();
  if (reference_index < 0 || reference_index >= family.size())
    fail(Err::ConfigError, "reference index out of range");
  const sub::ParamSubmanifold& ref = family.members[reference_index].N;
  const int m = M.dim;
  const int cod = m - ref.dim;

  const std::vector<Vec> nodes = ref.grid_nodes();
  const size_t nn = nodes.size();
  std::vector<Vec> slice_coeffs(nn);
  std::vector<int> iters(nn, 0);
  std::vector<double> residuals(nn, 0.0);

  // Gauge-fixed normal frames: the pointwise frame construction is free to
  // flip orientation between nodes, which would make neighboring slice
  // coefficients incompatible under interpolation. Align each node's frame to
  // an already-aligned grid neighbor (decrement the last nonzero index, which
  // precedes it in lex order).
  std::vector<Mat> frames(nn);
  parallel_for(static_cast<int>(nn), cfg.threads,
               [&](int fi) { frames[fi] = ref.normal_frame(M, nodes[fi]); });
  {
    const int n_ax = static_cast<int>(ref.grid_res.size());
    std::vector<size_t> stride(n_ax, 1);
    for (int a = n_ax - 2; a >= 0; --a)
      stride[a] = stride[a + 1] * static_cast<size_t>(ref.grid_res[a + 1]);
    std::vector<int> idx(n_ax, 0);
    for (size_t fi = 1; fi < nn; ++fi) {
      int a = n_ax - 1;
      while (idx[a] + 1 == ref.grid_res[a]) idx[a--] = 0;
      ++idx[a];
      frames[fi] = align_frame(frames[fi], frames[fi - stride[a]]);
    }
  }

  parallel_for(static_cast<int>(nn), cfg.threads, [&](int fi) {
    const Vec& up = nodes[fi];
    const Vec p = ref.point(up);
    const Mat& NF = frames[fi];

    std::vector<Vec> warm(family.size());
    std::vector<bool> have_warm(family.size(), false);

    const auto field_at = [&](const Vec& x) {
      Vec V = Vec::Zero(m);
      for (int i = 0; i < family.size(); ++i) {
        const auto& mem = family.members[i];
        const FootPointResult fp =
            closest_point(M, mem.N, x, cfg, have_warm[i] ? &warm[i] : nullptr);
        warm[i] = fp.parameter;
        have_warm[i] = true;
        V += mem.weight * radial_gradient(M, fp, cfg);
      }
      return V;
    };

    Vec c = Vec::Zero(cod);
    bool done = false;
    for (int iter = 0; iter < cfg.avg_max_iter; ++iter) {
      const Vec x = cod > 0 ? exp_point(M, p, NF * c, -1, cfg) : p;
      const Vec V = field_at(x);
      const Mat G = M.g(x);

      // slice tangent basis J = dx/dc by central differences
      Mat J(m, cod);
      const double h = 1e-6 * (1.0 + c.norm());
      for (int a = 0; a < cod; ++a) {
        Vec cp = c, cm = c;
        cp[a] += h;
        cm[a] -= h;
        J.col(a) =
            (exp_point(M, p, NF * cp, -1, cfg) - exp_point(M, p, NF * cm, -1, cfg)) / (2.0 * h);
      }
      const Mat H = J.transpose() * G * J;
      const Vec r = J.transpose() * (G * V);
      const Vec beta = H.ldlt().solve(r);
      const double pr_norm = std::sqrt(std::max(0.0, r.dot(beta)));  // |pr_aVert V|_g
      residuals[fi] = pr_norm;
      iters[fi] = iter;
      if (pr_norm <= cfg.avg_tol) {
        done = true;
        break;
      }
      c -= cfg.avg_eta * beta;
    }
    if (!done)
      fail(Err::NoConvergence,
           "fiber " + std::to_string(fi) + " of the average did not meet tolerance (residual " +
               std::to_string(residuals[fi]) + ")");
    slice_coeffs[fi] = c;
  });

  // Interpolated section over the reference grid: multilinear in the slice
  // coefficients, mapped through the reference normal exponential, so that a
  // family solving to c = 0 returns the reference parametrization exactly.
  sub::ParamSubmanifold N = ref;
  N.name = "average";
  N.chart_jac = nullptr;
  const sub::ParamSubmanifold ref_copy = ref;
  const AlmostKaehlerModel model_copy = M;  // the chart closure must own it
  const SolverConfig cfg_copy = cfg;

  auto coeffs = slice_coeffs;   // captured by value
  auto node_frames = frames;    // captured by value

  N.chart = [=](const Vec& u) -> Vec {
    size_t anchor = 0;
    const Vec c = sub::interpolate_on_grid(ref_copy, coeffs, u, &anchor);
    if (c.size() == 0 || c.squaredNorm() == 0.0) return ref_copy.point(u);
    const Mat NF =
        align_frame(ref_copy.normal_frame(model_copy, u), node_frames[anchor]);
    return exp_point(model_copy, ref_copy.point(u), NF * c, -1, cfg_copy);
  };

  AveragingReport report;
  report.reference_index = reference_index;
  report.residual_sup = *std::max_element(residuals.begin(), residuals.end());
  report.iterations = iters;
  report.epsilon_measured = family.size() > 1 ? sub::measured_epsilon(M, [&] {
    std::vector<sub::ParamSubmanifold> ms;
    for (const auto& mem : family.members) ms.push_back(mem.N);
    return ms;
  }(), cfg)
                                              : 0.0;
  for (const auto& mem : family.members) {
    const sub::C1Distance d = sub::c1_distance_nodes(M, mem.N, N, cfg);
    report.d1_to_average.push_back(d.d1);
    report.d0_to_average.push_back(d.d0);
  }
  return {N, report};
}

}  // namespace geomavg::avg
