#pragma once

#include <cstdint>

namespace geomavg {

/// Numerical knobs shared across the solver stack. Contract-level tolerances
/// (what the public operations promise) are looser than these internal
/// targets; keeping internal residuals near machine precision is what lets
/// finite-difference consumers of solver output stay quiet.
struct SolverConfig {
  // geodesic integration
  int exp_steps_per_unit = 64;  // RK4 steps per unit of arc length
  int exp_min_steps = 4;

  // geodesic inverse (shooting)
  int log_max_iter = 50;
  double log_tol = 1e-12;  // endpoint position residual target

  // foot-point projection
  double cp_tol = 1e-12;   // first-order-condition residual target
  int cp_max_iter = 60;
  int cp_polish_seeds = 8; // grid seeds polished after screening

  // section lift
  double lift_tol = 1e-12;
  int lift_max_iter = 40;

  // weighted-average fiber solve
  double avg_eta = 0.9;    // damping of the fixed-point update
  double avg_tol = 1e-11;  // projected-residual target
  int avg_max_iter = 300;

  // isotropic-deformation stage
  int flow_steps = 32;     // RK4 steps of the time-one deformation flow
  int quad_nodes = 16;     // Gauss-Legendre nodes for the radial homotopy
  double tube_L = -1.0;    // fiber radius; <=0 means derive from measured eps
  bool override_containment = false;

  // finite differences
  double jac_h = 1e-4;          // internal map-jacobian step
  double pushforward_h = 1e-5;  // contractual step of the pushforward operation
  double ext_d_h = 2e-3;        // exterior-derivative checks
  double metric_h = 1e-4;       // metric derivatives when no analytic jacobian

  // misc
  std::uint64_t seed = 20260817ULL;
  int threads = 1;
  int reference_index = 0;
};

}  // namespace geomavg
