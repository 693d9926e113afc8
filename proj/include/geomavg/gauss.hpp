#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace geomavg {

/// Gauss-Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre polynomial (Chebyshev initial guesses).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_01(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    // root of P_n on [-1, 1]
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0.0, p1 = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[n - 1 - i] = 0.5 * (t + 1.0);             // map to [0, 1]
    w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);  // includes the 1/2 scale
  }
  return {x, w};
}

}  // namespace geomavg
