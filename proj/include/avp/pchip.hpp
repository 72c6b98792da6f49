#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace avp {

/// Shape-preserving piecewise-cubic Hermite slopes (Fritsch-Carlson).
/// Guarantees the interpolant stays within the bracketing node values on
/// every cell and preserves monotonicity of monotone data.
inline std::vector<double> pchip_slopes(std::span<const double> xs,
                                        std::span<const double> ys) {
  const std::size_t n = xs.size();
  assert(ys.size() == n);
  std::vector<double> m(n, 0.0);
  if (n == 1) return m;
  if (n == 2) {
    const double d = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    m[0] = m[1] = d;
    return m;
  }

  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs[i + 1] - xs[i];
    delta[i] = (ys[i + 1] - ys[i]) / h[i];
  }

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      m[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }

  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 < 0.0 && std::fabs(s) > 3.0 * std::fabs(d0))
      s = 3.0 * d0;
    return s;
  };
  m[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  m[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return m;
}

/// Evaluates the cubic Hermite on cell [xs[i], xs[i+1]].
inline double hermite_eval(double x0, double x1, double y0, double y1, double m0,
                           double m1, double x) {
  const double h = x1 - x0;
  const double s = (x - x0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
}

}  // namespace avp
