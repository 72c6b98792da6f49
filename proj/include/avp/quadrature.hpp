#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace avp {

/// Deterministic two-level quadrature used for the early-exercise premium:
/// composite Gauss-Legendre in time over a geometric partition clustered at
/// maturity, fixed Gauss-Legendre across the Gaussian axis.
struct QuadratureConfig {
  int outer_nodes = 64;
  int inner_nodes = 64;
  double inner_truncation = 8.0;  ///< half-width in standard deviations
  double target_rel_tol = 1e-6;

  void validate() const {
    if (outer_nodes < 8) throw std::invalid_argument("QuadratureConfig: outer_nodes >= 8");
    if (inner_nodes < 16) throw std::invalid_argument("QuadratureConfig: inner_nodes >= 16");
    if (!(inner_truncation >= 6.0))
      throw std::invalid_argument("QuadratureConfig: inner_truncation >= 6");
  }

  QuadratureConfig doubled() const {
    QuadratureConfig q = *this;
    q.outer_nodes *= 2;
    q.inner_nodes *= 2;
    return q;
  }
};

/// Raised when adaptive refinement hits the node cap before reaching the
/// requested tolerance; carries the best estimate and its error bound.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(double best, double bound)
      : std::runtime_error("quadrature failed to converge; best estimate " +
                           std::to_string(best) + " +- " + std::to_string(bound)),
        best_estimate(best),
        error_bound(bound) {}
  double best_estimate;
  double error_bound;
};

/// Panel edges of [a, b] with widths shrinking geometrically towards b.
inline std::vector<double> geometric_panels(double a, double b, int n_panels,
                                            double ratio = 0.55) {
  std::vector<double> edges(n_panels + 1);
  double total = 0.0;
  double w = 1.0;
  for (int k = 0; k < n_panels; ++k, w *= ratio) total += w;
  edges[0] = a;
  w = 1.0;
  double acc = 0.0;
  for (int k = 0; k < n_panels; ++k, w *= ratio) {
    acc += w;
    edges[k + 1] = a + (b - a) * acc / total;
  }
  edges[n_panels] = b;
  return edges;
}

}  // namespace avp
