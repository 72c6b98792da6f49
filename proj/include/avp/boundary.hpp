#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "avp/pchip.hpp"

namespace avp {

/// Rectangular (t, r) grid. Times live in [0, T) with the last node < T;
/// rates are ascending and may span zero.
struct Grid {
  std::vector<double> t_nodes;
  std::vector<double> r_nodes;

  std::size_t n_t() const { return t_nodes.size(); }
  std::size_t n_r() const { return r_nodes.size(); }

  void validate() const {
    if (t_nodes.size() < 2 || r_nodes.size() < 2)
      throw std::invalid_argument("Grid: need at least 2 nodes per axis");
    for (std::size_t i = 1; i < t_nodes.size(); ++i)
      if (!(t_nodes[i] > t_nodes[i - 1]))
        throw std::invalid_argument("Grid: t_nodes must be strictly ascending");
    for (std::size_t j = 1; j < r_nodes.size(); ++j)
      if (!(r_nodes[j] > r_nodes[j - 1]))
        throw std::invalid_argument("Grid: r_nodes must be strictly ascending");
  }
};

/// Time nodes on [0, T) with geometrically shrinking spacing towards T.
/// ratio in (0, 1); smaller ratio clusters harder.
inline std::vector<double> make_time_grid(double maturity, std::size_t n, double ratio = 0.85) {
  if (n < 2) throw std::invalid_argument("make_time_grid: need n >= 2");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("make_time_grid: ratio must lie in (0,1)");
  std::vector<double> t(n);
  const double denom = 1.0 - std::pow(ratio, static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    t[i] = maturity * (1.0 - std::pow(ratio, static_cast<double>(i))) / denom;
  t[0] = 0.0;
  return t;
}

/// Uniform rate nodes on [r_min, r_max]; inserts a node at exactly 0 when the
/// range changes sign so the surface's jump at r = 0 sits on a node.
inline std::vector<double> make_rate_grid(double r_min, double r_max, std::size_t n) {
  if (n < 2) throw std::invalid_argument("make_rate_grid: need n >= 2");
  if (!(r_max > r_min)) throw std::invalid_argument("make_rate_grid: r_max must exceed r_min");
  std::vector<double> r(n);
  for (std::size_t j = 0; j < n; ++j)
    r[j] = r_min + (r_max - r_min) * static_cast<double>(j) / static_cast<double>(n - 1);
  if (r_min < 0.0 && r_max > 0.0) {
    auto it = std::lower_bound(r.begin(), r.end(), 0.0);
    if (it != r.end() && *it != 0.0 && it != r.begin()) {
      // snap the nearest node to zero
      auto prev = std::prev(it);
      if (-*prev < *it)
        *prev = 0.0;
      else
        *it = 0.0;
    }
  }
  return r;
}

/// Exercise boundary values b(t_i, r_j) on a Grid, with the interpolation
/// contract used by the premium quadrature: shape-preserving cubic in r
/// (built separately on the r <= 0 and r >= 0 sub-ranges so the jump at
/// r = 0 is never bridged by one cubic), linear in t, clamped outside.
class BoundarySurface {
 public:
  BoundarySurface() = default;

  BoundarySurface(Grid grid, std::vector<double> values, bool converged = false)
      : grid_(std::move(grid)), values_(std::move(values)), converged_(converged) {
    grid_.validate();
    if (values_.size() != grid_.n_t() * grid_.n_r())
      throw std::invalid_argument("BoundarySurface: values size must be n_t * n_r");
    build_slopes();
  }

  const Grid& grid() const { return grid_; }
  bool converged() const { return converged_; }
  void set_converged(bool c) { converged_ = c; }

  double value(std::size_t i, std::size_t j) const { return values_[i * grid_.n_r() + j]; }
  std::span<const double> values() const { return values_; }

  /// b at (t, r). Queries outside the grid clamp to the edge slices/nodes.
  double operator()(double t, double r) const {
    const auto& ts = grid_.t_nodes;
    if (t <= ts.front()) return eval_slice(0, r);
    if (t >= ts.back()) return eval_slice(ts.size() - 1, r);
    const std::size_t hi =
        std::upper_bound(ts.begin(), ts.end(), t) - ts.begin();
    const std::size_t lo = hi - 1;
    if (t == ts[lo]) return eval_slice(lo, r);
    const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * eval_slice(lo, r) + w * eval_slice(hi, r);
  }

  /// b on slice i at rate r (public for the solver's residual sweep).
  double eval_slice(std::size_t i, double r) const {
    const auto& rs = grid_.r_nodes;
    const std::size_t n = rs.size();
    // piece selection: negative queries never read across the r = 0 node
    std::size_t lo_j = 0, hi_j = n - 1;
    if (left_hi_ >= 0) {
      if (r < 0.0)
        hi_j = static_cast<std::size_t>(left_hi_);
      else
        lo_j = static_cast<std::size_t>(right_lo_);
    }
    if (r <= rs[lo_j]) return value(i, lo_j);
    if (r >= rs[hi_j]) return value(i, hi_j);
    const std::size_t hi =
        std::upper_bound(rs.begin() + lo_j, rs.begin() + hi_j + 1, r) - rs.begin();
    const std::size_t lo = hi - 1;
    if (r == rs[lo]) return value(i, lo);
    return hermite_eval(rs[lo], rs[hi], value(i, lo), value(i, hi), slope(i, lo),
                        slope(i, hi), r);
  }

 private:
  double slope(std::size_t i, std::size_t j) const { return slopes_[i * grid_.n_r() + j]; }

  void build_slopes() {
    const std::size_t nt = grid_.n_t();
    const std::size_t nr = grid_.n_r();
    const auto& rs = grid_.r_nodes;
    slopes_.assign(nt * nr, 0.0);

    // sub-range bounds when the rate axis changes sign: r is parametrised
    // right-continuously, so the node at r = 0 belongs to the r >= 0 piece
    // and queries at r < 0 only ever see strictly negative nodes (clamped
    // towards 0 from the last negative node)
    left_hi_ = right_lo_ = -1;
    if (rs.front() < 0.0 && rs.back() >= 0.0) {
      const std::size_t first_nonneg = static_cast<std::size_t>(
          std::lower_bound(rs.begin(), rs.end(), 0.0) - rs.begin());
      right_lo_ = static_cast<std::ptrdiff_t>(first_nonneg);
      left_hi_ = static_cast<std::ptrdiff_t>(first_nonneg - 1);
    }

    for (std::size_t i = 0; i < nt; ++i) {
      auto fill = [&](std::size_t j0, std::size_t j1) {
        const std::size_t len = j1 - j0 + 1;
        if (len < 2) return;
        std::span<const double> xs(rs.data() + j0, len);
        std::span<const double> ys(values_.data() + i * nr + j0, len);
        const auto m = pchip_slopes(xs, ys);
        for (std::size_t k = 0; k < len; ++k) slopes_[i * nr + j0 + k] = m[k];
      };
      if (left_hi_ >= 0) {
        fill(0, static_cast<std::size_t>(left_hi_));
        fill(static_cast<std::size_t>(right_lo_), nr - 1);
      } else {
        fill(0, nr - 1);
      }
    }
  }

  Grid grid_;
  std::vector<double> values_;
  std::vector<double> slopes_;
  std::ptrdiff_t left_hi_ = -1;
  std::ptrdiff_t right_lo_ = -1;
  bool converged_ = false;
};

inline double interpolate(const BoundarySurface& surface, double t, double r) {
  return surface(t, r);
}

/// Generalised inverse c(t, x) = inf{ r in the grid range : b(t, r) >= x }.
/// Returns +infinity when no grid rate reaches x (in particular for x >= K,
/// pass the strike as `cap`); returns the lowest grid rate when the whole
/// slice already dominates x.
inline double boundary_inverse(const BoundarySurface& surface, double t, double x,
                               double cap = std::numeric_limits<double>::infinity()) {
  if (!(x > 0.0)) throw std::domain_error("boundary_inverse: requires x > 0");
  const double inf = std::numeric_limits<double>::infinity();
  if (x >= cap) return inf;
  const auto& rs = surface.grid().r_nodes;
  const double r_min = rs.front();
  const double r_max = rs.back();
  if (surface(t, r_min) >= x) return r_min;
  if (surface(t, r_max) < x) return inf;
  // bisect on the (nondecreasing) interpolant
  double lo = r_min, hi = r_max;
  for (int iter = 0; iter < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (surface(t, mid) >= x)
      hi = mid;
    else
      lo = mid;
  }
  // the threshold can sit exactly on a node (the surface jumps at r = 0)
  for (double node : rs)
    if (std::fabs(hi - node) < 1e-9) return node;
  return hi;
}

}  // namespace avp
