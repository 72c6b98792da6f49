#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "avp/boundary.hpp"
#include "avp/gauss_legendre.hpp"
#include "avp/model.hpp"
#include "avp/normal.hpp"
#include "avp/quadrature.hpp"

namespace avp {

/// European put at (t, r, x): P(t,T) K N(d1) - x N(d2).
inline double european_put(const MarketModel& model, const OptionContract& contract,
                           double t, double r, double x) {
  if (t < 0.0 || t > contract.maturity)
    throw std::domain_error("european_put: requires 0 <= t <= maturity");
  if (!(x > 0.0)) throw std::domain_error("european_put: requires x > 0");
  if (t == contract.maturity) return std::max(contract.strike - x, 0.0);
  const PricingInputs in = pricing_inputs(model, contract, t, contract.maturity, r, x);
  return in.bond * contract.strike * norm_cdf(in.d1) - x * norm_cdf(in.d2);
}

namespace detail {

/// Per-horizon scalars of the premium integrand that do not depend on y.
struct PremiumSlice {
  double bond;        // P(t, u)
  double q;           // tilted mean of r_u
  double sqrt_g2;     // sqrt(gamma2)
  double half_g1;     // gamma1 / 2
  double sg1_rhot;    // sqrt(gamma1) * rho_tilde
  double inv_denom;   // 1 / sqrt((1 - rho_tilde^2) gamma1)
  double log_b_shift; // log(P) - log(x)

  PremiumSlice(const MarketModel& model, const OptionContract& contract, double t,
               double u, double r, double x) {
    const PricingInputs in = pricing_inputs(model, contract, t, u, r, x);
    bond = in.bond;
    q = in.q;
    sqrt_g2 = std::sqrt(std::max(in.gamma2, 0.0));
    half_g1 = 0.5 * in.gamma1;
    const double sg1 = std::sqrt(in.gamma1);
    sg1_rhot = sg1 * in.rho_tilde;
    const double om = std::max(1.0 - in.rho_tilde * in.rho_tilde, 1e-16);
    inv_denom = 1.0 / std::sqrt(om * in.gamma1);
    log_b_shift = std::log(bond) - std::log(x);
  }

  /// (q + y sqrt(gamma2)) N(phi) with the boundary value b already queried.
  double integrand(double y, double b) const {
    if (!(b > 0.0)) return 0.0;  // N(phi) -> 0 as log b -> -inf
    const double num = std::log(b) + log_b_shift + half_g1 - sg1_rhot * y;
    return (q + y * sqrt_g2) * norm_cdf(num * inv_denom);
  }
};

/// Gauss-Legendre nodes mapped onto [a, b]; appends (node, weight) pairs.
inline void map_panel(const GaussLegendreRule& rule, double a, double b,
                      std::vector<std::array<double, 2>>& out) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    out.push_back({c + h * rule.nodes[i], h * rule.weights[i]});
}

/// Inner y-nodes on [-trunc, trunc], split at the image of r = 0 so the
/// surface's jump never sits inside a panel.
inline void inner_nodes(const PremiumSlice& s, const QuadratureConfig& quad,
                        std::vector<std::array<double, 2>>& out) {
  out.clear();
  const double tr = quad.inner_truncation;
  double ystar = std::numeric_limits<double>::quiet_NaN();
  if (s.sqrt_g2 > 0.0) ystar = -s.q / s.sqrt_g2;
  if (std::isfinite(ystar) && ystar > -tr && ystar < tr) {
    const double frac = (ystar + tr) / (2.0 * tr);
    int n_left = static_cast<int>(std::lround(frac * quad.inner_nodes));
    n_left = std::clamp(n_left, 8, quad.inner_nodes - 8);
    map_panel(gauss_legendre(n_left), -tr, ystar, out);
    map_panel(gauss_legendre(quad.inner_nodes - n_left), ystar, tr, out);
  } else {
    map_panel(gauss_legendre(quad.inner_nodes), -tr, tr, out);
  }
}

/// Time panels of [t, T]. The integrand is only piecewise smooth in u: the
/// boundary is interpolated linearly between the surface's time slices, so
/// the panel edges follow the slice knots exactly (the knots themselves
/// cluster geometrically at maturity). A geometric sub-stack inside the
/// first interval resolves the boundary layer at u -> t that appears when x
/// sits near the exercise boundary. outer_nodes acts as a budget: the
/// per-panel Gauss-Legendre order is outer_nodes / 16 (min 1), so doubling
/// the budget refines the order on an identical partition.
inline std::vector<std::array<double, 2>> outer_nodes(double t, double T,
                                                      const QuadratureConfig& quad,
                                                      const std::vector<double>& t_knots) {
  constexpr double kLayerRatio = 0.12;
  constexpr int kLayerPanels = 6;
  const int order = std::clamp(quad.outer_nodes / 16, 1, 12);

  std::vector<double> knots;
  for (double k : t_knots)
    if (k > t + 1e-14 * T && k < T - 1e-14 * T) knots.push_back(k);

  std::vector<double> edges;
  edges.reserve(knots.size() + kLayerPanels + 12);
  const double first = knots.empty() ? T : knots.front();
  for (int j = kLayerPanels; j >= 1; --j)
    edges.push_back(t + (first - t) * std::pow(kLayerRatio, j));
  edges.insert(edges.end(), knots.begin(), knots.end());
  // sparse-knot surfaces (constant boundaries, coarse grids): keep a minimal
  // geometric refinement towards maturity
  if (knots.size() < 8) {
    const auto extra = geometric_panels(first, T, 8, 0.5);
    edges.insert(edges.end(), extra.begin(), extra.end() - 1);
    std::sort(edges.begin(), edges.end());
  }
  edges.erase(std::remove_if(edges.begin(), edges.end(),
                             [&](double e) { return e <= t || e >= T; }),
              edges.end());
  edges.insert(edges.begin(), t);
  edges.push_back(T);

  std::vector<std::array<double, 2>> nodes;
  nodes.reserve(edges.size() * order);
  const auto& rule = gauss_legendre(order);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    if (edges[k + 1] > edges[k]) map_panel(rule, edges[k], edges[k + 1], nodes);
  return nodes;
}

}  // namespace detail

/// Inner-integral integrand of the premium at (u, y) for the state (t, r, x):
/// (q(t,u) + y sqrt(gamma2)) N(phi(t,u,y; b)), with b queried at
/// (u, q + y sqrt(gamma2)). A zero boundary value sends N(phi) to 0.
/// u == t is evaluated at the offset horizon t + 1e-10 * maturity.
inline double premium_integrand(const MarketModel& model, const OptionContract& contract,
                                double t, double u, double y, double r, double x,
                                const BoundarySurface& boundary) {
  if (u < t) throw std::domain_error("premium_integrand: requires u >= t");
  if (u > contract.maturity)
    throw std::domain_error("premium_integrand: requires u <= maturity");
  const double u_eff = std::max(u, t + 1e-10 * contract.maturity);
  const detail::PremiumSlice s(model, contract, t, u_eff, r, x);
  const double b = boundary(u_eff, s.q + y * s.sqrt_g2);
  return s.integrand(y, b);
}

/// Early-exercise premium for an arbitrary boundary surface:
/// int_t^T K P(t,u) E_y[(q + y sqrt(gamma2)) N(phi)] du.
inline double premium(const MarketModel& model, const OptionContract& contract, double t,
                      double r, double x, const BoundarySurface& boundary,
                      const QuadratureConfig& quad) {
  if (t < 0.0 || t >= contract.maturity)
    throw std::domain_error("premium: requires 0 <= t < maturity");
  if (!(x > 0.0)) throw std::domain_error("premium: requires x > 0");
  quad.validate();

  const auto outer = detail::outer_nodes(t, contract.maturity, quad, boundary.grid().t_nodes);
  std::vector<std::array<double, 2>> ys;
  double total = 0.0;
  for (const auto& [u, w] : outer) {
    const detail::PremiumSlice s(model, contract, t, u, r, x);
    double inner = 0.0;
    if (s.sqrt_g2 > 0.0) {
      detail::inner_nodes(s, quad, ys);
      for (const auto& [y, wy] : ys) {
        const double b = boundary(u, s.q + y * s.sqrt_g2);
        inner += wy * norm_pdf(y) * s.integrand(y, b);
      }
    } else {
      // beta == 0: the rate at u is deterministic, no Gaussian axis
      inner = s.integrand(0.0, boundary(u, s.q));
    }
    total += w * contract.strike * s.bond * inner;
  }
  return total;
}

/// Premium at the centre point and at the four bumped points used by the
/// finite-difference Greeks, fused into one quadrature pass.
struct BumpedPremium {
  double center, x_plus, x_minus, r_plus, r_minus;
};

inline BumpedPremium premium_bumped(const MarketModel& model, const OptionContract& contract,
                                    double t, double r, double x,
                                    const BoundarySurface& boundary,
                                    const QuadratureConfig& quad, double bump_x,
                                    double bump_r) {
  if (t < 0.0 || t >= contract.maturity)
    throw std::domain_error("premium_bumped: requires 0 <= t < maturity");
  if (!(x - bump_x > 0.0)) throw std::domain_error("premium_bumped: requires x - bump_x > 0");
  quad.validate();

  // x enters the integrand only through -log(x) in phi's numerator
  const double dlx_p = std::log(x) - std::log(x + bump_x);
  const double dlx_m = std::log(x) - std::log(x - bump_x);

  const auto outer = detail::outer_nodes(t, contract.maturity, quad, boundary.grid().t_nodes);
  std::vector<std::array<double, 2>> ys;
  BumpedPremium out{0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& [u, w] : outer) {
    const detail::PremiumSlice sc(model, contract, t, u, r, x);
    const detail::PremiumSlice sp(model, contract, t, u, r + bump_r, x);
    const detail::PremiumSlice sm(model, contract, t, u, r - bump_r, x);
    double ic = 0.0, ixp = 0.0, ixm = 0.0, irp = 0.0, irm = 0.0;
    if (sc.sqrt_g2 > 0.0) {
      detail::inner_nodes(sc, quad, ys);
      const double scale = sc.inv_denom;  // same gamma's for all five variants
      for (const auto& [y, wy] : ys) {
        const double wpdf = wy * norm_pdf(y);
        const double b = boundary(u, sc.q + y * sc.sqrt_g2);
        if (b > 0.0) {
          const double num = std::log(b) + sc.log_b_shift + sc.half_g1 - sc.sg1_rhot * y;
          const double base = (sc.q + y * sc.sqrt_g2);
          ic += wpdf * base * norm_cdf(num * scale);
          ixp += wpdf * base * norm_cdf((num + dlx_p) * scale);
          ixm += wpdf * base * norm_cdf((num + dlx_m) * scale);
        }
        irp += wpdf * sp.integrand(y, boundary(u, sp.q + y * sp.sqrt_g2));
        irm += wpdf * sm.integrand(y, boundary(u, sm.q + y * sm.sqrt_g2));
      }
    } else {
      const double b = boundary(u, sc.q);
      if (b > 0.0) {
        const double num = std::log(b) + sc.log_b_shift + sc.half_g1;
        ic = sc.q * norm_cdf(num * sc.inv_denom);
        ixp = sc.q * norm_cdf((num + dlx_p) * sc.inv_denom);
        ixm = sc.q * norm_cdf((num + dlx_m) * sc.inv_denom);
      }
      irp = sp.integrand(0.0, boundary(u, sp.q));
      irm = sm.integrand(0.0, boundary(u, sm.q));
    }
    const double kw = w * contract.strike;
    out.center += kw * sc.bond * ic;
    out.x_plus += kw * sc.bond * ixp;
    out.x_minus += kw * sc.bond * ixm;
    out.r_plus += kw * sp.bond * irp;
    out.r_minus += kw * sm.bond * irm;
  }
  return out;
}

struct RefinedPremium {
  double value;
  double error_bound;
  QuadratureConfig used;
};

/// Doubles the node counts until successive estimates agree to
/// target_rel_tol * max(|value|, 0.01 K); throws QuadratureError with the
/// best estimate once the node cap (max_doublings) is exhausted.
inline RefinedPremium premium_refined(const MarketModel& model, const OptionContract& contract,
                                      double t, double r, double x,
                                      const BoundarySurface& boundary,
                                      QuadratureConfig quad, int max_doublings = 3) {
  double prev = premium(model, contract, t, r, x, boundary, quad);
  double bound = std::fabs(prev);
  for (int k = 0; k < max_doublings; ++k) {
    const QuadratureConfig finer = quad.doubled();
    const double cur = premium(model, contract, t, r, x, boundary, finer);
    bound = std::fabs(cur - prev);
    if (bound <= quad.target_rel_tol * std::max(std::fabs(cur), 0.01 * contract.strike))
      return {cur, bound, finer};
    prev = cur;
    quad = finer;
  }
  throw QuadratureError(prev, bound);
}

}  // namespace avp
