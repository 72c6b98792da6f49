#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "avp/boundary.hpp"
#include "avp/pricing.hpp"

namespace avp {

struct PricingResult {
  double value = 0.0;
  double european = 0.0;
  double premium = 0.0;
  bool exercise_now = false;
  double boundary_at_point = 0.0;
};

/// Stop iff x <= b(t, r); at t = T always stop (take the payoff).
inline bool exercise_decision(const BoundarySurface& surface, const OptionContract& contract,
                              double t, double r, double x) {
  if (!(x > 0.0)) throw std::domain_error("exercise_decision: requires x > 0");
  if (t >= contract.maturity) return true;
  return x <= surface(t, r);
}

/// American put value via the early-exercise decomposition v = v_e + v_p.
inline PricingResult price(const MarketModel& model, const OptionContract& contract,
                           const BoundarySurface& surface, double t, double r, double x,
                           const QuadratureConfig& quad) {
  if (t < 0.0 || t > contract.maturity)
    throw std::domain_error("price: requires 0 <= t <= maturity");
  if (!(x > 0.0)) throw std::domain_error("price: requires x > 0");
  if (!surface.converged())
    throw std::invalid_argument("price: surface is not converged; solve to tolerance first");

  PricingResult res;
  if (t == contract.maturity) {
    res.european = std::max(contract.strike - x, 0.0);
    res.premium = 0.0;
    res.value = res.european;
    res.exercise_now = true;
    res.boundary_at_point = surface(t, r);
    return res;
  }
  res.european = european_put(model, contract, t, r, x);
  res.premium = premium(model, contract, t, r, x, surface, quad);
  res.value = res.european + res.premium;
  res.boundary_at_point = surface(t, r);
  res.exercise_now = x <= res.boundary_at_point;
  return res;
}

struct Greeks {
  double v_x = 0.0;
  double v_r = 0.0;
  double v_t = 0.0;
};

/// Central finite differences of the decomposition price. In the stopping
/// region the exact gradient (-1, 0, 0) of the payoff is returned; a time
/// bump that would cross t = 0 or t = T falls back to a one-sided step.
inline Greeks greeks(const MarketModel& model, const OptionContract& contract,
                     const BoundarySurface& surface, double t, double r, double x,
                     double bump_x, double bump_r, double bump_t,
                     const QuadratureConfig& quad) {
  if (!(bump_x > 0.0 && bump_r > 0.0 && bump_t > 0.0))
    throw std::invalid_argument("greeks: bumps must be > 0");
  if (exercise_decision(surface, contract, t, r, x)) return {-1.0, 0.0, 0.0};

  auto value = [&](double tt, double rr, double xx) {
    if (tt >= contract.maturity) return std::max(contract.strike - xx, 0.0);
    return european_put(model, contract, tt, rr, xx) +
           premium(model, contract, tt, rr, xx, surface, quad);
  };

  Greeks g;
  const BumpedPremium vp =
      premium_bumped(model, contract, t, r, x, surface, quad, bump_x, bump_r);
  const double vxp = european_put(model, contract, t, r, x + bump_x) + vp.x_plus;
  const double vxm = european_put(model, contract, t, r, x - bump_x) + vp.x_minus;
  g.v_x = (vxp - vxm) / (2.0 * bump_x);
  const double vrp = european_put(model, contract, t, r + bump_r, x) + vp.r_plus;
  const double vrm = european_put(model, contract, t, r - bump_r, x) + vp.r_minus;
  g.v_r = (vrp - vrm) / (2.0 * bump_r);

  const double t_hi = t + bump_t;
  const double t_lo = t - bump_t;
  if (t_lo >= 0.0 && t_hi <= contract.maturity) {
    g.v_t = (value(t_hi, r, x) - value(t_lo, r, x)) / (2.0 * bump_t);
  } else if (t_lo < 0.0) {
    g.v_t = (value(std::min(t_hi, contract.maturity), r, x) - value(t, r, x)) / bump_t;
  } else {
    g.v_t = (value(t, r, x) - value(t_lo, r, x)) / bump_t;
  }
  return g;
}

}  // namespace avp
