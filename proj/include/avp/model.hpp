#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace avp {

/// Ornstein-Uhlenbeck short rate dr = kappa (theta - r) dt + beta dW.
struct VasicekParams {
  double kappa = 0.3;   ///< mean-reversion speed (1/time, > 0)
  double theta = 0.05;  ///< long-run level
  double beta = 0.01;   ///< rate volatility (>= 0)

  void validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("VasicekParams: kappa must be > 0");
    if (!(beta >= 0.0)) throw std::invalid_argument("VasicekParams: beta must be >= 0");
  }
};

/// Vasicek rates plus lognormal stock with correlated drivers.
struct MarketModel {
  VasicekParams rates;
  double sigma = 0.4;  ///< stock volatility (> 0)
  double rho = 0.5;    ///< Brownian correlation, in (-1, 1)

  void validate() const {
    rates.validate();
    if (!(sigma > 0.0)) throw std::invalid_argument("MarketModel: sigma must be > 0");
    if (!(rho > -1.0 && rho < 1.0))
      throw std::invalid_argument("MarketModel: rho must lie in (-1, 1)");
  }
};

struct OptionContract {
  double strike = 100.0;
  double maturity = 1.0;

  void validate() const {
    if (!(strike > 0.0)) throw std::invalid_argument("OptionContract: strike must be > 0");
    if (!(maturity > 0.0))
      throw std::invalid_argument("OptionContract: maturity must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Stable kernels. All are smooth limits as a*u -> 0.
// ---------------------------------------------------------------------------

/// g(a, u) = (1 - e^{-a u}) / a, with g(0, u) = u.
inline double g_decay(double a, double u) {
  if (a == 0.0) return u;
  return -std::expm1(-a * u) / a;
}

/// int_0^u g(a, w) dw = (u - g(a, u)) / a.
inline double int_g(double a, double u) {
  const double z = a * u;
  if (std::fabs(z) < 1e-4) {
    // u^2/2 * (1 - z/3 + z^2/12 - z^3/60)
    return 0.5 * u * u * (1.0 - z / 3.0 + z * z / 12.0 - z * z * z / 60.0);
  }
  return (u - g_decay(a, u)) / a;
}

/// int_0^u g(a, w)^2 dw = (u - 2 g(a,u) + g(2a,u)) / a^2.
inline double int_g_sq(double a, double u) {
  const double z = a * u;
  if (std::fabs(z) < 1e-3) {
    // u^3/3 - a u^4/4 + 7 a^2 u^5/60 - a^3 u^6/24
    const double u3 = u * u * u;
    return u3 / 3.0 - z * u3 / 4.0 + 7.0 * z * z * u3 / 60.0 - z * z * z * u3 / 24.0;
  }
  const double g1 = g_decay(a, u);
  return (u - 2.0 * g1 + g_decay(2.0 * a, u)) / (a * a);
}

// ---------------------------------------------------------------------------
// Conditional moments of (r_s, int_t^s r_u du) given r_t = r.
// ---------------------------------------------------------------------------

struct RateMoments {
  double mean_rate;     ///< E[r_s]
  double var_rate;      ///< Var[r_s]
  double mean_int;      ///< E[int_t^s r du]  (the log-discount mu(t, s))
  double var_int;       ///< Var[int_t^s r du]
  double cov_int_rate;  ///< Cov[int_t^s r du, r_s]
};

inline RateMoments rate_moments(const VasicekParams& p, double r, double t, double s) {
  if (s < t) throw std::domain_error("rate_moments: requires s >= t");
  const double dt = s - t;
  const double decay = std::exp(-p.kappa * dt);
  const double g1 = g_decay(p.kappa, dt);
  const double b2 = p.beta * p.beta;
  RateMoments m;
  m.mean_rate = r * decay + p.theta * (1.0 - decay);
  m.var_rate = b2 * g_decay(2.0 * p.kappa, dt);
  m.mean_int = r * g1 + p.theta * (dt - g1);
  m.var_int = b2 * int_g_sq(p.kappa, dt);
  m.cov_int_rate = 0.5 * b2 * g1 * g1;
  return m;
}

/// Zero-coupon bond P(t, T) = E_r[e^{-int_t^T r_u du}] = e^{-mu + var_int/2}.
inline double bond_price(const VasicekParams& p, double t, double r, double T) {
  if (t > T) throw std::domain_error("bond_price: requires t <= T");
  const RateMoments m = rate_moments(p, r, t, T);
  return std::exp(-m.mean_int + 0.5 * m.var_int);
}

// ---------------------------------------------------------------------------
// Inputs of the closed-form put / premium kernels for a given (t, u, r, x).
// ---------------------------------------------------------------------------

struct PricingInputs {
  double d1 = 0.0;
  double d2 = 0.0;
  double q = 0.0;        ///< tilted-measure mean of r_u
  double mu = 0.0;       ///< log-discount E[int r]
  double gamma1 = 0.0;   ///< variance of the stock's Gaussian exponent
  double gamma2 = 0.0;   ///< tilted-measure variance of r_u
  double rho_tilde = 0.0;
  double L = 0.0;        ///< log-drift, e^L = e^{-gamma1/2} / P(t, u)
  double bond = 1.0;     ///< P(t, u)
  bool degenerate = false;  ///< true when u == t (gamma's vanish, rho_tilde unset)
};

/// All scalar inputs of the European-put and premium kernels at horizon u.
/// Requires u >= t and x > 0. At u == t the degenerate limits are returned
/// (q = r, gamma's = 0) with rho_tilde set to 0 and flagged.
inline PricingInputs pricing_inputs(const MarketModel& model, const OptionContract& contract,
                                    double t, double u, double r, double x) {
  if (u < t) throw std::domain_error("pricing_inputs: requires u >= t");
  if (!(x > 0.0)) throw std::domain_error("pricing_inputs: requires x > 0");

  const VasicekParams& p = model.rates;
  const double dt = u - t;
  const double g1 = g_decay(p.kappa, dt);
  const double b2 = p.beta * p.beta;

  PricingInputs in;
  const RateMoments m = rate_moments(p, r, t, u);
  in.mu = m.mean_int;
  in.gamma1 = model.sigma * model.sigma * dt +
              2.0 * model.rho * model.sigma * p.beta * int_g(p.kappa, dt) +
              b2 * int_g_sq(p.kappa, dt);
  in.gamma2 = b2 * g_decay(2.0 * p.kappa, dt);
  in.q = m.mean_rate - 0.5 * b2 * g1 * g1;
  in.bond = std::exp(-in.mu + 0.5 * m.var_int);

  if (dt == 0.0 || in.gamma1 <= 0.0) {
    in.degenerate = true;
    in.rho_tilde = 0.0;
    // d1, d2 -> +-inf depending on moneyness; keep the signed limit.
    const double lk = std::log(contract.strike / x);
    const double inf = std::numeric_limits<double>::infinity();
    in.d1 = in.d2 = lk > 0.0 ? inf : (lk < 0.0 ? -inf : 0.0);
    in.L = 0.0;
    return in;
  }

  const double cov = model.rho * model.sigma * p.beta * g1 + 0.5 * b2 * g1 * g1;
  if (in.gamma2 > 0.0) {
    double rt = cov / std::sqrt(in.gamma1 * in.gamma2);
    if (rt > 1.0) rt = 1.0;
    if (rt < -1.0) rt = -1.0;
    in.rho_tilde = rt;
  } else {
    in.rho_tilde = 0.0;  // beta == 0: the rate has no Gaussian component
  }

  const double sg1 = std::sqrt(in.gamma1);
  in.d1 = (std::log(contract.strike * in.bond / x) + 0.5 * in.gamma1) / sg1;
  in.d2 = in.d1 - sg1;
  in.L = -std::log(in.bond) - 0.5 * in.gamma1;
  return in;
}

}  // namespace avp
