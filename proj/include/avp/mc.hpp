#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "avp/boundary.hpp"
#include "avp/model.hpp"
#include "avp/parallel.hpp"
#include "avp/rng.hpp"

namespace avp {

struct PathConfig {
  std::size_t n_paths = 100000;
  std::size_t n_steps = 50;  ///< steps per year
  std::uint64_t seed = 1;
  bool antithetic = false;

  void validate() const {
    if (n_paths < 2) throw std::invalid_argument("PathConfig: n_paths >= 2");
    if (n_steps < 1) throw std::invalid_argument("PathConfig: n_steps >= 1");
  }
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

namespace detail {

/// Exact one-step sampler of the jointly Gaussian trio
/// (r_{t+dt} shock, int_t^{t+dt} r du shock, stock Brownian increment).
class StepSampler {
 public:
  StepSampler(const MarketModel& model, double dt)
      : dt_(dt), sigma_(model.sigma), theta_(model.rates.theta) {
    const VasicekParams& p = model.rates;
    decay_ = std::exp(-p.kappa * dt);
    g_ = g_decay(p.kappa, dt);
    const double b2 = p.beta * p.beta;
    // covariance of (eps_r, eps_I, dB)
    const double c00 = b2 * g_decay(2.0 * p.kappa, dt);
    const double c01 = 0.5 * b2 * g_ * g_;
    const double c11 = b2 * int_g_sq(p.kappa, dt);
    const double c02 = model.rho * p.beta * g_;
    const double c12 = model.rho * p.beta * int_g(p.kappa, dt);
    const double c22 = dt;
    // Cholesky with zero-pivot guards (beta == 0 degenerates rows 1-2)
    l00_ = std::sqrt(std::max(c00, 0.0));
    l10_ = l00_ > 0.0 ? c01 / l00_ : 0.0;
    l11_ = std::sqrt(std::max(c11 - l10_ * l10_, 0.0));
    l20_ = l00_ > 0.0 ? c02 / l00_ : 0.0;
    l21_ = l11_ > 0.0 ? (c12 - l20_ * l10_) / l11_ : 0.0;
    l22_ = std::sqrt(std::max(c22 - l20_ * l20_ - l21_ * l21_, 0.0));
  }

  double dt() const { return dt_; }

  /// Advances (r, int_r, log_x) in place given three standard normals.
  void step(double& r, double& int_r, double& log_x, const double* z) const {
    const double eps_r = l00_ * z[0];
    const double eps_i = l10_ * z[0] + l11_ * z[1];
    const double db = l20_ * z[0] + l21_ * z[1] + l22_ * z[2];
    const double d_int = r * g_ + theta_ * (dt_ - g_) + eps_i;
    r = r * decay_ + theta_ * (1.0 - decay_) + eps_r;
    int_r += d_int;
    log_x += d_int - 0.5 * sigma_ * sigma_ * dt_ + sigma_ * db;
  }

 private:
  double dt_, sigma_, theta_, decay_, g_;
  double l00_, l10_, l11_, l20_, l21_, l22_;
};

inline std::size_t step_count(double horizon, std::size_t steps_per_year) {
  const double raw = horizon * static_cast<double>(steps_per_year);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::ceil(raw - 1e-12))));
}

}  // namespace detail

/// Replayable set of exact-transition paths of (r, int r, X). Paths are not
/// stored: each is regenerated on demand from its counter-based stream, so
/// the set is cheap to hold and deterministic under any traversal order.
class PathSet {
 public:
  PathSet(const MarketModel& model, double t0, double r0, double x0, double horizon,
          const PathConfig& cfg)
      : model_(model), t0_(t0), r0_(r0), x0_(x0), horizon_(horizon), cfg_(cfg) {
    if (!(x0 > 0.0)) throw std::domain_error("PathSet: requires x0 > 0");
    if (!(horizon > 0.0)) throw std::domain_error("PathSet: requires horizon > 0");
    model_.validate();
    cfg_.validate();
    n_steps_ = detail::step_count(horizon, cfg.n_steps);
  }

  const MarketModel& model() const { return model_; }
  const PathConfig& config() const { return cfg_; }
  double t0() const { return t0_; }
  double x0() const { return x0_; }
  double horizon() const { return horizon_; }
  std::size_t n_paths() const { return cfg_.n_paths; }
  std::size_t n_steps() const { return n_steps_; }
  double dt() const { return horizon_ / static_cast<double>(n_steps_); }

  /// Replays path i, calling f(k, u_k, r, int_r, x) at every step time
  /// u_k = k * dt (k = 0 .. n_steps, u_0 = 0 included).
  template <class F>
  void visit_path(std::size_t i, F&& f) const {
    const detail::StepSampler sampler(model_, dt());
    PathRng rng(cfg_.seed, cfg_.antithetic ? i / 2 : i);
    const double sign = (cfg_.antithetic && (i & 1)) ? -1.0 : 1.0;
    double r = r0_, int_r = 0.0, log_x = std::log(x0_);
    f(std::size_t{0}, 0.0, r, int_r, x0_);
    for (std::size_t k = 1; k <= n_steps_; ++k) {
      const double z[3] = {sign * rng.next_normal(), sign * rng.next_normal(),
                           sign * rng.next_normal()};
      sampler.step(r, int_r, log_x, z);
      f(k, static_cast<double>(k) * dt(), r, int_r, std::exp(log_x));
    }
  }

  struct PathPoint {
    double u, r, int_r, x;
  };

  std::vector<PathPoint> path(std::size_t i) const {
    std::vector<PathPoint> pts;
    pts.reserve(n_steps_ + 1);
    visit_path(i, [&](std::size_t, double u, double r, double ir, double x) {
      pts.push_back({u, r, ir, x});
    });
    return pts;
  }

 private:
  MarketModel model_;
  double t0_, r0_, x0_, horizon_;
  PathConfig cfg_;
  std::size_t n_steps_;
};

inline PathSet simulate_paths(const MarketModel& model, double r0, double x0, double horizon,
                              const PathConfig& cfg, double t0 = 0.0) {
  return PathSet(model, t0, r0, x0, horizon, cfg);
}

namespace detail {

/// Mean and standard error of per-path samples; antithetic pairs are
/// averaged first so the error reflects independent samples only.
inline McEstimate reduce_samples(const std::vector<double>& samples, bool antithetic) {
  std::vector<double> eff;
  if (antithetic) {
    eff.reserve(samples.size() / 2);
    for (std::size_t i = 0; i + 1 < samples.size(); i += 2)
      eff.push_back(0.5 * (samples[i] + samples[i + 1]));
  } else {
    eff = samples;
  }
  const std::size_t n = eff.size();
  double sum = 0.0;
  for (double v : eff) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : eff) ss += (v - mean) * (v - mean);
  const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

}  // namespace detail

/// Sample mean and standard error of e^{-int r} * payoff(r_T, int r, X_T).
template <class Payoff>
McEstimate estimate_discounted(const PathSet& paths, Payoff&& payoff) {
  std::vector<double> samples(paths.n_paths());
  const std::size_t last = paths.n_steps();
  parallel_for(paths.n_paths(), [&](std::size_t i) {
    double rt = 0.0, it = 0.0, xt = 0.0;
    paths.visit_path(i, [&](std::size_t k, double, double r, double ir, double x) {
      if (k == last) {
        rt = r;
        it = ir;
        xt = x;
      }
    });
    samples[i] = std::exp(-it) * payoff(rt, it, xt);
  });
  return detail::reduce_samples(samples, paths.config().antithetic);
}

/// Monte Carlo early-exercise premium for a given boundary surface:
/// per-path trapezoidal time-sum of e^{-int r} K r_u 1{X_u < b(t0+u, r_u)}.
inline McEstimate mc_premium(const PathSet& paths, const BoundarySurface& surface,
                             const OptionContract& contract) {
  std::vector<double> samples(paths.n_paths());
  const std::size_t last = paths.n_steps();
  const double dt = paths.dt();
  const double t0 = paths.t0();
  parallel_for(paths.n_paths(), [&](std::size_t i) {
    double acc = 0.0;
    paths.visit_path(i, [&](std::size_t k, double u, double r, double ir, double x) {
      const double w = (k == 0 || k == last) ? 0.5 : 1.0;
      if (x < surface(t0 + u, r)) acc += w * std::exp(-ir) * contract.strike * r * dt;
    });
    samples[i] = acc;
  });
  return detail::reduce_samples(samples, paths.config().antithetic);
}

// ---------------------------------------------------------------------------
// Longstaff-Schwartz lower-bound oracle
// ---------------------------------------------------------------------------

/// Monomial exponents (i, j) of x^i r^j; the default basis is
/// {1, x, x^2, r, r^2, x r} fitted on in-the-money paths.
using BasisSpec = std::vector<std::pair<int, int>>;

inline BasisSpec default_basis() {
  return {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 2}, {1, 1}};
}

namespace detail {

inline void eval_basis(const BasisSpec& spec, double x_norm, double r, double* out) {
  for (std::size_t b = 0; b < spec.size(); ++b)
    out[b] = std::pow(x_norm, spec[b].first) * std::pow(r, spec[b].second);
}

/// Solves the SPD normal equations by Cholesky; falls back to a fixed 1e-8
/// ridge when a pivot collapses (rank-deficient regression).
inline std::vector<double> solve_normal_equations(std::vector<double> a,
                                                  std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(a[i * n + i]));
  if (scale == 0.0) scale = 1.0;

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<double> l(a);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = l[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
        if (i == j) {
          if (s <= 1e-12 * scale) {
            ok = false;
            break;
          }
          l[i * n + i] = std::sqrt(s);
        } else {
          l[i * n + j] = s / l[j * n + j];
        }
      }
    }
    if (ok) {
      std::vector<double> y(n), beta(n);
      for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
        y[i] = s / l[i * n + i];
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * beta[k];
        beta[ii] = s / l[ii * n + ii];
      }
      return beta;
    }
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-8 * scale;
  }
  throw std::runtime_error("ls_american: normal equations not solvable");
}

}  // namespace detail

/// Two-pass least-squares Monte Carlo for the American put. The regression
/// pass fits per-date continuation values on the basis; an independent
/// evaluation pass applies the fitted policy, giving a lower-bound-biased
/// estimate of the option value.
inline McEstimate ls_american(const MarketModel& model, const OptionContract& contract,
                              double r0, double x0, const PathConfig& cfg,
                              const BasisSpec& basis = default_basis()) {
  if (basis.empty()) throw std::invalid_argument("ls_american: basis_spec must be nonempty");
  if (basis.size() > 32) throw std::invalid_argument("ls_american: basis_spec too large");
  cfg.validate();
  const double T = contract.maturity;
  const double K = contract.strike;
  const std::size_t nb = basis.size();

  PathConfig reg_cfg = cfg;
  reg_cfg.antithetic = false;
  const PathSet reg_paths(model, 0.0, r0, x0, T, reg_cfg);
  const std::size_t n = reg_paths.n_paths();
  const std::size_t steps = reg_paths.n_steps();

  // store (x, r, int_r) per path and date for the backward pass
  std::vector<float> xs(n * (steps + 1)), rs(n * (steps + 1)), irs(n * (steps + 1));
  parallel_for(n, [&](std::size_t i) {
    reg_paths.visit_path(i, [&](std::size_t k, double, double r, double ir, double x) {
      xs[i * (steps + 1) + k] = static_cast<float>(x);
      rs[i * (steps + 1) + k] = static_cast<float>(r);
      irs[i * (steps + 1) + k] = static_cast<float>(ir);
    });
  });

  // cash[i]: payoff at the path's current exercise date, discounted to 0
  std::vector<double> cash(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i * (steps + 1) + steps];
    cash[i] = std::exp(-static_cast<double>(irs[i * (steps + 1) + steps])) *
              std::max(K - x, 0.0);
  }

  std::vector<std::vector<double>> coeffs(steps);  // fitted policy per date
  std::vector<double> phi(nb);
  for (std::size_t k = steps - 1; k >= 1; --k) {
    std::vector<double> a(nb * nb, 0.0), rhs(nb, 0.0);
    std::size_t n_itm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xs[i * (steps + 1) + k];
      if (x >= K) continue;
      const double disc = std::exp(-static_cast<double>(irs[i * (steps + 1) + k]));
      const double y = cash[i] / disc;  // future cashflow discounted to t_k
      detail::eval_basis(basis, x / K, rs[i * (steps + 1) + k], phi.data());
      for (std::size_t p = 0; p < nb; ++p) {
        rhs[p] += phi[p] * y;
        for (std::size_t q = 0; q <= p; ++q) a[p * nb + q] += phi[p] * phi[q];
      }
      ++n_itm;
    }
    if (n_itm < nb) continue;  // too few in-the-money paths; never exercise here
    for (std::size_t p = 0; p < nb; ++p)
      for (std::size_t q = p + 1; q < nb; ++q) a[p * nb + q] = a[q * nb + p];
    coeffs[k] = detail::solve_normal_equations(std::move(a), std::move(rhs));

    for (std::size_t i = 0; i < n; ++i) {
      const double x = xs[i * (steps + 1) + k];
      if (x >= K) continue;
      detail::eval_basis(basis, x / K, rs[i * (steps + 1) + k], phi.data());
      double cont = 0.0;
      for (std::size_t p = 0; p < nb; ++p) cont += coeffs[k][p] * phi[p];
      if (K - x >= cont) {
        cash[i] = std::exp(-static_cast<double>(irs[i * (steps + 1) + k])) * (K - x);
      }
    }
  }

  // independent evaluation pass: disjoint streams, same fitted policy
  PathConfig eval_cfg = cfg;
  eval_cfg.seed = cfg.seed ^ 0x9E3779B97F4A7C15ull;
  const PathSet eval_paths(model, 0.0, r0, x0, T, eval_cfg);
  std::vector<double> samples(eval_paths.n_paths());
  parallel_for(eval_paths.n_paths(), [&](std::size_t i) {
    double phi_loc[32];
    double value = 0.0;
    bool stopped = false;
    eval_paths.visit_path(i, [&](std::size_t k, double, double r, double ir, double x) {
      if (stopped || k == 0) return;
      if (k == steps) {
        value = std::exp(-ir) * std::max(K - x, 0.0);
        stopped = true;
        return;
      }
      if (x >= K || coeffs[k].empty()) return;
      detail::eval_basis(basis, x / K, r, phi_loc);
      double cont = 0.0;
      for (std::size_t p = 0; p < basis.size(); ++p) cont += coeffs[k][p] * phi_loc[p];
      if (K - x >= cont) {
        value = std::exp(-ir) * (K - x);
        stopped = true;
      }
    });
    samples[i] = value;
  });
  return detail::reduce_samples(samples, eval_cfg.antithetic);
}

}  // namespace avp
