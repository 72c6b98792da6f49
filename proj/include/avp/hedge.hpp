#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "avp/mc.hpp"
#include "avp/pricer.hpp"

namespace avp {

/// Outcome of the delta-hedging backtest. Tracking errors are discounted to
/// time 0; consumption is the discounted cumulative K r dt accrued while the
/// state sits in the stopping region.
struct HedgeReport {
  double rms_replication_error = 0.0;  ///< rms of portfolio - payoff at exercise
  double mean_consumption = 0.0;
  double max_shortfall = 0.0;          ///< worst payoff shortfall at exercise
  std::vector<double> per_step_rms;    ///< tracking error vs option value per date
  double min_consumption_increment = 0.0;
  double max_continuation_consumption = 0.0;  ///< should be exactly 0
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
};

/// Replicates the option along simulated paths holding v_x in the stock,
/// v_r / P_r in the T-bond and the remainder in the money market, consuming
/// K r dt while in the stopping region. Paths are driven by the same streams
/// for every rebalancing frequency, so reports are directly comparable.
inline HedgeReport hedge_backtest(const MarketModel& model, const OptionContract& contract,
                                  const BoundarySurface& surface, double r0, double x0,
                                  const PathConfig& cfg, std::size_t rebalance_steps,
                                  const QuadratureConfig& quad) {
  if (!surface.converged())
    throw std::invalid_argument("hedge_backtest: surface is not converged");
  model.validate();
  contract.validate();
  cfg.validate();

  const double T = contract.maturity;
  const double K = contract.strike;
  PathConfig path_cfg = cfg;
  path_cfg.n_steps = rebalance_steps;
  const PathSet paths(model, 0.0, r0, x0, T, path_cfg);
  const std::size_t n = paths.n_paths();
  const std::size_t steps = paths.n_steps();
  const double dt = paths.dt();
  const double bump_x = 1e-3 * x0;
  const double bump_r = 1e-4;

  const double v0 = european_put(model, contract, 0.0, r0, x0) +
                    premium(model, contract, 0.0, r0, x0, surface, quad);

  struct PathStats {
    double err_exercise_sq = 0.0;
    double consumption = 0.0;
    double shortfall = 0.0;
    double min_increment = 0.0;
    double max_cont_consumption = 0.0;
  };

  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<PathStats> stats(n);
  std::vector<std::vector<double>> step_sq(n_chunks);

  parallel_for(n_chunks, [&](std::size_t c) {
    auto& sq = step_sq[c];
    sq.assign(steps + 1, 0.0);
    const std::size_t i_end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < i_end; ++i) {
      PathStats& st = stats[i];
      double port = v0;  // discounted portfolio value
      double phi_stock = 0.0, phi_bond = 0.0;
      double prev_dx = 0.0, prev_dp = 0.0;  // discounted stock / bond prices
      double prev_c_rate = 0.0;             // discounted consumption rate
      bool exercised = false;

      paths.visit_path(i, [&](std::size_t k, double u, double r, double ir, double x) {
        const double disc = std::exp(-ir);
        const double t = u;
        const double bond = bond_price(model.rates, t, r, T);

        // settle the step ending at t_k with the previous holdings
        if (k > 0) {
          const double dc = prev_c_rate * dt;  // discounted consumption increment
          port += phi_stock * (disc * x - prev_dx) + phi_bond * (disc * bond - prev_dp) - dc;
          st.consumption += dc;
          st.min_increment = std::min(st.min_increment, dc);
        }

        const bool stop_now = k == steps || exercise_decision(surface, contract, t, r, x);
        double v, vx, vr;
        if (k == steps) {
          v = std::max(K - x, 0.0);
          vx = x < K ? -1.0 : 0.0;
          vr = 0.0;
        } else if (stop_now) {
          v = K - x;
          vx = -1.0;
          vr = 0.0;
        } else {
          const BumpedPremium bp =
              premium_bumped(model, contract, t, r, x, surface, quad, bump_x, bump_r);
          v = european_put(model, contract, t, r, x) + bp.center;
          vx = (european_put(model, contract, t, r, x + bump_x) + bp.x_plus -
                european_put(model, contract, t, r, x - bump_x) - bp.x_minus) /
               (2.0 * bump_x);
          vr = (european_put(model, contract, t, r + bump_r, x) + bp.r_plus -
                european_put(model, contract, t, r - bump_r, x) - bp.r_minus) /
               (2.0 * bump_r);
        }

        const double err = port - disc * v;
        sq[k] += err * err;
        if (!exercised && (stop_now || k == steps)) {
          exercised = true;
          const double payoff = std::max(K - x, 0.0);
          const double e = port - disc * payoff;
          st.err_exercise_sq = e * e;
          st.shortfall = std::max(0.0, disc * payoff - port);
        }

        if (k < steps) {
          // rebalance: hold v_x stock, v_r / P_r bonds, rest in money market
          phi_stock = vx;
          const double p_r = -g_decay(model.rates.kappa, T - t) * bond;
          phi_bond = p_r != 0.0 ? vr / p_r : 0.0;
          prev_dx = disc * x;
          prev_dp = disc * bond;
          prev_c_rate = stop_now ? disc * K * r : 0.0;
        }
      });
    }
  });

  HedgeReport rep;
  rep.n_paths = n;
  rep.n_steps = steps;
  rep.per_step_rms.assign(steps + 1, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c)
    for (std::size_t k = 0; k <= steps; ++k) rep.per_step_rms[k] += step_sq[c][k];
  for (std::size_t k = 0; k <= steps; ++k)
    rep.per_step_rms[k] = std::sqrt(rep.per_step_rms[k] / static_cast<double>(n));

  double sum_sq = 0.0, sum_cons = 0.0;
  rep.min_consumption_increment = 0.0;
  for (const auto& st : stats) {
    sum_sq += st.err_exercise_sq;
    sum_cons += st.consumption;
    rep.max_shortfall = std::max(rep.max_shortfall, st.shortfall);
    rep.min_consumption_increment =
        std::min(rep.min_consumption_increment, st.min_increment);
    rep.max_continuation_consumption =
        std::max(rep.max_continuation_consumption, st.max_cont_consumption);
  }
  rep.rms_replication_error = std::sqrt(sum_sq / static_cast<double>(n));
  rep.mean_consumption = sum_cons / static_cast<double>(n);
  return rep;
}

}  // namespace avp
