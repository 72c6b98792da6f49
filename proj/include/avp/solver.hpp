#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "avp/boundary.hpp"
#include "avp/parallel.hpp"
#include "avp/pricing.hpp"

namespace avp {

struct SolveDiagnostics {
  std::size_t iterations = 0;
  std::vector<double> sup_diffs;  ///< max |b^(n) - b^(n-1)| per sweep
  double residual_max = 0.0;      ///< integral-equation residual, interior nodes
  bool converged = false;
};

/// Seed surface b^(0) = K at every node, flagged unconverged.
inline BoundarySurface initial_surface(const Grid& grid, const OptionContract& contract) {
  grid.validate();
  contract.validate();
  return BoundarySurface(grid, std::vector<double>(grid.n_t() * grid.n_r(), contract.strike),
                         /*converged=*/false);
}

namespace detail {

/// Root of K - b - v_e(t, r, b) - premium_term = 0 on (0, K) by seeded
/// bisection; 0 when no positive root exists (the negative-rate regime).
/// The premium term is frozen during the solve, so f is monotone in b.
inline double solve_node_equation(const MarketModel& model, const OptionContract& contract,
                                  double t, double r, double premium_term, double seed,
                                  double tol) {
  const double K = contract.strike;
  const double bond = pricing_inputs(model, contract, t, contract.maturity, r, K).bond;
  // f(0+) = K - K P(t,T) - premium_term: the x -> 0 limit of the equation
  if (K * (1.0 - bond) - premium_term <= 0.0) return 0.0;

  auto f = [&](double b) {
    return K - b - european_put(model, contract, t, r, b) - premium_term;
  };
  double lo = 0.0, hi = K;
  if (seed > 0.0 && seed < K) {
    if (f(seed) > 0.0)
      lo = seed;
    else
      hi = seed;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// One fixed-point update at grid node (t_i, r_j): solves
/// K - b - v_e(t_i, r_j, b) = v_p(t_i, r_j, b_prev(t_i, r_j); prev)
/// with the premium evaluated at the frozen previous iterate. Nodes with
/// r <= 0 are pinned at 0: exercise earns no interest on the strike there
/// while waiting keeps the option on rate dips, so the whole half-line is
/// continuation; the frozen equation is bistable at r = 0 and the strike
/// seed would otherwise land on the spurious positive branch.
inline double node_update(const MarketModel& model, const OptionContract& contract,
                          std::size_t i, std::size_t j, const BoundarySurface& prev,
                          const QuadratureConfig& quad) {
  const double t = prev.grid().t_nodes[i];
  const double r = prev.grid().r_nodes[j];
  if (r <= 0.0) return 0.0;
  const double x_prev = std::max(prev.value(i, j), 1e-12 * contract.strike);
  const double vp = premium(model, contract, t, r, x_prev, prev, quad);
  return detail::solve_node_equation(model, contract, t, r, vp, prev.value(i, j),
                                     1e-8 * contract.strike);
}

/// Residual of the integral equation on the converged surface, evaluated at
/// doubled quadrature resolution over interior nodes with b > 0.
inline double integral_equation_residual(const MarketModel& model,
                                         const OptionContract& contract,
                                         const BoundarySurface& surface,
                                         const QuadratureConfig& quad) {
  const Grid& grid = surface.grid();
  const QuadratureConfig fine = quad.doubled();
  const std::size_t nt = grid.n_t(), nr = grid.n_r();
  std::vector<double> res(nt * nr, 0.0);
  parallel_for(nt * nr, [&](std::size_t k) {
    const std::size_t i = k / nr, j = k % nr;
    if (i == 0 || i + 1 >= nt || j == 0 || j + 1 >= nr) return;
    const double b = surface.value(i, j);
    if (!(b > 0.0)) return;
    const double t = grid.t_nodes[i], r = grid.r_nodes[j];
    const double vp = premium(model, contract, t, r, b, surface, fine);
    const double ve = european_put(model, contract, t, r, b);
    res[k] = std::fabs(contract.strike - b - ve - vp);
  });
  return *std::max_element(res.begin(), res.end());
}

/// Jacobi fixed-point iteration over the whole grid until
/// max_ij |b^(n) - b^(n-1)| < eps or max_iter sweeps.
inline std::pair<BoundarySurface, SolveDiagnostics> solve(
    const MarketModel& model, const OptionContract& contract, const Grid& grid, double eps,
    std::size_t max_iter, const QuadratureConfig& quad, bool compute_residual = true) {
  if (!(eps > 0.0)) throw std::invalid_argument("solve: eps must be > 0");
  model.validate();
  contract.validate();
  quad.validate();

  BoundarySurface prev = initial_surface(grid, contract);
  SolveDiagnostics diag;
  const std::size_t nt = grid.n_t(), nr = grid.n_r();
  std::vector<double> next(nt * nr);

  for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
    parallel_for(nt * nr, [&](std::size_t k) {
      next[k] = node_update(model, contract, k / nr, k % nr, prev, quad);
    });
    double sup = 0.0;
    for (std::size_t k = 0; k < nt * nr; ++k)
      sup = std::max(sup, std::fabs(next[k] - prev.values()[k]));
    diag.sup_diffs.push_back(sup);
    diag.iterations = sweep + 1;
    prev = BoundarySurface(grid, next, /*converged=*/false);
    if (sup < eps) {
      diag.converged = true;
      break;
    }
  }
  prev.set_converged(diag.converged);
  if (compute_residual && diag.converged)
    diag.residual_max = integral_equation_residual(model, contract, prev, quad);
  return {std::move(prev), diag};
}

}  // namespace avp
