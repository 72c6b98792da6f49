#include "avp/mc.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "avp/pricer.hpp"
#include "avp/pricing.hpp"
#include "test_support.hpp"

using namespace avp;
using avp::testing::coarse_quad;
using avp::testing::coarse_surface;
using avp::testing::paper_contract;
using avp::testing::paper_model;

namespace {

McEstimate bond_estimate(const PathConfig& cfg) {
  const PathSet paths(paper_model(), 0.0, 0.0478, 82.11, 1.0, cfg);
  return estimate_discounted(paths, [](double, double, double) { return 1.0; });
}

}  // namespace

TEST(PathSet, FixedSeedIsBitIdenticalAcrossThreadCounts) {
  const PathConfig cfg{20000, 4, 77, false};
  thread_override() = 1;
  const McEstimate a = bond_estimate(cfg);
  thread_override() = 3;
  const McEstimate b = bond_estimate(cfg);
  thread_override() = 0;
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
  const McEstimate c = bond_estimate(cfg);
  EXPECT_EQ(a.estimate, c.estimate);
}

TEST(PathSet, DeterministicRatesIntegrateExactly) {
  MarketModel m = paper_model();
  m.rates.beta = 0.0;
  const PathConfig cfg{8, 13, 5, false};
  const PathSet paths(m, 0.0, 0.031, 80.0, 1.0, cfg);
  for (std::size_t i = 0; i < cfg.n_paths; ++i)
    paths.visit_path(i, [&](std::size_t, double u, double, double ir, double) {
      const RateMoments mom = rate_moments(m.rates, 0.031, 0.0, u);
      EXPECT_NEAR(ir, mom.mean_int, 1e-12);
    });
}

TEST(PathSet, IncrementCorrelationMatchesRho) {
  const MarketModel m = paper_model();
  const PathConfig cfg{1000, 100, 31, false};
  const PathSet paths(m, 0.0, 0.0478, 82.11, 1.0, cfg);
  const double dt = paths.dt();
  const double decay = std::exp(-m.rates.kappa * dt);
  const double g = g_decay(m.rates.kappa, dt);

  std::vector<double> er, eb;
  er.reserve(cfg.n_paths * 100);
  eb.reserve(cfg.n_paths * 100);
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    double pr = 0, pir = 0, plx = 0;
    paths.visit_path(i, [&](std::size_t k, double, double r, double ir, double x) {
      const double lx = std::log(x);
      if (k > 0) {
        er.push_back(r - (pr * decay + m.rates.theta * (1.0 - decay)));
        const double dint = ir - pir;
        eb.push_back((lx - plx - dint + 0.5 * m.sigma * m.sigma * dt) / m.sigma);
      }
      pr = r;
      pir = ir;
      plx = lx;
    });
  }
  const std::size_t n = er.size();
  ASSERT_EQ(n, 100000u);
  double see = 0, sbb = 0, seb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    see += er[i] * er[i];
    sbb += eb[i] * eb[i];
    seb += er[i] * eb[i];
  }
  const double corr = seb / std::sqrt(see * sbb);
  const double expected = m.rho * m.rates.beta * g /
                          std::sqrt(m.rates.beta * m.rates.beta *
                                    g_decay(2.0 * m.rates.kappa, dt) * dt);
  const double se = (1.0 - corr * corr) / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(corr, expected, 3.0 * se);
  EXPECT_NEAR(expected, m.rho, 0.01);  // the exact-step correlation is close to rho
}

TEST(PathSet, DiscountedStockIsMartingale) {
  const PathConfig cfg{200000, 12, 404, false};
  const PathSet paths(paper_model(), 0.0, 0.0478, 82.11, 1.0, cfg);
  const auto est = estimate_discounted(paths, [](double, double, double x) { return x; });
  EXPECT_NEAR(est.estimate, 82.11, 3.0 * est.std_error);
}

TEST(EstimateDiscounted, BondAndEuropeanAgreeWithClosedForms) {
  const MarketModel m = paper_model();
  const OptionContract c = paper_contract();
  const PathConfig cfg{400000, 1, 99, false};
  const PathSet paths(m, 0.0, 0.0478, 82.11, 1.0, cfg);
  const auto bond = estimate_discounted(paths, [](double, double, double) { return 1.0; });
  EXPECT_NEAR(bond.estimate, bond_price(m.rates, 0.0, 0.0478, 1.0), 3.0 * bond.std_error);
  const auto euro = estimate_discounted(
      paths, [&](double, double, double x) { return std::max(c.strike - x, 0.0); });
  EXPECT_NEAR(euro.estimate, european_put(m, c, 0.0, 0.0478, 82.11), 3.0 * euro.std_error);
  const auto zero = estimate_discounted(paths, [](double, double, double) { return 0.0; });
  EXPECT_DOUBLE_EQ(zero.estimate, 0.0);
  EXPECT_DOUBLE_EQ(zero.std_error, 0.0);
}

TEST(McPremium, ZeroSurfaceGivesExactZero) {
  const BoundarySurface zero = avp::testing::constant_surface(0.0);
  const PathConfig cfg{5000, 50, 8, false};
  const PathSet paths(paper_model(), 0.0, 0.0478, 82.11, 1.0, cfg);
  const auto est = mc_premium(paths, zero, paper_contract());
  EXPECT_DOUBLE_EQ(est.estimate, 0.0);
  EXPECT_DOUBLE_EQ(est.std_error, 0.0);
}

TEST(McPremium, NonnegativeOnConvergedSurface) {
  const PathConfig cfg{20000, 100, 9, false};
  const PathSet paths(paper_model(), 0.0, 0.0478, 82.11, 1.0, cfg);
  const auto est = mc_premium(paths, coarse_surface(), paper_contract());
  EXPECT_GE(est.estimate, 0.0);
  EXPECT_GT(est.estimate, 0.5 * est.std_error);  // genuinely positive here
}

TEST(LsAmerican, TinyHorizonReturnsImmediatePayoff) {
  OptionContract c = paper_contract();
  c.maturity = 1e-4;
  const PathConfig cfg{30000, 50, 21, false};
  const auto est = ls_american(paper_model(), c, 0.0478, 82.11, cfg);
  EXPECT_NEAR(est.estimate, c.strike - 82.11, std::max(3.0 * est.std_error, 1e-2));
}

TEST(LsAmerican, DominatesEuropeanAndBracketsDecomposition) {
  const MarketModel m = paper_model();
  const OptionContract c = paper_contract();
  const PathConfig cfg{40000, 50, 22, false};
  const auto ls = ls_american(m, c, 0.0478, 82.11, cfg);
  const double euro = european_put(m, c, 0.0, 0.0478, 82.11);
  EXPECT_GE(ls.estimate, euro - 3.0 * ls.std_error);
  const PricingResult dec =
      price(m, c, coarse_surface(), 0.0, 0.0478, 82.11, coarse_quad());
  EXPECT_GE(dec.value, ls.estimate - 3.0 * ls.std_error);
}

TEST(LsAmerican, RejectsEmptyBasis) {
  EXPECT_THROW(
      ls_american(paper_model(), paper_contract(), 0.0478, 82.11, PathConfig{100, 10, 1, false},
                  BasisSpec{}),
      std::invalid_argument);
}

TEST(LsAmerican, RankDeficientBasisFallsBackToRidge) {
  // a duplicated monomial makes the Gram matrix singular; the ridge fallback
  // must still produce a sane estimate
  const BasisSpec dup{{0, 0}, {1, 0}, {1, 0}, {0, 1}};
  const PathConfig cfg{20000, 25, 23, false};
  const auto est = ls_american(paper_model(), paper_contract(), 0.0478, 82.11, cfg, dup);
  EXPECT_GT(est.estimate, 100.0 - 82.11 - 1.0);
  EXPECT_LT(est.estimate, 40.0);
}

TEST(ExactTransition, OneBigStepMatchesManySmallStepsKS) {
  // two-sample Kolmogorov-Smirnov on r_{0.5}: 1 step vs 8 steps
  const MarketModel m = paper_model();
  const std::size_t n = 100000;
  std::vector<double> one(n), many(n);
  const PathConfig c1{n, 2, 1234, false};   // horizon 0.5 -> 1 step
  const PathConfig c8{n, 16, 4321, false};  // horizon 0.5 -> 8 steps
  const PathSet p1(m, 0.0, 0.0478, 82.11, 0.5, c1);
  const PathSet p8(m, 0.0, 0.0478, 82.11, 0.5, c8);
  ASSERT_EQ(p1.n_steps(), 1u);
  ASSERT_EQ(p8.n_steps(), 8u);
  parallel_for(n, [&](std::size_t i) {
    p1.visit_path(i, [&](std::size_t k, double, double r, double, double) {
      if (k == 1) one[i] = r;
    });
    p8.visit_path(i, [&](std::size_t k, double, double r, double, double) {
      if (k == 8) many[i] = r;
    });
  });
  std::sort(one.begin(), one.end());
  std::sort(many.begin(), many.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < n) {
    if (one[i] <= many[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) - static_cast<double>(j)) / n);
  }
  const double crit = 1.628 * std::sqrt(2.0 / n);  // 1% level
  EXPECT_LT(d, crit);
}

TEST(Antithetic, HalvesBondStdErrorAtEqualPathCount) {
  PathConfig plain{100000, 1, 55, false};
  PathConfig anti = plain;
  anti.antithetic = true;
  const McEstimate p = bond_estimate(plain);
  const McEstimate a = bond_estimate(anti);
  EXPECT_LE(a.std_error, 0.6 * p.std_error);
  EXPECT_NEAR(a.estimate, p.estimate, 4.0 * p.std_error);
}
