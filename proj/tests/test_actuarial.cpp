#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lingermort/actuarial/actuarial.hpp"
#include "test_util.hpp"

using namespace lingermort;

namespace {

const std::vector<std::string> kAges = {"0-24", "25-34", "35-44", "45-54", "55-64",
                                        "65-74", "75-84", "85-94", "95+"};

ProjectionEnsemble flat_ensemble(double hazard_per_cause, std::size_t horizon, std::size_t paths = 2,
                                 long C = 2) {
  ProjectionEnsemble e;
  e.age_labels = kAges;
  for (long c = 0; c < C; ++c) e.cause_labels.push_back("c" + std::to_string(c));
  e.age_midpoints = AgeAxis::from_labels(kAges).midpoints();
  e.first_year = 2024;
  e.paths = paths;
  e.horizon = horizon;
  e.allocate();
  std::fill(e.data.begin(), e.data.end(), hazard_per_cause);
  return e;
}

FitResult synthetic_fit(long C = 6) {
  const long X = static_cast<long>(kAges.size());
  FitResult f;
  ParamSet t = ParamSet::zeros(static_cast<std::size_t>(X), static_cast<std::size_t>(C));
  for (long x = 0; x < X; ++x) {
    t.B(x) = 1.0 / static_cast<double>(X);
    t.b(x) = (0.5 + 0.1 * static_cast<double>(x)) / (0.5 * static_cast<double>(X) + 0.1 * 36.0);
  }
  for (long c = 0; c < C; ++c) t.phi(c) = 0.3 + 0.1 * static_cast<double>(c);
  t.drift_K = -0.15;
  t.sigma_eta = 0.12;
  t.drift_k = -0.05;
  t.sigma_xi = 0.08;
  t.mu.setConstant(0.15);
  t.sigma_J = 0.05;
  t.p = 0.05;
  t.kernel = LingeringKernel(Eigen::VectorXd::Constant(C, 0.3), Eigen::VectorXd::Constant(C, 2.0),
                             Eigen::VectorXd::Constant(C, 1.0));
  t.age_labels = kAges;
  f.theta_hat = t;
  f.converged = true;
  f.first_year = 1990;
  f.last_year = 2023;
  f.jump_year = 2020;
  f.jump_off_log_rates.resize(X, C);
  for (long x = 0; x < X; ++x)
    for (long c = 0; c < C; ++c)
      f.jump_off_log_rates(x, c) = -10.0 + 0.85 * static_cast<double>(x) - 0.1 * static_cast<double>(c);
  return f;
}

std::vector<double> grid_portfolio_sd(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  for (int i = 0; i <= 100; ++i) out.push_back(pair_moments(mix(a, b, i / 100.0), a).var_a);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Valuation

TEST(Valuation, AnnuityClosedForms) {
  const auto zero = flat_ensemble(0.0, 5);
  ProductSpec a{ProductKind::Annuity, 35, 0, 3, 0.0, 1.0};
  for (double v : value_annuity(zero, a).sample) EXPECT_DOUBLE_EQ(v, 3.0);

  const auto flat = flat_ensemble(0.01, 20);
  ProductSpec d{ProductKind::Annuity, 40, 5, 10, 0.03, 2.0};
  long double oracle = 0.0L;
  for (int t = 6; t <= 15; ++t) oracle += std::pow(1.03L, -t) * std::exp(-0.02L * t);
  for (double v : value_annuity(flat, d).sample) EXPECT_NEAR(v, 2.0 * static_cast<double>(oracle), 1e-12);
}

TEST(Valuation, InsuranceClosedForms) {
  ProductSpec ins{ProductKind::Insurance, 35, 0, 10, 0.0, 1.0};
  for (double v : value_insurance(flat_ensemble(0.0, 10), ins).sample) EXPECT_EQ(v, 0.0);
  ins.face = 250.0;
  for (double v : value_insurance(flat_ensemble(1e3, 10), ins).sample) EXPECT_DOUBLE_EQ(v, 250.0);

  ins.rate = 0.03;
  ins.face = 1.0;
  long double oracle = 0.0L;
  for (int t = 0; t < 10; ++t)
    oracle += std::pow(1.03L, -(t + 1)) * (std::exp(-0.02L * t) - std::exp(-0.02L * (t + 1)));
  for (double v : value_insurance(flat_ensemble(0.01, 10), ins).sample)
    EXPECT_NEAR(v, static_cast<double>(oracle), 1e-12);
}

TEST(Valuation, ProbabilityConservation) {
  ProjectionConfig cfg;
  cfg.horizon = 30;
  cfg.paths = 1000;
  cfg.seed = 11;
  const auto e = project(synthetic_fit(), cfg);
  ProductSpec ins{ProductKind::Insurance, 35, 0, 30, 0.0, 10.0};
  const auto pv = value_insurance(e, ins);
  for (std::size_t p = 0; p < e.paths; ++p) {
    const auto S = survival_curve(e, p, 35, 2023, 30);
    EXPECT_NEAR(pv.sample[p] / 10.0 + S.back(), 1.0, 1e-10);
  }
}

TEST(Valuation, HorizonTooShort) {
  const auto e = flat_ensemble(0.01, 40);
  EXPECT_ERROR_CODE(value_annuity(e, default_annuity()), ErrorCode::HorizonTooShort);
  EXPECT_NO_THROW(value_insurance(e, default_insurance()));
  ProductSpec bad = default_insurance();
  bad.term = 0;
  EXPECT_ERROR_CODE(value_insurance(e, bad), ErrorCode::InvalidArgument);
}

TEST(Valuation, FaceScalingKeepsShape) {
  ProjectionConfig cfg;
  cfg.horizon = 60;
  cfg.paths = 400;
  cfg.seed = 3;
  const auto e = project(synthetic_fit(), cfg);
  PVDistribution a = value_annuity(e, default_annuity());
  const PVDistribution raw = a;
  const double f = scale_to_mean(a, 100.0);
  EXPECT_NEAR(a.mean, 100.0, 1e-10);
  EXPECT_NEAR(a.summary.sd, f * raw.summary.sd, 1e-10 * a.summary.sd);
  EXPECT_NEAR(a.summary.skewness, raw.summary.skewness, 1e-9);
  double s = 0.0;
  for (double v : a.adjusted) s += v;
  EXPECT_NEAR(s / static_cast<double>(a.adjusted.size()), 0.0, 1e-10);
}

TEST(Valuation, ThreadCountDoesNotChangeValues) {
  ProjectionConfig cfg;
  cfg.horizon = 60;
  cfg.paths = 150;
  cfg.seed = 21;
  const auto e = project(synthetic_fit(), cfg);
  const auto one = value_annuity(e, default_annuity(), {}, 1);
  const auto four = value_annuity(e, default_annuity(), {}, 4);
  EXPECT_EQ(one.sample, four.sample);
}

// ---------------------------------------------------------------------------
// Risk measures

TEST(RiskMeasures, TwoPointSample) {
  std::vector<double> s;
  for (int i = 0; i < 500; ++i) s.push_back(i % 2 ? 1.0 : -1.0);
  const auto r = risk_measures(s);
  EXPECT_EQ(r.var_low, -1.0);
  EXPECT_EQ(r.var_high, 1.0);
  EXPECT_EQ(r.cte_low, -1.0);
  EXPECT_EQ(r.cte_high, 1.0);
  EXPECT_EQ(r.skewness, 0.0);
}

TEST(RiskMeasures, NormalTheory) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  std::vector<double> s(1'000'000);
  for (double& v : s) v = nd(gen);
  const auto r = risk_measures(s);
  EXPECT_NEAR(r.var_low, -1.645, 0.01);
  EXPECT_NEAR(r.cte_low, -2.063, 0.02);
  EXPECT_NEAR(r.var_high, 1.645, 0.01);
  EXPECT_NEAR(r.cte_high, 2.063, 0.02);
  EXPECT_NEAR(r.sd, 1.0, 0.005);
  EXPECT_NEAR(r.skewness, 0.0, 0.01);
}

TEST(RiskMeasures, OrderingAndSmallSamples) {
  std::mt19937_64 gen(5);
  std::gamma_distribution<double> g(2.0, 1.0);
  std::vector<double> s(2000);
  for (double& v : s) v = g(gen);
  const auto r = risk_measures(s);
  EXPECT_LE(r.cte_low, r.var_low);
  EXPECT_LE(r.var_low, 0.0);
  EXPECT_LE(0.0, r.var_high);
  EXPECT_LE(r.var_high, r.cte_high);
  EXPECT_GT(r.skewness, 0.0);
  EXPECT_ERROR_CODE(risk_measures(std::vector<double>(99, 1.0)), ErrorCode::SampleTooSmall);
  const auto point = risk_measures(std::vector<double>(200, 0.1));
  EXPECT_EQ(point.sd, 0.0);
  EXPECT_FALSE(point.skewness_available());
}

// ---------------------------------------------------------------------------
// Hedge

TEST(Hedge, SymmetricAndAlgebraicCases) {
  std::vector<double> a, i;
  for (int k = 0; k < 400; ++k) {
    a.push_back(k % 2 ? 1.0 : -1.0);
    i.push_back((k / 2) % 2 ? 1.0 : -1.0);
  }
  const auto sym = optimal_hedge(a, i);
  EXPECT_NEAR(sym.omega, 0.5, 1e-12);
  // cov(A, I) = var(I): all weight on the insurance
  std::vector<double> a2(i.size());
  for (std::size_t k = 0; k < i.size(); ++k) a2[k] = i[k] + a[k];
  const auto zero = optimal_hedge(a2, i);
  EXPECT_NEAR(zero.omega_raw, 0.0, 1e-12);
  EXPECT_ERROR_CODE(optimal_hedge(i, i), ErrorCode::DegenerateVariance);
}

TEST(Hedge, MatchesGridSearch) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    const double rho = -0.9 + 0.09 * rep, sa = 0.5 + 0.1 * rep, si = 2.0;
    std::vector<double> a(500), i(500);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double z1 = nd(gen), z2 = nd(gen);
      a[k] = 100.0 + sa * z1;
      i[k] = 100.0 + si * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
    }
    const auto h = optimal_hedge(a, i);
    const auto grid = grid_portfolio_sd(a, i);
    const auto best = std::min_element(grid.begin(), grid.end()) - grid.begin();
    EXPECT_LE(std::abs(h.omega - static_cast<double>(best) / 100.0), 0.01 + 1e-12) << rep;
    const double at_opt = pair_moments(h.portfolio.sample, a).var_a;
    for (double g : grid) EXPECT_LE(at_opt, g * (1.0 + 1e-12));
  }
}

TEST(Hedge, ComparisonProtocol) {
  const FitResult f = synthetic_fit();
  ProjectionConfig cfg;
  cfg.horizon = 60;
  cfg.paths = 300;
  cfg.seed = 44;
  const auto e = project(f, cfg);
  const auto rows = hedge_comparison({"main", e}, {{"copy", e}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].omega, rows[1].omega);
  EXPECT_EQ(rows[0].portfolio.sd, rows[1].portfolio.sd);

  // a different model's weight cannot beat the optimum on the reference
  ProjectionConfig other = cfg;
  other.seed = 45;
  FitResult g = f;
  g.theta_hat.sigma_xi = 0.3;
  const auto rows2 = hedge_comparison({"main", e}, {{"other", project(g, other)}});
  EXPECT_NE(rows2[0].omega, rows2[1].omega);
  EXPECT_LE(rows2[0].portfolio.sd, rows2[1].portfolio.sd);
  EXPECT_ERROR_CODE(hedge_comparison({"main", e}, {}), ErrorCode::InvalidArgument);
}

TEST(Hedge, BaselineEnsembleAdapter) {
  LeeCarterFit lc;
  lc.b = Eigen::VectorXd::Constant(9, 1.0 / 9.0);
  lc.drift = -1.0;
  lc.sigma = 0.5;
  Eigen::VectorXd off(9);
  for (long x = 0; x < 9; ++x) off(x) = -9.0 + 0.9 * static_cast<double>(x);
  BaselineSimulation sim;
  sim.horizon = 60;
  sim.paths = 200;
  const auto agg = simulate_baseline(lc, off, sim);
  const auto e = ensemble_from_aggregate(agg, kAges, 2024);
  EXPECT_EQ(e.causes(), 1);
  EXPECT_EQ(e.rate(3, 7, 4, 0), agg[3](4, 7));
  const auto h = optimal_hedge(value_annuity(e, default_annuity()).sample,
                               value_insurance(e, default_insurance()).sample);
  EXPECT_GE(h.omega, 0.0);
  EXPECT_LE(h.omega, 1.0);
}

// ---------------------------------------------------------------------------
// What-if

TEST(WhatIf, DegenerateConfigurationHasNoSpread) {
  FitResult f = synthetic_fit();
  auto& t = f.theta_hat;
  t.sigma_eta = t.sigma_xi = t.sigma_J = 0.0;
  t.p = 0.0;
  f.jump_year.reset();
  WhatIfConfig cfg;
  cfg.projection.horizon = 60;
  cfg.projection.paths = 100;
  const auto rep = whatif_report(f, {"baseline", "I"}, cfg);
  ASSERT_EQ(rep.rows.size(), 6u);
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.sd, 0.0) << r.scenario << " " << r.product;
    EXPECT_TRUE(std::isnan(r.skewness));
    EXPECT_TRUE(r.density.x.empty());
  }
  EXPECT_FALSE(rep.notes.empty());
}

TEST(WhatIf, RemovingNewJumpsReducesPortfolioSpread) {
  FitResult f = synthetic_fit();
  f.theta_hat.p = 0.3;
  f.theta_hat.mu.setConstant(0.6);
  f.theta_hat.sigma_J = 0.3;
  WhatIfConfig cfg;
  cfg.projection.horizon = 60;
  cfg.projection.paths = 400;
  cfg.projection.seed = 12;
  cfg.density_points = 64;
  const auto rep = whatif_report(f, {"baseline", "I", "IV"}, cfg);
  auto find = [&](const std::string& s, const std::string& p) {
    for (const auto& r : rep.rows)
      if (r.scenario == s && r.product == p) return r;
    throw std::runtime_error("missing row");
  };
  EXPECT_LT(find("I", "portfolio").sd, find("baseline", "portfolio").sd);
  EXPECT_GT(rep.omega, 0.0);
  EXPECT_LT(rep.omega, 1.0);
  const auto dens = find("baseline", "annuity").density;
  ASSERT_EQ(dens.x.size(), 64u);
  double area = 0.0;
  for (std::size_t i = 1; i < dens.x.size(); ++i) area += 0.5 * (dens.y[i] + dens.y[i - 1]) * (dens.x[i] - dens.x[i - 1]);
  EXPECT_NEAR(area, 1.0, 0.02);
  EXPECT_ERROR_CODE(whatif_report(f, {"VI"}, cfg), ErrorCode::UnknownScenario);
}
