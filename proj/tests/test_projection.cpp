#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lingermort/projection/projection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lingermort;

namespace {

const std::vector<std::string> kAges = {"0-24", "25-34", "35-44", "45-54", "55-64", "65-74", "75-84", "85+"};

/// Deterministic fit: no trend noise, no new jumps, no in-sample jump.
FitResult quiet_fit(long C = 3) {
  const long X = static_cast<long>(kAges.size());
  FitResult f;
  ParamSet t = ParamSet::zeros(static_cast<std::size_t>(X), static_cast<std::size_t>(C));
  for (long x = 0; x < X; ++x) {
    t.B(x) = 0.05 + 0.01 * static_cast<double>(x);
    t.b(x) = 0.2 - 0.015 * static_cast<double>(x);
  }
  for (long c = 0; c < C; ++c) t.phi(c) = 0.5 + 0.2 * static_cast<double>(c);
  t.drift_K = -0.3;
  t.drift_k = 0.1;
  t.kernel = LingeringKernel(Eigen::VectorXd::Constant(C, 0.4), Eigen::VectorXd::Constant(C, 2.0),
                             Eigen::VectorXd::Constant(C, 0.8));
  t.age_labels = kAges;
  for (long c = 0; c < C; ++c) t.cause_labels.push_back("c" + std::to_string(c + 1));
  f.theta_hat = t;
  f.converged = true;
  f.first_year = 1990;
  f.last_year = 2023;
  f.jump_off_log_rates.resize(X, C);
  for (long x = 0; x < X; ++x)
    for (long c = 0; c < C; ++c)
      f.jump_off_log_rates(x, c) = -9.0 + 0.7 * static_cast<double>(x) - 0.2 * static_cast<double>(c);
  return f;
}

Eigen::MatrixXd log_block(const ProjectionEnsemble& e, std::size_t p, std::size_t h) {
  return e.rates(p, h).array().log().matrix();
}

}  // namespace

// ---------------------------------------------------------------------------
// Deterministic structure

TEST(Projection, DriftOnlyPathsAreDeterministic) {
  const FitResult f = quiet_fit();
  ProjectionConfig cfg;
  cfg.horizon = 10;
  cfg.paths = 3;
  const auto e = project(f, cfg);
  const auto& t = f.theta_hat;
  const Eigen::MatrixXd step =
      (t.B * t.drift_K).replicate(1, 3) + t.b * t.phi.transpose() * t.drift_k;
  for (std::size_t p = 0; p < cfg.paths; ++p)
    for (std::size_t h = 0; h < cfg.horizon; ++h) {
      const Eigen::MatrixXd expect = f.jump_off_log_rates + static_cast<double>(h + 1) * step;
      EXPECT_LT((log_block(e, p, h) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
  EXPECT_EQ(e.first_year, 2024);
}

TEST(Projection, RetainedDecayMatchesDirectJumpTerm) {
  FitResult f = quiet_fit();
  f.jump_year = 2020;
  f.theta_hat.mu.setConstant(0.3);
  f.theta_hat.mu(0, 2) = -0.1;
  f.theta_hat.kernel.gamma << 0.5, -0.2, 1.1;
  f.theta_hat.drift_K = f.theta_hat.drift_k = 0.0;
  ProjectionConfig cfg;
  cfg.horizon = 3;
  cfg.paths = 1;
  const auto e = project(f, cfg);
  for (std::size_t h = 0; h < 3; ++h) {
    const int year = 2024 + static_cast<int>(h);
    for (long c = 0; c < 3; ++c)
      for (long x = 0; x < 8; ++x) {
        // jump term at the projected year minus the jump term at the jump-off year
        const long double direct =
            f.theta_hat.mu(x, c) * (oracle::kernel_weight(f.theta_hat, static_cast<std::size_t>(c), year - 2020) -
                                    oracle::kernel_weight(f.theta_hat, static_cast<std::size_t>(c), 2023 - 2020));
        EXPECT_NEAR(log_block(e, 0, h)(x, c) - f.jump_off_log_rates(x, c), static_cast<double>(direct), 1e-12);
      }
  }
  ScenarioSpec off;
  off.retain_insample_decay = false;
  const auto flat = project(f, cfg, off);
  EXPECT_LT((log_block(flat, 0, 2) - f.jump_off_log_rates).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Projection, PermanentShockHalvesCancerFromFiringYear) {
  FitResult f = quiet_fit(6);
  ProjectionConfig cfg;
  cfg.horizon = 40;
  cfg.paths = 200;
  cfg.seed = 31;
  const auto base = project(f, cfg);
  const auto shocked = project(f, cfg, make_scenario("III"));
  std::size_t fired = 0;
  for (std::size_t p = 0; p < cfg.paths; ++p) {
    int count = 0;
    for (std::size_t h = 0; h < cfg.horizon; ++h) {
      CounterRng replay(cfg.seed, p, h + 1, static_cast<std::uint64_t>(StreamPurpose::InjectedShockBase));
      if (replay.uniform() < 0.01) ++count;
      const Eigen::MatrixXd ratio = shocked.rates(p, h).array() / base.rates(p, h).array();
      for (long c = 0; c < 6; ++c)
        for (long x = 0; x < 8; ++x)
          EXPECT_NEAR(ratio(x, c), c == 1 ? std::pow(0.5, count) : 1.0, 1e-12);
    }
    fired += count > 0;
  }
  EXPECT_GT(fired, 0u);
}

TEST(Projection, TransitoryShockHitsOneYearAndSelectedAges) {
  FitResult f = quiet_fit(6);
  ScenarioSpec s = make_scenario("IV");
  s.injected[0].probability = 1.0;  // fire every year
  ProjectionConfig cfg;
  cfg.horizon = 2;
  cfg.paths = 1;
  const auto base = project(f, cfg);
  const auto hit = project(f, cfg, s);
  const Eigen::MatrixXd ratio = hit.rates(0, 1).array() / base.rates(0, 1).array();
  for (long x = 0; x < 8; ++x)
    for (long c = 0; c < 6; ++c) {
      const bool selected = c == 4 && x >= 2 && x <= 4;  // bands 35-44, 45-54, 55-64
      EXPECT_NEAR(ratio(x, c), selected ? 10.0 : 1.0, 1e-11);
    }
}

TEST(Projection, InjectedShocksAreAdditive) {
  FitResult f = quiet_fit(6);
  f.theta_hat.sigma_eta = 0.05;
  InjectedShock a;
  a.kind = ShockKind::Permanent;
  a.causes = {0, 2};
  a.log_shift = -0.3;
  a.probability = 0.2;
  a.stream = 7;
  InjectedShock b;
  b.kind = ShockKind::Lingering;
  b.age_from = 50;
  b.log_shift = 0.4;
  b.probability = 0.3;
  b.stream = 8;
  ScenarioSpec none, only_a, only_b, both;
  only_a.injected = {a};
  only_b.injected = {b};
  both.injected = {a, b};
  ProjectionConfig cfg;
  cfg.horizon = 12;
  cfg.paths = 20;
  cfg.seed = 5;
  const auto e0 = project(f, cfg, none), ea = project(f, cfg, only_a), eb = project(f, cfg, only_b),
             eab = project(f, cfg, both);
  for (std::size_t p = 0; p < cfg.paths; ++p)
    for (std::size_t h = 0; h < cfg.horizon; ++h) {
      const Eigen::MatrixXd l0 = log_block(e0, p, h);
      const Eigen::MatrixXd sum = (log_block(ea, p, h) - l0) + (log_block(eb, p, h) - l0);
      EXPECT_LT((log_block(eab, p, h) - l0 - sum).cwiseAbs().maxCoeff(), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Scenarios

TEST(Scenario, NamedScenarios) {
  EXPECT_EQ(make_scenario("I").event_probability(0.02), 0.0);
  const auto two = make_scenario("II");
  EXPECT_DOUBLE_EQ(two.event_probability(0.0188), 4.0 * 0.0188);
  EXPECT_EQ(two.severity_scale, 0.5);
  const auto three = make_scenario("III");
  ASSERT_EQ(three.injected.size(), 1u);
  EXPECT_EQ(three.injected[0].kind, ShockKind::Permanent);
  EXPECT_EQ(three.injected[0].causes, std::vector<std::size_t>{1});
  EXPECT_DOUBLE_EQ(three.injected[0].log_shift, std::log(0.5));
  const auto four = make_scenario("IV");
  ASSERT_EQ(four.injected.size(), 1u);
  EXPECT_EQ(four.injected[0].kind, ShockKind::Transitory);
  EXPECT_EQ(four.injected[0].causes, std::vector<std::size_t>{4});
  EXPECT_EQ(*four.injected[0].age_from, 35);
  EXPECT_EQ(*four.injected[0].age_to, 64);
  EXPECT_DOUBLE_EQ(four.injected[0].log_shift, std::log(10.0));
  EXPECT_EQ(four.injected[0].probability, 0.01);
  for (const char* n : {"baseline", "I", "II", "III", "IV"}) EXPECT_TRUE(make_scenario(n).retain_insample_decay);
  EXPECT_ERROR_CODE(make_scenario("V"), ErrorCode::UnknownScenario);
}

TEST(Scenario, InvalidSpecificationsAreRejected) {
  ScenarioSpec s;
  s.p_override = 1.5;
  EXPECT_ERROR_CODE(s.validate(), ErrorCode::InvalidScenario);
  EXPECT_ERROR_CODE(make_scenario("II").event_probability(0.3), ErrorCode::InvalidScenario);
  ScenarioSpec bad_cause = make_scenario("IV");
  const FitResult f = quiet_fit(3);  // only three causes
  ProjectionConfig cfg;
  cfg.horizon = 1;
  cfg.paths = 1;
  EXPECT_ERROR_CODE(project(f, cfg, bad_cause), ErrorCode::InvalidScenario);
}

TEST(Scenario, JsonRoundTrip) {
  ScenarioSpec s = make_scenario("IV");
  s.injected[0].stream = 3;
  s.p_override = 0.125;
  const auto back = scenario_from_json(io::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Scenario, NoNewEventsLeavesOnlyTrendDispersion) {
  FitResult f = quiet_fit();
  f.theta_hat.p = 0.5;
  f.theta_hat.sigma_J = 0.2;
  f.theta_hat.mu.setConstant(0.4);
  ProjectionConfig cfg;
  cfg.horizon = 15;
  cfg.paths = 30;
  const auto quiet = project(f, cfg, make_scenario("I"));
  for (std::size_t p = 1; p < cfg.paths; ++p)
    EXPECT_EQ(quiet.rates(p, 14), quiet.rates(0, 14));
  const auto busy = project(f, cfg, make_scenario("baseline"));
  double spread = 0.0;
  for (std::size_t p = 1; p < cfg.paths; ++p) spread += (busy.rates(p, 14) - busy.rates(0, 14)).cwiseAbs().sum();
  EXPECT_GT(spread, 0.0);
}

TEST(Scenario, ZeroSeverityScaleCentresDraws) {
  FitResult f = quiet_fit();
  f.theta_hat.drift_K = f.theta_hat.drift_k = 0.0;
  f.theta_hat.kernel = LingeringKernel::indicator(3);
  f.theta_hat.mu.setConstant(0.8);
  f.theta_hat.sigma_J = 0.25;
  ScenarioSpec s;
  s.p_override = 1.0;
  s.severity_scale = 0.0;
  ProjectionConfig cfg;
  cfg.horizon = 1;
  cfg.paths = 4000;
  cfg.seed = 9;
  const auto e = project(f, cfg, s);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(8, 3);
  for (std::size_t p = 0; p < cfg.paths; ++p) mean += log_block(e, p, 0) - f.jump_off_log_rates;
  mean /= static_cast<double>(cfg.paths);
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 4.0 * 0.25 / std::sqrt(4000.0));
}

// ---------------------------------------------------------------------------
// Guards and reproducibility

TEST(Projection, RejectsNonConvergedFitUnlessOverridden) {
  FitResult f = quiet_fit();
  f.converged = false;
  ProjectionConfig cfg;
  cfg.horizon = 2;
  cfg.paths = 2;
  EXPECT_ERROR_CODE(project(f, cfg), ErrorCode::NonConvergedFit);
  cfg.allow_nonconverged = true;
  EXPECT_NO_THROW(project(f, cfg));
  cfg.horizon = 0;
  EXPECT_ERROR_CODE(project(f, cfg), ErrorCode::InvalidArgument);
}

TEST(Projection, BitIdenticalAcrossThreadCounts) {
  FitResult f = quiet_fit(6);
  f.jump_year = 2020;
  f.theta_hat.sigma_eta = 0.1;
  f.theta_hat.sigma_xi = 0.05;
  f.theta_hat.p = 0.1;
  f.theta_hat.sigma_J = 0.2;
  f.theta_hat.sigma_e = 0.01;
  f.theta_hat.mu.setConstant(0.3);
  ProjectionConfig cfg;
  cfg.horizon = 20;
  cfg.paths = 101;
  cfg.seed = 2024;
  cfg.include_noise = true;
  cfg.threads = 1;
  const auto one = project(f, cfg, make_scenario("IV"));
  for (int threads : {2, 4, 8}) {
    cfg.threads = threads;
    const auto many = project(f, cfg, make_scenario("IV"));
    EXPECT_EQ(one.data, many.data) << threads;
  }
}

TEST(Projection, NoiseFlagOnlyAddsNoise) {
  FitResult f = quiet_fit();
  f.theta_hat.sigma_e = 0.05;
  ProjectionConfig cfg;
  cfg.horizon = 3;
  cfg.paths = 2;
  const auto clean = project(f, cfg);
  cfg.include_noise = true;
  const auto noisy = project(f, cfg);
  const Eigen::MatrixXd d = log_block(noisy, 1, 2) - log_block(clean, 1, 2);
  EXPECT_GT(d.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(d.cwiseAbs().maxCoeff(), 6.0 * 0.05);
}

// ---------------------------------------------------------------------------
// Survival

namespace {

ProjectionEnsemble flat_ensemble(double hazard_per_cause, std::size_t horizon, long C = 2) {
  ProjectionEnsemble e;
  e.age_labels = kAges;
  for (long c = 0; c < C; ++c) e.cause_labels.push_back("c" + std::to_string(c));
  e.age_midpoints = AgeAxis::from_labels(kAges).midpoints();
  e.first_year = 2024;
  e.paths = 2;
  e.horizon = horizon;
  e.allocate();
  std::fill(e.data.begin(), e.data.end(), hazard_per_cause);
  return e;
}

}  // namespace

TEST(Survival, ClosedForms) {
  const auto zero = flat_ensemble(0.0, 10);
  for (double s : survival_curve(zero, 1, 40, 2023, 10)) EXPECT_EQ(s, 1.0);
  const auto flat = flat_ensemble(0.01, 30);
  const auto S = survival_curve(flat, 0, 35, 2023, 30);
  ASSERT_EQ(S.size(), 31u);
  EXPECT_EQ(S[0], 1.0);
  for (int t = 1; t <= 30; ++t) EXPECT_NEAR(S[static_cast<std::size_t>(t)], std::exp(-0.02 * t), 1e-13);
}

TEST(Survival, MatchesBruteForceSummation) {
  FitResult f = quiet_fit();
  f.theta_hat.sigma_eta = 0.1;
  f.theta_hat.sigma_xi = 0.2;
  ProjectionConfig cfg;
  cfg.horizon = 25;
  cfg.paths = 3;
  cfg.seed = 4;
  const auto e = project(f, cfg);
  const int age = 41, T = 20;
  const auto S = survival_curve(e, 2, age, 2024, T);
  for (int s = 1; s <= T; ++s) {
    long double total = 0.0L;
    for (int u = 1; u <= s; ++u)
      for (long c = 0; c < e.causes(); ++c) {
        std::vector<double> band;
        for (long x = 0; x < e.ages(); ++x) band.push_back(e.rate(2, static_cast<std::size_t>(u), x, c));
        // whole single-age schedule, then pick the age reached in year u
        const auto all = single_age_hazards(e.age_midpoints, band, 0, 100);
        total += all[static_cast<std::size_t>(age + u - 1)];
      }
    EXPECT_NEAR(S[static_cast<std::size_t>(s)], std::exp(-static_cast<double>(total)), 1e-12);
    EXPECT_LE(S[static_cast<std::size_t>(s)], S[static_cast<std::size_t>(s - 1)]);
  }
}

TEST(Survival, HorizonExceedsPath) {
  const auto e = flat_ensemble(0.01, 10);
  EXPECT_ERROR_CODE(survival_curve(e, 0, 35, 2023, 11), ErrorCode::HorizonExceedsPath);
  EXPECT_ERROR_CODE(survival_curve(e, 0, 35, 2022, 3), ErrorCode::HorizonExceedsPath);
  EXPECT_NO_THROW(survival_curve(e, 0, 35, 2023, 10));
}

// ---------------------------------------------------------------------------
// Export

TEST(EnsembleExport, RoundTripIsExactAndDeterministic) {
  FitResult f = quiet_fit();
  f.theta_hat.sigma_eta = 0.1;
  ProjectionConfig cfg;
  cfg.horizon = 4;
  cfg.paths = 5;
  cfg.seed = 8;
  const auto e = project(f, cfg, make_scenario("II"));
  const std::string stem = (testutil::temp_dir() / "ens").string();
  write_ensemble(e, stem);
  const std::string first = io::read_file(stem + ".csv.gz");
  write_ensemble(e, stem);
  EXPECT_EQ(io::read_file(stem + ".csv.gz"), first);
  const auto back = read_ensemble(stem);
  EXPECT_EQ(back.data, e.data);
  EXPECT_EQ(back.first_year, e.first_year);
  EXPECT_EQ(back.age_labels, e.age_labels);
  EXPECT_EQ(back.scenario.name, "II");
  const std::string csv = io::gzip_decompress(first);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "path,year,age_group,cause,rate");
}
