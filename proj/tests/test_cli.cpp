#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "lingermort/cli/cli.hpp"
#include "lingermort/estimation/simulate.hpp"
#include "test_util.hpp"

using namespace lingermort;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "lingermort");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string path(const std::string& name) { return (testutil::temp_dir() / name).string(); }

/// Small simulated panel written once as a canonical CSV.
const std::string& panel_csv() {
  static const std::string p = [] {
    ParamSet t = ParamSet::zeros(3, 2);
    t.B << 0.4, 0.35, 0.25;
    t.b << 0.2, 0.3, 0.5;
    t.phi << 0.8, 0.6;
    t.drift_K = -0.08;
    t.sigma_eta = 0.06;
    t.drift_k = 0.02;
    t.sigma_xi = 0.05;
    t.sigma_e = 0.01;
    t.mu.setConstant(0.1);
    t.sigma_J = 0.01;
    t.kernel.gamma.setConstant(0.4);
    t.kernel.alpha.setConstant(2.0);
    t.kernel.beta.setConstant(1.5);
    t.p = 0.04;
    PanelSimulation s;
    s.ages = AgeAxis::from_labels({"0-39", "40-69", "70+"});
    s.causes = CauseAxis({"1", "2"}, 1);
    s.first_year = 2001;
    s.years = 20;
    s.level = Eigen::MatrixXd(3, 2);
    s.level << -8.0, -8.5, -6.0, -6.4, -3.5, -3.9;
    s.exposures = Eigen::MatrixXd::Constant(3, 20, 1e7);
    s.jump_year = 2016;
    s.seed = 5;
    const MortalityPanel panel = simulate_panel(t, s);
    return testutil::write_temp("cli_panel.csv", canonical_csv_text(panel.to_rows()));
  }();
  return p;
}

/// Well-conditioned fit artifact for the downstream subcommands.
const std::string& fit_json() {
  static const std::string p = [] {
    FitResult f;
    ParamSet t = ParamSet::zeros(3, 2);
    t.B << 0.4, 0.35, 0.25;
    t.b << 0.2, 0.3, 0.5;
    t.phi << 0.8, 0.6;
    t.drift_K = -0.15;
    t.sigma_eta = 0.1;
    t.drift_k = -0.05;
    t.sigma_xi = 0.08;
    t.mu.setConstant(0.2);
    t.sigma_J = 0.05;
    t.p = 0.05;
    t.kernel.gamma.setConstant(0.3);
    t.kernel.alpha.setConstant(2.0);
    t.kernel.beta.setConstant(1.0);
    t.age_labels = {"0-39", "40-69", "70+"};
    t.cause_labels = {"1", "2"};
    f.theta_hat = t;
    f.converged = true;
    f.first_year = 2001;
    f.last_year = 2020;
    f.jump_year = 2016;
    f.jump_off_log_rates.resize(3, 2);
    f.jump_off_log_rates << -8.0, -8.5, -6.0, -6.4, -3.5, -3.9;
    return testutil::write_temp("cli_fit.json", to_json(f).dump(2) + "\n");
  }();
  return p;
}

io::json parse_err(const std::string& err) { return io::json::parse(err.substr(0, err.find('\n'))); }

}  // namespace

TEST(Cli, IngestCanonicalRoundTrip) {
  const std::string out = path("ingest/panel.csv");
  const auto r = invoke({"ingest", "--canonical", panel_csv(), "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_file(out), io::read_file(panel_csv()));
  const auto manifest = io::json::parse(io::read_file(out + ".manifest.json"));
  EXPECT_EQ(manifest["command"], "ingest");
  EXPECT_EQ(manifest["outputs"][out], cli::sha256_hex(io::read_file(out)));
  EXPECT_EQ(manifest["inputs"][panel_csv()], cli::sha256_hex(io::read_file(panel_csv())));
  EXPECT_EQ(manifest["tool_version"], cli::kToolVersion);
}

TEST(Cli, Sha256KnownAnswer) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, FitMatchesLibrary) {
  const std::string out = path("fit/fit.json");
  const auto r = invoke({"--threads", "2", "fit", "--panel", panel_csv(), "--out", out, "--jump-year", "2016",
                         "--no-standard-errors"});
  ASSERT_EQ(r.code, 0) << r.err;
  FitOptions opt;
  opt.jump_year = 2016;
  opt.compute_standard_errors = false;
  const FitResult lib = fit(load_canonical_csv(panel_csv()), opt);
  EXPECT_EQ(io::read_file(out), to_json(lib).dump(2) + "\n");
  EXPECT_TRUE(std::isfinite(lib.loglik));
  EXPECT_LT(lib.loglik, 1e6);
}

TEST(Cli, DryRunWritesNothing) {
  const std::string out = path("dry/fit.json");
  const auto r = invoke({"--dry-run", "fit", "--panel", panel_csv(), "--out", out, "--tolerance", "1e-6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tolerance=1e-6"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find(out), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, ConfigFileAndOverride) {
  const std::string cfg = testutil::write_temp("cli.toml", "[fit]\ntolerance = 1e-5\nmax-iterations = 77\n");
  auto r = invoke({"--dry-run", "--config", cfg, "fit", "--panel", panel_csv(), "--out", path("x.json"),
                   "--max-iterations", "12"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("tolerance=1e-5"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("max-iterations=12"), std::string::npos) << r.out;

  // Relative config paths fall back to the configured directory.
  ::setenv(cli::kConfigDirEnv, testutil::temp_dir().c_str(), 1);
  r = invoke({"--dry-run", "--config", "cli.toml", "fit", "--panel", panel_csv(), "--out", path("x.json")});
  ::unsetenv(cli::kConfigDirEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max-iterations=77"), std::string::npos) << r.out;
}

TEST(Cli, MissingInputIsValidationError) {
  const std::string missing = path("does_not_exist.csv");
  const auto r = invoke({"fit", "--panel", missing, "--out", path("never.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  const auto j = parse_err(r.err);
  EXPECT_EQ(j["path"], missing);
  EXPECT_EQ(j["error"], "MissingInput");
  EXPECT_EQ(invoke({"fit", "--bogus"}).code, cli::kExitValidation);
  EXPECT_EQ(invoke({}).code, cli::kExitValidation);
  EXPECT_EQ(invoke({"simulate", "--fit", fit_json(), "--out", path("bad"), "--scenario", "VII"}).code,
            cli::kExitValidation);
}

TEST(Cli, NumericalFailureExitCode) {
  ProjectionEnsemble e;
  e.age_labels = {"0-39", "40-69", "70+"};
  e.cause_labels = {"all"};
  e.age_midpoints = AgeAxis::from_labels(e.age_labels).midpoints();
  e.first_year = 2021;
  e.paths = 120;
  e.horizon = 70;
  e.allocate();
  std::fill(e.data.begin(), e.data.end(), 0.01);
  const std::string stem = path("flat_ensemble");
  write_ensemble(e, stem);
  const auto r = invoke({"hedge", "--ensemble", stem, "--out", path("flat_hedge")});
  EXPECT_EQ(r.code, cli::kExitNumerical) << r.err;
  const auto j = parse_err(r.err);
  EXPECT_EQ(j["error"], "DegenerateVariance");
  EXPECT_EQ(j["stage"].back(), "hedge");
}

TEST(Cli, SimulateValueMatchesLibrary) {
  const std::string stem = path("sim/ens");
  auto r = invoke({"--threads", "2", "simulate", "--fit", fit_json(), "--out", stem, "--paths", "150", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const FitResult f = fit_result_from_json(io::json::parse(io::read_file(fit_json())));
  ProjectionConfig cfg;
  cfg.paths = 150;
  cfg.seed = 3;
  const ProjectionEnsemble lib = project(f, cfg, make_scenario("baseline"));
  const ProjectionEnsemble cli_e = read_ensemble(stem);
  EXPECT_EQ(cli_e.data, lib.data);
  EXPECT_EQ(io::read_file(stem + ".csv.gz"), io::gzip_compress(ensemble_csv(lib)));

  r = invoke({"value", "--ensemble", stem, "--out", path("sim/value")});
  ASSERT_EQ(r.code, 0) << r.err;
  const ValuedPair v = value_pair(lib, ProductPair{});
  const auto j = io::json::parse(io::read_file(path("sim/value.json")));
  EXPECT_EQ(io::parse_hex_double(j["annuity"]["mean"]), v.annuity.mean);
  EXPECT_EQ(io::parse_hex_double(j["insurance"]["face"]), v.insurance_face);
  const std::string csv = io::read_file(path("sim/value.csv"));
  EXPECT_EQ(csv.rfind("# lingermort.value v1\n", 0), 0u);
}

TEST(Cli, WhatIfRowMatchesLibrary) {
  const std::string out = path("whatif/report");
  const auto r = invoke({"whatif", "--fit", fit_json(), "--out", out, "--scenario", "baseline", "--scenario", "I",
                         "--paths", "120", "--seed", "8", "--density-points", "32"});
  ASSERT_EQ(r.code, 0) << r.err;
  const FitResult f = fit_result_from_json(io::json::parse(io::read_file(fit_json())));
  WhatIfConfig cfg;
  cfg.projection.paths = 120;
  cfg.projection.seed = 8;
  cfg.density_points = 32;
  const WhatIfReport rep = whatif_report(f, {"baseline", "I"}, cfg);
  EXPECT_EQ(io::read_file(out + ".csv"), cli::whatif_table(rep).str());
  EXPECT_EQ(io::read_file(out + "_density.csv"), cli::whatif_density_table(rep).str());
  const auto j = io::json::parse(io::read_file(out + ".json"));
  EXPECT_EQ(io::parse_hex_double(j["omega"]), rep.omega);
  EXPECT_TRUE(fs::exists(out + ".csv.manifest.json"));
}

TEST(Cli, DescribeAndCompare) {
  const std::string dir = path("describe");
  auto r = invoke({"describe", "--panel", panel_csv(), "--out", dir, "--baseline-year", "2015", "--pct-from", "2015",
                   "--pct-to", "2016"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"life_expectancy.csv", "excess_log_mortality.csv", "excess_standardized.csv", "pct_change.csv"})
    EXPECT_TRUE(fs::exists(fs::path(dir) / f)) << f;
  const std::string le = io::read_file((fs::path(dir) / "life_expectancy.csv").string());
  EXPECT_EQ(le.rfind("# lingermort.life_expectancy v1\nyear,age,life_expectancy\n2001,65,", 0), 0u) << le.substr(0, 80);

  const std::string cdir = path("compare");
  r = invoke({"compare", "--panel", panel_csv(), "--fit", fit_json(), "--out", cdir, "--no-standard-errors"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string table = io::read_file((fs::path(cdir) / "comparison.csv").string());
  EXPECT_NE(table.find("\nlingering-jump,by-cause,"), std::string::npos) << table;
  EXPECT_NE(table.find("\nj1,cause-summed,"), std::string::npos) << table;

  const std::string stem = path("compare/ens");
  ASSERT_EQ(invoke({"simulate", "--fit", fit_json(), "--out", stem, "--paths", "120"}).code, 0);
  r = invoke({"hedge", "--ensemble", stem, "--baseline", (fs::path(cdir) / "cc.json").string(), "--baseline",
              (fs::path(cdir) / "j1.json").string(), "--out", path("compare/hedge")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string hedge = io::read_file(path("compare/hedge.csv"));
  EXPECT_NE(hedge.find("\ncc,"), std::string::npos) << hedge;
  EXPECT_NE(hedge.find("\nj1,"), std::string::npos) << hedge;
}
