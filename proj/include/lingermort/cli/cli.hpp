#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "lingermort/actuarial/actuarial.hpp"
#include "lingermort/baselines/comparison.hpp"
#include "lingermort/baselines/jump_models.hpp"
#include "lingermort/core/errors.hpp"
#include "lingermort/data/descriptive.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/data/wonder.hpp"
#include "lingermort/estimation/fit.hpp"
#include "lingermort/io/csv.hpp"
#include "lingermort/io/files.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/projection/projection.hpp"

namespace lingermort::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kConfigDirEnv = "LINGERMORT_CONFIG_DIR";
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1, ErrorCode::Io,
          "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

/// A required input that does not exist.
class MissingInput : public Error {
 public:
  explicit MissingInput(std::string path)
      : Error(ErrorCode::Io, "input not found: " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::optional<std::uint64_t> seed;
  std::string tool_version = kToolVersion;
  double wall_seconds = 0.0;

  io::json to_json() const {
    return {{"format_version", 1},
            {"command", command},
            {"config_sha256", config_hash},
            {"inputs", inputs},
            {"outputs", outputs},
            {"seed", seed ? io::json(*seed) : io::json(nullptr)},
            {"tool_version", tool_version},
            {"wall_seconds", wall_seconds}};
  }
};

/// Shared state of one invocation.
struct Run {
  Run(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;
  int threads = 1;
  bool dry_run = false;
  std::vector<std::string> trace;
  RunManifest manifest;

  void stage(std::string s) { trace.push_back(std::move(s)); }

  std::string read_input(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw MissingInput(path);
    std::string bytes = io::read_file(path);
    manifest.inputs[path] = sha256_hex(bytes);
    return bytes;
  }

  void write_output(const std::string& path, const std::string& bytes) {
    io::write_file_atomic(path, bytes);
    manifest.outputs[path] = sha256_hex(bytes);
  }

  /// Records a file written by a library routine.
  void record_output(const std::string& path) { manifest.outputs[path] = sha256_hex(io::read_file(path)); }
};

// ---------------------------------------------------------------------------
// Table formatting

inline std::string num(double v) { return std::isfinite(v) ? io::format_double(v) : "NA"; }

/// CSV with a leading schema line.
class Table {
 public:
  Table(const std::string& schema, std::vector<std::string> columns) {
    text_ = "# lingermort." + schema + " v1\n";
    add(columns);
  }
  void add(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      const auto& c = cells[i];
      if (c.find_first_of(",\"\n") == std::string::npos) {
        text_ += c;
      } else {
        text_ += '"';
        for (char ch : c) {
          if (ch == '"') text_ += '"';
          text_ += ch;
        }
        text_ += '"';
      }
    }
    text_ += '\n';
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline std::string summary_json_key(double level, bool high) {
  const int pct = static_cast<int>(std::lround(100.0 * (high ? 1.0 - level : level)));
  return std::to_string(pct);
}

inline io::json to_json(const RiskSummary& r) {
  const std::string lo = summary_json_key(r.level, false), hi = summary_json_key(r.level, true);
  auto v = [](double x) { return std::isfinite(x) ? io::json(x) : io::json(nullptr); };
  return {{"VaR_" + lo, v(r.var_low)}, {"VaR_" + hi, v(r.var_high)}, {"CTE_" + lo, v(r.cte_low)},
          {"CTE_" + hi, v(r.cte_high)}, {"sd", v(r.sd)},                 {"skewness", v(r.skewness)}};
}

inline std::vector<std::string> summary_columns(const RiskSummary& r) {
  return {num(r.var_low), num(r.var_high), num(r.cte_low), num(r.cte_high), num(r.sd), num(r.skewness)};
}

inline std::vector<std::string> summary_headers(double level) {
  const std::string lo = summary_json_key(level, false), hi = summary_json_key(level, true);
  return {"VaR_" + lo, "VaR_" + hi, "CTE_" + lo, "CTE_" + hi, "sd", "skewness"};
}

// ---------------------------------------------------------------------------
// Report builders shared by the subcommands and their tests

inline Table whatif_table(const WhatIfReport& rep) {
  Table t("whatif", {"scenario", "product", "sd", "skewness", "omega", "rate"});
  for (const auto& r : rep.rows) t.add({r.scenario, r.product, num(r.sd), num(r.skewness), num(rep.omega), num(rep.rate)});
  return t;
}

inline Table whatif_density_table(const WhatIfReport& rep) {
  Table t("whatif_density", {"scenario", "product", "x", "density"});
  for (const auto& r : rep.rows)
    for (std::size_t i = 0; i < r.density.x.size(); ++i) t.add({r.scenario, r.product, num(r.density.x[i]), num(r.density.y[i])});
  return t;
}

inline Table hedge_table(const std::vector<HedgeRow>& rows, double rate) {
  std::vector<std::string> cols = {"model", "omega", "omega_raw"};
  for (auto& h : summary_headers(0.05)) cols.push_back("portfolio_" + h);
  cols.push_back("rate");
  Table t("hedge", cols);
  for (const auto& r : rows) {
    std::vector<std::string> cells = {r.model, num(r.omega), num(r.omega_raw)};
    for (auto& c : summary_columns(r.portfolio)) cells.push_back(c);
    cells.push_back(num(rate));
    t.add(cells);
  }
  return t;
}

inline Table comparison_table(const ModelComparison& m) {
  Table t("comparison", {"model", "data", "loglik", "parameters", "observations", "aic", "bic", "converged"});
  for (const auto& r : m.rows)
    t.add({r.model, r.data, num(r.loglik), std::to_string(r.parameters), std::to_string(r.observations), num(r.aic),
           num(r.bic), r.converged ? "true" : "false"});
  return t;
}

// ---------------------------------------------------------------------------
// Option groups

struct FitFlags {
  std::string panel;
  std::string variant = "full";
  int jump_year = 2020;
  std::optional<int> window_start, window_end;
  double tolerance = 1e-8;
  int max_iterations = 500;
  std::string gradient = "central";
  double gradient_step = 1e-6;
  std::vector<double> alpha_starts{1.0, 3.0}, beta_starts{0.5, 2.0}, gamma_starts{0.5, -0.5};
  std::string prefit = "auto";
  bool no_standard_errors = false;
  std::uint64_t seed = 0;

  void attach(CLI::App* app, bool with_variant) {
    app->add_option("--panel", panel, "canonical panel CSV")->required();
    if (with_variant)
      app->add_option("--variant", variant, "model variant")->check(CLI::IsMember({"full", "no_jump"}));
    app->add_option("--jump-year", jump_year, "calendar year of the in-sample jump");
    app->add_option("--window-start", window_start, "first year of the estimation window");
    app->add_option("--window-end", window_end, "last year of the estimation window");
    app->add_option("--tolerance", tolerance, "relative objective change that stops the optimizer");
    app->add_option("--max-iterations", max_iterations, "optimizer iteration cap");
    app->add_option("--gradient", gradient, "finite-difference scheme")->check(CLI::IsMember({"central", "forward"}));
    app->add_option("--gradient-step", gradient_step, "relative finite-difference step");
    app->add_option("--alpha-starts", alpha_starts, "kernel shape starting values");
    app->add_option("--beta-starts", beta_starts, "kernel rate starting values");
    app->add_option("--gamma-starts", gamma_starts, "kernel magnitude starting values");
    app->add_option("--prefit", prefit, "restricted-model pre-fit")->check(CLI::IsMember({"auto", "on", "off"}));
    app->add_flag("--no-standard-errors", no_standard_errors, "skip the Hessian");
    app->add_option("--seed", seed, "seed recorded with the fit");
  }

  FitOptions options(int threads) const {
    FitOptions o;
    o.window_start = window_start;
    o.window_end = window_end;
    o.variant = variant == "no_jump" ? ModelVariant::NoJump : ModelVariant::Full;
    o.jump_year = jump_year;
    o.bfgs.relative_tolerance = tolerance;
    o.bfgs.max_iterations = max_iterations;
    o.bfgs.gradient.scheme = gradient == "forward" ? FiniteDifference::Forward : FiniteDifference::Central;
    o.bfgs.gradient.relative_step = gradient_step;
    o.kernel_starts.alpha = alpha_starts;
    o.kernel_starts.beta = beta_starts;
    o.kernel_starts.gamma = gamma_starts;
    o.prefit = prefit == "on" ? PrefitMode::On : prefit == "off" ? PrefitMode::Off : PrefitMode::Auto;
    o.compute_standard_errors = !no_standard_errors;
    o.seed = seed;
    o.threads = threads;
    return o;
  }
};

struct ProductFlags {
  double rate = 0.03;
  int annuity_age = 35, annuity_deferral = 30, annuity_term = 30;
  int insurance_age = 35, insurance_term = 30;
  double target_mean = 100.0;

  void attach(CLI::App* app) {
    app->add_option("--rate", rate, "annual interest rate");
    app->add_option("--annuity-age", annuity_age, "annuity issue age");
    app->add_option("--annuity-deferral", annuity_deferral, "annuity deferral years");
    app->add_option("--annuity-term", annuity_term, "annuity payment years");
    app->add_option("--insurance-age", insurance_age, "insurance issue age");
    app->add_option("--insurance-term", insurance_term, "insurance cover years");
    app->add_option("--target-mean", target_mean, "faces scaled so each mean value equals this");
  }

  ProductPair products() const {
    ProductPair p;
    p.annuity = {ProductKind::Annuity, annuity_age, annuity_deferral, annuity_term, rate, 1.0};
    p.insurance = {ProductKind::Insurance, insurance_age, 0, insurance_term, rate, 1.0};
    p.target_mean = target_mean;
    return p;
  }
};

struct ProjectionFlags {
  std::size_t horizon = 60;
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  bool include_noise = false;
  bool allow_nonconverged = false;

  void attach(CLI::App* app) {
    app->add_option("--horizon", horizon, "projection years");
    app->add_option("--paths", paths, "simulated paths");
    app->add_option("--seed", seed, "random seed");
    app->add_flag("--include-noise", include_noise, "add measurement noise to projected rates");
    app->add_flag("--allow-nonconverged", allow_nonconverged, "project from a non-converged fit");
  }

  ProjectionConfig config(int threads) const {
    ProjectionConfig c;
    c.horizon = horizon;
    c.paths = paths;
    c.seed = seed;
    c.threads = threads;
    c.include_noise = include_noise;
    c.allow_nonconverged = allow_nonconverged;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Subcommands

struct Command {
  CLI::App* app = nullptr;
  std::function<std::vector<std::string>()> planned;  // outputs, known before running
  std::function<void(Run&)> execute;
  std::function<std::optional<std::uint64_t>()> seed = [] { return std::optional<std::uint64_t>{}; };
};

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline FitResult load_fit(Run& run, const std::string& path) {
  return fit_result_from_json(io::json::parse(run.read_input(path)));
}

inline ProjectionEnsemble load_ensemble(Run& run, const std::string& stem) {
  run.read_input(stem + ".json");
  run.read_input(stem + ".csv.gz");
  return read_ensemble(stem);
}

inline io::json pv_json(const PVDistribution& d, double face) {
  return {{"face", io::hex_double(face)},
          {"mean", io::hex_double(d.mean)},
          {"summary", to_json(d.summary)},
          {"sample", io::hex_vector(d.sample)}};
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cause-specific lingering-jump mortality toolkit", "lingermort"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kToolVersion);
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "sectioned key-value configuration file", false)
      ->transform([](const std::string& path) {
        if (path.empty() || std::filesystem::exists(path)) return path;
        const char* dir = std::getenv(kConfigDirEnv);
        if (dir && std::filesystem::exists(join(dir, path))) return join(dir, path);
        return path;
      });
  int threads = 1;
  bool dry_run = false;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--dry-run", dry_run, "print the resolved configuration and planned outputs only");

  std::vector<Command> commands;

  // ingest
  struct {
    std::vector<std::string> wonder, era;
    std::string canonical, out;
    double open_offset = AgeAxis::kDefaultOpenOffset;
  } in;
  {
    Command c;
    c.app = app.add_subcommand("ingest", "build a canonical panel from WONDER exports or a canonical CSV");
    c.app->add_option("--wonder", in.wonder, "tab-delimited WONDER export (repeatable)");
    c.app->add_option("--era", in.era, "ICD era per export: icd8, icd9 or icd10");
    c.app->add_option("--canonical", in.canonical, "canonical long-format CSV");
    c.app->add_option("--open-offset", in.open_offset, "representative age offset of the open band");
    c.app->add_option("--out", in.out, "canonical panel CSV")->required();
    c.planned = [&] { return std::vector<std::string>{in.out}; };
    c.execute = [&](Run& r) {
      require(!in.wonder.empty() || !in.canonical.empty(), ErrorCode::InvalidArgument,
              "give --wonder or --canonical");
      require(in.wonder.empty() || in.canonical.empty(), ErrorCode::InvalidArgument,
              "--wonder and --canonical are exclusive");
      std::vector<CanonicalRow> rows;
      std::optional<CauseAxis> axis;
      if (!in.canonical.empty()) {
        r.stage("read canonical " + in.canonical);
        r.read_input(in.canonical);
        rows = read_canonical_rows(in.canonical);
      } else {
        require(in.era.size() == in.wonder.size() || in.era.size() == 1, ErrorCode::InvalidArgument,
                "give one --era or one per --wonder");
        axis = CauseAxis::six_group();
        for (std::size_t i = 0; i < in.wonder.size(); ++i) {
          r.stage("read export " + in.wonder[i]);
          r.read_input(in.wonder[i]);
          const auto part = load_wonder_export(in.wonder[i], *axis, parse_era(in.era[in.era.size() == 1 ? 0 : i]));
          rows.insert(rows.end(), part.begin(), part.end());
        }
      }
      r.stage("assemble panel");
      const MortalityPanel panel = panel_from_rows(rows, axis ? &*axis : nullptr, in.open_offset);
      r.write_output(in.out, canonical_csv_text(panel.to_rows()));
    };
    commands.push_back(c);
  }

  // describe
  struct {
    std::string panel, out;
    std::vector<double> le_ages{65.0};
    int closure_age = 110;
    int baseline_year = 2019, pct_from = 2019, pct_to = 2020;
  } de;
  {
    Command c;
    c.app = app.add_subcommand("describe", "descriptive tables: life expectancy, excess log mortality, percentage change");
    c.app->add_option("--panel", de.panel, "canonical panel CSV")->required();
    c.app->add_option("--out", de.out, "output directory")->required();
    c.app->add_option("--le-ages", de.le_ages, "ages for life expectancy (at least the lowest band midpoint)");
    c.app->add_option("--closure-age", de.closure_age, "age closing the life table");
    c.app->add_option("--baseline-year", de.baseline_year, "reference year for excess log mortality");
    c.app->add_option("--pct-from", de.pct_from, "first year of the percentage change");
    c.app->add_option("--pct-to", de.pct_to, "second year of the percentage change");
    c.planned = [&] {
      return std::vector<std::string>{join(de.out, "life_expectancy.csv"), join(de.out, "excess_log_mortality.csv"),
                                      join(de.out, "excess_standardized.csv"), join(de.out, "pct_change.csv")};
    };
    c.execute = [&](Run& r) {
      r.stage("load panel");
      r.read_input(de.panel);
      const MortalityPanel panel = load_canonical_csv(de.panel);
      r.stage("life expectancy");
      Table le("life_expectancy", {"year", "age", "life_expectancy"});
      for (int y : panel.years())
        for (double a : de.le_ages) le.add({std::to_string(y), num(a), num(period_life_expectancy(panel, a, y, de.closure_age))});
      r.stage("excess log mortality");
      const auto em = excess_log_mortality(panel, de.baseline_year);
      Table emt("excess_log_mortality", {"year", "age_group", "cause", "excess_log_mortality"});
      Table ems("excess_standardized", {"year", "cause", "standardized_mean"});
      for (std::size_t k = 0; k < em.years.size(); ++k)
        for (std::size_t c2 = 0; c2 < panel.num_causes(); ++c2) {
          for (std::size_t x = 0; x < panel.num_ages(); ++x)
            emt.add({std::to_string(em.years[k]), panel.ages().bands()[x].label, panel.causes().labels()[c2],
                     num(em.em(x, k, c2))});
          ems.add({std::to_string(em.years[k]), panel.causes().labels()[c2],
                   num(em.standardized(static_cast<long>(k), static_cast<long>(c2)))});
        }
      r.stage("percentage change");
      const Eigen::MatrixXd pc = pct_change(panel, de.pct_from, de.pct_to);
      std::vector<std::string> cols = {"age_group"};
      for (const auto& l : panel.causes().labels()) cols.push_back(l);
      Table pct("pct_change", cols);
      for (std::size_t x = 0; x < panel.num_ages(); ++x) {
        std::vector<std::string> row = {panel.ages().bands()[x].label};
        for (long c2 = 0; c2 < pc.cols(); ++c2) row.push_back(num(pc(static_cast<long>(x), c2)));
        pct.add(row);
      }
      r.write_output(join(de.out, "life_expectancy.csv"), le.str());
      r.write_output(join(de.out, "excess_log_mortality.csv"), emt.str());
      r.write_output(join(de.out, "excess_standardized.csv"), ems.str());
      r.write_output(join(de.out, "pct_change.csv"), pct.str());
    };
    commands.push_back(c);
  }

  // fit
  FitFlags ff;
  std::string fit_out;
  {
    Command c;
    c.app = app.add_subcommand("fit", "estimate the model by conditional maximum likelihood");
    ff.attach(c.app, true);
    c.app->add_option("--out", fit_out, "fit result JSON")->required();
    c.planned = [&] { return std::vector<std::string>{fit_out}; };
    c.seed = [&] { return std::optional<std::uint64_t>(ff.seed); };
    c.execute = [&](Run& r) {
      r.stage("load panel");
      r.read_input(ff.panel);
      const MortalityPanel panel = load_canonical_csv(ff.panel);
      r.stage("fit " + ff.variant);
      const FitResult res = fit(panel, ff.options(r.threads));
      r.write_output(fit_out, to_json(res).dump(2) + "\n");
    };
    commands.push_back(c);
  }

  // simulate
  ProjectionFlags sf;
  struct {
    std::string fit, out, scenario = "baseline";
    std::optional<double> p_override, severity_scale, lingering_scale;
  } si;
  {
    Command c;
    c.app = app.add_subcommand("simulate", "project mortality rates from a fit");
    c.app->add_option("--fit", si.fit, "fit result JSON")->required();
    c.app->add_option("--out", si.out, "output stem (writes .csv.gz and .json)")->required();
    c.app->add_option("--scenario", si.scenario, "baseline, I, II, III or IV");
    c.app->add_option("--p-override", si.p_override, "annual probability of new jumps");
    c.app->add_option("--severity-scale", si.severity_scale, "multiplier on the mean jump severity");
    c.app->add_option("--lingering-scale", si.lingering_scale, "multiplier on the kernel magnitude of new jumps");
    sf.attach(c.app);
    c.planned = [&] { return std::vector<std::string>{si.out + ".csv.gz", si.out + ".json"}; };
    c.seed = [&] { return std::optional<std::uint64_t>(sf.seed); };
    c.execute = [&](Run& r) {
      r.stage("load fit");
      const FitResult f = load_fit(r, si.fit);
      ScenarioSpec spec = make_scenario(si.scenario);
      if (si.p_override) spec.p_override = *si.p_override;
      if (si.severity_scale) spec.severity_scale = *si.severity_scale;
      if (si.lingering_scale) spec.lingering_scale = *si.lingering_scale;
      r.stage("project");
      const ProjectionEnsemble e = project(f, sf.config(r.threads), spec);
      r.stage("write ensemble");
      r.write_output(si.out + ".csv.gz", io::gzip_compress(ensemble_csv(e)));
      r.write_output(si.out + ".json", ensemble_sidecar(e).dump(2) + "\n");
    };
    commands.push_back(c);
  }

  // value
  ProductFlags vp;
  struct {
    std::string ensemble, out;
  } va;
  {
    Command c;
    c.app = app.add_subcommand("value", "value the annuity and the insurance on an ensemble");
    c.app->add_option("--ensemble", va.ensemble, "ensemble stem")->required();
    c.app->add_option("--out", va.out, "output prefix (writes .csv and .json)")->required();
    vp.attach(c.app);
    c.planned = [&] { return std::vector<std::string>{va.out + ".csv", va.out + ".json"}; };
    c.execute = [&](Run& r) {
      r.stage("load ensemble");
      const ProjectionEnsemble e = load_ensemble(r, va.ensemble);
      r.stage("value products");
      const ProductPair products = vp.products();
      const ValuedPair v = products.target_mean > 0.0 ? value_pair(e, products, r.threads)
                                                      : value_pair(e, products, r.threads, std::make_pair(1.0, 1.0));
      std::vector<std::string> cols = {"product", "face", "mean"};
      for (auto& h : summary_headers(0.05)) cols.push_back(h);
      cols.push_back("rate");
      Table t("value", cols);
      for (const auto& [name, d, face] : {std::tuple{"annuity", &v.annuity, v.annuity_face},
                                          std::tuple{"insurance", &v.insurance, v.insurance_face}}) {
        std::vector<std::string> row = {name, num(face), num(d->mean)};
        for (auto& s : summary_columns(d->summary)) row.push_back(s);
        row.push_back(num(vp.rate));
        t.add(row);
      }
      io::json j = {{"format_version", 1},
                    {"rate", io::hex_double(vp.rate)},
                    {"annuity", pv_json(v.annuity, v.annuity_face)},
                    {"insurance", pv_json(v.insurance, v.insurance_face)}};
      r.write_output(va.out + ".csv", t.str());
      r.write_output(va.out + ".json", j.dump(2) + "\n");
    };
    commands.push_back(c);
  }

  // hedge
  ProductFlags hp;
  struct {
    std::string ensemble, out;
    std::vector<std::string> baselines;
  } he;
  {
    Command c;
    c.app = app.add_subcommand("hedge", "variance-minimizing annuity weight, calibrated under each model");
    c.app->add_option("--ensemble", he.ensemble, "reference ensemble stem")->required();
    c.app->add_option("--baseline", he.baselines, "baseline fit JSON from compare (repeatable)");
    c.app->add_option("--out", he.out, "output prefix (writes .csv and .json)")->required();
    hp.attach(c.app);
    c.planned = [&] { return std::vector<std::string>{he.out + ".csv", he.out + ".json"}; };
    c.execute = [&](Run& r) {
      r.stage("load ensemble");
      const ProjectionEnsemble e = load_ensemble(r, he.ensemble);
      std::vector<BaselineFit> fits;
      for (const auto& path : he.baselines) {
        r.stage("load baseline " + path);
        fits.push_back(baseline_fit_from_json(io::json::parse(r.read_input(path))));
      }
      r.stage("hedge");
      std::vector<HedgeRow> rows;
      if (fits.empty()) {
        const ValuedPair v = value_pair(e, hp.products(), r.threads);
        const HedgeResult h = optimal_hedge(v.annuity.sample, v.insurance.sample);
        rows.push_back({"lingering-jump", h.omega, h.omega_raw, h.portfolio.summary});
      } else {
        rows = baseline_hedge_table(e, fits, hp.products(), r.threads);
      }
      io::json j = {{"format_version", 1}, {"rate", io::hex_double(hp.rate)}, {"rows", io::json::array()}};
      for (const auto& row : rows)
        j["rows"].push_back({{"model", row.model},
                             {"omega", io::hex_double(row.omega)},
                             {"omega_raw", io::hex_double(row.omega_raw)},
                             {"portfolio", to_json(row.portfolio)}});
      r.write_output(he.out + ".csv", hedge_table(rows, hp.rate).str());
      r.write_output(he.out + ".json", j.dump(2) + "\n");
    };
    commands.push_back(c);
  }

  // whatif
  ProjectionFlags wf;
  ProductFlags wp;
  struct {
    std::string fit, out;
    std::vector<std::string> scenarios{"baseline", "I", "II", "III", "IV"};
    std::optional<double> omega;
    std::size_t density_points = 512;
  } wi;
  {
    Command c;
    c.app = app.add_subcommand("whatif", "risk of the products and the hedged portfolio under scenarios");
    c.app->add_option("--fit", wi.fit, "fit result JSON")->required();
    c.app->add_option("--out", wi.out, "output prefix (writes .csv, _density.csv and .json)")->required();
    c.app->add_option("--scenario", wi.scenarios, "scenarios to run");
    c.app->add_option("--omega", wi.omega, "annuity weight held fixed (default: optimal under baseline)");
    c.app->add_option("--density-points", wi.density_points, "grid size of the density curves");
    wf.attach(c.app);
    wp.attach(c.app);
    c.planned = [&] { return std::vector<std::string>{wi.out + ".csv", wi.out + "_density.csv", wi.out + ".json"}; };
    c.seed = [&] { return std::optional<std::uint64_t>(wf.seed); };
    c.execute = [&](Run& r) {
      r.stage("load fit");
      const FitResult f = load_fit(r, wi.fit);
      WhatIfConfig cfg;
      cfg.projection = wf.config(r.threads);
      cfg.products = wp.products();
      cfg.omega = wi.omega;
      cfg.density_points = wi.density_points;
      r.stage("what-if");
      const WhatIfReport rep = whatif_report(f, wi.scenarios, cfg);
      io::json j = {{"format_version", 1},
                    {"omega", io::hex_double(rep.omega)},
                    {"annuity_face", io::hex_double(rep.annuity_face)},
                    {"insurance_face", io::hex_double(rep.insurance_face)},
                    {"rate", io::hex_double(rep.rate)},
                    {"notes", rep.notes},
                    {"projection", to_json(cfg.projection)}};
      r.write_output(wi.out + ".csv", whatif_table(rep).str());
      r.write_output(wi.out + "_density.csv", whatif_density_table(rep).str());
      r.write_output(wi.out + ".json", j.dump(2) + "\n");
    };
    commands.push_back(c);
  }

  // compare
  FitFlags cf;
  struct {
    std::string fit, out;
  } co;
  {
    Command c;
    c.app = app.add_subcommand("compare", "no-jump variant and single-decrement jump baselines");
    cf.attach(c.app, false);
    c.app->add_option("--fit", co.fit, "main fit result JSON")->required();
    c.app->add_option("--out", co.out, "output directory")->required();
    c.planned = [&] {
      return std::vector<std::string>{join(co.out, "comparison.csv"), join(co.out, "no_jump_fit.json"),
                                      join(co.out, "cc.json"), join(co.out, "j1.json")};
    };
    c.execute = [&](Run& r) {
      r.stage("load panel");
      r.read_input(cf.panel);
      const MortalityPanel panel = load_canonical_csv(cf.panel);
      r.stage("load fit");
      const FitResult main = load_fit(r, co.fit);
      r.stage("fit comparison models");
      const ModelComparison m = compare_models(panel, main, cf.options(r.threads));
      r.write_output(join(co.out, "comparison.csv"), comparison_table(m).str());
      r.write_output(join(co.out, "no_jump_fit.json"), to_json(m.no_jump).dump(2) + "\n");
      r.write_output(join(co.out, "cc.json"), to_json(m.cc).dump(2) + "\n");
      r.write_output(join(co.out, "j1.json"), to_json(m.j1).dump(2) + "\n");
    };
    commands.push_back(c);
  }

  Run state(out, err);
  const auto start = std::chrono::steady_clock::now();
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }
  state.threads = threads;
  state.dry_run = dry_run;

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    state.manifest.command = c.app->get_name();
    std::string config = c.app->config_to_str(true, false);
    state.manifest.config_hash = sha256_hex(config);
    state.manifest.seed = c.seed();
    const auto planned = c.planned();
    if (dry_run) {
      out << "# command: " << c.app->get_name() << "\nthreads=" << threads << "\n" << config << "# planned outputs:\n";
      for (const auto& p : planned) out << "#   " << p << "\n";
      return kExitOk;
    }
    try {
      c.execute(state);
      state.manifest.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const std::string manifest_path = planned.front() + ".manifest.json";
      io::write_file_atomic(manifest_path, state.manifest.to_json().dump(2) + "\n");
      return kExitOk;
    } catch (const MissingInput& e) {
      err << io::json{{"status", "error"}, {"exit_code", kExitValidation}, {"error", "MissingInput"},
                      {"path", e.path()}, {"message", e.what()}, {"stage", state.trace}}
                 .dump()
          << "\n";
      return kExitValidation;
    } catch (const Error& e) {
      const int code = is_numerical(e.code()) ? kExitNumerical : kExitValidation;
      err << io::json{{"status", "error"}, {"exit_code", code}, {"error", std::string(to_string(e.code()))},
                      {"message", e.what()}, {"stage", state.trace}}
                 .dump()
          << "\n";
      return code;
    } catch (const io::json::exception& e) {
      err << io::json{{"status", "error"}, {"exit_code", kExitValidation}, {"error", "Schema"},
                      {"message", e.what()}, {"stage", state.trace}}
                 .dump()
          << "\n";
      return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
      err << io::json{{"status", "error"}, {"exit_code", kExitValidation}, {"error", "Io"},
                      {"message", e.what()}, {"stage", state.trace}}
                 .dump()
          << "\n";
      return kExitValidation;
    }
  }
  return kExitValidation;
}

}  // namespace lingermort::cli
