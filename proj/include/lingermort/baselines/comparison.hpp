#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lingermort/actuarial/actuarial.hpp"
#include "lingermort/baselines/jump_models.hpp"
#include "lingermort/estimation/fit.hpp"
#include "lingermort/model/likelihood.hpp"
#include "lingermort/projection/projection.hpp"

namespace lingermort {

struct ComparisonRow {
  std::string model;
  std::string data;  // "by-cause" or "cause-summed"
  double loglik = 0.0;
  std::size_t parameters = 0;
  std::size_t observations = 0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
};

struct ModelComparison {
  std::vector<ComparisonRow> rows;
  FitResult no_jump;
  CCFit cc;
  J1Fit j1;
};

/// Refits the no-jump variant on the main fit's window and the two
/// single-decrement jump baselines on the cause-summed panel of that window.
/// Log-likelihoods of the baselines refer to their own data and are not
/// comparable with the by-cause rows.
inline ModelComparison compare_models(const MortalityPanel& panel, const FitResult& main,
                                      FitOptions options = {}) {
  options.window_start = main.first_year;
  options.window_end = main.last_year;
  options.variant = ModelVariant::NoJump;
  ModelComparison out;
  auto row = [](std::string model, std::string data, double ll, std::size_t k, std::size_t n, bool conv) {
    const InformationCriteria ic = information_criteria(ll, static_cast<double>(k), static_cast<double>(n));
    return ComparisonRow{std::move(model), std::move(data), ll, k, n, ic.aic, ic.bic, conv};
  };
  out.rows.push_back(row("lingering-jump", "by-cause", main.loglik, main.free_parameters, main.observations,
                         main.converged));
  out.no_jump = fit(panel, options);
  out.rows.push_back(row("no-jump", "by-cause", out.no_jump.loglik, out.no_jump.free_parameters,
                         out.no_jump.observations, out.no_jump.converged));

  const AggregatePanel agg = aggregate_panel(panel, main.first_year, main.last_year);
  const std::size_t X = agg.age_labels.size(), T = agg.years.size();
  out.cc = fit_cc(agg);
  out.rows.push_back(row("cc", "cause-summed", out.cc.loglik, 5, T - 1, out.cc.converged));
  out.j1 = fit_j1(agg);
  out.rows.push_back(row("j1", "cause-summed", out.j1.loglik, J1Fit::parameter_count(X), X * (T - 1),
                         out.j1.converged));
  return out;
}

using BaselineFit = std::variant<CCFit, J1Fit>;

inline BaselineFit baseline_fit_from_json(const io::json& j) {
  const std::string model = io::field(j, "model").get<std::string>();
  if (model == "cc") return cc_fit_from_json(j);
  if (model == "j1") return j1_fit_from_json(j);
  throw Error(ErrorCode::Schema, "not a baseline fit artifact (model '" + model + "')");
}

inline std::string baseline_name(const BaselineFit& f) {
  return std::holds_alternative<CCFit>(f) ? "cc" : "j1";
}

/// Simulates a baseline from its last fitted year, wrapped for valuation.
inline ProjectionEnsemble baseline_projection(const BaselineFit& f, const ProjectionConfig& cfg) {
  BaselineSimulation sim;
  sim.horizon = cfg.horizon;
  sim.paths = cfg.paths;
  sim.seed = cfg.seed;
  sim.threads = cfg.threads;
  return std::visit(
      [&](const auto& b) {
        ProjectionEnsemble e = ensemble_from_aggregate(simulate_baseline(b, sim), b.age_labels, b.last_year + 1);
        e.config = cfg;
        e.scenario.name = baseline_name(f);
        return e;
      },
      f);
}

/// Hedge weights calibrated under each baseline, with portfolios evaluated
/// on the reference ensemble. Baselines reuse the reference's horizon, path
/// count and seed.
inline std::vector<HedgeRow> baseline_hedge_table(const ProjectionEnsemble& reference,
                                                  const std::vector<BaselineFit>& baselines,
                                                  const ProductPair& products = {}, int threads = 1) {
  std::vector<HedgeModelInput> alts;
  ProjectionConfig cfg = reference.config;
  cfg.threads = threads;
  for (const auto& b : baselines) alts.push_back({baseline_name(b), baseline_projection(b, cfg)});
  return hedge_comparison({"lingering-jump", reference}, alts, products, threads);
}

}  // namespace lingermort
