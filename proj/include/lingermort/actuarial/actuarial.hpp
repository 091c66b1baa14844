#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/baselines/jump_models.hpp"
#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"
#include "lingermort/estimation/fit.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/projection/projection.hpp"

namespace lingermort {

// ---------------------------------------------------------------------------
// Products

enum class ProductKind { Annuity, Insurance };

inline std::string_view product_name(ProductKind k) {
  return k == ProductKind::Annuity ? "annuity" : "insurance";
}

struct ProductSpec {
  ProductKind kind = ProductKind::Annuity;
  int issue_age = 35;
  int deferral = 0;   // years before the first payment; zero for insurance
  int term = 30;      // payment or cover years
  double rate = 0.03; // constant annual interest
  double face = 1.0;

  void validate() const {
    require(term >= 1, ErrorCode::InvalidArgument, "product term must be at least 1");
    require(deferral >= 0, ErrorCode::InvalidArgument, "deferral must be non-negative");
    require(rate > -1.0 && std::isfinite(rate), ErrorCode::InvalidArgument, "interest rate must exceed -1");
    require(issue_age >= 0, ErrorCode::InvalidArgument, "negative issue age");
  }

  /// Projection years the product needs.
  int span() const { return kind == ProductKind::Annuity ? deferral + term : term; }
};

/// Deferred life annuity at 35: 30 years deferral, 30 payments.
inline ProductSpec default_annuity(double rate = 0.03) {
  return {ProductKind::Annuity, 35, 30, 30, rate, 1.0};
}

/// Term insurance at 35 for 30 years.
inline ProductSpec default_insurance(double rate = 0.03) {
  return {ProductKind::Insurance, 35, 0, 30, rate, 1.0};
}

// ---------------------------------------------------------------------------
// Risk measures

struct RiskSummary {
  double level = 0.05;
  double var_low = 0.0;   // quantile at level
  double var_high = 0.0;  // quantile at 1 - level
  double cte_low = 0.0;   // mean at or below var_low
  double cte_high = 0.0;  // mean at or above var_high
  double sd = 0.0;
  double skewness = std::numeric_limits<double>::quiet_NaN();  // NaN when sd = 0

  bool skewness_available() const { return std::isfinite(skewness); }
};

/// Linear-interpolation empirical quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorCode::SampleTooSmall, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Tail and dispersion measures of the mean-adjusted sample.
inline RiskSummary risk_measures(const std::vector<double>& sample, double level = 0.05) {
  require(sample.size() >= 100, ErrorCode::SampleTooSmall,
          "risk measures need at least 100 observations, got " + std::to_string(sample.size()));
  require(level > 0.0 && level <= 0.5, ErrorCode::InvalidArgument, "tail level must be in (0, 0.5]");
  const double n = static_cast<double>(sample.size());
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  std::vector<double> adj(sample.size());
  for (std::size_t i = 0; i < adj.size(); ++i) adj[i] = sample[i] - mean;
  double m2 = 0.0, m3 = 0.0;
  for (double v : adj) {
    m2 += v * v;
    m3 += v * v * v;
  }
  std::sort(adj.begin(), adj.end());

  RiskSummary r;
  r.level = level;
  r.var_low = sorted_quantile(adj, level);
  r.var_high = sorted_quantile(adj, 1.0 - level);
  double lo_sum = 0.0, hi_sum = 0.0;
  std::size_t lo_n = 0, hi_n = 0;
  for (double v : adj) {
    if (v <= r.var_low) lo_sum += v, ++lo_n;
    if (v >= r.var_high) hi_sum += v, ++hi_n;
  }
  r.cte_low = lo_sum / static_cast<double>(lo_n);
  r.cte_high = hi_sum / static_cast<double>(hi_n);
  // a point mass has no spread, whatever the rounding of its mean
  r.sd = adj.front() == adj.back() ? 0.0 : std::sqrt(m2 / (n - 1.0));
  if (r.sd > 0.0) r.skewness = (m3 / n) / (r.sd * r.sd * r.sd);
  return r;
}

/// Per-path values with their mean-adjusted summary. Samples under 100 paths
/// carry the standard deviation only.
struct PVDistribution {
  std::vector<double> sample;
  double mean = 0.0;
  std::vector<double> adjusted;  // sample minus its mean
  RiskSummary summary;
};

inline PVDistribution make_distribution(std::vector<double> sample, double level = 0.05) {
  PVDistribution d;
  d.sample = std::move(sample);
  require(!d.sample.empty(), ErrorCode::SampleTooSmall, "empty present-value sample");
  for (double v : d.sample) d.mean += v;
  d.mean /= static_cast<double>(d.sample.size());
  d.adjusted.resize(d.sample.size());
  for (std::size_t i = 0; i < d.sample.size(); ++i) d.adjusted[i] = d.sample[i] - d.mean;
  if (d.sample.size() >= 100) {
    d.summary = risk_measures(d.sample, level);
    return d;
  }
  // too few paths for tail measures: dispersion only
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  d.summary = {level, nan, nan, nan, nan, 0.0, nan};
  if (d.sample.size() >= 2) {
    double ss = 0.0;
    for (double v : d.adjusted) ss += v * v;
    d.summary.sd = std::sqrt(ss / static_cast<double>(d.sample.size() - 1));
  }
  return d;
}

/// Rescales the face amount so the sample mean equals `target`; returns the
/// multiplier applied.
inline double scale_to_mean(PVDistribution& d, double target = 100.0) {
  require(d.mean > 0.0, ErrorCode::InvalidArgument, "cannot scale a value with non-positive mean");
  const double f = target / d.mean;
  for (double& v : d.sample) v *= f;
  d = make_distribution(std::move(d.sample), d.summary.level);
  return f;
}

// ---------------------------------------------------------------------------
// Valuation

namespace detail {

inline std::vector<double> value_paths(const ProjectionEnsemble& e, const ProductSpec& spec, int t0,
                                       int threads) {
  spec.validate();
  require(t0 + spec.span() <= e.last_year() && t0 + 1 >= e.first_year, ErrorCode::HorizonTooShort,
          std::string(product_name(spec.kind)) + " needs " + std::to_string(spec.span()) +
              " projection years after " + std::to_string(t0));
  const double v = 1.0 / (1.0 + spec.rate);
  std::vector<double> out(e.paths, 0.0);
  parallel_for(e.paths, threads, [&](std::size_t p) {
    const auto S = survival_curve(e, p, spec.issue_age, t0, spec.span());
    double pv = 0.0;
    if (spec.kind == ProductKind::Annuity) {
      for (int t = spec.deferral + 1; t <= spec.deferral + spec.term; ++t)
        pv += std::pow(v, t) * S[static_cast<std::size_t>(t)];
    } else {
      for (int t = 0; t < spec.term; ++t)
        pv += std::pow(v, t + 1) * (S[static_cast<std::size_t>(t)] - S[static_cast<std::size_t>(t + 1)]);
    }
    out[p] = spec.face * pv;
  });
  return out;
}

}  // namespace detail

/// Per-path value of a life annuity paying 1 at the end of each year
/// survived from deferral + 1 to deferral + term, valued at the end of t0
/// (default: the year before the first projected year).
inline PVDistribution value_annuity(const ProjectionEnsemble& e, const ProductSpec& spec,
                                    std::optional<int> t0 = {}, int threads = 1) {
  require(spec.kind == ProductKind::Annuity, ErrorCode::InvalidArgument, "not an annuity");
  return make_distribution(detail::value_paths(e, spec, t0.value_or(e.first_year - 1), threads));
}

/// Per-path value of term insurance paying 1 at the end of the year of death.
inline PVDistribution value_insurance(const ProjectionEnsemble& e, const ProductSpec& spec,
                                      std::optional<int> t0 = {}, int threads = 1) {
  require(spec.kind == ProductKind::Insurance, ErrorCode::InvalidArgument, "not an insurance");
  return make_distribution(detail::value_paths(e, spec, t0.value_or(e.first_year - 1), threads));
}

inline PVDistribution value_product(const ProjectionEnsemble& e, const ProductSpec& spec,
                                    std::optional<int> t0 = {}, int threads = 1) {
  return spec.kind == ProductKind::Annuity ? value_annuity(e, spec, t0, threads)
                                           : value_insurance(e, spec, t0, threads);
}

// ---------------------------------------------------------------------------
// Natural hedge

struct HedgeResult {
  double omega = 0.0;      // annuity weight, clamped to [0, 1]
  double omega_raw = 0.0;  // unconstrained minimizer
  PVDistribution portfolio;
};

inline std::vector<double> mix(const std::vector<double>& a, const std::vector<double>& b, double w) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "samples must be aligned by path");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = w * a[i] + (1.0 - w) * b[i];
  return out;
}

/// Sample moments (n - 1 denominators) of two aligned samples.
struct PairMoments {
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
};

inline PairMoments pair_moments(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorCode::DimensionMismatch,
          "samples must be aligned by path");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  // constant samples get their exact mean so their moments vanish
  if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a.front(); })) ma = a.front();
  if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b.front(); })) mb = b.front();
  PairMoments m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m.var_a += (a[i] - ma) * (a[i] - ma);
    m.var_b += (b[i] - mb) * (b[i] - mb);
    m.cov += (a[i] - ma) * (b[i] - mb);
  }
  m.var_a /= n - 1.0;
  m.var_b /= n - 1.0;
  m.cov /= n - 1.0;
  return m;
}

/// Annuity weight minimizing the sample variance of w A + (1 - w) I.
inline HedgeResult optimal_hedge(const std::vector<double>& annuity, const std::vector<double>& insurance,
                                 double level = 0.05) {
  const PairMoments m = pair_moments(annuity, insurance);
  const double denom = m.var_a + m.var_b - 2.0 * m.cov;
  const double scale = std::max(m.var_a, m.var_b);
  require(scale > 0.0 && denom >= 1e-12 * scale, ErrorCode::DegenerateVariance,
          "annuity and insurance values do not separate the portfolio variance");
  HedgeResult h;
  h.omega_raw = (m.var_b - m.cov) / denom;
  h.omega = std::clamp(h.omega_raw, 0.0, 1.0);
  h.portfolio = make_distribution(mix(annuity, insurance, h.omega), level);
  return h;
}

// ---------------------------------------------------------------------------
// Model comparison of hedge weights

struct HedgeModelInput {
  std::string model;
  ProjectionEnsemble ensemble;
};

struct HedgeRow {
  std::string model;
  double omega = 0.0;
  double omega_raw = 0.0;
  RiskSummary portfolio;  // evaluated on the reference ensemble
};

struct ProductPair {
  ProductSpec annuity = default_annuity();
  ProductSpec insurance = default_insurance();
  double target_mean = 100.0;  // faces scaled so each sample mean equals this
};

struct ValuedPair {
  PVDistribution annuity, insurance;
  double annuity_face = 1.0, insurance_face = 1.0;
};

/// Values both products on an ensemble with faces scaled to the target mean,
/// or with the given faces when supplied.
inline ValuedPair value_pair(const ProjectionEnsemble& e, const ProductPair& products, int threads = 1,
                             std::optional<std::pair<double, double>> faces = {}) {
  ValuedPair v;
  v.annuity = value_annuity(e, products.annuity, {}, threads);
  v.insurance = value_insurance(e, products.insurance, {}, threads);
  if (faces) {
    auto rescale = [](PVDistribution& d, double f) {
      for (double& x : d.sample) x *= f;
      d = make_distribution(std::move(d.sample), d.summary.level);
    };
    rescale(v.annuity, faces->first);
    rescale(v.insurance, faces->second);
    v.annuity_face = faces->first;
    v.insurance_face = faces->second;
  } else {
    v.annuity_face = scale_to_mean(v.annuity, products.target_mean);
    v.insurance_face = scale_to_mean(v.insurance, products.target_mean);
  }
  return v;
}

/// Hedge weight calibrated on each model's own ensemble, with every
/// portfolio evaluated on the reference ensemble. The reference model's own
/// row comes first.
inline std::vector<HedgeRow> hedge_comparison(const HedgeModelInput& reference,
                                              const std::vector<HedgeModelInput>& alternatives,
                                              const ProductPair& products = {}, int threads = 1) {
  require(!alternatives.empty(), ErrorCode::InvalidArgument, "hedge comparison needs an alternative model");
  const ValuedPair ref = value_pair(reference.ensemble, products, threads);
  std::vector<HedgeRow> rows;
  auto add = [&](const std::string& name, const HedgeResult& own) {
    HedgeRow r;
    r.model = name;
    r.omega = own.omega;
    r.omega_raw = own.omega_raw;
    r.portfolio = risk_measures(mix(ref.annuity.sample, ref.insurance.sample, own.omega));
    rows.push_back(r);
  };
  add(reference.model, optimal_hedge(ref.annuity.sample, ref.insurance.sample));
  for (const auto& alt : alternatives) {
    const ValuedPair v = value_pair(alt.ensemble, products, threads);
    add(alt.model, optimal_hedge(v.annuity.sample, v.insurance.sample));
  }
  return rows;
}

/// Wraps an all-cause baseline ensemble as a single-cause projection.
inline ProjectionEnsemble ensemble_from_aggregate(const AggregateEnsemble& agg,
                                                  const std::vector<std::string>& age_labels,
                                                  int first_year) {
  require(!agg.empty(), ErrorCode::InvalidArgument, "empty baseline ensemble");
  ProjectionEnsemble e;
  e.age_labels = age_labels;
  e.cause_labels = {"all"};
  e.age_midpoints = AgeAxis::from_labels(age_labels).midpoints();
  e.first_year = first_year;
  e.paths = agg.size();
  e.horizon = static_cast<std::size_t>(agg.front().cols());
  e.config.paths = e.paths;
  e.config.horizon = e.horizon;
  e.allocate();
  for (std::size_t p = 0; p < e.paths; ++p) {
    require(agg[p].rows() == e.ages() && static_cast<std::size_t>(agg[p].cols()) == e.horizon,
            ErrorCode::DimensionMismatch, "ragged baseline ensemble");
    for (std::size_t h = 0; h < e.horizon; ++h) e.rates(p, h).col(0) = agg[p].col(static_cast<long>(h));
  }
  return e;
}

// ---------------------------------------------------------------------------
// What-if analysis

struct DensityCurve {
  std::vector<double> x, y;
};

/// Gaussian kernel density of a sample on an even grid, Silverman bandwidth.
/// A point mass yields an empty curve.
inline DensityCurve kernel_density(const std::vector<double>& sample, std::size_t points = 512) {
  DensityCurve d;
  if (sample.size() < 2) return d;
  const double n = static_cast<double>(sample.size());
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) return d;
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double bw = 0.9 * spread * std::pow(n, -0.2);
  const double lo = sorted.front() - 3.0 * bw, hi = sorted.back() + 3.0 * bw;
  const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    double s = 0.0;
    for (double v : sorted) {
      const double z = (x - v) / bw;
      if (std::abs(z) < 8.0) s += std::exp(-0.5 * z * z);
    }
    d.x.push_back(x);
    d.y.push_back(s * norm);
  }
  return d;
}

struct WhatIfRow {
  std::string scenario;
  std::string product;  // annuity, insurance or portfolio
  double sd = 0.0;
  double skewness = std::numeric_limits<double>::quiet_NaN();
  DensityCurve density;  // of the mean-adjusted values
};

struct WhatIfReport {
  double omega = 0.0;  // annuity weight held fixed across scenarios
  double annuity_face = 1.0;
  double insurance_face = 1.0;
  double rate = 0.03;
  std::vector<WhatIfRow> rows;
  std::vector<std::string> notes;
};

struct WhatIfConfig {
  ProjectionConfig projection;
  ProductPair products;
  std::optional<double> omega;  // default: optimal weight on the baseline ensemble
  std::size_t density_points = 512;
};

/// Re-projects and re-values under each scenario. Faces and the hedge weight
/// are calibrated once on the baseline scenario and then held fixed.
inline WhatIfReport whatif_report(const FitResult& fit, const std::vector<std::string>& scenarios,
                                  const WhatIfConfig& cfg) {
  WhatIfReport rep;
  rep.rate = cfg.products.annuity.rate;
  const ProjectionEnsemble base = project(fit, cfg.projection, make_scenario("baseline"));
  const ValuedPair calib = value_pair(base, cfg.products, cfg.projection.threads);
  rep.annuity_face = calib.annuity_face;
  rep.insurance_face = calib.insurance_face;
  if (cfg.omega) {
    rep.omega = *cfg.omega;
  } else {
    try {
      rep.omega = optimal_hedge(calib.annuity.sample, calib.insurance.sample).omega;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateVariance) throw;
      // portfolio variance does not depend on the weight here
      rep.omega = 0.5;
      rep.notes.push_back("DegenerateVariance: hedge weight undetermined, using 0.5");
    }
  }
  for (const auto& name : scenarios) {
    const ScenarioSpec spec = make_scenario(name);
    const ProjectionEnsemble e = name == "baseline" ? base : project(fit, cfg.projection, spec);
    const ValuedPair v = value_pair(e, cfg.products, cfg.projection.threads,
                                    std::make_pair(rep.annuity_face, rep.insurance_face));
    const PVDistribution port = make_distribution(mix(v.annuity.sample, v.insurance.sample, rep.omega));
    for (const auto* d : {&v.annuity, &v.insurance, &port}) {
      WhatIfRow r;
      r.scenario = name;
      r.product = d == &v.annuity ? "annuity" : d == &v.insurance ? "insurance" : "portfolio";
      r.sd = d->summary.sd;
      r.skewness = d->summary.skewness;
      r.density = kernel_density(d->adjusted, cfg.density_points);
      rep.rows.push_back(std::move(r));
    }
  }
  return rep;
}

}  // namespace lingermort
