#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"
#include "lingermort/data/descriptive.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/estimation/bfgs.hpp"
#include "lingermort/estimation/init.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/model/likelihood.hpp"
#include "lingermort/model/params.hpp"
#include "lingermort/model/special_case.hpp"

namespace lingermort {

/// Failures that mean the trial point is outside the usable region rather
/// than a programming error.
inline bool out_of_domain(const Error& e) {
  return is_numerical(e.code()) || e.code() == ErrorCode::InvalidArgument;
}

// ---------------------------------------------------------------------------
// Standard errors

struct StandardErrors {
  Eigen::VectorXd se;           // NaN where unavailable
  std::vector<bool> available;
  Eigen::MatrixXd hessian;      // of the negative log-likelihood
  Eigen::MatrixXd covariance;
  std::vector<std::string> notes;

  bool all_available() const {
    return std::all_of(available.begin(), available.end(), [](bool a) { return a; });
  }
};

/// Central-difference Hessian of -loglik with step relative_step * max(|x_i|, 1).
inline Eigen::MatrixXd numerical_hessian(const Objective& loglik, const Eigen::VectorXd& x,
                                         double relative_step = 1e-4, int threads = 1) {
  const long n = x.size();
  Eigen::VectorXd h(n);
  for (long i = 0; i < n; ++i) h(i) = relative_step * std::max(std::abs(x(i)), 1.0);
  const double f0 = -loglik(x);
  Eigen::MatrixXd H(n, n);
  std::vector<std::pair<long, long>> pairs;
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), threads, [&](std::size_t idx) {
    const auto [i, j] = pairs[idx];
    auto at = [&](double si, double sj) {
      Eigen::VectorXd y = x;
      y(i) += si * h(i);
      y(j) += sj * h(j);
      return -loglik(y);
    };
    double v;
    if (i == j) {
      Eigen::VectorXd yp = x, ym = x;
      yp(i) += h(i);
      ym(i) -= h(i);
      v = (-loglik(yp) - 2.0 * f0 + -loglik(ym)) / (h(i) * h(i));
    } else {
      v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h(i) * h(j));
    }
    H(i, j) = v;
    H(j, i) = v;
  });
  return H;
}

/// Inverse-Hessian standard errors. Rows of `constraints` are gradients of
/// gauge conditions; the Hessian is inverted on their null space. Directions
/// with non-positive or negligible curvature make the coordinates that load
/// on them unavailable.
inline StandardErrors standard_errors_from_hessian(const Eigen::MatrixXd& hessian,
                                                   const Eigen::MatrixXd& constraints = {},
                                                   double relative_cutoff = 1e-10) {
  const long n = hessian.rows();
  StandardErrors out;
  out.hessian = hessian;
  out.se = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  out.available.assign(static_cast<std::size_t>(n), true);

  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  if (constraints.rows() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(constraints, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    long rank = 0;
    for (long i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-12 * std::max(sv(0), 1.0)) ++rank;
    basis = svd.matrixV().rightCols(n - rank);
  }
  const Eigen::MatrixXd reduced_raw = basis.transpose() * hessian * basis;
  const Eigen::MatrixXd reduced = 0.5 * (reduced_raw + reduced_raw.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double top = lam.size() > 0 ? lam.cwiseAbs().maxCoeff() : 0.0;
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(reduced.rows(), reduced.cols());
  for (long k = 0; k < lam.size(); ++k) {
    const Eigen::VectorXd dir = basis * eig.eigenvectors().col(k);
    if (lam(k) > relative_cutoff * top && lam(k) > 0.0) {
      inv += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).transpose() / lam(k);
    } else {
      for (long i = 0; i < n; ++i)
        if (std::abs(dir(i)) > 1e-3) out.available[static_cast<std::size_t>(i)] = false;
    }
  }
  out.covariance = basis * inv * basis.transpose();
  std::size_t flagged = 0;
  for (long i = 0; i < n; ++i) {
    if (out.available[static_cast<std::size_t>(i)] && out.covariance(i, i) > 0.0)
      out.se(i) = std::sqrt(out.covariance(i, i));
    else {
      out.available[static_cast<std::size_t>(i)] = false;
      ++flagged;
    }
  }
  if (flagged > 0)
    out.notes.push_back("SingularHessian: " + std::to_string(flagged) +
                        " coordinate(s) without a standard error");
  return out;
}

inline StandardErrors standard_errors(const Objective& loglik, const Eigen::VectorXd& x,
                                      const Eigen::MatrixXd& constraints = {},
                                      double relative_step = 1e-4, int threads = 1) {
  return standard_errors_from_hessian(numerical_hessian(loglik, x, relative_step, threads),
                                      constraints);
}

// ---------------------------------------------------------------------------
// Gauge

/// Rescales to sum(B) = 1, sum(b) = 1 and |phi| = 1 with the largest-magnitude
/// phi positive. The likelihood is unchanged.
inline ParamSet normalize_gauge(ParamSet t, std::vector<std::string>* notes = nullptr) {
  const double sB = t.B.sum();
  if (std::abs(sB) > 1e-12) {
    t.B /= sB;
    t.drift_K *= sB;
    t.sigma_eta *= std::abs(sB);
  } else if (notes) {
    notes->push_back("common age loadings sum to zero; left unnormalized");
  }
  const double sb = t.b.sum();
  if (std::abs(sb) > 1e-12) {
    t.b /= sb;
    t.phi *= sb;
  } else if (notes) {
    notes->push_back("cause age loadings sum to zero; left unnormalized");
  }
  const double np = t.phi.norm();
  if (np > 0.0) {
    long imax = 0;
    t.phi.cwiseAbs().maxCoeff(&imax);
    const double s = t.phi(imax) < 0 ? -np : np;
    t.phi /= s;
    t.drift_k *= s;
    t.sigma_xi *= np;
  }
  return t;
}

/// Gradients of the gauge conditions in packed coordinates.
inline Eigen::MatrixXd gauge_constraints(const ParamLayout& layout, const ParamSet& t) {
  const long n = static_cast<long>(layout.size());
  const long X = static_cast<long>(layout.ages()), C = static_cast<long>(layout.causes());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, n);
  A.block(0, 0, 1, X).setOnes();
  A.block(1, static_cast<long>(layout.offset_b()), 1, X).setOnes();
  A.block(2, static_cast<long>(layout.offset_phi()), 1, C) = t.phi.transpose();
  return A;
}

// ---------------------------------------------------------------------------
// Special-case pre-fit

struct SpecialCaseFit {
  ParamSet theta;
  BfgsResult optimizer;
};

/// Maximizes the restricted likelihood over its coordinates with the scales
/// in logs and p in logits; other fields of `start` are carried over.
inline SpecialCaseFit fit_special_case(const ImprovementTensor& z, const ParamSet& start,
                                       const BfgsOptions& options, bool analytic_gradient = true) {
  const SpecialCaseLikelihood lik(z);
  const long X = static_cast<long>(z.ages()), C = static_cast<long>(z.causes());
  const long n = static_cast<long>(lik.gradient_size());
  const std::vector<long> logs{X + 1, 2 * X + C + 3, n - 2};
  const long ip = n - 1;
  auto to_natural = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd w = v;
    for (long i : logs) w(i) = std::exp(v(i));
    w(ip) = v(ip) >= 0 ? 1.0 / (1.0 + std::exp(-v(ip))) : std::exp(v(ip)) / (1.0 + std::exp(v(ip)));
    return w;
  };
  Eigen::VectorXd v0 = lik.pack(start);
  for (long i : logs) v0(i) = std::log(std::max(v0(i), ParamLayout::kFloor));
  {
    const double p = std::clamp(v0(ip), 1e-12, 1.0 - 1e-12);
    v0(ip) = std::log(p) - std::log1p(-p);
  }
  Objective f = [&](const Eigen::VectorXd& v) {
    try {
      const double ll = lik.loglik(lik.unpack(to_natural(v), start));
      return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (out_of_domain(e)) return -std::numeric_limits<double>::infinity();
      throw;
    }
  };
  GradientFn g;
  if (analytic_gradient) {
    g = [&](const Eigen::VectorXd& v) {
      const Eigen::VectorXd w = to_natural(v);
      Eigen::VectorXd gr = lik.gradient(lik.unpack(w, start));
      for (long i : logs) gr(i) *= w(i);
      gr(ip) *= w(ip) * (1.0 - w(ip));
      return gr;
    };
  }
  SpecialCaseFit out;
  out.optimizer = bfgs_maximize(f, g, v0, options);
  out.theta = lik.unpack(to_natural(out.optimizer.x), start);
  return out;
}

// ---------------------------------------------------------------------------
// Full fit

enum class PrefitMode { Auto, On, Off };

struct FitOptions {
  std::optional<int> window_start;
  std::optional<int> window_end;
  ModelVariant variant = ModelVariant::Full;
  int jump_year = 2020;
  BfgsOptions bfgs = default_bfgs();
  PrefitMode prefit = PrefitMode::Auto;
  KernelStartGrid kernel_starts;
  /// Extra cause-specific starting points; the fit keeps the highest likelihood.
  std::vector<CauseStartKind> alternative_starts = {CauseStartKind::Differences,
                                                    CauseStartKind::Covariance};
  bool nested_start = true;  // the full variant also starts from the fitted no-jump model
  int restarts = 10;                      // optimizer restarts from the previous stop
  double restart_tolerance = 1e-6;        // restarts end once the gain drops below this
  std::uint64_t seed = 0;  // recorded with the fit; the fit itself draws no random numbers
  bool compute_standard_errors = true;
  double hessian_step = 1e-4;
  LikelihoodOptions likelihood;
  int threads = 1;

  /// Central differences with small steps; the 1% forward scheme remains
  /// available through bfgs.gradient.
  static BfgsOptions default_bfgs() {
    BfgsOptions b;
    b.gradient.scheme = FiniteDifference::Central;
    b.gradient.relative_step = 1e-6;
    b.gradient.absolute_floor = 1e-6;
    return b;
  }
};

inline constexpr int kFitResultFormatVersion = 1;

struct FitResult {
  ParamSet theta_hat;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t free_parameters = 0;
  std::size_t observations = 0;
  std::vector<std::string> parameter_names;
  Eigen::VectorXd estimates;   // transformed coordinates
  Eigen::VectorXd std_errors;  // transformed coordinates, NaN where unavailable
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::string variant = "full";
  double initial_loglik = 0.0;
  std::vector<double> trace;
  std::vector<std::string> notes;
  int first_year = 0;
  int last_year = 0;
  std::optional<int> jump_year;
  std::vector<double> pattern_posterior;  // jump in window year 1..T, then none
  Eigen::MatrixXd jump_off_log_rates;     // ages x causes at last_year
  std::uint64_t seed = 0;
};

/// Pre-fit on the restricted model is used by default when X*C >= 36.
inline bool use_prefit(const FitOptions& o, std::size_t X, std::size_t C) {
  if (o.variant != ModelVariant::Full) return false;
  if (o.prefit == PrefitMode::On) return true;
  if (o.prefit == PrefitMode::Off) return false;
  return X * C >= 36;
}

/// Wraps the mixture likelihood as a function of packed coordinates; numerical
/// failures evaluate to -inf so the optimizer backs off.
inline Objective packed_loglik(const MixtureLikelihood& lik, const ParamLayout& layout,
                               const ParamSet& fixed) {
  return [&lik, layout, fixed](const Eigen::VectorXd& v) {
    try {
      const double ll = lik(layout.unpack(v, &fixed));
      return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (out_of_domain(e)) return -std::numeric_limits<double>::infinity();
      throw;
    }
  };
}

inline FitResult fit(const MortalityPanel& full_panel, const FitOptions& options = {}) {
  const int y0 = options.window_start.value_or(full_panel.first_year());
  const int y1 = options.window_end.value_or(full_panel.last_year());
  require(full_panel.has_year(y0) && full_panel.has_year(y1) && y0 <= y1,
          ErrorCode::YearOutOfRange, "window " + std::to_string(y0) + "-" + std::to_string(y1));
  const MortalityPanel panel = full_panel.years_between(y0, y1);
  require(panel.num_years() >= 5, ErrorCode::WindowTooShort,
          "window has " + std::to_string(panel.num_years()) + " years, need at least 5");
  const bool with_jump = options.variant == ModelVariant::Full;
  const std::size_t X = panel.num_ages(), C = panel.num_causes();

  FitResult out;
  out.variant = std::string(variant_name(options.variant));
  out.first_year = panel.first_year();
  out.last_year = panel.last_year();
  out.seed = options.seed;
  if (with_jump) out.jump_year = options.jump_year;

  InitArtifacts init = initialize(panel, with_jump, options.jump_year, options.kernel_starts,
                                  options.alternative_starts);
  out.notes = init.notes;
  const ImprovementTensor z = improvement_tensor(panel);
  LikelihoodOptions lopt = options.likelihood;
  lopt.threads = 1;  // parallelism is spent on gradient coordinates
  const MixtureLikelihood lik(z, lopt);
  BfgsOptions bopt = options.bfgs;
  bopt.gradient.threads = options.threads;
  const ParamLayout layout(X, C, options.variant);

  struct Run {
    ParamSet start;
    double initial = 0.0;
    BfgsResult opt;
    std::vector<std::string> notes;
  };
  auto optimize_from = [&](ParamSet start) {
    Run r;
    if (use_prefit(options, X, C)) {
      const SpecialCaseFit pre = fit_special_case(z, start, bopt, true);
      ParamSet cand = pre.theta;
      cand.kernel = start.kernel;
      cand.sigma_J = start.sigma_J;
      if (lik(cand) > lik(start)) {
        start = cand;
        r.notes.push_back("restricted-model pre-fit used as the starting point");
      } else {
        r.notes.push_back("restricted-model pre-fit discarded: no gain on the full likelihood");
      }
    }
    const Objective f = packed_loglik(lik, layout, start);
    const Eigen::VectorXd x0 = layout.pack(start);
    r.initial = f(x0);
    r.opt = bfgs_maximize(f, {}, x0, bopt);
    // a fresh curvature model often moves on from a stop caused by a stale one
    for (int k = 0; k < options.restarts; ++k) {
      BfgsResult again;
      try {
        again = bfgs_maximize(f, {}, r.opt.x, bopt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteObjective) throw;
        break;
      }
      const double gain = again.objective - r.opt.objective;
      if (!(gain > 0.0)) break;
      again.iterations += r.opt.iterations;
      again.trace.insert(again.trace.begin(), r.opt.trace.begin(), r.opt.trace.end());
      r.opt = std::move(again);
      if (gain <= options.restart_tolerance) break;
    }
    r.start = std::move(start);
    return r;
  };

  Run best = optimize_from(init.theta0);
  for (const auto& [kind, theta] : init.alternatives) {
    Run alt = optimize_from(theta);
    if (alt.opt.objective > best.opt.objective) {
      best = std::move(alt);
      best.notes.push_back(std::string(cause_start_name(kind)) +
                           " cause-specific start gave the highest likelihood");
    }
  }
  if (with_jump && options.nested_start) {
    FitOptions inner = options;
    inner.variant = ModelVariant::NoJump;
    inner.compute_standard_errors = false;
    const FitResult nested = fit(panel, inner);
    ParamSet st = nested.theta_hat;
    init_jump_block(panel, options.jump_year, st, options.kernel_starts);
    Run alt = optimize_from(st);
    if (alt.opt.objective > best.opt.objective) {
      best = std::move(alt);
      best.notes.push_back("start from the fitted no-jump model gave the highest likelihood");
    }
  }
  out.notes.insert(out.notes.end(), best.notes.begin(), best.notes.end());
  const BfgsResult& opt = best.opt;
  const ParamSet& start = best.start;
  out.initial_loglik = best.initial;
  out.iterations = opt.iterations;
  out.converged = opt.converged;
  out.stop_reason = opt.stop_reason;
  for (const auto& it : opt.trace) out.trace.push_back(it.objective);
  if (!opt.converged) out.notes.push_back("MaxIterations: optimizer stopped before convergence");

  ParamSet theta = normalize_gauge(layout.unpack(opt.x, &start), &out.notes);
  theta.age_labels = panel.ages().labels();
  theta.cause_labels = panel.causes().labels();
  out.theta_hat = theta;
  out.estimates = layout.pack(theta);
  const MixtureTerms terms = lik.terms(theta);
  out.loglik = terms.loglik;
  out.pattern_posterior = terms.posterior();
  out.free_parameters = layout.size();
  out.observations = lik.observations();
  const InformationCriteria ic = information_criteria(
      out.loglik, static_cast<double>(out.free_parameters), static_cast<double>(out.observations));
  out.aic = ic.aic;
  out.bic = ic.bic;
  out.parameter_names = layout.names();

  if (options.compute_standard_errors) {
    const Objective fn = packed_loglik(lik, layout, theta);
    const StandardErrors se = standard_errors(fn, out.estimates, gauge_constraints(layout, theta),
                                              options.hessian_step, options.threads);
    out.std_errors = se.se;
    out.notes.insert(out.notes.end(), se.notes.begin(), se.notes.end());
  } else {
    out.std_errors = Eigen::VectorXd::Constant(static_cast<long>(layout.size()),
                                               std::numeric_limits<double>::quiet_NaN());
  }

  const Tensor3 lm = log_rates(panel);
  out.jump_off_log_rates.resize(static_cast<long>(X), static_cast<long>(C));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t x = 0; x < X; ++x)
      out.jump_off_log_rates(static_cast<long>(x), static_cast<long>(c)) =
          lm(x, panel.num_years() - 1, c);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline io::json to_json(const FitResult& r) {
  io::json j;
  j["format_version"] = kFitResultFormatVersion;
  j["model"] = "lingering-jump";
  j["variant"] = r.variant;
  j["theta"] = to_json(r.theta_hat);
  j["loglik"] = io::hex_double(r.loglik);
  j["aic"] = io::hex_double(r.aic);
  j["bic"] = io::hex_double(r.bic);
  j["free_parameters"] = r.free_parameters;
  j["observations"] = r.observations;
  j["parameter_names"] = r.parameter_names;
  j["estimates"] = io::hex_vector(r.estimates);
  j["std_errors"] = io::hex_vector(r.std_errors);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["stop_reason"] = r.stop_reason;
  j["initial_loglik"] = io::hex_double(r.initial_loglik);
  j["trace"] = io::hex_vector(Eigen::Map<const Eigen::VectorXd>(r.trace.data(),
                                                                static_cast<long>(r.trace.size())));
  j["notes"] = r.notes;
  j["first_year"] = r.first_year;
  j["last_year"] = r.last_year;
  j["jump_year"] = r.jump_year ? io::json(*r.jump_year) : io::json(nullptr);
  j["pattern_posterior"] = io::hex_vector(Eigen::Map<const Eigen::VectorXd>(
      r.pattern_posterior.data(), static_cast<long>(r.pattern_posterior.size())));
  j["jump_off_log_rates"] = io::hex_matrix(r.jump_off_log_rates);
  j["seed"] = r.seed;
  return j;
}

inline FitResult fit_result_from_json(const io::json& j) {
  require(io::field(j, "format_version").get<int>() == kFitResultFormatVersion, ErrorCode::Schema,
          "unsupported fit format version");
  FitResult r;
  r.variant = io::field(j, "variant").get<std::string>();
  r.theta_hat = param_set_from_json(io::field(j, "theta"));
  r.loglik = io::parse_hex_double(io::field(j, "loglik"));
  r.aic = io::parse_hex_double(io::field(j, "aic"));
  r.bic = io::parse_hex_double(io::field(j, "bic"));
  r.free_parameters = io::field(j, "free_parameters").get<std::size_t>();
  r.observations = io::field(j, "observations").get<std::size_t>();
  r.parameter_names = io::field(j, "parameter_names").get<std::vector<std::string>>();
  r.estimates = io::parse_hex_vector(io::field(j, "estimates"));
  r.std_errors = io::parse_hex_vector(io::field(j, "std_errors"));
  r.iterations = io::field(j, "iterations").get<int>();
  r.converged = io::field(j, "converged").get<bool>();
  r.stop_reason = io::field(j, "stop_reason").get<std::string>();
  r.initial_loglik = io::parse_hex_double(io::field(j, "initial_loglik"));
  const Eigen::VectorXd tr = io::parse_hex_vector(io::field(j, "trace"));
  r.trace.assign(tr.data(), tr.data() + tr.size());
  r.notes = io::field(j, "notes").get<std::vector<std::string>>();
  r.first_year = io::field(j, "first_year").get<int>();
  r.last_year = io::field(j, "last_year").get<int>();
  if (!io::field(j, "jump_year").is_null()) r.jump_year = j["jump_year"].get<int>();
  const Eigen::VectorXd post = io::parse_hex_vector(io::field(j, "pattern_posterior"));
  r.pattern_posterior.assign(post.data(), post.data() + post.size());
  r.jump_off_log_rates = io::parse_hex_matrix(io::field(j, "jump_off_log_rates"));
  r.seed = io::field(j, "seed").get<std::uint64_t>();
  return r;
}

}  // namespace lingermort
