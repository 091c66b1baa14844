#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/baselines/lee_carter.hpp"
#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"
#include "lingermort/core/rng.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/estimation/bfgs.hpp"
#include "lingermort/estimation/init.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/model/patterns.hpp"
#include "lingermort/model/structured.hpp"

namespace lingermort {

/// Single-decrement view of a panel: deaths summed over causes.
struct AggregatePanel {
  std::vector<std::string> age_labels;
  std::vector<int> years;
  Eigen::MatrixXd deaths;     // ages x years
  Eigen::MatrixXd exposures;  // ages x years

  Eigen::MatrixXd log_rates() const {
    require((deaths.array() > 0.0).all(), ErrorCode::ZeroRate,
            "aggregate panel has a zero death count");
    return (deaths.array() / exposures.array()).log().matrix();
  }
};

inline AggregatePanel aggregate_panel(const MortalityPanel& panel, std::optional<int> from = {},
                                      std::optional<int> to = {}) {
  const MortalityPanel w =
      panel.years_between(from.value_or(panel.first_year()), to.value_or(panel.last_year()));
  return {w.ages().labels(), w.years(), aggregate_deaths(w), w.exposures()};
}

/// Transitory jump profile over the improvement steps of a T-year window:
/// +1 in the jump year and -1 in the following year (steps are years 2..T).
inline Eigen::VectorXd transitory_profile(std::size_t years, std::size_t jump_year) {
  const long n = static_cast<long>(years) - 1;
  Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
  const long s_in = static_cast<long>(jump_year) - 2, s_out = static_cast<long>(jump_year) - 1;
  if (s_in >= 0 && s_in < n) l(s_in) = 1.0;
  if (s_out >= 0 && s_out < n) l(s_out) = -1.0;
  return l;
}

inline double logistic(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// ---------------------------------------------------------------------------
// CC: transitory jump on the period index

struct CCFit {
  LeeCarterFit lc;
  double drift = 0.0;
  double sigma = 0.0;      // diffusion sd of the jump-free index
  double p = 0.0;
  double jump_mean = 0.0;
  double jump_sd = 0.0;
  Eigen::VectorXd k_tilde;  // index with the posterior-mean jump removed
  std::vector<double> pattern_posterior;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> age_labels;
  int first_year = 0;
  int last_year = 0;
  Eigen::VectorXd jump_off_log_rates;
};

/// Mixture likelihood of the index differences, one transitory jump at most.
class CCLikelihood {
 public:
  explicit CCLikelihood(Eigen::VectorXd dk) : dk_(std::move(dk)), T_(static_cast<std::size_t>(dk_.size()) + 1) {}

  struct Params {
    double drift, sigma, jump_mean, jump_sd, p;
  };

  /// Log density of the differences under one pattern (jump_year = 0: none).
  double log_density(const Params& q, std::size_t jump_year) const {
    const double n = static_cast<double>(dk_.size());
    const double s2 = q.sigma * q.sigma, j2 = q.jump_sd * q.jump_sd;
    Eigen::VectorXd r = dk_.array() - q.drift;
    double logdet = n * std::log(s2);
    double quad;
    if (jump_year == 0) {
      quad = r.squaredNorm() / s2;
    } else {
      const Eigen::VectorXd l = transitory_profile(T_, jump_year);
      r -= q.jump_mean * l;
      const double ll = l.squaredNorm(), lr = l.dot(r);
      logdet += std::log1p(j2 * ll / s2);
      quad = r.squaredNorm() / s2 - j2 * lr * lr / (s2 * (s2 + j2 * ll));
    }
    return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad);
  }

  std::vector<double> joint_terms(const Params& q) const {
    std::vector<double> out;
    for (const auto& pattern : admissible_patterns(T_)) {
      const double prior = pattern.log_prior(q.p);
      if (std::isinf(prior) && prior < 0) {
        out.push_back(prior);
        continue;
      }
      out.push_back(prior + log_density(q, pattern.has_jump() ? *pattern.jump_year() : 0));
    }
    return out;
  }

  double operator()(const Params& q) const {
    require(q.sigma > 0.0 && q.p >= 0.0 && q.p <= 1.0, ErrorCode::InvalidArgument,
            "CC parameters out of range");
    return log_sum_exp_ordered(joint_terms(q));
  }

  std::size_t years() const { return T_; }
  const Eigen::VectorXd& differences() const { return dk_; }

 private:
  Eigen::VectorXd dk_;
  std::size_t T_;
};

inline BfgsOptions baseline_bfgs() {
  BfgsOptions b;
  b.gradient.scheme = FiniteDifference::Central;
  b.gradient.relative_step = 1e-6;
  b.gradient.absolute_floor = 1e-6;
  return b;
}

/// Conditional likelihood fit on the Lee-Carter index differences.
inline CCFit fit_cc_index(const Eigen::VectorXd& k, const BfgsOptions& options = baseline_bfgs()) {
  require(k.size() >= 5, ErrorCode::WindowTooShort, "CC needs at least 5 years");
  const Eigen::VectorXd dk = k.tail(k.size() - 1) - k.head(k.size() - 1);
  const CCLikelihood lik(dk);
  const auto [m0, s0] = difference_moments(k);
  long imax = 0;
  (dk.array() - m0).abs().maxCoeff(&imax);
  const double jump0 = dk(imax) - m0;
  auto unpack = [](const Eigen::VectorXd& v) {
    return CCLikelihood::Params{v(0), std::exp(v(1)), v(2), std::exp(v(3)), logistic(v(4))};
  };
  const Objective f = [&](const Eigen::VectorXd& v) {
    try {
      const double ll = lik(unpack(v));
      return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  Eigen::VectorXd x0(5);
  x0 << m0, std::log(std::max(s0, 1e-8)), jump0, -10.0, logit(1.0 / static_cast<double>(k.size()));
  const BfgsResult r = bfgs_maximize(f, {}, x0, options);

  CCFit out;
  const auto q = unpack(r.x);
  out.drift = q.drift;
  out.sigma = q.sigma;
  out.jump_mean = q.jump_mean;
  out.jump_sd = q.jump_sd;
  out.p = q.p;
  out.loglik = r.objective;
  out.iterations = r.iterations;
  out.converged = r.converged;

  // posterior-mean jump contribution to the index
  const std::vector<double> joint = lik.joint_terms(q);
  const double total = log_sum_exp_ordered(joint);
  const auto patterns = admissible_patterns(lik.years());
  out.k_tilde = k;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const double w = std::isinf(joint[i]) ? 0.0 : std::exp(joint[i] - total);
    out.pattern_posterior.push_back(w);
    if (!patterns[i].has_jump() || w == 0.0) continue;
    const std::size_t tj = *patterns[i].jump_year();
    const Eigen::VectorXd l = transitory_profile(lik.years(), tj);
    const Eigen::VectorXd resid = (dk.array() - q.drift).matrix() - q.jump_mean * l;
    const double s2 = q.sigma * q.sigma, j2 = q.jump_sd * q.jump_sd;
    const double cond = q.jump_mean + j2 * l.dot(resid) / (s2 + j2 * l.squaredNorm());
    out.k_tilde(static_cast<long>(tj) - 1) -= w * cond;
  }
  return out;
}

inline CCFit fit_cc(const AggregatePanel& panel, const BfgsOptions& options = baseline_bfgs()) {
  require(panel.years.size() >= 5, ErrorCode::WindowTooShort, "CC needs at least 5 years");
  const LeeCarterFit lc = fit_lee_carter_poisson(panel.deaths, panel.exposures);
  CCFit out = fit_cc_index(lc.k, options);
  out.lc = lc;
  out.age_labels = panel.age_labels;
  out.first_year = panel.years.front();
  out.last_year = panel.years.back();
  out.jump_off_log_rates = panel.log_rates().col(static_cast<long>(panel.years.size()) - 1);
  return out;
}

// ---------------------------------------------------------------------------
// J1: transitory jump with its own age loading

struct J1Fit {
  LeeCarterFit lc;
  Eigen::VectorXd b;       // trend loading, sum 1
  double drift = 0.0;
  double sigma_eta = 0.0;
  Eigen::VectorXd beta_J;  // jump loading, sum 1
  double mu_J = 0.0;
  double sigma_J = 0.0;
  double p = 0.0;
  double sigma_e = 0.0;
  std::vector<double> pattern_posterior;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> age_labels;
  int first_year = 0;
  int last_year = 0;
  Eigen::VectorXd jump_off_log_rates;

  static std::size_t parameter_count(std::size_t ages) { return 2 * ages + 6; }
};

/// Age-vector improvement likelihood: Z_t = b (d + eta_t) + beta (N_t J_t -
/// N_{t-1} J_{t-1}) + e_t - e_{t-1} with a scalar jump J ~ N(mu_J, sigma_J^2).
class J1Likelihood {
 public:
  explicit J1Likelihood(const Eigen::MatrixXd& log_rates)
      : X_(log_rates.rows()), T_(static_cast<std::size_t>(log_rates.cols())),
        evaluator_(log_rates.rightCols(log_rates.cols() - 1) - log_rates.leftCols(log_rates.cols() - 1)),
        patterns_(admissible_patterns(T_)) {}

  struct Params {
    Eigen::VectorXd b;
    double drift;
    double sigma_eta;
    Eigen::VectorXd beta;
    double mu_J;
    double sigma_J;
    double p;
    double sigma_e;
  };

  GaussianStructure structure(const Params& q) const {
    GaussianStructure g;
    g.trend = q.sigma_eta * q.b;
    g.step_mean = q.drift * q.b;
    g.noise_var = q.sigma_e * q.sigma_e;
    g.unit_jump_loadings = false;
    g.jump_loadings = q.beta;
    g.jump_profile = {0};
    g.jump_mean = Eigen::VectorXd::Constant(1, q.mu_J);
    g.jump_var = q.sigma_J * q.sigma_J;
    return g;
  }

  std::vector<double> joint_terms(const Params& q) const {
    std::vector<Eigen::MatrixXd> profiles;
    std::vector<double> prior;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      prior.push_back(patterns_[i].log_prior(q.p));
      if (std::isinf(prior.back()) && prior.back() < 0) continue;
      active.push_back(i);
      profiles.push_back(patterns_[i].has_jump()
                             ? Eigen::MatrixXd(transitory_profile(T_, *patterns_[i].jump_year()))
                             : Eigen::MatrixXd());
    }
    const std::vector<double> dens = evaluator_.log_densities(structure(q), profiles);
    std::vector<double> joint = prior;
    for (std::size_t j = 0; j < active.size(); ++j) joint[active[j]] += dens[j];
    return joint;
  }

  double operator()(const Params& q) const { return log_sum_exp_ordered(joint_terms(q)); }

  long ages() const { return X_; }
  std::size_t years() const { return T_; }

  Params unpack(const Eigen::VectorXd& v) const {
    Params q;
    long k = 0;
    q.b = v.segment(k, X_);
    k += X_;
    q.drift = v(k++);
    q.sigma_eta = std::exp(v(k++));
    q.beta = v.segment(k, X_);
    k += X_;
    q.mu_J = v(k++);
    q.sigma_J = std::exp(v(k++));
    q.p = logistic(v(k++));
    q.sigma_e = std::exp(v(k++));
    return q;
  }

  Eigen::VectorXd pack(const Params& q) const {
    Eigen::VectorXd v(2 * X_ + 6);
    long k = 0;
    v.segment(k, X_) = q.b;
    k += X_;
    v(k++) = q.drift;
    v(k++) = std::log(q.sigma_eta);
    v.segment(k, X_) = q.beta;
    k += X_;
    v(k++) = q.mu_J;
    v(k++) = std::log(std::max(q.sigma_J, ParamLayout::kFloor));
    v(k++) = logit(std::clamp(q.p, 1e-300, 1.0 - 1e-16));
    v(k++) = std::log(q.sigma_e);
    return v;
  }

 private:
  long X_;
  std::size_t T_;
  StructuredEvaluator evaluator_;
  std::vector<JumpPattern> patterns_;
};

inline J1Fit fit_j1(const AggregatePanel& panel, const BfgsOptions& options = baseline_bfgs()) {
  require(panel.years.size() >= 5, ErrorCode::WindowTooShort, "J1 needs at least 5 years");
  const Eigen::MatrixXd lm = panel.log_rates();
  const J1Likelihood lik(lm);
  const LeeCarterFit lc = fit_lee_carter_poisson(panel.deaths, panel.exposures);
  const Eigen::VectorXd dk = lc.k.tail(lc.k.size() - 1) - lc.k.head(lc.k.size() - 1);
  long imax = 0;
  (dk.array() - lc.drift).abs().maxCoeff(&imax);
  const Eigen::MatrixXd resid = lm - lc.log_rates();
  const double sd_e = std::sqrt((resid.array() - resid.mean()).square().sum() /
                                std::max<double>(1.0, static_cast<double>(resid.size()) - 1.0));

  const Eigen::MatrixXd Z = lm.rightCols(lm.cols() - 1) - lm.leftCols(lm.cols() - 1);
  const Objective f = [&](const Eigen::VectorXd& v) {
    try {
      const double ll = lik(lik.unpack(v));
      return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (is_numerical(e.code()) || e.code() == ErrorCode::InvalidArgument)
        return -std::numeric_limits<double>::infinity();
      throw;
    }
  };
  // two starts: the largest index shock read as the entry step or as the exit step
  std::optional<BfgsResult> best;
  for (long entry : {imax, imax - 1}) {
    Eigen::VectorXd shift = lc.b * (dk(imax) - lc.drift);
    if (entry >= 0) {
      shift = Z.col(entry) - lc.b * lc.drift;
      if (entry + 1 < Z.cols()) shift = 0.5 * (shift - (Z.col(entry + 1) - lc.b * lc.drift));
    }
    const double size = shift.sum();
    const Eigen::VectorXd beta0 = std::abs(size) > 1e-8 ? Eigen::VectorXd(shift / size) : lc.b;
    const J1Likelihood::Params q0{lc.b, lc.drift, std::max(lc.sigma, 1e-6), beta0,
                                  std::abs(size) > 1e-8 ? size : 0.0, std::exp(-10.0),
                                  1.0 / static_cast<double>(panel.years.size()), std::max(sd_e, 1e-6)};
    BfgsResult r = bfgs_maximize(f, {}, lik.pack(q0), options);
    if (!best || r.objective > best->objective) best = std::move(r);
  }
  const BfgsResult& r = *best;
  J1Likelihood::Params q = lik.unpack(r.x);
  // gauge: sum(b) = 1 and sum(beta) = 1
  const double sb = q.b.sum();
  if (std::abs(sb) > 1e-12) {
    q.b /= sb;
    q.drift *= sb;
    q.sigma_eta *= std::abs(sb);
  }
  const double sj = q.beta.sum();
  if (std::abs(sj) > 1e-12) {
    q.beta /= sj;
    q.mu_J *= sj;
    q.sigma_J *= std::abs(sj);
  }

  J1Fit out;
  out.lc = lc;
  out.b = q.b;
  out.drift = q.drift;
  out.sigma_eta = q.sigma_eta;
  out.beta_J = q.beta;
  out.mu_J = q.mu_J;
  out.sigma_J = q.sigma_J;
  out.p = q.p;
  out.sigma_e = q.sigma_e;
  const std::vector<double> joint = lik.joint_terms(q);
  out.loglik = log_sum_exp_ordered(joint);
  for (double v : joint) out.pattern_posterior.push_back(std::isinf(v) ? 0.0 : std::exp(v - out.loglik));
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.age_labels = panel.age_labels;
  out.first_year = panel.years.front();
  out.last_year = panel.years.back();
  out.jump_off_log_rates = lm.col(lm.cols() - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Simulation of aggregate paths

struct BaselineSimulation {
  std::size_t horizon = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<std::size_t> forced_jump;  // horizon step (1-based) with a certain jump
  bool jumps = true;                       // false suppresses every random jump
};

/// Rates m (ages x horizon) per path.
using AggregateEnsemble = std::vector<Eigen::MatrixXd>;

namespace detail {

/// Shared path generator: ln m_{T+h} = ln m_T + trend_load (k_{T+h} - k_T)
/// + jump_load * (jump in year h), jumps transitory.
inline AggregateEnsemble simulate_index_model(const Eigen::VectorXd& jump_off, const Eigen::VectorXd& trend_load,
                                              double drift, double sigma, const Eigen::VectorXd& jump_load,
                                              double p, double jump_mean, double jump_sd,
                                              const BaselineSimulation& sim) {
  require(sim.horizon >= 1, ErrorCode::HorizonTooShort, "horizon must be at least one year");
  require(sim.paths >= 1, ErrorCode::InvalidArgument, "need at least one path");
  AggregateEnsemble out(sim.paths);
  parallel_for(sim.paths, sim.threads, [&](std::size_t path) {
    Eigen::MatrixXd m(jump_off.size(), static_cast<long>(sim.horizon));
    double k = 0.0;
    for (std::size_t h = 1; h <= sim.horizon; ++h) {
      CounterRng trend(sim.seed, path, h, static_cast<std::uint64_t>(StreamPurpose::CommonTrend));
      k += drift + sigma * trend.normal();
      double jump = 0.0;
      CounterRng occ(sim.seed, path, h, static_cast<std::uint64_t>(StreamPurpose::JumpOccurrence));
      const bool hit = (sim.forced_jump && *sim.forced_jump == h) || (sim.jumps && occ.bernoulli(p));
      if (hit) {
        CounterRng sev(sim.seed, path, h, static_cast<std::uint64_t>(StreamPurpose::JumpSeverity));
        jump = jump_mean + jump_sd * sev.normal();
      }
      m.col(static_cast<long>(h) - 1) =
          (jump_off + trend_load * k + jump_load * jump).array().exp().matrix();
    }
    out[path] = std::move(m);
  });
  return out;
}

}  // namespace detail

inline AggregateEnsemble simulate_baseline(const LeeCarterFit& fit, const Eigen::VectorXd& jump_off,
                                           const BaselineSimulation& sim) {
  return detail::simulate_index_model(jump_off, fit.b, fit.drift, fit.sigma,
                                      Eigen::VectorXd::Zero(jump_off.size()), 0.0, 0.0, 0.0, sim);
}

inline AggregateEnsemble simulate_baseline(const CCFit& fit, const BaselineSimulation& sim) {
  return detail::simulate_index_model(fit.jump_off_log_rates, fit.lc.b, fit.drift, fit.sigma, fit.lc.b,
                                      fit.p, fit.jump_mean, fit.jump_sd, sim);
}

inline AggregateEnsemble simulate_baseline(const J1Fit& fit, const BaselineSimulation& sim) {
  return detail::simulate_index_model(fit.jump_off_log_rates, fit.b, fit.drift, fit.sigma_eta, fit.beta_J,
                                      fit.p, fit.mu_J, fit.sigma_J, sim);
}

// ---------------------------------------------------------------------------
// Persistence

inline io::json to_json(const LeeCarterFit& f) {
  io::json j;
  j["a"] = io::hex_vector(f.a);
  j["b"] = io::hex_vector(f.b);
  j["k"] = io::hex_vector(f.k);
  j["drift"] = io::hex_double(f.drift);
  j["sigma"] = io::hex_double(f.sigma);
  j["deviance"] = io::hex_double(f.deviance);
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  return j;
}

inline LeeCarterFit lee_carter_from_json(const io::json& j) {
  LeeCarterFit f;
  f.a = io::parse_hex_vector(io::field(j, "a"));
  f.b = io::parse_hex_vector(io::field(j, "b"));
  f.k = io::parse_hex_vector(io::field(j, "k"));
  f.drift = io::parse_hex_double(io::field(j, "drift"));
  f.sigma = io::parse_hex_double(io::field(j, "sigma"));
  f.deviance = io::parse_hex_double(io::field(j, "deviance"));
  f.iterations = io::field(j, "iterations").get<int>();
  f.converged = io::field(j, "converged").get<bool>();
  return f;
}

inline constexpr int kBaselineFormatVersion = 1;

inline io::json to_json(const CCFit& f) {
  io::json j;
  j["format_version"] = kBaselineFormatVersion;
  j["model"] = "cc";
  j["lee_carter"] = to_json(f.lc);
  j["drift"] = io::hex_double(f.drift);
  j["sigma"] = io::hex_double(f.sigma);
  j["p"] = io::hex_double(f.p);
  j["jump_mean"] = io::hex_double(f.jump_mean);
  j["jump_sd"] = io::hex_double(f.jump_sd);
  j["k_tilde"] = io::hex_vector(f.k_tilde);
  j["pattern_posterior"] = io::hex_vector(f.pattern_posterior);
  j["loglik"] = io::hex_double(f.loglik);
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["age_labels"] = f.age_labels;
  j["first_year"] = f.first_year;
  j["last_year"] = f.last_year;
  j["jump_off_log_rates"] = io::hex_vector(f.jump_off_log_rates);
  return j;
}

inline io::json to_json(const J1Fit& f) {
  io::json j;
  j["format_version"] = kBaselineFormatVersion;
  j["model"] = "j1";
  j["lee_carter"] = to_json(f.lc);
  j["b"] = io::hex_vector(f.b);
  j["drift"] = io::hex_double(f.drift);
  j["sigma_eta"] = io::hex_double(f.sigma_eta);
  j["beta_J"] = io::hex_vector(f.beta_J);
  j["mu_J"] = io::hex_double(f.mu_J);
  j["sigma_J"] = io::hex_double(f.sigma_J);
  j["p"] = io::hex_double(f.p);
  j["sigma_e"] = io::hex_double(f.sigma_e);
  j["pattern_posterior"] = io::hex_vector(f.pattern_posterior);
  j["loglik"] = io::hex_double(f.loglik);
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["age_labels"] = f.age_labels;
  j["first_year"] = f.first_year;
  j["last_year"] = f.last_year;
  j["jump_off_log_rates"] = io::hex_vector(f.jump_off_log_rates);
  return j;
}

inline CCFit cc_fit_from_json(const io::json& j) {
  require(io::field(j, "model").get<std::string>() == "cc", ErrorCode::Schema, "not a CC fit");
  CCFit f;
  f.lc = lee_carter_from_json(io::field(j, "lee_carter"));
  f.drift = io::parse_hex_double(io::field(j, "drift"));
  f.sigma = io::parse_hex_double(io::field(j, "sigma"));
  f.p = io::parse_hex_double(io::field(j, "p"));
  f.jump_mean = io::parse_hex_double(io::field(j, "jump_mean"));
  f.jump_sd = io::parse_hex_double(io::field(j, "jump_sd"));
  f.k_tilde = io::parse_hex_vector(io::field(j, "k_tilde"));
  const Eigen::VectorXd post = io::parse_hex_vector(io::field(j, "pattern_posterior"));
  f.pattern_posterior.assign(post.data(), post.data() + post.size());
  f.loglik = io::parse_hex_double(io::field(j, "loglik"));
  f.iterations = io::field(j, "iterations").get<int>();
  f.converged = io::field(j, "converged").get<bool>();
  f.age_labels = io::field(j, "age_labels").get<std::vector<std::string>>();
  f.first_year = io::field(j, "first_year").get<int>();
  f.last_year = io::field(j, "last_year").get<int>();
  f.jump_off_log_rates = io::parse_hex_vector(io::field(j, "jump_off_log_rates"));
  return f;
}

inline J1Fit j1_fit_from_json(const io::json& j) {
  require(io::field(j, "model").get<std::string>() == "j1", ErrorCode::Schema, "not a J1 fit");
  J1Fit f;
  f.lc = lee_carter_from_json(io::field(j, "lee_carter"));
  f.b = io::parse_hex_vector(io::field(j, "b"));
  f.drift = io::parse_hex_double(io::field(j, "drift"));
  f.sigma_eta = io::parse_hex_double(io::field(j, "sigma_eta"));
  f.beta_J = io::parse_hex_vector(io::field(j, "beta_J"));
  f.mu_J = io::parse_hex_double(io::field(j, "mu_J"));
  f.sigma_J = io::parse_hex_double(io::field(j, "sigma_J"));
  f.p = io::parse_hex_double(io::field(j, "p"));
  f.sigma_e = io::parse_hex_double(io::field(j, "sigma_e"));
  const Eigen::VectorXd post = io::parse_hex_vector(io::field(j, "pattern_posterior"));
  f.pattern_posterior.assign(post.data(), post.data() + post.size());
  f.loglik = io::parse_hex_double(io::field(j, "loglik"));
  f.iterations = io::field(j, "iterations").get<int>();
  f.converged = io::field(j, "converged").get<bool>();
  f.age_labels = io::field(j, "age_labels").get<std::vector<std::string>>();
  f.first_year = io::field(j, "first_year").get<int>();
  f.last_year = io::field(j, "last_year").get<int>();
  f.jump_off_log_rates = io::parse_hex_vector(io::field(j, "jump_off_log_rates"));
  return f;
}

}  // namespace lingermort
