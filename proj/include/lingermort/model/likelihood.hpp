#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/data/descriptive.hpp"
#include "lingermort/model/moments.hpp"
#include "lingermort/model/params.hpp"
#include "lingermort/model/patterns.hpp"
#include "lingermort/model/structured.hpp"

namespace lingermort {

struct LikelihoodOptions {
  /// Added to every diagonal element of the covariance; 0 means none.
  double diagonal_inflation = 0.0;
  /// Assemble and factorize the full covariance instead of the structured path.
  bool dense = false;
  int threads = 1;
};

/// Per-pattern pieces of the mixture, in the standard order (jump in year
/// 1..T, then no jump).
struct MixtureTerms {
  std::vector<double> log_prior;
  std::vector<double> log_density;
  double loglik = 0.0;

  /// Posterior probability of each pattern.
  std::vector<double> posterior() const {
    std::vector<double> joint(log_prior.size());
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = log_prior[i] + log_density[i];
    std::vector<double> out(joint.size());
    for (std::size_t i = 0; i < joint.size(); ++i)
      out[i] = std::isfinite(joint[i]) ? std::exp(joint[i] - loglik) : 0.0;
    return out;
  }
};

inline std::string pattern_label(const JumpPattern& pattern) {
  return pattern.has_jump() ? "pattern with jump in year index " + std::to_string(*pattern.jump_year())
                            : "no-jump pattern";
}

/// Mixture log-likelihood of an improvement tensor under the model, bound to
/// the data so repeated evaluations reuse the time-basis rotation.
class MixtureLikelihood {
 public:
  explicit MixtureLikelihood(const ImprovementTensor& z, LikelihoodOptions options = {})
      : X_(z.ages()), C_(z.causes()), T_(z.steps() + 1), options_(options),
        evaluator_(Eigen::Map<const Eigen::MatrixXd>(z.z().data().data(),
                                                     static_cast<long>(z.ages() * z.causes()),
                                                     static_cast<long>(z.steps()))),
        patterns_(admissible_patterns(T_)) {
    for (const auto& p : patterns_) labels_.push_back(pattern_label(p));
  }

  std::size_t ages() const { return X_; }
  std::size_t causes() const { return C_; }
  std::size_t years() const { return T_; }
  std::size_t observations() const { return X_ * C_ * (T_ - 1); }
  const LikelihoodOptions& options() const { return options_; }
  const std::vector<JumpPattern>& patterns() const { return patterns_; }

  GaussianStructure structure(const ParamSet& theta) const {
    theta.validate(X_, C_);
    GaussianStructure g;
    const long N = static_cast<long>(X_ * C_);
    g.trend.resize(N, 2);
    g.trend.col(0) = theta.sigma_eta * common_loading(theta);
    g.trend.col(1) = theta.sigma_xi * cause_loading(theta);
    g.step_mean = common_loading(theta) * theta.drift_K + cause_loading(theta) * theta.drift_k;
    g.noise_var = theta.sigma_e * theta.sigma_e;
    g.inflation = options_.diagonal_inflation;
    g.unit_jump_loadings = true;
    g.jump_profile.resize(static_cast<std::size_t>(N));
    for (long i = 0; i < N; ++i) g.jump_profile[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i) / X_;
    g.jump_mean = stacked_mu(theta);
    g.jump_var = theta.sigma_J * theta.sigma_J;
    return g;
  }

  /// Lingering factors of every cause in every improvement step (n x C).
  Eigen::MatrixXd profile(const ParamSet& theta, const JumpPattern& pattern) const {
    Eigen::MatrixXd prof(static_cast<long>(T_ - 1), static_cast<long>(C_));
    for (std::size_t t = 2; t <= T_; ++t)
      for (std::size_t c = 0; c < C_; ++c)
        prof(static_cast<long>(t - 2), static_cast<long>(c)) =
            pattern.lingering_difference(theta.kernel, c, t);
    return prof;
  }

  MixtureTerms terms(const ParamSet& theta) const {
    const GaussianStructure g = structure(theta);
    MixtureTerms out;
    // patterns with zero prior weight are not evaluated
    std::vector<Eigen::MatrixXd> profiles;
    std::vector<std::string> labels;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      const auto& pattern = patterns_[i];
      out.log_prior.push_back(pattern.log_prior(theta.p));
      if (std::isinf(out.log_prior.back()) && out.log_prior.back() < 0) continue;
      active.push_back(i);
      profiles.push_back(pattern.has_jump() ? profile(theta, pattern) : Eigen::MatrixXd());
      labels.push_back(labels_[i]);
    }
    const std::vector<double> dens =
        evaluator_.log_densities(g, profiles, labels, options_.threads, options_.dense);
    out.log_density.assign(patterns_.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < active.size(); ++j) out.log_density[active[j]] = dens[j];
    std::vector<double> joint(patterns_.size());
    for (std::size_t i = 0; i < joint.size(); ++i)
      joint[i] = std::isinf(out.log_prior[i]) && out.log_prior[i] < 0
                     ? out.log_prior[i]
                     : out.log_prior[i] + out.log_density[i];
    out.loglik = log_sum_exp_ordered(joint);
    return out;
  }

  double operator()(const ParamSet& theta) const { return terms(theta).loglik; }

 private:
  std::size_t X_, C_, T_;
  LikelihoodOptions options_;
  StructuredEvaluator evaluator_;
  std::vector<JumpPattern> patterns_;
  std::vector<std::string> labels_;
};

inline double mixture_loglik(const ParamSet& theta, const ImprovementTensor& z,
                             const LikelihoodOptions& options = {}) {
  return MixtureLikelihood(z, options)(theta);
}

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

inline InformationCriteria information_criteria(double loglik, double k, double n) {
  require(n > 0.0 || k == 0.0, ErrorCode::InvalidArgument, "observation count must be positive");
  return {2.0 * k - 2.0 * loglik, (k == 0.0 ? 0.0 : k * std::log(n)) - 2.0 * loglik};
}

}  // namespace lingermort
