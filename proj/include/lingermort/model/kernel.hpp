#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"

namespace lingermort {

/// Cause-specific decay of a jump's effect on log rates:
/// weight(c, 0) = 1, weight(c, tau < 0) = 0 and
/// weight(c, tau > 0) = gamma_c beta_c^alpha_c tau^(alpha_c - 1) exp(-beta_c tau).
struct LingeringKernel {
  Eigen::VectorXd gamma;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  LingeringKernel() = default;
  LingeringKernel(Eigen::VectorXd g, Eigen::VectorXd a, Eigen::VectorXd b)
      : gamma(std::move(g)), alpha(std::move(a)), beta(std::move(b)) {}

  /// No lingering: the effect lasts only in the jump year.
  static LingeringKernel indicator(std::size_t causes) {
    const long C = static_cast<long>(causes);
    return {Eigen::VectorXd::Zero(C), Eigen::VectorXd::Ones(C), Eigen::VectorXd::Ones(C)};
  }

  std::size_t causes() const { return static_cast<std::size_t>(gamma.size()); }

  void validate(std::size_t causes) const {
    const long C = static_cast<long>(causes);
    require(gamma.size() == C && alpha.size() == C && beta.size() == C,
            ErrorCode::DimensionMismatch, "kernel vectors must have one entry per cause");
    for (long c = 0; c < C; ++c)
      require(alpha(c) > 0.0 && beta(c) > 0.0 && std::isfinite(gamma(c)),
              ErrorCode::InvalidArgument, "kernel shape and rate must be positive");
  }

  double weight(std::size_t c, int tau) const {
    if (tau < 0) return 0.0;
    if (tau == 0) return 1.0;
    const long i = static_cast<long>(c);
    const double t = static_cast<double>(tau);
    return gamma(i) * std::exp(alpha(i) * std::log(beta(i)) + (alpha(i) - 1.0) * std::log(t) -
                               beta(i) * t);
  }
};

inline double lingering_weight(const LingeringKernel& kernel, std::size_t c, int tau) {
  return kernel.weight(c, tau);
}

}  // namespace lingermort
