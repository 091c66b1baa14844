#pragma once

#include <utility>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/model/params.hpp"
#include "lingermort/model/patterns.hpp"

namespace lingermort {

/// Loading of the common trend shock on the stacked age-cause block
/// (index x + X c): 1_C (x) B.
inline Eigen::VectorXd common_loading(const ParamSet& t) {
  const long X = static_cast<long>(t.ages()), C = static_cast<long>(t.causes());
  Eigen::VectorXd u(X * C);
  for (long c = 0; c < C; ++c) u.segment(c * X, X) = t.B;
  return u;
}

/// Loading of the cause-specific trend shock: phi (x) b.
inline Eigen::VectorXd cause_loading(const ParamSet& t) {
  const long X = static_cast<long>(t.ages()), C = static_cast<long>(t.causes());
  Eigen::VectorXd v(X * C);
  for (long c = 0; c < C; ++c) v.segment(c * X, X) = t.phi(c) * t.b;
  return v;
}

/// Jump-path factor for every cell of year t: N_t pi_c(tau) - N_{t-1} pi_c(tau-1).
inline Eigen::VectorXd lingering_factors(const ParamSet& t, const JumpPattern& pattern,
                                         std::size_t year) {
  const long X = static_cast<long>(t.ages()), C = static_cast<long>(t.causes());
  Eigen::VectorXd l(X * C);
  for (long c = 0; c < C; ++c)
    l.segment(c * X, X).setConstant(
        pattern.lingering_difference(t.kernel, static_cast<std::size_t>(c), year));
  return l;
}

inline Eigen::VectorXd stacked_mu(const ParamSet& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.mu.data(), t.mu.size());
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and covariance of the age-cause block of improvements in panel year
/// t (1-based, t >= 2) given the jump pattern.
inline Moments conditional_moments_year(const ParamSet& theta, const JumpPattern& pattern,
                                        std::size_t year) {
  theta.validate();
  require(year >= 2 && year <= pattern.years(), ErrorCode::DimensionMismatch,
          "year index must lie in 2..T");
  const Eigen::VectorXd u = common_loading(theta), v = cause_loading(theta);
  const Eigen::VectorXd l = lingering_factors(theta, pattern, year);
  const long N = u.size();
  Moments m;
  m.mean = u * theta.drift_K + v * theta.drift_k + l.cwiseProduct(stacked_mu(theta));
  m.cov = theta.sigma_eta * theta.sigma_eta * u * u.transpose() +
          theta.sigma_xi * theta.sigma_xi * v * v.transpose();
  m.cov.diagonal() += (theta.sigma_J * theta.sigma_J) * l.cwiseAbs2() +
                      Eigen::VectorXd::Constant(N, 2.0 * theta.sigma_e * theta.sigma_e);
  return m;
}

/// First-difference operator mapping T stacked blocks of size `block` to
/// the T-1 differences: row block s holds -I at column block s and +I at s+1.
inline Eigen::MatrixXd difference_operator(std::size_t block, std::size_t years) {
  require(years >= 2, ErrorCode::DimensionMismatch, "need at least two years");
  const long n = static_cast<long>(block);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n * static_cast<long>(years - 1), n * static_cast<long>(years));
  for (long s = 0; s + 1 < static_cast<long>(years); ++s)
    for (long i = 0; i < n; ++i) {
      d(s * n + i, s * n + i) = -1.0;
      d(s * n + i, (s + 1) * n + i) = 1.0;
    }
  return d;
}

/// Diagonal of the lingering-difference matrix over all improvement years.
inline Eigen::VectorXd lingering_diagonal(const ParamSet& theta, const JumpPattern& pattern) {
  const long N = static_cast<long>(theta.ages() * theta.causes());
  const std::size_t T = pattern.years();
  Eigen::VectorXd diag(N * static_cast<long>(T - 1));
  for (std::size_t t = 2; t <= T; ++t)
    diag.segment(static_cast<long>(t - 2) * N, N) = lingering_factors(theta, pattern, t);
  return diag;
}

/// Mean and covariance of the full stacked improvement vector (age fastest,
/// then cause, then year), assembled term by term:
/// trend blocks on the diagonal, the jump term L (1 1' (x) sigma_J^2 I) L,
/// and the differenced noise D (sigma_e^2 I) D'.
inline Moments assemble_full_moments(const ParamSet& theta, const JumpPattern& pattern) {
  theta.validate();
  const std::size_t T = pattern.years();
  require(T >= 2, ErrorCode::DimensionMismatch, "need at least two years");
  const Eigen::VectorXd u = common_loading(theta), v = cause_loading(theta);
  const long N = u.size(), n = static_cast<long>(T - 1), dim = N * n;

  const Eigen::MatrixXd trend = theta.sigma_eta * theta.sigma_eta * u * u.transpose() +
                                theta.sigma_xi * theta.sigma_xi * v * v.transpose();
  const Eigen::VectorXd L = lingering_diagonal(theta, pattern);
  const Eigen::VectorXd mu = stacked_mu(theta);

  Moments m;
  m.mean.resize(dim);
  m.cov = Eigen::MatrixXd::Zero(dim, dim);
  for (long s = 0; s < n; ++s) {
    m.mean.segment(s * N, N) = u * theta.drift_K + v * theta.drift_k +
                               L.segment(s * N, N).cwiseProduct(mu);
    m.cov.block(s * N, s * N, N, N) += trend;
  }
  // jump severity is drawn once per cell, so it couples every pair of years
  Eigen::MatrixXd ones_sj = Eigen::MatrixXd::Zero(dim, dim);
  for (long s = 0; s < n; ++s)
    for (long r = 0; r < n; ++r)
      ones_sj.block(s * N, r * N, N, N).diagonal().setConstant(theta.sigma_J * theta.sigma_J);
  m.cov += L.asDiagonal() * ones_sj * L.asDiagonal();
  const Eigen::MatrixXd D = difference_operator(static_cast<std::size_t>(N), T);
  m.cov += theta.sigma_e * theta.sigma_e * D * D.transpose();
  return m;
}

}  // namespace lingermort
