#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"

namespace lingermort {

/// Gaussian law of n consecutive first-differenced blocks of N cells,
///   Z_s = m + V h_s + sum_i g_i l_{p_i}(s) J_i + e_{s+1} - e_s,
/// with h_s ~ N(0, I_r) iid over s, J_i ~ N(jump_mean_i, jump_var) drawn once,
/// and e ~ N(0, noise_var I). Optionally `inflation` is added to the diagonal.
struct GaussianStructure {
  Eigen::MatrixXd trend;             // N x r scaled loadings V
  Eigen::VectorXd step_mean;         // m, identical in every step
  double noise_var = 0.0;
  double inflation = 0.0;
  bool unit_jump_loadings = true;    // g_i = e_i for i < N
  Eigen::MatrixXd jump_loadings;     // N x m when not unit
  std::vector<std::size_t> jump_profile;  // profile index of each column
  Eigen::VectorXd jump_mean;         // per column
  double jump_var = 0.0;

  std::size_t cells() const { return static_cast<std::size_t>(step_mean.size()); }
  std::size_t jump_columns() const { return jump_profile.size(); }
};

inline double log_sum_exp_ordered(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : terms) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double v : terms) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

/// Log densities of the observation matrix (N x n, column s = step s) under
/// a GaussianStructure for several jump-profile matrices (n x P each; an
/// empty matrix or zero profiles mean no jump contribution).
///
/// The noise term has covariance noise_var * tridiag(-1, 2, -1) in time,
/// diagonalized by the type-I discrete sine basis. In that basis every step
/// block is s_k I + V V', inverted in closed form through an r x r system,
/// and the jump columns are added with the Woodbury identity.
class StructuredEvaluator {
 public:
  explicit StructuredEvaluator(Eigen::MatrixXd observations)
      : obs_(std::move(observations)) {
    const long n = obs_.cols();
    require(n >= 1, ErrorCode::DimensionMismatch, "need at least one difference step");
    const double T = static_cast<double>(n + 1);
    basis_.resize(n, n);
    for (long s = 0; s < n; ++s)
      for (long k = 0; k < n; ++k)
        basis_(s, k) = std::sqrt(2.0 / T) * std::sin(std::numbers::pi * (s + 1) * (k + 1) / T);
    eigen_.resize(n);
    for (long k = 0; k < n; ++k) eigen_(k) = 2.0 - 2.0 * std::cos(std::numbers::pi * (k + 1) / T);
    rotated_obs_ = obs_ * basis_;
    basis_sums_ = basis_.colwise().sum().transpose();
  }

  long cells() const { return obs_.rows(); }
  long steps() const { return obs_.cols(); }
  const Eigen::MatrixXd& observations() const { return obs_; }

  std::vector<double> log_densities(const GaussianStructure& g,
                                    const std::vector<Eigen::MatrixXd>& profiles,
                                    const std::vector<std::string>& labels = {},
                                    int threads = 1, bool force_dense = false) const {
    check(g);
    std::vector<double> out(profiles.size());
    auto label = [&](std::size_t i) {
      return i < labels.size() ? labels[i] : "component " + std::to_string(i);
    };
    const bool dense = force_dense || !std::isfinite(g.noise_var) ||
                       g.noise_var * eigen_.minCoeff() + g.inflation <= 0.0;
    if (dense) {
      parallel_for(profiles.size(), threads, [&](std::size_t i) {
        out[i] = dense_log_density(g, profiles[i], label(i));
      });
      return out;
    }
    const Prepared prep = prepare(g);
    parallel_for(profiles.size(), threads, [&](std::size_t i) {
      out[i] = structured_log_density(g, prep, profiles[i], label(i));
    });
    return out;
  }

  /// Reference path: assembles the full covariance and factorizes it.
  double dense_log_density(const GaussianStructure& g, const Eigen::MatrixXd& profile,
                           const std::string& label = "component") const {
    const long N = cells(), n = steps(), dim = N * n;
    Eigen::VectorXd resid(dim);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    const Eigen::MatrixXd trend = g.trend * g.trend.transpose();
    for (long s = 0; s < n; ++s) {
      resid.segment(s * N, N) = obs_.col(s) - g.step_mean;
      cov.block(s * N, s * N, N, N) += trend;
      cov.block(s * N, s * N, N, N).diagonal().array() += 2.0 * g.noise_var + g.inflation;
      if (s + 1 < n) {
        cov.block(s * N, (s + 1) * N, N, N).diagonal().array() -= g.noise_var;
        cov.block((s + 1) * N, s * N, N, N).diagonal().array() -= g.noise_var;
      }
    }
    if (profile.size() > 0) {
      const long m = static_cast<long>(g.jump_columns());
      Eigen::MatrixXd U = Eigen::MatrixXd::Zero(dim, m);
      for (long i = 0; i < m; ++i) {
        const long p = static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)]);
        for (long s = 0; s < n; ++s) {
          const double w = profile(s, p);
          if (g.unit_jump_loadings)
            U(s * N + i, i) = w;
          else
            U.col(i).segment(s * N, N) = w * g.jump_loadings.col(i);
        }
      }
      resid -= U * g.jump_mean;
      cov += g.jump_var * U * U.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance,
            "covariance not positive definite for " + label);
    const Eigen::MatrixXd Lm = llt.matrixL();
    const double logdet = 2.0 * Lm.diagonal().array().log().sum();
    require(std::isfinite(logdet), ErrorCode::SingularCovariance,
            "degenerate covariance for " + label);
    const Eigen::VectorXd w = llt.matrixL().solve(resid);
    return -0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + logdet +
                   w.squaredNorm());
  }

 private:
  struct Prepared {
    Eigen::VectorXd s;                  // n noise eigenvalues (+ inflation)
    std::vector<Eigen::MatrixXd> P;     // (s_k I + V'V)^-1
    double logdet0 = 0.0;
    Eigen::MatrixXd rotated_resid;      // N x n
    Eigen::MatrixXd gram;               // g_i . g_j (non-unit loadings)
    Eigen::MatrixXd trend_on_jump;      // V' g_i, r x m
  };

  void check(const GaussianStructure& g) const {
    const long N = cells();
    require(g.step_mean.size() == N && g.trend.rows() == N, ErrorCode::DimensionMismatch,
            "structure does not match the observations");
    require(g.jump_mean.size() == static_cast<long>(g.jump_columns()),
            ErrorCode::DimensionMismatch, "one jump mean per jump column");
    if (g.unit_jump_loadings)
      require(static_cast<long>(g.jump_columns()) <= N, ErrorCode::DimensionMismatch,
              "too many unit jump columns");
    else
      require(g.jump_loadings.rows() == N &&
                  g.jump_loadings.cols() == static_cast<long>(g.jump_columns()),
              ErrorCode::DimensionMismatch, "jump loadings shape");
  }

  Prepared prepare(const GaussianStructure& g) const {
    const long N = cells(), n = steps(), r = g.trend.cols();
    Prepared prep;
    prep.s = g.noise_var * eigen_.array() + g.inflation;
    const Eigen::MatrixXd VtV = g.trend.transpose() * g.trend;
    prep.P.resize(static_cast<std::size_t>(n));
    // below this ratio the noise floor is lost in rounding against the trend
    const double floor = 1e-14 * VtV.trace();
    for (long k = 0; k < n; ++k) {
      const double sk = prep.s(k);
      require(sk > 0.0 && sk > floor, ErrorCode::SingularCovariance,
              "noise variance negligible against the trend");
      Eigen::MatrixXd A = VtV;
      A.diagonal().array() += sk;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance,
              "trend block not positive definite");
      const Eigen::MatrixXd Lr = llt.matrixL();
      // det(s I_N + V V') = s^(N - r) det(s I_r + V'V)
      prep.logdet0 += static_cast<double>(N - r) * std::log(sk) +
                      2.0 * Lr.diagonal().array().log().sum();
      prep.P[static_cast<std::size_t>(k)] = llt.solve(Eigen::MatrixXd::Identity(r, r));
    }
    prep.rotated_resid = rotated_obs_ - g.step_mean * basis_sums_.transpose();
    if (!g.unit_jump_loadings) {
      prep.gram = g.jump_loadings.transpose() * g.jump_loadings;
      prep.trend_on_jump = g.trend.transpose() * g.jump_loadings;
    } else {
      const long m = static_cast<long>(g.jump_columns());
      prep.trend_on_jump = g.trend.topRows(m).transpose();
    }
    return prep;
  }

  double structured_log_density(const GaussianStructure& g, const Prepared& prep,
                                const Eigen::MatrixXd& profile, const std::string& label) const {
    const long N = cells(), n = steps(), r = g.trend.cols();
    const long m = static_cast<long>(g.jump_columns());
    const bool has_jump = profile.size() > 0 && m > 0 && !profile.isZero(0.0);

    Eigen::MatrixXd W;  // rotated profiles, n x P
    Eigen::MatrixXd R = prep.rotated_resid;
    if (has_jump) {
      W = basis_.transpose() * profile;
      for (long i = 0; i < m; ++i) {
        const long p = static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)]);
        if (g.unit_jump_loadings)
          R.row(i) -= g.jump_mean(i) * W.col(p).transpose();
        else
          R -= g.jump_mean(i) * g.jump_loadings.col(i) * W.col(p).transpose();
      }
    }

    // Y_k = A_k^-1 r_k. Each r_k' A_k^-1 r_k is taken as the minimum over the
    // trend factors, |r_k - V h|^2 / s_k + |h|^2, a sum of non-negative terms.
    Eigen::MatrixXd Y(N, n);
    auto quadratic = [&](const Eigen::MatrixXd& resid, Eigen::MatrixXd* solved) {
      double q = 0.0;
      for (long k = 0; k < n; ++k) {
        const auto rk = resid.col(k);
        const Eigen::VectorXd h = prep.P[static_cast<std::size_t>(k)] * (g.trend.transpose() * rk);
        const Eigen::VectorXd e = rk - g.trend * h;
        q += e.squaredNorm() / prep.s(k) + h.squaredNorm();
        if (solved) solved->col(k) = e / prep.s(k);
      }
      return q;
    };
    double quad = quadratic(R, &Y);
    double logdet = prep.logdet0;

    if (has_jump && g.jump_var > 0.0) {
      const long P = profile.cols();
      Eigen::MatrixXd S0 = Eigen::MatrixXd::Zero(P, P);
      std::vector<Eigen::MatrixXd> S1(static_cast<std::size_t>(P * P),
                                      Eigen::MatrixXd::Zero(r, r));
      for (long k = 0; k < n; ++k) {
        const double inv = 1.0 / prep.s(k);
        for (long a = 0; a < P; ++a)
          for (long b = a; b < P; ++b) {
            const double c = W(k, a) * W(k, b) * inv;
            if (c == 0.0) continue;
            S0(a, b) += c;
            S1[static_cast<std::size_t>(a * P + b)] += c * prep.P[static_cast<std::size_t>(k)];
          }
      }
      for (long a = 0; a < P; ++a)
        for (long b = 0; b < a; ++b) {
          S0(a, b) = S0(b, a);
          S1[static_cast<std::size_t>(a * P + b)] = S1[static_cast<std::size_t>(b * P + a)];
        }

      Eigen::MatrixXd G(m, m);
      const Eigen::MatrixXd& TJ = prep.trend_on_jump;
      for (long i = 0; i < m; ++i) {
        const long pi = static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)]);
        for (long j = 0; j <= i; ++j) {
          const long pj = static_cast<long>(g.jump_profile[static_cast<std::size_t>(j)]);
          const double gram = g.unit_jump_loadings ? (i == j ? 1.0 : 0.0) : prep.gram(i, j);
          const double val = gram * S0(pi, pj) -
                             TJ.col(i).dot(S1[static_cast<std::size_t>(pi * P + pj)] * TJ.col(j));
          G(i, j) = val;
          G(j, i) = val;
        }
      }
      Eigen::VectorXd h(m);
      if (g.unit_jump_loadings) {
        for (long i = 0; i < m; ++i)
          h(i) = Y.row(i).dot(W.col(static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)])));
      } else {
        const Eigen::MatrixXd GY = g.jump_loadings.transpose() * Y;
        for (long i = 0; i < m; ++i)
          h(i) = GY.row(i).dot(W.col(static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)])));
      }
      Eigen::MatrixXd M = g.jump_var * G;
      M.diagonal().array() += 1.0;
      Eigen::LLT<Eigen::MatrixXd> llt(M);
      require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance,
              "jump update not positive definite for " + label);
      const Eigen::MatrixXd Lm = llt.matrixL();
      logdet += 2.0 * Lm.diagonal().array().log().sum();
      // Same device for the jump: with u the posterior mean of the severity
      // deviations, quad = (r - U u)' A^-1 (r - U u) + |u|^2 / jump_var.
      const Eigen::VectorXd u = g.jump_var * llt.solve(h);
      Eigen::MatrixXd Ru = R;
      for (long i = 0; i < m; ++i) {
        const long p = static_cast<long>(g.jump_profile[static_cast<std::size_t>(i)]);
        if (g.unit_jump_loadings)
          Ru.row(i) -= u(i) * W.col(p).transpose();
        else
          Ru -= u(i) * g.jump_loadings.col(i) * W.col(p).transpose();
      }
      quad = quadratic(Ru, nullptr) + u.squaredNorm() / g.jump_var;
    }
    require(std::isfinite(logdet) && std::isfinite(quad), ErrorCode::SingularCovariance,
            "degenerate covariance for " + label);
    return -0.5 * (static_cast<double>(N * n) * std::log(2.0 * std::numbers::pi) + logdet + quad);
  }

  Eigen::MatrixXd obs_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd eigen_;
  Eigen::MatrixXd rotated_obs_;
  Eigen::VectorXd basis_sums_;
};

}  // namespace lingermort
