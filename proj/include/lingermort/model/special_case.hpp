#pragma once

#include <cmath>
#include <numbers>
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

/// Likelihood for the restricted model with no severity randomness
/// (sigma_J = 0) and a jump that lasts one year only. Each pattern's density
/// is built from adjacent-year pairs,
///   prod_{t=2}^{T-1} f(z_t, z_{t+1}) / prod_{t=3}^{T-1} f(z_t),
/// using the block marginal (trend + 2 sigma_e^2 I) and the pair covariance
/// whose off-diagonal block is -sigma_e^2 I.
///
/// Gradient coordinates (natural scale): B (X), D, sigma_eta, phi (C), b (X),
/// d, sigma_xi, mu (X*C, age fastest), sigma_e, p.
class SpecialCaseLikelihood {
 public:
  explicit SpecialCaseLikelihood(const ImprovementTensor& z)
      : X_(z.ages()), C_(z.causes()), T_(z.steps() + 1),
        z_(Eigen::Map<const Eigen::MatrixXd>(z.z().data().data(),
                                             static_cast<long>(z.ages() * z.causes()),
                                             static_cast<long>(z.steps()))) {}

  std::size_t gradient_size() const { return 2 * X_ + X_ * C_ + C_ + 6; }

  static std::vector<std::string> notes_for(const ParamSet& theta) {
    std::vector<std::string> notes;
    if (theta.sigma_J != 0.0) notes.push_back("sigma_J treated as 0");
    if (theta.kernel.gamma.size() > 0 && !theta.kernel.gamma.isZero(0.0))
      notes.push_back("lingering kernel replaced by the jump-year indicator");
    return notes;
  }

  double loglik(const ParamSet& theta, std::vector<std::string>* notes = nullptr) const {
    return evaluate(theta, nullptr, notes);
  }

  Eigen::VectorXd gradient(const ParamSet& theta) const {
    Eigen::VectorXd g;
    evaluate(theta, &g, nullptr);
    return g;
  }

  /// Natural-coordinate vector in gradient order.
  Eigen::VectorXd pack(const ParamSet& t) const {
    Eigen::VectorXd v(static_cast<long>(gradient_size()));
    long k = 0;
    for (long x = 0; x < t.B.size(); ++x) v(k++) = t.B(x);
    v(k++) = t.drift_K;
    v(k++) = t.sigma_eta;
    for (long c = 0; c < t.phi.size(); ++c) v(k++) = t.phi(c);
    for (long x = 0; x < t.b.size(); ++x) v(k++) = t.b(x);
    v(k++) = t.drift_k;
    v(k++) = t.sigma_xi;
    for (long i = 0; i < t.mu.size(); ++i) v(k++) = t.mu.data()[i];
    v(k++) = t.sigma_e;
    v(k++) = t.p;
    return v;
  }

  ParamSet unpack(const Eigen::VectorXd& v, const ParamSet& fixed) const {
    require(static_cast<std::size_t>(v.size()) == gradient_size(), ErrorCode::DimensionMismatch,
            "special-case coordinate vector size");
    ParamSet t = fixed;
    long k = 0;
    const long X = static_cast<long>(X_), C = static_cast<long>(C_);
    for (long x = 0; x < X; ++x) t.B(x) = v(k++);
    t.drift_K = v(k++);
    t.sigma_eta = v(k++);
    for (long c = 0; c < C; ++c) t.phi(c) = v(k++);
    for (long x = 0; x < X; ++x) t.b(x) = v(k++);
    t.drift_k = v(k++);
    t.sigma_xi = v(k++);
    for (long i = 0; i < X * C; ++i) t.mu.data()[i] = v(k++);
    t.sigma_e = v(k++);
    t.p = v(k++);
    return t;
  }

 private:
  struct Gaussian {
    Eigen::MatrixXd inv;
    double logdet = 0.0;
    long dim = 0;
  };

  static Gaussian factor(const Eigen::MatrixXd& S, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    require(llt.info() == Eigen::Success, ErrorCode::SingularCovariance,
            std::string(what) + " covariance not positive definite");
    Gaussian g;
    const Eigen::MatrixXd L = llt.matrixL();
    g.logdet = 2.0 * L.diagonal().array().log().sum();
    require(std::isfinite(g.logdet), ErrorCode::SingularCovariance,
            std::string(what) + " covariance degenerate");
    g.inv = llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    g.dim = S.rows();
    return g;
  }

  static double log_normal(const Gaussian& g, const Eigen::VectorXd& a, Eigen::VectorXd& alpha) {
    alpha = g.inv * a;
    return -0.5 * (static_cast<double>(g.dim) * std::log(2.0 * std::numbers::pi) + g.logdet +
                   a.dot(alpha));
  }

  // 1{t = t_J} - 1{t - 1 = t_J}
  static double indicator_difference(const JumpPattern& pattern, std::size_t t) {
    if (!pattern.has_jump()) return 0.0;
    const std::size_t tj = *pattern.jump_year();
    return (t == tj ? 1.0 : 0.0) - (t - 1 == tj ? 1.0 : 0.0);
  }

  double evaluate(const ParamSet& theta, Eigen::VectorXd* grad,
                  std::vector<std::string>* notes) const {
    theta.validate(X_, C_);
    require(T_ >= 2, ErrorCode::DimensionMismatch, "need at least two years");
    if (notes) *notes = notes_for(theta);
    const long X = static_cast<long>(X_), C = static_cast<long>(C_), N = X * C;
    const Eigen::VectorXd u = common_loading(theta), v = cause_loading(theta);
    const Eigen::VectorXd mu = stacked_mu(theta);
    const Eigen::VectorXd base = u * theta.drift_K + v * theta.drift_k;
    const double se2 = theta.sigma_e * theta.sigma_e;

    Eigen::MatrixXd Sm = theta.sigma_eta * theta.sigma_eta * u * u.transpose() +
                         theta.sigma_xi * theta.sigma_xi * v * v.transpose();
    Sm.diagonal().array() += 2.0 * se2;
    Eigen::MatrixXd Sj = Eigen::MatrixXd::Zero(2 * N, 2 * N);
    Sj.topLeftCorner(N, N) = Sm;
    Sj.bottomRightCorner(N, N) = Sm;
    Sj.topRightCorner(N, N).diagonal().setConstant(-se2);
    Sj.bottomLeftCorner(N, N).diagonal().setConstant(-se2);

    const Gaussian marg = factor(Sm, "marginal");
    const bool pairs = T_ >= 3;
    const Gaussian joint = pairs ? factor(Sj, "pairwise") : Gaussian{};
    // terms: joint pairs (t, t+1) for t = 2..T-1 with sign +1, marginals
    // t = 3..T-1 with sign -1; for T = 2 the single marginal of z_2.
    const auto patterns = admissible_patterns(T_);
    const std::size_t npat = patterns.size();
    const long P = static_cast<long>(gradient_size());

    std::vector<double> joint_log(npat);
    std::vector<Eigen::VectorXd> pat_grad(npat, Eigen::VectorXd::Zero(P));

    // offsets in gradient order
    const long oB = 0, oD = X, oSe = X + 1, oPhi = X + 2, ob = X + 2 + C, od = 2 * X + 2 + C,
               oSx = 2 * X + 3 + C, oMu = 2 * X + 4 + C, oE = oMu + N, oP = oE + 1;

    auto z_col = [&](std::size_t t) { return z_.col(static_cast<long>(t - 2)); };

    for (std::size_t ip = 0; ip < npat; ++ip) {
      const JumpPattern& pattern = patterns[ip];
      auto mean_at = [&](std::size_t t) -> Eigen::VectorXd {
        return base + indicator_difference(pattern, t) * mu;
      };
      double logf = 0.0;
      Eigen::VectorXd& g = pat_grad[ip];

      // mean and quadratic-form derivative contributions of one Gaussian
      // term whose blocks sit at years ts (1 or 2 of them)
      auto accumulate = [&](const Gaussian& G, const std::vector<std::size_t>& ts, double sign) {
        const long nb = static_cast<long>(ts.size());
        Eigen::VectorXd a(N * nb);
        for (long k = 0; k < nb; ++k)
          a.segment(k * N, N) = z_col(ts[static_cast<std::size_t>(k)]) - mean_at(ts[static_cast<std::size_t>(k)]);
        Eigen::VectorXd alpha;
        logf += sign * log_normal(G, a, alpha);
        if (!grad) return;
        for (long k = 0; k < nb; ++k) {
          const auto al = alpha.segment(k * N, N);
          const double au = al.dot(u), av = al.dot(v);
          const double l = indicator_difference(pattern, ts[static_cast<std::size_t>(k)]);
          for (long x = 0; x < X; ++x) {
            double ae = 0.0, aphi = 0.0;
            for (long c = 0; c < C; ++c) {
              ae += al(x + X * c);
              aphi += theta.phi(c) * al(x + X * c);
            }
            // B_x: mean D (1_C (x) e_x), quad sigma_eta^2 (a.e)(a.u)
            g(oB + x) += sign * (theta.drift_K * ae + theta.sigma_eta * theta.sigma_eta * ae * au);
            // b_x: mean d (phi (x) e_x), quad sigma_xi^2 (a.(phi (x) e_x))(a.v)
            g(ob + x) += sign * (theta.drift_k * aphi + theta.sigma_xi * theta.sigma_xi * aphi * av);
          }
          for (long c = 0; c < C; ++c) {
            const double ab = al.segment(c * X, X).dot(theta.b);
            g(oPhi + c) += sign * (theta.drift_k * ab + theta.sigma_xi * theta.sigma_xi * ab * av);
          }
          g(oD) += sign * au;
          g(od) += sign * av;
          g(oSe) += sign * theta.sigma_eta * au * au;
          g(oSx) += sign * theta.sigma_xi * av * av;
          if (l != 0.0) g.segment(oMu, N) += sign * l * al;
          g(oE) += sign * 2.0 * theta.sigma_e * al.squaredNorm();
        }
        if (nb == 2)
          g(oE) -= sign * 2.0 * theta.sigma_e * alpha.head(N).dot(alpha.tail(N));
      };

      if (!pairs) {
        accumulate(marg, {2}, 1.0);
      } else {
        for (std::size_t t = 2; t + 1 <= T_; ++t) accumulate(joint, {t, t + 1}, 1.0);
        for (std::size_t t = 3; t + 1 <= T_; ++t) accumulate(marg, {t}, -1.0);
      }
      joint_log[ip] = pattern.log_prior(theta.p) + logf;
    }

    const double ll = log_sum_exp_ordered(joint_log);
    if (grad) {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(P);
      for (std::size_t ip = 0; ip < npat; ++ip) {
        const double w = std::isfinite(joint_log[ip]) ? std::exp(joint_log[ip] - ll) : 0.0;
        if (w == 0.0) continue;
        out += w * pat_grad[ip];
        // derivative of the log prior weight
        const auto& pattern = patterns[ip];
        double dprior;
        if (pattern.has_jump())
          dprior = -static_cast<double>(*pattern.jump_year() - 1) / (1.0 - theta.p) + 1.0 / theta.p;
        else
          dprior = -static_cast<double>(T_) / (1.0 - theta.p);
        out(oP) += w * dprior;
      }
      // log-determinant terms do not depend on the pattern
      auto trace_terms = [&](const Gaussian& G, long nb, double sign) {
        for (long k = 0; k < nb; ++k) {
          const auto Sinv = G.inv.block(k * N, k * N, N, N);
          const Eigen::VectorXd Su = Sinv * u, Sv = Sinv * v;
          for (long x = 0; x < X; ++x) {
            double eu = 0.0, phiv = 0.0;
            for (long c = 0; c < C; ++c) {
              eu += Su(x + X * c);
              phiv += theta.phi(c) * Sv(x + X * c);
            }
            out(oB + x) -= sign * theta.sigma_eta * theta.sigma_eta * eu;
            out(ob + x) -= sign * theta.sigma_xi * theta.sigma_xi * phiv;
          }
          for (long c = 0; c < C; ++c)
            out(oPhi + c) -= sign * theta.sigma_xi * theta.sigma_xi * Sv.segment(c * X, X).dot(theta.b);
          out(oSe) -= sign * theta.sigma_eta * u.dot(Su);
          out(oSx) -= sign * theta.sigma_xi * v.dot(Sv);
          out(oE) -= sign * 2.0 * theta.sigma_e * Sinv.trace();
        }
        if (nb == 2) out(oE) += sign * 2.0 * theta.sigma_e * G.inv.block(0, N, N, N).trace();
      };
      if (!pairs) {
        trace_terms(marg, 1, 1.0);
      } else {
        trace_terms(joint, 2, static_cast<double>(T_ - 2));
        if (T_ > 3) trace_terms(marg, 1, -static_cast<double>(T_ - 3));
      }
      *grad = out;
    }
    return ll;
  }

  std::size_t X_, C_, T_;
  Eigen::MatrixXd z_;
};

inline double special_case_loglik(const ParamSet& theta, const ImprovementTensor& z,
                                  std::vector<std::string>* notes = nullptr) {
  return SpecialCaseLikelihood(z).loglik(theta, notes);
}

inline Eigen::VectorXd special_case_gradient(const ParamSet& theta, const ImprovementTensor& z) {
  return SpecialCaseLikelihood(z).gradient(theta);
}

}  // namespace lingermort
