#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/data/tensor.hpp"

namespace lingermort {

/// Rank-1 three-way decomposition e_{x,t,c} ~ b_x k_t phi_c.
struct Rank1Parafac {
  Eigen::VectorXd b;    // age mode, sum(b) = 1
  Eigen::VectorXd k;    // time mode, carries the scale
  Eigen::VectorXd phi;  // cause mode, unit norm, largest entry positive
  std::vector<double> objective;  // squared error after each sweep
  int sweeps = 0;
  bool stalled = false;  // stopped early on a flat objective with factors still moving
};

/// Alternating least squares started from the leading singular vectors of
/// the age-mode unfolding.
inline Rank1Parafac fit_rank1_parafac(const Tensor3& e, int max_sweeps = 500,
                                      double tolerance = 1e-12) {
  const long X = static_cast<long>(e.ages()), T = static_cast<long>(e.years()),
             C = static_cast<long>(e.causes());
  Rank1Parafac out;
  out.b = Eigen::VectorXd::Zero(X);
  out.k = Eigen::VectorXd::Zero(T);
  out.phi = Eigen::VectorXd::Zero(C);
  double total = 0.0;
  for (double v : e.data()) total += v * v;
  if (total == 0.0) {
    out.b.setConstant(1.0 / static_cast<double>(X));
    out.phi(0) = 1.0;
    out.objective.push_back(0.0);
    return out;
  }

  // unfolding: rows age, columns (t, c)
  Eigen::MatrixXd unfold(X, T * C);
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < C; ++c)
      for (long x = 0; x < X; ++x)
        unfold(x, t * C + c) = e(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfold, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd b = svd.matrixU().col(0);
  Eigen::MatrixXd right(T, C);
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < C; ++c) right(t, c) = svd.matrixV()(t * C + c, 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd2(right, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd k = svd.singularValues()(0) * svd2.singularValues()(0) * svd2.matrixU().col(0);
  Eigen::VectorXd phi = svd2.matrixV().col(0);

  auto objective = [&]() {
    double s = 0.0;
    for (long t = 0; t < T; ++t)
      for (long c = 0; c < C; ++c)
        for (long x = 0; x < X; ++x) {
          const double r = e(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c)) -
                           b(x) * k(t) * phi(c);
          s += r * r;
        }
    return s;
  };

  double prev = objective();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    const Eigen::VectorXd b_old = b, k_old = k, phi_old = phi;
    {
      const double den = k.squaredNorm() * phi.squaredNorm();
      Eigen::VectorXd nb = Eigen::VectorXd::Zero(X);
      for (long t = 0; t < T; ++t)
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < X; ++x)
            nb(x) += e(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c)) * k(t) * phi(c);
      if (den > 0) b = nb / den;
    }
    {
      const double den = b.squaredNorm() * phi.squaredNorm();
      Eigen::VectorXd nk = Eigen::VectorXd::Zero(T);
      for (long t = 0; t < T; ++t)
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < X; ++x)
            nk(t) += e(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c)) * b(x) * phi(c);
      if (den > 0) k = nk / den;
    }
    {
      const double den = b.squaredNorm() * k.squaredNorm();
      Eigen::VectorXd np = Eigen::VectorXd::Zero(C);
      for (long t = 0; t < T; ++t)
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < X; ++x)
            np(c) += e(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c)) * b(x) * k(t);
      if (den > 0) phi = np / den;
    }
    // keep the factor scales balanced between sweeps
    const double nb = b.norm(), np = phi.norm();
    if (nb > 0 && np > 0) {
      k *= nb * np;
      b /= nb;
      phi /= np;
    }
    const double obj = objective();
    out.objective.push_back(obj);
    out.sweeps = sweep;
    const double decrease = prev - obj;
    prev = obj;
    const double move = (b - b_old).norm() + (phi - phi_old).norm();
    if (decrease <= tolerance * (1.0 + total)) {
      out.stalled = sweep < 10 && move > 1e-6;
      break;
    }
  }

  // gauge: sum(b) = 1, |phi| = 1 with its largest entry positive
  const double sb = b.sum();
  if (std::abs(sb) > 1e-12) {
    k *= sb;
    b /= sb;
  }
  long imax = 0;
  phi.cwiseAbs().maxCoeff(&imax);
  const double sp = phi.norm() * (phi(imax) < 0 ? -1.0 : 1.0);
  if (sp != 0.0) {
    k *= sp;
    phi /= sp;
  }
  out.b = b;
  out.k = k;
  out.phi = phi;
  return out;
}

}  // namespace lingermort
