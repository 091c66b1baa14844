#pragma once

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"

namespace lingermort {

/// ln m_{x,t} = a_x + b_x k_t, gauge sum(b) = 1, sum(k) = 0.
struct LeeCarterFit {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd k;
  double drift = 0.0;
  double sigma = 0.0;  // sd of the first differences of k
  double deviance = 0.0;
  int iterations = 0;
  bool converged = false;

  Eigen::MatrixXd log_rates() const {
    return a.replicate(1, k.size()) + b * k.transpose();
  }
};

/// Sample mean and (n-1) standard deviation of the first differences.
inline std::pair<double, double> difference_moments(const Eigen::VectorXd& path) {
  const long n = path.size() - 1;
  if (n < 1) return {0.0, 0.0};
  const Eigen::VectorXd d = path.tail(n) - path.head(n);
  const double mean = d.mean();
  if (n < 2) return {mean, 0.0};
  return {mean, std::sqrt((d.array() - mean).square().sum() / static_cast<double>(n - 1))};
}

/// Poisson maximum likelihood for the Lee-Carter surface by alternating
/// one-dimensional Newton updates of a, k and b.
inline LeeCarterFit fit_lee_carter_poisson(const Eigen::MatrixXd& deaths,
                                           const Eigen::MatrixXd& exposures,
                                           int max_sweeps = 20000, double tolerance = 1e-8) {
  const long X = deaths.rows(), T = deaths.cols();
  require(X > 0 && T > 0 && exposures.rows() == X && exposures.cols() == T,
          ErrorCode::DimensionMismatch, "deaths and exposures must have equal shape");
  require((exposures.array() > 0.0).all(), ErrorCode::NonPositiveExposure, "Lee-Carter exposures");
  require((deaths.array() >= 0.0).all(), ErrorCode::NegativeDeaths, "Lee-Carter deaths");
  for (long x = 0; x < X; ++x)
    require(deaths.row(x).sum() > 0.0, ErrorCode::AllZeroAgeRow,
            "age row " + std::to_string(x) + " has no deaths");

  LeeCarterFit fit;
  // start from the rank-1 SVD of centred log rates (zeros nudged)
  Eigen::MatrixXd lm(X, T);
  for (long x = 0; x < X; ++x)
    for (long t = 0; t < T; ++t)
      lm(x, t) = std::log((deaths(x, t) > 0 ? deaths(x, t) : 0.5) / exposures(x, t));
  fit.a = lm.rowwise().mean();
  fit.b = Eigen::VectorXd::Constant(X, 1.0 / static_cast<double>(X));
  fit.k = Eigen::VectorXd::Zero(T);
  if (T > 1) {
    const Eigen::MatrixXd centred = lm.colwise() - fit.a;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd b = svd.matrixU().col(0);
    const double sb = b.sum();
    if (std::abs(sb) > 1e-8) {
      fit.b = b / sb;
      fit.k = svd.singularValues()(0) * svd.matrixV().col(0) * sb;
    }
  }

  auto gauge = [&]() {
    const double sb = fit.b.sum();
    if (std::abs(sb) > 0.0) {
      fit.k *= sb;
      fit.b /= sb;
    }
    const double km = fit.k.mean();
    fit.a += fit.b * km;
    fit.k.array() -= km;
  };
  auto fitted = [&]() {
    return Eigen::MatrixXd((fit.log_rates().array().exp() * exposures.array()).matrix());
  };
  auto deviance = [&](const Eigen::MatrixXd& dhat) {
    double dev = 0.0;
    for (long x = 0; x < X; ++x)
      for (long t = 0; t < T; ++t) {
        const double d = deaths(x, t), e = dhat(x, t);
        dev += 2.0 * ((d > 0 ? d * std::log(d / e) : 0.0) - (d - e));
      }
    return dev;
  };

  gauge();
  double dev = deviance(fitted());
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    Eigen::MatrixXd dhat = fitted();
    for (long x = 0; x < X; ++x)
      fit.a(x) += (deaths.row(x) - dhat.row(x)).sum() / dhat.row(x).sum();
    dhat = fitted();
    if (T > 1) {
      for (long t = 0; t < T; ++t) {
        const double den = (dhat.col(t).array() * fit.b.array().square()).sum();
        if (den > 0) fit.k(t) += ((deaths.col(t) - dhat.col(t)).array() * fit.b.array()).sum() / den;
      }
      gauge();
      dhat = fitted();
      for (long x = 0; x < X; ++x) {
        const double den = (dhat.row(x).array() * fit.k.transpose().array().square()).sum();
        if (den > 0)
          fit.b(x) += ((deaths.row(x) - dhat.row(x)).array() * fit.k.transpose().array()).sum() / den;
      }
      gauge();
    }
    const double next = deviance(fitted());
    fit.iterations = sweep;
    const double change = std::abs(dev - next);
    dev = next;
    if (change < tolerance || change < 1e-13 * std::abs(dev)) {
      fit.converged = true;
      break;
    }
  }
  if (X == 1) {
    fit.b.setOnes();
  }
  fit.deviance = dev;
  std::tie(fit.drift, fit.sigma) = difference_moments(fit.k);
  return fit;
}

}  // namespace lingermort
