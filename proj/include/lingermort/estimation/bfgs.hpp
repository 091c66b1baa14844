#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"

namespace lingermort {

enum class FiniteDifference { Forward, Central };

struct GradientOptions {
  FiniteDifference scheme = FiniteDifference::Forward;
  double relative_step = 0.01;
  double absolute_floor = 1e-4;
  int threads = 1;
};

/// Numerical gradient with per-coordinate step max(relative_step |x_i|, absolute_floor).
inline Eigen::VectorXd numerical_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double fx,
                                          const GradientOptions& opt) {
  Eigen::VectorXd g(x.size());
  parallel_for(static_cast<std::size_t>(x.size()), opt.threads, [&](std::size_t idx) {
    const long i = static_cast<long>(idx);
    const double h = std::max(opt.relative_step * std::abs(x(i)), opt.absolute_floor);
    Eigen::VectorXd xp = x;
    xp(i) += h;
    if (opt.scheme == FiniteDifference::Forward) {
      g(i) = (f(xp) - fx) / (xp(i) - x(i));
    } else {
      Eigen::VectorXd xm = x;
      xm(i) -= h;
      g(i) = (f(xp) - f(xm)) / (xp(i) - xm(i));
    }
  });
  return g;
}

struct BfgsOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-8;
  /// Backtracking, curvature-skip and an identity reset whenever the
  /// quasi-Newton direction fails. Off gives the bare full-step iteration.
  bool safeguards = true;
  int max_halvings = 30;
  double reset_step = 1.0;  // max-norm of the steepest-descent step after a reset
  double curvature_floor = 1e-12;
  GradientOptions gradient;
};

struct BfgsIteration {
  int iteration = 0;
  double objective = 0.0;
  double relative_change = 0.0;
  double step_scale = 1.0;
  int halvings = 0;
  bool update_skipped = false;
  bool reset = false;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<BfgsIteration> trace;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Quasi-Newton minimization. B approximates the Hessian of f, the step
/// solves B s = -grad f, and B is updated with yy'/y's - Bss'B/s'Bs.
/// Stops when |f_new - f_old| / |f_old| <= relative_tolerance.
inline BfgsResult bfgs_minimize(const Objective& f, const GradientFn& gradient,
                                const Eigen::VectorXd& x0, const BfgsOptions& opt = {}) {
  const long n = x0.size();
  auto grad = [&](const Eigen::VectorXd& x, double fx) {
    return gradient ? gradient(x) : numerical_gradient(f, x, fx, opt.gradient);
  };
  BfgsResult res;
  Eigen::VectorXd x = x0;
  double fx = f(x);
  require(std::isfinite(fx), ErrorCode::NonFiniteObjective, "objective is not finite at the start");
  Eigen::VectorXd g = grad(x, fx);
  require(g.allFinite(), ErrorCode::NonFiniteObjective, "gradient is not finite at the start");
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  res.x = x;
  res.objective = fx;
  res.trace.push_back({0, fx, 0.0, 0.0, 0, false, false});

  for (int it = 1; it <= opt.max_iterations; ++it) {
    BfgsIteration rec;
    rec.iteration = it;
    Eigen::VectorXd s;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() == Eigen::Success)
      s = -llt.solve(g);
    else
      s = -B.fullPivLu().solve(g);

    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::quiet_NaN();
    if (!opt.safeguards) {
      x_new = x + s;
      f_new = f(x_new);
      if (!std::isfinite(f_new)) {
        res.stop_reason = "objective became non-finite";
        res.iterations = it;
        return res;
      }
    } else {
      bool improved = false;
      for (int attempt = 0; attempt < 2 && !improved; ++attempt) {
        double scale = 1.0;
        for (int h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
          x_new = x + scale * s;
          f_new = f(x_new);
          if (std::isfinite(f_new) && f_new < fx) {
            improved = true;
            rec.step_scale = scale;
            rec.halvings = h;
            break;
          }
        }
        if (!improved) {
          if (rec.reset) break;
          // the quasi-Newton direction failed: fall back to a bounded steepest-descent step
          rec.reset = true;
          B.setIdentity();
          const double gmax = g.cwiseAbs().maxCoeff();
          if (!(gmax > 0.0)) break;
          s = -g * (opt.reset_step / gmax);
        }
      }
      if (!improved) {
        res.converged = true;
        res.stop_reason = "no improving step along the search direction";
        res.iterations = it;
        rec.objective = fx;
        res.trace.push_back(rec);
        return res;
      }
      s = x_new - x;
    }

    const Eigen::VectorXd g_new = grad(x_new, f_new);
    const double rel = (f_new == fx) ? 0.0 : std::abs(f_new - fx) / std::abs(fx);
    const Eigen::VectorXd y = g_new - g;
    const double ys = y.dot(s);
    const Eigen::VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    if (opt.safeguards && (ys <= opt.curvature_floor || !(sBs > 0.0) || !g_new.allFinite())) {
      rec.update_skipped = true;
    } else {
      B += y * y.transpose() / ys - Bs * Bs.transpose() / sBs;
    }

    x = x_new;
    fx = f_new;
    if (g_new.allFinite()) g = g_new;
    rec.objective = fx;
    rec.relative_change = rel;
    res.trace.push_back(rec);
    if (fx < res.objective) {
      res.x = x;
      res.objective = fx;
    }
    res.iterations = it;
    if (rel <= opt.relative_tolerance) {
      res.converged = true;
      res.stop_reason = "relative change below tolerance";
      return res;
    }
  }
  res.stop_reason = "maximum iterations reached";
  return res;
}

/// Maximizes `objective` by minimizing its negative; the reported
/// objective values in the result are on the maximization scale.
inline BfgsResult bfgs_maximize(const Objective& objective, const GradientFn& gradient,
                                const Eigen::VectorXd& x0, const BfgsOptions& opt = {}) {
  Objective neg = [&](const Eigen::VectorXd& x) { return -objective(x); };
  GradientFn neg_grad;
  if (gradient) neg_grad = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(-gradient(x)); };
  BfgsResult r = bfgs_minimize(neg, neg_grad, x0, opt);
  r.objective = -r.objective;
  for (auto& it : r.trace) it.objective = -it.objective;
  return r;
}

}  // namespace lingermort
