#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lingermort/core/errors.hpp"

namespace lingermort {

/// Natural cubic spline through strictly increasing knots. Outside the knot
/// range it continues linearly with the end slopes (zero second derivative).
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::span<const double> x, std::span<const double> y)
      : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
    const std::size_t n = x_.size();
    require(n >= 1 && y_.size() == n, ErrorCode::DimensionMismatch,
            "spline needs matching non-empty knots");
    for (std::size_t i = 1; i < n; ++i)
      require(x_[i] > x_[i - 1], ErrorCode::InvalidArgument,
              "spline knots must be strictly increasing");
    if (n < 3) return;

    // Thomas algorithm for the second derivatives m_1..m_{n-2}.
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double lower = x_[i + 1] - x_[i];  // h_{i} for row i
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i)
      m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    if (t <= x_.front()) return y_.front() + slope(0, true) * (t - x_.front());
    if (t >= x_.back()) return y_.back() + slope(n - 2, false) * (t - x_.back());
    std::size_t i = 0;
    while (t > x_[i + 1]) ++i;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  // derivative at the left (at_left) or right end of interval i
  double slope(std::size_t i, bool at_left) const {
    const double h = x_[i + 1] - x_[i];
    const double secant = (y_[i + 1] - y_[i]) / h;
    if (at_left) return secant - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
    return secant + h * (m_[i] + 2.0 * m_[i + 1]) / 6.0;
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace lingermort
