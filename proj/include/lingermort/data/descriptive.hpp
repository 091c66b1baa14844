#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/spline.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/data/tensor.hpp"

namespace lingermort {

/// Year-on-year log improvements. Slice t (0-based) holds ln m_{t+1} - ln m_t.
/// The stacked vector uses Tensor3 storage order: x + X*(c + C*t).
class ImprovementTensor {
 public:
  ImprovementTensor() = default;
  ImprovementTensor(Tensor3 z, std::vector<int> years) : z_(std::move(z)), years_(std::move(years)) {
    require(years_.size() == z_.years(), ErrorCode::DimensionMismatch,
            "improvement years do not match tensor");
  }

  const Tensor3& z() const { return z_; }
  double operator()(std::size_t x, std::size_t t, std::size_t c) const { return z_(x, t, c); }
  /// Calendar year of each slice (the later year of each difference).
  const std::vector<int>& years() const { return years_; }

  std::size_t ages() const { return z_.ages(); }
  std::size_t steps() const { return z_.years(); }
  std::size_t causes() const { return z_.causes(); }

  std::size_t flat_index(std::size_t x, std::size_t t, std::size_t c) const {
    return z_.flat_index(x, t, c);
  }
  void unflatten(std::size_t k, std::size_t& x, std::size_t& t, std::size_t& c) const {
    x = k % z_.ages();
    c = (k / z_.ages()) % z_.causes();
    t = k / (z_.ages() * z_.causes());
  }
  Eigen::Map<const Eigen::VectorXd> stacked() const {
    return {z_.data().data(), static_cast<long>(z_.size())};
  }

 private:
  Tensor3 z_;
  std::vector<int> years_;
};

inline void require_positive_rates(const MortalityPanel& panel) {
  const auto& m = panel.rates();
  for (std::size_t t = 0; t < m.years(); ++t)
    for (std::size_t c = 0; c < m.causes(); ++c)
      for (std::size_t x = 0; x < m.ages(); ++x)
        require(m(x, t, c) > 0.0, ErrorCode::ZeroRate,
                "m = 0 at age " + panel.ages().bands()[x].label + " (x=" + std::to_string(x) +
                    "), year " + std::to_string(panel.years()[t]) + " (t=" + std::to_string(t) +
                    "), cause " + panel.causes().labels()[c] + " (c=" + std::to_string(c) + ")");
}

inline Tensor3 log_rates(const MortalityPanel& panel) {
  require_positive_rates(panel);
  Tensor3 out = panel.rates();
  for (auto& v : out.data()) v = std::log(v);
  return out;
}

inline ImprovementTensor improvement_tensor(const MortalityPanel& panel) {
  const Tensor3 lm = log_rates(panel);
  const std::size_t X = lm.ages(), T = lm.years(), C = lm.causes();
  require(T >= 2, ErrorCode::WindowTooShort, "improvements need at least two years");
  Tensor3 z(X, T - 1, C);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x) z(x, t - 1, c) = lm(x, t, c) - lm(x, t - 1, c);
  return ImprovementTensor(std::move(z),
                           std::vector<int>(panel.years().begin() + 1, panel.years().end()));
}

struct ExcessLogMortality {
  std::vector<int> years;    // years after the baseline
  Tensor3 em;                // age x years x cause
  Eigen::MatrixXd standardized;  // years x causes, baseline-exposure weighted mean over ages
};

inline ExcessLogMortality excess_log_mortality(const MortalityPanel& panel, int baseline_year) {
  require(panel.has_year(baseline_year), ErrorCode::BaselineOutOfRange,
          std::to_string(baseline_year));
  const std::size_t b = panel.year_index(baseline_year);
  const Tensor3 lm = log_rates(panel);
  const std::size_t X = lm.ages(), C = lm.causes(), n = lm.years() - b - 1;
  ExcessLogMortality out;
  out.em = Tensor3(X, n, C);
  out.standardized = Eigen::MatrixXd::Zero(static_cast<long>(n), static_cast<long>(C));
  const Eigen::VectorXd w = panel.exposures().col(static_cast<long>(b)) /
                            panel.exposures().col(static_cast<long>(b)).sum();
  for (std::size_t k = 0; k < n; ++k) {
    out.years.push_back(panel.years()[b + 1 + k]);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x) {
        const double e = lm(x, b + 1 + k, c) - lm(x, b, c);
        out.em(x, k, c) = e;
        out.standardized(static_cast<long>(k), static_cast<long>(c)) += w(static_cast<long>(x)) * e;
      }
  }
  return out;
}

/// 100 (m_{y1} - m_{y0}) / m_{y0}, rows = ages, cols = causes.
inline Eigen::MatrixXd pct_change(const MortalityPanel& panel, int y0, int y1) {
  const std::size_t a = panel.year_index(y0), b = panel.year_index(y1);
  const auto& m = panel.rates();
  Eigen::MatrixXd out(static_cast<long>(m.ages()), static_cast<long>(m.causes()));
  for (std::size_t c = 0; c < m.causes(); ++c)
    for (std::size_t x = 0; x < m.ages(); ++x) {
      require(m(x, a, c) > 0.0, ErrorCode::ZeroBaselineRate,
              "age " + panel.ages().bands()[x].label + ", cause " + panel.causes().labels()[c]);
      out(static_cast<long>(x), static_cast<long>(c)) =
          100.0 * (m(x, b, c) - m(x, a, c)) / m(x, a, c);
    }
  return out;
}

/// Interpolates one cause's band rates to single-age hazards evaluated at
/// age + 0.5. A natural cubic spline is fitted to ln m over band midpoints;
/// if some (not all) band rates are zero the rates themselves are
/// interpolated linearly (clamped at zero); an all-zero cause yields zero.
inline std::vector<double> single_age_hazards(const std::vector<double>& midpoints,
                                              const std::vector<double>& band_rates,
                                              int from_age, int to_age) {
  require(midpoints.size() == band_rates.size(), ErrorCode::DimensionMismatch,
          "one rate per band expected");
  std::vector<double> out;
  if (to_age <= from_age) return out;
  out.reserve(static_cast<std::size_t>(to_age - from_age));
  std::size_t zeros = 0;
  for (double r : band_rates) {
    require(std::isfinite(r) && r >= 0.0, ErrorCode::InvalidArgument, "negative or non-finite rate");
    zeros += (r == 0.0);
  }
  if (zeros == band_rates.size()) return std::vector<double>(static_cast<std::size_t>(to_age - from_age), 0.0);
  if (zeros == 0) {
    std::vector<double> logs(band_rates.size());
    for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(band_rates[i]);
    const NaturalCubicSpline spline(midpoints, logs);
    for (int a = from_age; a < to_age; ++a) out.push_back(std::exp(spline(a + 0.5)));
    return out;
  }
  for (int a = from_age; a < to_age; ++a) {
    const double s = a + 0.5;
    double h;
    if (s <= midpoints.front())
      h = band_rates.front();
    else if (s >= midpoints.back())
      h = band_rates.back();
    else {
      std::size_t i = 0;
      while (s > midpoints[i + 1]) ++i;
      const double w = (s - midpoints[i]) / (midpoints[i + 1] - midpoints[i]);
      h = (1.0 - w) * band_rates[i] + w * band_rates[i + 1];
    }
    out.push_back(std::max(h, 0.0));
  }
  return out;
}

/// Life expectancy from single-age hazards h[0..n-1] starting at the
/// evaluation age, closed at the end of the vector:
/// sum_{k=1..n} kp + (1 - np)/2 with kp = exp(-(h_0 + ... + h_{k-1})).
inline double life_expectancy_from_hazards(const std::vector<double>& hazards) {
  double cum = 0.0, total = 0.0, surv = 1.0;
  for (double h : hazards) {
    cum += h;
    surv = std::exp(-cum);
    total += surv;
  }
  return total + 0.5 * (1.0 - surv);
}

inline double period_life_expectancy(const MortalityPanel& panel, double age, int year,
                                     int closure_age = 110) {
  const std::size_t t = panel.year_index(year);
  const auto& mids = panel.ages().midpoints();
  require(age >= mids.front() && age < closure_age, ErrorCode::AgeOutOfRange,
          std::to_string(age));
  const int start = static_cast<int>(std::floor(age));
  std::vector<double> all(static_cast<std::size_t>(closure_age - start), 0.0);
  for (std::size_t c = 0; c < panel.num_causes(); ++c) {
    std::vector<double> rates(panel.num_ages());
    for (std::size_t x = 0; x < rates.size(); ++x) rates[x] = panel.rates()(x, t, c);
    const auto h = single_age_hazards(mids, rates, start, closure_age);
    for (std::size_t i = 0; i < h.size(); ++i) all[i] += h[i];
  }
  return life_expectancy_from_hazards(all);
}

}  // namespace lingermort
