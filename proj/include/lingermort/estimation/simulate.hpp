#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/rng.hpp"
#include "lingermort/data/axes.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/model/params.hpp"

namespace lingermort {

struct PanelSimulation {
  AgeAxis ages;
  CauseAxis causes;
  int first_year = 1;
  std::size_t years = 0;
  Eigen::MatrixXd level;      // a_{x,c}
  Eigen::MatrixXd exposures;  // ages x years
  std::optional<int> jump_year;  // calendar year of the jump, if any
  bool poisson = false;          // sample deaths instead of using expected counts
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

/// Draws a panel from the model: latent random walks for the common and
/// cause-specific indices (both zero in the first year), one jump draw per
/// cell scaled by the lingering kernel, and i.i.d. noise on log rates.
inline MortalityPanel simulate_panel(const ParamSet& theta, const PanelSimulation& s) {
  const std::size_t X = s.ages.size(), C = s.causes.size(), T = s.years;
  theta.validate(X, C);
  require(T >= 2, ErrorCode::InvalidArgument, "simulation needs at least two years");
  require(static_cast<std::size_t>(s.level.rows()) == X &&
              static_cast<std::size_t>(s.level.cols()) == C,
          ErrorCode::DimensionMismatch, "level matrix shape");
  require(static_cast<std::size_t>(s.exposures.rows()) == X &&
              static_cast<std::size_t>(s.exposures.cols()) == T,
          ErrorCode::DimensionMismatch, "exposure matrix shape");

  std::vector<double> K(T, 0.0), k(T, 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    CounterRng common(s.seed, s.path, t, static_cast<std::uint64_t>(StreamPurpose::CommonTrend));
    CounterRng cause(s.seed, s.path, t, static_cast<std::uint64_t>(StreamPurpose::CauseTrend));
    K[t] = K[t - 1] + theta.drift_K + theta.sigma_eta * common.normal();
    k[t] = k[t - 1] + theta.drift_k + theta.sigma_xi * cause.normal();
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<long>(X), static_cast<long>(C));
  if (s.jump_year) {
    CounterRng sev(s.seed, s.path, 0, static_cast<std::uint64_t>(StreamPurpose::JumpSeverity));
    for (long c = 0; c < J.cols(); ++c)
      for (long x = 0; x < J.rows(); ++x) J(x, c) = theta.mu(x, c) + theta.sigma_J * sev.normal();
  }

  Tensor3 deaths(X, T, C);
  for (std::size_t t = 0; t < T; ++t) {
    CounterRng noise(s.seed, s.path, t, static_cast<std::uint64_t>(StreamPurpose::Noise));
    const int year = s.first_year + static_cast<int>(t);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x) {
        const long xi = static_cast<long>(x), ci = static_cast<long>(c);
        double lm = s.level(xi, ci) + theta.B(xi) * K[t] + theta.phi(ci) * theta.b(xi) * k[t] +
                    theta.sigma_e * noise.normal();
        if (s.jump_year) lm += J(xi, ci) * theta.kernel.weight(c, year - *s.jump_year);
        const double expected = std::exp(lm) * s.exposures(xi, static_cast<long>(t));
        if (s.poisson) {
          std::poisson_distribution<long long> pois(expected);
          deaths(x, t, c) = static_cast<double>(pois(noise));
        } else {
          deaths(x, t, c) = expected;
        }
      }
  }
  std::vector<int> years(T);
  for (std::size_t t = 0; t < T; ++t) years[t] = s.first_year + static_cast<int>(t);
  return MortalityPanel(s.ages, std::move(years), s.causes, std::move(deaths), s.exposures);
}

}  // namespace lingermort
