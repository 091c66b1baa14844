#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <utility>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/baselines/lee_carter.hpp"
#include "lingermort/core/errors.hpp"
#include "lingermort/data/descriptive.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/estimation/bfgs.hpp"
#include "lingermort/estimation/parafac.hpp"
#include "lingermort/model/kernel.hpp"
#include "lingermort/model/params.hpp"

namespace lingermort {

/// Deaths summed over causes (ages x years).
inline Eigen::MatrixXd aggregate_deaths(const MortalityPanel& panel) {
  const auto& d = panel.deaths();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<long>(panel.num_ages()),
                                              static_cast<long>(panel.num_years()));
  for (std::size_t x = 0; x < panel.num_ages(); ++x)
    for (std::size_t t = 0; t < panel.num_years(); ++t)
      for (std::size_t c = 0; c < panel.num_causes(); ++c)
        out(static_cast<long>(x), static_cast<long>(t)) += d(x, t, c);
  return out;
}

/// Sub-panel of the years up to and including `cutoff_year`.
inline MortalityPanel pre_cutoff(const MortalityPanel& panel, int cutoff_year) {
  require(cutoff_year >= panel.first_year(), ErrorCode::YearOutOfRange,
          "cutoff " + std::to_string(cutoff_year) + " precedes the panel");
  return panel.years_between(panel.first_year(), std::min(cutoff_year, panel.last_year()));
}

struct TrendInit {
  Eigen::VectorXd B;
  double drift = 0.0;
  double sigma = 0.0;
  LeeCarterFit lc_fit;
};

/// Common trend from a Poisson Lee-Carter fit to cause-summed deaths.
inline TrendInit init_general_trend(const MortalityPanel& panel, int cutoff_year) {
  const MortalityPanel pre = pre_cutoff(panel, cutoff_year);
  require(pre.num_years() >= 2, ErrorCode::DegenerateTrend,
          "the common trend needs at least two years before the cutoff");
  TrendInit out;
  out.lc_fit = fit_lee_carter_poisson(aggregate_deaths(pre), pre.exposures());
  out.B = out.lc_fit.b;
  out.drift = out.lc_fit.drift;
  out.sigma = out.lc_fit.sigma;
  require(std::isfinite(out.sigma) && out.sigma > 0.0, ErrorCode::DegenerateTrend,
          "the common period index has no variation");
  return out;
}

struct CauseInit {
  Eigen::MatrixXd a;  // time mean of ln m per (age, cause)
  Eigen::VectorXd phi;
  Eigen::VectorXd b;
  Eigen::VectorXd k;
  double drift = 0.0;
  double sigma = 0.0;
  Rank1Parafac parafac;
  Tensor3 residual;  // residual after the common and cause-specific terms
  std::vector<std::string> notes;
};

/// Cause-specific trend from a rank-1 decomposition of the residual log
/// rates after the level and common trend are removed.
inline CauseInit init_cause_specific(const MortalityPanel& panel, const LeeCarterFit& lc_fit,
                                     int cutoff_year) {
  const MortalityPanel pre = pre_cutoff(panel, cutoff_year);
  const Tensor3 lm = log_rates(pre);
  const std::size_t X = pre.num_ages(), T = pre.num_years(), C = pre.num_causes();
  require(static_cast<std::size_t>(lc_fit.k.size()) == T &&
              static_cast<std::size_t>(lc_fit.b.size()) == X,
          ErrorCode::DimensionMismatch, "Lee-Carter fit does not match the pre-cutoff panel");
  CauseInit out;
  out.a = Eigen::MatrixXd::Zero(static_cast<long>(X), static_cast<long>(C));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t x = 0; x < X; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += lm(x, t, c);
      out.a(static_cast<long>(x), static_cast<long>(c)) = s / static_cast<double>(T);
    }
  Tensor3 e(X, T, C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x)
        e(x, t, c) = lm(x, t, c) - out.a(static_cast<long>(x), static_cast<long>(c)) -
                     lc_fit.b(static_cast<long>(x)) * lc_fit.k(static_cast<long>(t));
  out.parafac = fit_rank1_parafac(e);
  if (out.parafac.stalled)
    out.notes.push_back("AlsStall: rank-1 decomposition stopped on a flat objective");
  out.phi = out.parafac.phi;
  out.b = out.parafac.b;
  out.k = out.parafac.k;
  std::tie(out.drift, out.sigma) = difference_moments(out.k);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x)
        e(x, t, c) -= out.b(static_cast<long>(x)) * out.k(static_cast<long>(t)) *
                      out.phi(static_cast<long>(c));
  out.residual = std::move(e);
  return out;
}

/// Alternative cause-specific loadings from a rank-1 decomposition of the
/// year-on-year changes in the residual log rates, demeaned per cell. Level
/// residuals can be dominated by persistent errors; differences are not.
inline Rank1Parafac init_cause_differenced(const MortalityPanel& panel, const LeeCarterFit& lc_fit,
                                           int cutoff_year) {
  const MortalityPanel pre = pre_cutoff(panel, cutoff_year);
  const Tensor3 lm = log_rates(pre);
  const std::size_t X = pre.num_ages(), T = pre.num_years(), C = pre.num_causes();
  require(T >= 3, ErrorCode::WindowTooShort, "differenced start needs three pre-cutoff years");
  Tensor3 d(X, T - 1, C);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t x = 0; x < X; ++x) {
      const long xi = static_cast<long>(x);
      double mean = 0.0;
      for (std::size_t t = 1; t < T; ++t) {
        d(x, t - 1, c) = lm(x, t, c) - lm(x, t - 1, c) -
                         lc_fit.b(xi) * (lc_fit.k(static_cast<long>(t)) - lc_fit.k(static_cast<long>(t) - 1));
        mean += d(x, t - 1, c);
      }
      mean /= static_cast<double>(T - 1);
      for (std::size_t t = 0; t + 1 < T; ++t) d(x, t, c) -= mean;
    }
  return fit_rank1_parafac(d);
}

struct CauseStart {
  Eigen::VectorXd phi;
  Eigen::VectorXd b;
  double drift_K = 0.0;
  double drift_k = 0.0;
  double sigma_eta = 0.0;
  double sigma_xi = 0.0;
  double rank_ratio = 0.0;  // second over first singular value of the chosen loading matrix
};

/// Loadings from the sample covariance of the pre-cutoff improvements. The
/// leading eigenvector orthogonal to the common direction B (x) 1 is shifted
/// along that direction until its ages x causes reshape is closest to rank
/// one, which gives b and phi; drifts and scales follow by least squares.
inline CauseStart init_cause_covariance(const MortalityPanel& panel, const Eigen::VectorXd& B,
                                        int cutoff_year) {
  const MortalityPanel pre = pre_cutoff(panel, cutoff_year);
  const ImprovementTensor z = improvement_tensor(pre);
  const long X = static_cast<long>(z.ages()), C = static_cast<long>(z.causes()), N = X * C;
  const long S = static_cast<long>(z.steps());
  require(S >= 3, ErrorCode::WindowTooShort, "covariance start needs three pre-cutoff improvements");
  Eigen::MatrixXd Z(N, S);
  for (long t = 0; t < S; ++t)
    for (long c = 0; c < C; ++c)
      for (long x = 0; x < X; ++x)
        Z(x + X * c, t) = z(static_cast<std::size_t>(x), static_cast<std::size_t>(t), static_cast<std::size_t>(c));
  const Eigen::VectorXd mean = Z.rowwise().mean();
  const Eigen::MatrixXd dev = Z.colwise() - mean;
  const Eigen::MatrixXd cov = dev * dev.transpose() / static_cast<double>(S - 1);
  Eigen::VectorXd u(N);
  for (long c = 0; c < C; ++c) u.segment(X * c, X) = B;
  require(u.squaredNorm() > 0.0, ErrorCode::DegenerateTrend, "common age loadings are zero");
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(N, N) - u * u.transpose() / u.squaredNorm();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q * cov * Q);
  const Eigen::VectorXd v = es.eigenvectors().col(N - 1);

  auto loading_matrix = [&](double shift) {
    const Eigen::VectorXd w = v + shift * u;
    return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(w.data(), X, C));
  };
  auto rank_ratio = [](const Eigen::MatrixXd& M) {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues();
    return sv.size() > 1 && sv(0) > 0.0 ? sv(1) / sv(0) : 0.0;
  };
  const double unit = v.norm() / u.norm();
  double best_shift = 0.0, best_ratio = std::numeric_limits<double>::infinity();
  for (int i = -400; i <= 400; ++i) {
    const double shift = 0.01 * i * unit;
    const double r = rank_ratio(loading_matrix(shift));
    if (r < best_ratio) {
      best_ratio = r;
      best_shift = shift;
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(loading_matrix(best_shift),
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  CauseStart out;
  out.rank_ratio = best_ratio;
  out.b = svd.matrixU().col(0);
  out.phi = svd.matrixV().col(0);
  const double sb = out.b.sum();
  if (std::abs(sb) > 1e-12) {
    out.b /= sb;
    out.phi *= sb;
  }
  out.phi.normalize();

  Eigen::MatrixXd A(N, 2);
  A.col(0) = u;
  for (long c = 0; c < C; ++c) A.col(1).segment(X * c, X) = out.b * out.phi(c);
  const auto qr = A.colPivHouseholderQr();
  const Eigen::Vector2d drift = qr.solve(mean);
  out.drift_K = drift(0);
  out.drift_k = drift(1);
  const Eigen::MatrixXd scores = qr.solve(dev);
  out.sigma_eta = std::sqrt(scores.row(0).squaredNorm() / static_cast<double>(S - 1));
  out.sigma_xi = std::sqrt(scores.row(1).squaredNorm() / static_cast<double>(S - 1));
  return out;
}

/// Standard deviation (n - 1) of the residual tensor.
inline double init_noise(const Tensor3& residual) {
  const auto& v = residual.data();
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double r : v) mean += r;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double r : v) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Jump severity: the jump-year improvement net of one year of regular trend.
inline Eigen::MatrixXd init_jump(const MortalityPanel& panel, int jump_year,
                                 const Eigen::VectorXd& B, double drift_K,
                                 const Eigen::VectorXd& phi, const Eigen::VectorXd& b,
                                 double drift_k) {
  require(panel.has_year(jump_year) && panel.has_year(jump_year - 1),
          ErrorCode::JumpYearMissing,
          "jump year " + std::to_string(jump_year) + " and its predecessor must be in the panel");
  const std::size_t X = panel.num_ages(), C = panel.num_causes();
  const std::size_t t1 = panel.year_index(jump_year), t0 = t1 - 1;
  const auto& m = panel.rates();
  Eigen::MatrixXd mu(static_cast<long>(X), static_cast<long>(C));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t x = 0; x < X; ++x) {
      require(m(x, t1, c) > 0.0 && m(x, t0, c) > 0.0, ErrorCode::ZeroRate,
              "zero rate around the jump year");
      const long xi = static_cast<long>(x), ci = static_cast<long>(c);
      mu(xi, ci) = std::log(m(x, t1, c)) - std::log(m(x, t0, c)) - B(xi) * drift_K -
                   phi(ci) * b(xi) * drift_k;
    }
  return mu;
}

/// Starting points for the lingering-kernel search.
struct KernelStartGrid {
  std::vector<double> alpha{1.0, 3.0};
  std::vector<double> beta{0.5, 2.0};
  std::vector<double> gamma{0.5, -0.5};
};

inline constexpr double kNegligibleKernel = 1e-8;

struct KernelInit {
  LingeringKernel kernel;
  Eigen::VectorXd objective;  // per cause at the chosen point
  std::vector<std::string> notes;
};

/// Sum of squares of cumulative post-jump excess against mu * weight(tau),
/// with its gradient in (gamma, log alpha, log beta).
struct KernelLeastSquares {
  Eigen::MatrixXd excess;  // ages x post-jump years (tau = 1, 2, ...)
  Eigen::VectorXd mu;      // ages

  double operator()(const Eigen::Vector3d& v, Eigen::Vector3d* grad = nullptr) const {
    const double gamma = v(0), alpha = std::exp(v(1)), beta = std::exp(v(2));
    double s = 0.0;
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (long j = 0; j < excess.cols(); ++j) {
      const double tau = static_cast<double>(j + 1);
      const double shape = std::exp(alpha * std::log(beta) + (alpha - 1.0) * std::log(tau) - beta * tau);
      const double w = gamma * shape;
      for (long x = 0; x < excess.rows(); ++x) {
        const double r = excess(x, j) - mu(x) * w;
        s += r * r;
        const double f = -2.0 * r * mu(x);
        g(0) += f * shape;
        g(1) += f * w * alpha * (std::log(beta) + std::log(tau));
        g(2) += f * w * (alpha - beta * tau);
      }
    }
    if (grad) *grad = g;
    return s;
  }
};

/// Per-cause kernel fit by multi-start quasi-Newton least squares on the
/// cumulative excess ln m_t - ln m_{jump-1} - (t - jump + 1) * regular drift.
inline KernelInit init_lingering(const MortalityPanel& panel, int jump_year,
                                 const Eigen::MatrixXd& mu, const Eigen::VectorXd& B,
                                 double drift_K, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& b, double drift_k,
                                 const KernelStartGrid& grid = {}) {
  require(panel.has_year(jump_year) && panel.has_year(jump_year - 1),
          ErrorCode::JumpYearMissing, "jump year " + std::to_string(jump_year));
  require(panel.last_year() > jump_year, ErrorCode::NoPostJumpData,
          "no years after the jump year " + std::to_string(jump_year));
  require(!grid.alpha.empty() && !grid.beta.empty() && !grid.gamma.empty(),
          ErrorCode::InvalidArgument, "empty kernel start grid");
  const std::size_t X = panel.num_ages(), C = panel.num_causes();
  const std::size_t t0 = panel.year_index(jump_year - 1);
  const long post = static_cast<long>(panel.last_year() - jump_year);
  const auto& m = panel.rates();

  KernelInit out;
  out.kernel = LingeringKernel::indicator(C);
  out.objective = Eigen::VectorXd::Zero(static_cast<long>(C));
  if (post < 2) out.notes.push_back("only one post-jump year: kernel weakly identified");

  BfgsOptions opt;
  opt.relative_tolerance = 1e-12;
  opt.max_iterations = 1000;
  for (std::size_t c = 0; c < C; ++c) {
    const long ci = static_cast<long>(c);
    KernelLeastSquares ls;
    ls.mu = mu.col(ci);
    ls.excess.resize(static_cast<long>(X), post);
    for (long j = 0; j < post; ++j) {
      const std::size_t t = t0 + 1 + static_cast<std::size_t>(j + 1);
      for (std::size_t x = 0; x < X; ++x) {
        const long xi = static_cast<long>(x);
        require(m(x, t, c) > 0.0 && m(x, t0, c) > 0.0, ErrorCode::ZeroRate,
                "zero rate after the jump year");
        ls.excess(xi, j) = std::log(m(x, t, c)) - std::log(m(x, t0, c)) -
                           static_cast<double>(j + 2) * (B(xi) * drift_K + phi(ci) * b(xi) * drift_k);
      }
    }
    const Eigen::Vector3d first(grid.gamma.front(), std::log(grid.alpha.front()),
                                std::log(grid.beta.front()));
    Eigen::Vector3d best = first;
    double best_obj = ls(first);
    if (ls.mu.cwiseAbs().maxCoeff() == 0.0) {
      out.notes.push_back("DegenerateKernel: zero jump severity for cause " + std::to_string(c));
    } else {
      bool have = false;
      for (double a : grid.alpha)
        for (double be : grid.beta)
          for (double g : grid.gamma) {
            const Eigen::VectorXd x0 = Eigen::Vector3d(g, std::log(a), std::log(be));
            BfgsResult r;
            try {
              r = bfgs_minimize(
                  [&](const Eigen::VectorXd& v) { return ls(Eigen::Vector3d(v)); },
                  [&](const Eigen::VectorXd& v) {
                    Eigen::Vector3d gr;
                    ls(Eigen::Vector3d(v), &gr);
                    return Eigen::VectorXd(gr);
                  },
                  x0, opt);
            } catch (const Error&) {
              continue;
            }
            if (!have || r.objective < best_obj) {
              have = true;
              best_obj = r.objective;
              best = r.x;
            }
          }
    }
    // a negligible magnitude leaves the shape unidentified; an extreme shape
    // there would trap the likelihood search, so restart it from the grid
    if (std::abs(best(0)) < kNegligibleKernel) {
      best = first;
      best(0) = 0.0;
      best_obj = ls(best);
      out.notes.push_back("no lingering effect found for cause " + std::to_string(c) +
                          ": kernel shape set to the first start");
    }
    out.kernel.gamma(ci) = best(0);
    out.kernel.alpha(ci) = std::exp(best(1));
    out.kernel.beta(ci) = std::exp(best(2));
    out.objective(ci) = best_obj;
  }
  return out;
}

struct JumpDefaults {
  double sigma_J = 0.0;
  double p = 0.0;
};

/// Small severity spread and one expected jump over the window.
inline JumpDefaults init_sigma_defaults(std::size_t years) {
  require(years >= 1, ErrorCode::InvalidArgument, "window has no years");
  return {std::exp(-10.0), 1.0 / static_cast<double>(years)};
}

/// Jump severity, kernel and jump prior for the trend held in `t`.
inline KernelInit init_jump_block(const MortalityPanel& panel, int jump_year, ParamSet& t,
                                  const KernelStartGrid& grid = {}) {
  t.mu = init_jump(panel, jump_year, t.B, t.drift_K, t.phi, t.b, t.drift_k);
  KernelInit ki = init_lingering(panel, jump_year, t.mu, t.B, t.drift_K, t.phi, t.b, t.drift_k, grid);
  t.kernel = ki.kernel;
  const JumpDefaults jd = init_sigma_defaults(panel.num_years());
  t.sigma_J = jd.sigma_J;
  t.p = jd.p;
  return ki;
}

enum class CauseStartKind { Levels, Differences, Covariance };

inline std::string_view cause_start_name(CauseStartKind k) {
  switch (k) {
    case CauseStartKind::Levels: return "levels";
    case CauseStartKind::Differences: return "differences";
    case CauseStartKind::Covariance: return "covariance";
  }
  return "?";
}

struct InitArtifacts {
  Eigen::MatrixXd a;
  Eigen::VectorXd K;
  Eigen::VectorXd k;
  LeeCarterFit lc_fit;
  Rank1Parafac parafac;
  double sigma_eta = 0.0;
  double sigma_xi = 0.0;
  double sigma_e = 0.0;
  Eigen::VectorXd kernel_objective;
  ParamSet theta0;  // from the level decomposition
  /// Further starting points that differ in the cause-specific trend. Each
  /// has its own jump and kernel initialization.
  std::vector<std::pair<CauseStartKind, ParamSet>> alternatives;
  std::vector<std::string> notes;
};

/// Staged starting values. With `with_jump` the jump severity, kernel and
/// jump prior are initialized from the years around `jump_year`.
/// `alternative_kinds` lists extra cause-specific starts to build; starts that
/// cannot be formed on the window are skipped with a note.
inline InitArtifacts initialize(const MortalityPanel& panel, bool with_jump, int jump_year,
                                const KernelStartGrid& grid = {},
                                const std::vector<CauseStartKind>& alternative_kinds = {}) {
  // without a jump the trend uses every year unless the jump year falls inside
  const bool jump_inside = jump_year - 1 > panel.first_year() && jump_year <= panel.last_year();
  const int cutoff = with_jump || jump_inside ? jump_year - 1 : panel.last_year();
  InitArtifacts out;
  const TrendInit trend = init_general_trend(panel, cutoff);
  const CauseInit cause = init_cause_specific(panel, trend.lc_fit, cutoff);
  out.a = cause.a;
  out.K = trend.lc_fit.k;
  out.k = cause.k;
  out.lc_fit = trend.lc_fit;
  out.parafac = cause.parafac;
  out.sigma_eta = trend.sigma;
  out.sigma_xi = cause.sigma;
  out.sigma_e = init_noise(cause.residual);
  out.notes = cause.notes;
  require(out.sigma_e > 0.0, ErrorCode::DegenerateVariance, "residual noise is zero");

  const std::size_t X = panel.num_ages(), C = panel.num_causes();
  auto add_jump = [&](ParamSet& t, std::vector<std::string>* notes) {
    t.kernel = LingeringKernel::indicator(C);
    if (!with_jump) return;
    const KernelInit ki = init_jump_block(panel, jump_year, t, grid);
    if (notes) {
      out.kernel_objective = ki.objective;
      notes->insert(notes->end(), ki.notes.begin(), ki.notes.end());
    }
  };

  ParamSet& t = out.theta0;
  t = ParamSet::zeros(X, C);
  t.B = trend.B;
  t.drift_K = trend.drift;
  t.sigma_eta = trend.sigma;
  t.phi = cause.phi;
  t.b = cause.b;
  t.drift_k = cause.drift;
  // a flat cause-specific path still needs a positive scale to start from
  t.sigma_xi = cause.sigma > 0.0 ? cause.sigma : 1e-3 * trend.sigma;
  t.sigma_e = out.sigma_e;
  t.age_labels = panel.ages().labels();
  t.cause_labels = panel.causes().labels();
  add_jump(t, &out.notes);

  const std::size_t pre_years = pre_cutoff(panel, cutoff).num_years();
  for (const CauseStartKind kind : alternative_kinds) {
    if (kind == CauseStartKind::Levels) continue;
    const std::string name(cause_start_name(kind));
    if (pre_years < 4) {
      out.notes.push_back(name + " start skipped: fewer than four years before the cutoff");
      continue;
    }
    ParamSet alt = t;
    if (kind == CauseStartKind::Differences) {
      const Rank1Parafac diff = init_cause_differenced(panel, trend.lc_fit, cutoff);
      alt.b = diff.b;
      alt.phi = diff.phi;
    } else {
      const CauseStart cs = init_cause_covariance(panel, trend.B, cutoff);
      alt.b = cs.b;
      alt.phi = cs.phi;
      alt.drift_K = cs.drift_K;
      alt.drift_k = cs.drift_k;
      if (cs.sigma_eta > 0.0) alt.sigma_eta = cs.sigma_eta;
      if (cs.sigma_xi > 0.0) alt.sigma_xi = cs.sigma_xi;
    }
    if (!alt.b.allFinite() || !alt.phi.allFinite()) {
      out.notes.push_back(name + " start skipped: loadings are not finite");
      continue;
    }
    add_jump(alt, nullptr);
    out.alternatives.emplace_back(kind, std::move(alt));
  }
  return out;
}

}  // namespace lingermort
