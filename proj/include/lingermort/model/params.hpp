#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/model/kernel.hpp"

namespace lingermort {

/// Parameters of the age x cause mortality model with a lingering jump.
struct ParamSet {
  Eigen::VectorXd B;         // common age sensitivity, per age
  double drift_K = 0.0;      // common trend drift
  double sigma_eta = 0.0;    // common trend volatility
  Eigen::VectorXd phi;       // cause loadings
  Eigen::VectorXd b;         // cause-trend age sensitivity
  double drift_k = 0.0;      // cause trend drift
  double sigma_xi = 0.0;     // cause trend volatility
  Eigen::MatrixXd mu;        // initial jump mean, ages x causes
  double sigma_J = 0.0;      // jump severity sd
  LingeringKernel kernel;
  double p = 0.0;            // annual jump probability
  double sigma_e = 0.0;      // measurement noise sd

  std::vector<std::string> age_labels;
  std::vector<std::string> cause_labels;

  std::size_t ages() const { return static_cast<std::size_t>(B.size()); }
  std::size_t causes() const { return static_cast<std::size_t>(phi.size()); }

  /// Zero-trend parameters with an indicator kernel, for filling in.
  static ParamSet zeros(std::size_t X, std::size_t C) {
    ParamSet t;
    const long x = static_cast<long>(X), c = static_cast<long>(C);
    t.B = Eigen::VectorXd::Zero(x);
    t.phi = Eigen::VectorXd::Zero(c);
    t.b = Eigen::VectorXd::Zero(x);
    t.mu = Eigen::MatrixXd::Zero(x, c);
    t.kernel = LingeringKernel::indicator(C);
    return t;
  }

  void validate() const {
    const std::size_t X = ages(), C = causes();
    require(X > 0 && C > 0, ErrorCode::DimensionMismatch, "empty parameter set");
    require(static_cast<std::size_t>(b.size()) == X, ErrorCode::DimensionMismatch,
            "b must have one entry per age");
    require(static_cast<std::size_t>(mu.rows()) == X && static_cast<std::size_t>(mu.cols()) == C,
            ErrorCode::DimensionMismatch, "mu must be ages x causes");
    kernel.validate(C);
    require(sigma_eta >= 0.0 && sigma_xi >= 0.0 && sigma_J >= 0.0 && sigma_e >= 0.0,
            ErrorCode::InvalidArgument, "volatilities must be non-negative");
    require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument, "p must lie in [0, 1]");
    auto finite = [](const auto& m) { return m.allFinite(); };
    require(finite(B) && finite(phi) && finite(b) && finite(mu) && std::isfinite(drift_K) &&
                std::isfinite(drift_k) && std::isfinite(sigma_eta) && std::isfinite(sigma_xi) &&
                std::isfinite(sigma_J) && std::isfinite(sigma_e),
            ErrorCode::InvalidArgument, "non-finite parameter");
  }

  void validate(std::size_t X, std::size_t C) const {
    validate();
    require(ages() == X && causes() == C, ErrorCode::DimensionMismatch,
            "parameters are " + std::to_string(ages()) + "x" + std::to_string(causes()) +
                ", data are " + std::to_string(X) + "x" + std::to_string(C));
  }
};

enum class ModelVariant { Full, NoJump };

inline std::string_view variant_name(ModelVariant v) {
  return v == ModelVariant::Full ? "full" : "no_jump";
}

/// Number of free parameters: 2X + XC + 4C + 7 for the full model and
/// 2X + C + 5 without jumps.
inline std::size_t free_parameter_count(std::size_t X, std::size_t C,
                                        ModelVariant variant = ModelVariant::Full) {
  const std::size_t trend = 2 * X + C + 5;
  if (variant == ModelVariant::NoJump) return trend;
  return trend + X * C + 3 * C + 2;
}

/// Maps parameters to an unconstrained vector: volatilities, kernel shape and
/// rate through log, p through logit. Order: B, D, log sigma_eta, phi, b, d,
/// log sigma_xi, then (full model only) mu (age fastest), log sigma_J, gamma,
/// log alpha, log beta, logit p, and finally log sigma_e.
class ParamLayout {
 public:
  static constexpr double kFloor = 1e-300;

  ParamLayout(std::size_t X, std::size_t C, ModelVariant variant = ModelVariant::Full)
      : X_(X), C_(C), variant_(variant) {}

  std::size_t size() const { return free_parameter_count(X_, C_, variant_); }
  ModelVariant variant() const { return variant_; }
  std::size_t ages() const { return X_; }
  std::size_t causes() const { return C_; }

  Eigen::VectorXd pack(const ParamSet& t) const {
    t.validate(X_, C_);
    Eigen::VectorXd v(static_cast<long>(size()));
    long k = 0;
    auto put = [&](double x) { v(k++) = x; };
    auto put_vec = [&](const Eigen::VectorXd& x) {
      for (long i = 0; i < x.size(); ++i) put(x(i));
    };
    put_vec(t.B);
    put(t.drift_K);
    put(safe_log(t.sigma_eta));
    put_vec(t.phi);
    put_vec(t.b);
    put(t.drift_k);
    put(safe_log(t.sigma_xi));
    if (variant_ == ModelVariant::Full) {
      for (long c = 0; c < t.mu.cols(); ++c)
        for (long x = 0; x < t.mu.rows(); ++x) put(t.mu(x, c));
      put(safe_log(t.sigma_J));
      put_vec(t.kernel.gamma);
      for (long c = 0; c < t.kernel.alpha.size(); ++c) put(std::log(t.kernel.alpha(c)));
      for (long c = 0; c < t.kernel.beta.size(); ++c) put(std::log(t.kernel.beta(c)));
      const double p = std::clamp(t.p, kFloor, 1.0 - 1e-16);
      put(std::log(p) - std::log1p(-p));
    }
    put(safe_log(t.sigma_e));
    return v;
  }

  /// Inverse of pack. Quantities not represented in the variant are taken
  /// from `fixed` (labels included); for the no-jump variant p, sigma_J and
  /// mu are zero.
  ParamSet unpack(const Eigen::VectorXd& v, const ParamSet* fixed = nullptr) const {
    require(static_cast<std::size_t>(v.size()) == size(), ErrorCode::DimensionMismatch,
            "parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                std::to_string(size()));
    ParamSet t = fixed ? *fixed : ParamSet::zeros(X_, C_);
    const long X = static_cast<long>(X_), C = static_cast<long>(C_);
    long k = 0;
    auto take = [&]() { return v(k++); };
    auto take_vec = [&](long n) {
      Eigen::VectorXd x(n);
      for (long i = 0; i < n; ++i) x(i) = take();
      return x;
    };
    t.B = take_vec(X);
    t.drift_K = take();
    t.sigma_eta = std::exp(take());
    t.phi = take_vec(C);
    t.b = take_vec(X);
    t.drift_k = take();
    t.sigma_xi = std::exp(take());
    if (variant_ == ModelVariant::Full) {
      t.mu.resize(X, C);
      for (long c = 0; c < C; ++c)
        for (long x = 0; x < X; ++x) t.mu(x, c) = take();
      t.sigma_J = std::exp(take());
      t.kernel.gamma = take_vec(C);
      t.kernel.alpha = take_vec(C).array().exp().matrix();
      t.kernel.beta = take_vec(C).array().exp().matrix();
      const double logit = take();
      t.p = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
    } else {
      t.mu = Eigen::MatrixXd::Zero(X, C);
      t.sigma_J = 0.0;
      t.p = 0.0;
      if (t.kernel.causes() != C_) t.kernel = LingeringKernel::indicator(C_);
    }
    t.sigma_e = std::exp(take());
    return t;
  }

  /// Human-readable names in packing order.
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    auto idx = [](const char* base, std::size_t i) { return std::string(base) + "[" + std::to_string(i) + "]"; };
    for (std::size_t x = 0; x < X_; ++x) n.push_back(idx("B", x));
    n.push_back("D");
    n.push_back("log_sigma_eta");
    for (std::size_t c = 0; c < C_; ++c) n.push_back(idx("phi", c));
    for (std::size_t x = 0; x < X_; ++x) n.push_back(idx("b", x));
    n.push_back("d");
    n.push_back("log_sigma_xi");
    if (variant_ == ModelVariant::Full) {
      for (std::size_t c = 0; c < C_; ++c)
        for (std::size_t x = 0; x < X_; ++x)
          n.push_back("mu[" + std::to_string(x) + "," + std::to_string(c) + "]");
      n.push_back("log_sigma_J");
      for (std::size_t c = 0; c < C_; ++c) n.push_back(idx("gamma", c));
      for (std::size_t c = 0; c < C_; ++c) n.push_back(idx("log_alpha", c));
      for (std::size_t c = 0; c < C_; ++c) n.push_back(idx("log_beta", c));
      n.push_back("logit_p");
    }
    n.push_back("log_sigma_e");
    return n;
  }

  // Offsets of the blocks in the packed vector.
  std::size_t offset_B() const { return 0; }
  std::size_t offset_D() const { return X_; }
  std::size_t offset_sigma_eta() const { return X_ + 1; }
  std::size_t offset_phi() const { return X_ + 2; }
  std::size_t offset_b() const { return X_ + 2 + C_; }
  std::size_t offset_d() const { return 2 * X_ + 2 + C_; }
  std::size_t offset_sigma_xi() const { return 2 * X_ + 3 + C_; }
  std::size_t offset_mu() const { return 2 * X_ + 4 + C_; }
  std::size_t offset_sigma_J() const { return offset_mu() + X_ * C_; }
  std::size_t offset_gamma() const { return offset_sigma_J() + 1; }
  std::size_t offset_alpha() const { return offset_gamma() + C_; }
  std::size_t offset_beta() const { return offset_alpha() + C_; }
  std::size_t offset_p() const { return offset_beta() + C_; }
  std::size_t offset_sigma_e() const { return size() - 1; }

 private:
  static double safe_log(double x) { return std::log(std::max(x, kFloor)); }

  std::size_t X_, C_;
  ModelVariant variant_;
};

inline constexpr int kParamSetFormatVersion = 1;

inline io::json to_json(const ParamSet& t) {
  t.validate();
  io::json j;
  j["format_version"] = kParamSetFormatVersion;
  j["ages"] = t.ages();
  j["causes"] = t.causes();
  j["age_labels"] = t.age_labels;
  j["cause_labels"] = t.cause_labels;
  j["B"] = io::hex_vector(t.B);
  j["drift_K"] = io::hex_double(t.drift_K);
  j["sigma_eta"] = io::hex_double(t.sigma_eta);
  j["phi"] = io::hex_vector(t.phi);
  j["b"] = io::hex_vector(t.b);
  j["drift_k"] = io::hex_double(t.drift_k);
  j["sigma_xi"] = io::hex_double(t.sigma_xi);
  j["mu"] = io::hex_matrix(t.mu);
  j["sigma_J"] = io::hex_double(t.sigma_J);
  j["kernel"] = {{"gamma", io::hex_vector(t.kernel.gamma)},
                 {"alpha", io::hex_vector(t.kernel.alpha)},
                 {"beta", io::hex_vector(t.kernel.beta)}};
  j["p"] = io::hex_double(t.p);
  j["sigma_e"] = io::hex_double(t.sigma_e);
  return j;
}

inline ParamSet param_set_from_json(const io::json& j) {
  using io::field;
  require(field(j, "format_version").get<int>() == kParamSetFormatVersion, ErrorCode::Schema,
          "unsupported parameter format version");
  ParamSet t;
  t.B = io::parse_hex_vector(field(j, "B"));
  t.drift_K = io::parse_hex_double(field(j, "drift_K"));
  t.sigma_eta = io::parse_hex_double(field(j, "sigma_eta"));
  t.phi = io::parse_hex_vector(field(j, "phi"));
  t.b = io::parse_hex_vector(field(j, "b"));
  t.drift_k = io::parse_hex_double(field(j, "drift_k"));
  t.sigma_xi = io::parse_hex_double(field(j, "sigma_xi"));
  t.mu = io::parse_hex_matrix(field(j, "mu"));
  if (t.mu.size() == 0) t.mu = Eigen::MatrixXd::Zero(t.B.size(), t.phi.size());
  t.sigma_J = io::parse_hex_double(field(j, "sigma_J"));
  const auto& k = field(j, "kernel");
  t.kernel = LingeringKernel(io::parse_hex_vector(field(k, "gamma")),
                             io::parse_hex_vector(field(k, "alpha")),
                             io::parse_hex_vector(field(k, "beta")));
  t.p = io::parse_hex_double(field(j, "p"));
  t.sigma_e = io::parse_hex_double(field(j, "sigma_e"));
  if (j.contains("age_labels")) t.age_labels = j["age_labels"].get<std::vector<std::string>>();
  if (j.contains("cause_labels")) t.cause_labels = j["cause_labels"].get<std::vector<std::string>>();
  require(field(j, "ages").get<std::size_t>() == t.ages() &&
              field(j, "causes").get<std::size_t>() == t.causes(),
          ErrorCode::Schema, "declared dimensions disagree with the arrays");
  t.validate();
  return t;
}

}  // namespace lingermort
