#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "lingermort/core/errors.hpp"
#include "lingermort/model/kernel.hpp"

namespace lingermort {

/// Jump occurrence path over panel years 1..T under the at-most-one-jump
/// assumption: N_t = 1 from the jump year on, 0 before; no jump at all is
/// represented by an empty jump year.
class JumpPattern {
 public:
  JumpPattern(std::size_t years, std::optional<std::size_t> jump_year)
      : years_(years), jump_year_(jump_year) {
    require(!jump_year || (*jump_year >= 1 && *jump_year <= years), ErrorCode::InvalidArgument,
            "jump year outside 1..T");
  }

  static JumpPattern from_indicators(const std::vector<int>& n) {
    std::optional<std::size_t> first;
    for (std::size_t t = 0; t < n.size(); ++t) {
      require(n[t] == 0 || n[t] == 1, ErrorCode::InvalidArgument, "indicators must be 0/1");
      if (first)
        require(n[t] == 1, ErrorCode::InvalidArgument, "jump indicators must be non-decreasing");
      else if (n[t] == 1)
        first = t + 1;
    }
    return JumpPattern(n.size(), first);
  }

  std::size_t years() const { return years_; }
  std::optional<std::size_t> jump_year() const { return jump_year_; }
  bool has_jump() const { return jump_year_.has_value(); }

  /// N_t for 1-based t.
  int n(std::size_t t) const { return jump_year_ && t >= *jump_year_ ? 1 : 0; }

  std::vector<int> indicators() const {
    std::vector<int> out(years_);
    for (std::size_t t = 1; t <= years_; ++t) out[t - 1] = n(t);
    return out;
  }

  /// Geometric prior: (1-p)^(t_J - 1) p, or (1-p)^T without a jump; 0 log 0 = 0.
  double log_prior(double p) const {
    auto xlogy = [](double k, double y) { return k == 0.0 ? 0.0 : k * std::log(y); };
    if (!jump_year_) return xlogy(static_cast<double>(years_), 1.0 - p);
    return xlogy(static_cast<double>(*jump_year_ - 1), 1.0 - p) + std::log(p);
  }

  /// Change in the lingering factor between years t-1 and t for cause c:
  /// N_t pi_c(t - t_J) - N_{t-1} pi_c(t - 1 - t_J), t >= 2.
  double lingering_difference(const LingeringKernel& kernel, std::size_t c, std::size_t t) const {
    if (!jump_year_) return 0.0;
    const int tau = static_cast<int>(t) - static_cast<int>(*jump_year_);
    return n(t) * kernel.weight(c, tau) - n(t - 1) * kernel.weight(c, tau - 1);
  }

 private:
  std::size_t years_;
  std::optional<std::size_t> jump_year_;
};

/// All T+1 admissible patterns: jump in year 1, ..., year T, then no jump.
/// This is also the reduction order of every mixture sum.
inline std::vector<JumpPattern> admissible_patterns(std::size_t years) {
  std::vector<JumpPattern> out;
  out.reserve(years + 1);
  for (std::size_t t = 1; t <= years; ++t) out.emplace_back(years, t);
  out.emplace_back(years, std::nullopt);
  return out;
}

}  // namespace lingermort
