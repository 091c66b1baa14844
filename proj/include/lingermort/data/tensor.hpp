#pragma once

#include <cstddef>
#include <vector>

#include "lingermort/core/errors.hpp"

namespace lingermort {

/// Dense age x time x cause array. Storage is age fastest, then cause, then
/// time, so one time slice is a contiguous age-cause block.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t ages, std::size_t years, std::size_t causes, double fill = 0.0)
      : ages_(ages), years_(years), causes_(causes), data_(ages * years * causes, fill) {}

  std::size_t ages() const { return ages_; }
  std::size_t years() const { return years_; }
  std::size_t causes() const { return causes_; }
  std::size_t size() const { return data_.size(); }

  std::size_t flat_index(std::size_t x, std::size_t t, std::size_t c) const {
    return x + ages_ * (c + causes_ * t);
  }

  double& operator()(std::size_t x, std::size_t t, std::size_t c) {
    return data_[flat_index(x, t, c)];
  }
  double operator()(std::size_t x, std::size_t t, std::size_t c) const {
    return data_[flat_index(x, t, c)];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t ages_ = 0, years_ = 0, causes_ = 0;
  std::vector<double> data_;
};

}  // namespace lingermort
