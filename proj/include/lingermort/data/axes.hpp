#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lingermort/core/errors.hpp"

namespace lingermort {

struct AgeBand {
  int lo = 0;
  std::optional<int> hi;  // exclusive; empty for an open-ended band
  std::string label;

  bool open() const { return !hi.has_value(); }
};

/// Ordered, contiguous age bands with representative single ages.
class AgeAxis {
 public:
  static constexpr double kDefaultOpenOffset = 5.0;

  AgeAxis() = default;

  AgeAxis(std::vector<AgeBand> bands, double open_offset = kDefaultOpenOffset)
      : bands_(std::move(bands)), open_offset_(open_offset) {
    require(!bands_.empty(), ErrorCode::InvalidArgument, "age axis is empty");
    for (std::size_t i = 0; i < bands_.size(); ++i) {
      const auto& band = bands_[i];
      if (band.open())
        require(i + 1 == bands_.size(), ErrorCode::InvalidArgument,
                "only the last age band may be open-ended: " + band.label);
      else
        require(*band.hi > band.lo, ErrorCode::InvalidArgument,
                "empty age band " + band.label);
      if (i > 0)
        require(bands_[i - 1].hi && *bands_[i - 1].hi == band.lo, ErrorCode::InvalidArgument,
                "age bands are not contiguous at " + band.label);
    }
    midpoints_.reserve(bands_.size());
    for (const auto& band : bands_)
      midpoints_.push_back(band.open() ? band.lo + open_offset_
                                       : 0.5 * (band.lo + *band.hi));
  }

  /// Parses labels of the form `lo-hi` or `lo+`. A written upper bound is
  /// read as exclusive when it equals the next band's lower bound and as an
  /// inclusive integer age when it is one less (so both `0-1,1-4` and
  /// `1-4,5-9` are accepted). A closed last band is read as exclusive.
  static AgeAxis from_labels(const std::vector<std::string>& labels,
                             double open_offset = kDefaultOpenOffset) {
    std::vector<Parsed> raw;
    for (const auto& label : labels) raw.push_back(parse(label));
    std::vector<AgeBand> bands;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      AgeBand band{raw[i].lo, raw[i].hi, labels[i]};
      if (band.hi && i + 1 < raw.size()) {
        const int next = raw[i + 1].lo;
        if (*band.hi + 1 == next) band.hi = next;
        require(*band.hi == next, ErrorCode::InvalidArgument,
                "age band " + labels[i] + " does not meet " + labels[i + 1]);
      }
      bands.push_back(std::move(band));
    }
    return AgeAxis(std::move(bands), open_offset);
  }

  std::size_t size() const { return bands_.size(); }
  const std::vector<AgeBand>& bands() const { return bands_; }
  const std::vector<double>& midpoints() const { return midpoints_; }
  double open_offset() const { return open_offset_; }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& b : bands_) out.push_back(b.label);
    return out;
  }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < bands_.size(); ++i)
      if (bands_[i].label == label) return i;
    return std::nullopt;
  }

  /// Indices of bands lying entirely inside [lo, hi).
  std::vector<std::size_t> bands_within(int lo, int hi) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bands_.size(); ++i)
      if (bands_[i].lo >= lo && bands_[i].hi && *bands_[i].hi <= hi) out.push_back(i);
    return out;
  }

  static std::pair<int, std::optional<int>> parse_label(std::string_view label) {
    auto r = parse(std::string(label));
    return {r.lo, r.hi};
  }

 private:
  struct Parsed {
    int lo;
    std::optional<int> hi;
  };

  static Parsed parse(const std::string& label) {
    auto digits = [&](std::size_t& pos) {
      std::size_t start = pos;
      while (pos < label.size() && std::isdigit(static_cast<unsigned char>(label[pos]))) ++pos;
      require(pos > start, ErrorCode::MalformedRow, "bad age group label '" + label + "'");
      return std::stoi(label.substr(start, pos - start));
    };
    std::size_t pos = 0;
    const int lo = digits(pos);
    require(pos < label.size(), ErrorCode::MalformedRow, "bad age group label '" + label + "'");
    if (label[pos] == '+') {
      require(pos + 1 == label.size(), ErrorCode::MalformedRow,
              "bad age group label '" + label + "'");
      return {lo, std::nullopt};
    }
    require(label[pos] == '-', ErrorCode::MalformedRow, "bad age group label '" + label + "'");
    ++pos;
    const int hi = digits(pos);
    require(pos == label.size(), ErrorCode::MalformedRow, "bad age group label '" + label + "'");
    return {lo, hi};
  }

  std::vector<AgeBand> bands_;
  std::vector<double> midpoints_;
  double open_offset_ = kDefaultOpenOffset;
};

enum class IcdEra { Icd8, Icd9, Icd10 };

inline IcdEra parse_era(std::string_view name) {
  std::string s;
  for (char ch : name)
    if (ch != '-' && ch != '_' && ch != ' ')
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (s == "icd8") return IcdEra::Icd8;
  if (s == "icd9") return IcdEra::Icd9;
  if (s == "icd10") return IcdEra::Icd10;
  throw Error(ErrorCode::UnknownEra, std::string(name));
}

inline std::string_view era_name(IcdEra era) {
  switch (era) {
    case IcdEra::Icd8: return "ICD-8";
    case IcdEra::Icd9: return "ICD-9";
    case IcdEra::Icd10: return "ICD-10";
  }
  return "?";
}

/// Sortable key for an ICD code; comparisons are only meaningful within an
/// era. ICD-10 `A15.3` -> letter*100 + 15. ICD-8/9 `150.1` -> 150,
/// `E812` -> 1000 + 812, `V27` -> 2000 + 27.
inline int icd_code_key(std::string_view raw, IcdEra era) {
  std::string code;
  for (char ch : raw)
    if (!std::isspace(static_cast<unsigned char>(ch)))
      code.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  // ranges such as "A00-B99" are keyed by their first code
  if (auto dash = code.find('-'); dash != std::string::npos) code.resize(dash);
  if (auto dot = code.find('.'); dot != std::string::npos) {
    for (std::size_t i = dot + 1; i < code.size(); ++i)
      require(std::isalnum(static_cast<unsigned char>(code[i])), ErrorCode::MalformedRow,
              "bad ICD code '" + std::string(raw) + "'");
    code.resize(dot);
  }
  auto all_digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
      return std::isdigit(static_cast<unsigned char>(ch)) != 0;
    });
  };
  if (era == IcdEra::Icd10) {
    require(code.size() == 3 && std::isalpha(static_cast<unsigned char>(code[0])) &&
                all_digits(std::string_view(code).substr(1)),
            ErrorCode::MalformedRow, "bad ICD-10 code '" + std::string(raw) + "'");
    return (code[0] - 'A') * 100 + std::stoi(code.substr(1));
  }
  if (code.size() == 3 && all_digits(code)) return std::stoi(code);
  if (code.size() == 4 && code[0] == 'E' && all_digits(std::string_view(code).substr(1)))
    return 1000 + std::stoi(code.substr(1));
  if (code.size() == 3 && code[0] == 'V' && all_digits(std::string_view(code).substr(1)))
    return 2000 + std::stoi(code.substr(1));
  throw Error(ErrorCode::MalformedRow,
              "bad " + std::string(era_name(era)) + " code '" + std::string(raw) + "'");
}

struct IcdRange {
  std::string first;
  std::string last;  // inclusive
  std::size_t cause = 0;
};

/// Ordered cause labels plus per-era ICD chapter ranges. Codes matching no
/// range fall into the residual cause.
class CauseAxis {
 public:
  CauseAxis() = default;

  CauseAxis(std::vector<std::string> labels, std::size_t residual,
            std::map<IcdEra, std::vector<IcdRange>> icd_map = {})
      : labels_(std::move(labels)), residual_(residual), icd_map_(std::move(icd_map)) {
    require(!labels_.empty(), ErrorCode::InvalidArgument, "cause axis is empty");
    require(residual_ < labels_.size(), ErrorCode::InvalidArgument,
            "residual cause index out of range");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        require(labels_[i] != labels_[j], ErrorCode::InvalidArgument,
                "duplicate cause label " + labels_[i]);
    for (const auto& [era, ranges] : icd_map_) {
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        require(ranges[i].cause < labels_.size() && ranges[i].cause != residual_,
                ErrorCode::InvalidArgument, "ICD range mapped to invalid cause");
        const int a0 = icd_code_key(ranges[i].first, era), a1 = icd_code_key(ranges[i].last, era);
        require(a0 <= a1, ErrorCode::InvalidArgument, "ICD range reversed");
        for (std::size_t j = 0; j < i; ++j) {
          const int b0 = icd_code_key(ranges[j].first, era),
                    b1 = icd_code_key(ranges[j].last, era);
          require(a1 < b0 || b1 < a0, ErrorCode::InvalidArgument,
                  "overlapping ICD ranges in " + std::string(era_name(era)));
        }
      }
    }
  }

  /// The six-group classification: infectious, cancer, circulatory,
  /// respiratory, external, and everything else (residual, incl. COVID-19).
  static CauseAxis six_group() {
    std::map<IcdEra, std::vector<IcdRange>> map;
    map[IcdEra::Icd10] = {{"A00", "B99", 0}, {"C00", "D48", 1}, {"I00", "I99", 2},
                          {"J00", "J98", 3}, {"V00", "Y89", 4}};
    map[IcdEra::Icd9] = {{"001", "139", 0}, {"140", "239", 1}, {"390", "437", 2},
                         {"460", "519", 3}, {"E800", "E999", 4}};
    map[IcdEra::Icd8] = {{"001", "136", 0}, {"140", "239", 1}, {"390", "458", 2},
                         {"460", "519", 3}, {"E810", "E999", 4}};
    return CauseAxis({"Infectious", "Cancer", "Circulatory", "Respiratory", "External",
                      "Other+COVID"},
                     5, std::move(map));
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t residual() const { return residual_; }
  const std::map<IcdEra, std::vector<IcdRange>>& icd_map() const { return icd_map_; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    return std::nullopt;
  }

  std::size_t classify(std::string_view code, IcdEra era) const {
    const int key = icd_code_key(code, era);
    auto it = icd_map_.find(era);
    if (it == icd_map_.end()) return residual_;
    for (const auto& range : it->second)
      if (key >= icd_code_key(range.first, era) && key <= icd_code_key(range.last, era))
        return range.cause;
    return residual_;
  }

 private:
  std::vector<std::string> labels_;
  std::size_t residual_ = 0;
  std::map<IcdEra, std::vector<IcdRange>> icd_map_;
};

}  // namespace lingermort
