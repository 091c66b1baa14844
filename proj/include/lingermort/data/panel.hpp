#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/data/axes.hpp"
#include "lingermort/data/tensor.hpp"
#include "lingermort/io/csv.hpp"

namespace lingermort {

/// One record of the canonical long format.
struct CanonicalRow {
  std::string age_group;
  int year = 0;
  std::string cause;
  double deaths = 0.0;
  double population = 0.0;
};

/// Dense deaths/exposure panel on labeled axes. Immutable after construction.
class MortalityPanel {
 public:
  MortalityPanel() = default;

  MortalityPanel(AgeAxis ages, std::vector<int> years, CauseAxis causes, Tensor3 deaths,
                 Eigen::MatrixXd exposures)
      : ages_(std::move(ages)),
        years_(std::move(years)),
        causes_(std::move(causes)),
        deaths_(std::move(deaths)),
        exposures_(std::move(exposures)) {
    const std::size_t X = ages_.size(), T = years_.size(), C = causes_.size();
    require(T >= 1, ErrorCode::InvalidArgument, "panel has no years");
    require(deaths_.ages() == X && deaths_.years() == T && deaths_.causes() == C,
            ErrorCode::DimensionMismatch, "deaths tensor does not match the axes");
    require(static_cast<std::size_t>(exposures_.rows()) == X &&
                static_cast<std::size_t>(exposures_.cols()) == T,
            ErrorCode::DimensionMismatch, "exposure matrix does not match the axes");
    for (std::size_t t = 1; t < T; ++t)
      require(years_[t] == years_[t - 1] + 1, ErrorCode::RaggedYears,
              "gap between " + std::to_string(years_[t - 1]) + " and " +
                  std::to_string(years_[t]));
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t t = 0; t < T; ++t)
        require(std::isfinite(exposures_(x, t)) && exposures_(x, t) > 0.0,
                ErrorCode::NonPositiveExposure, cell_name(x, t));
    rates_ = Tensor3(X, T, C);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t x = 0; x < X; ++x) {
          const double d = deaths_(x, t, c);
          require(std::isfinite(d) && d >= 0.0, ErrorCode::NegativeDeaths,
                  cell_name(x, t, c));
          rates_(x, t, c) = d / exposures_(x, t);
        }
  }

  const AgeAxis& ages() const { return ages_; }
  const CauseAxis& causes() const { return causes_; }
  const std::vector<int>& years() const { return years_; }
  const Tensor3& deaths() const { return deaths_; }
  const Eigen::MatrixXd& exposures() const { return exposures_; }
  const Tensor3& rates() const { return rates_; }

  std::size_t num_ages() const { return ages_.size(); }
  std::size_t num_years() const { return years_.size(); }
  std::size_t num_causes() const { return causes_.size(); }
  int first_year() const { return years_.front(); }
  int last_year() const { return years_.back(); }

  bool has_year(int year) const { return year >= first_year() && year <= last_year(); }

  std::size_t year_index(int year) const {
    require(has_year(year), ErrorCode::YearOutOfRange,
            std::to_string(year) + " not in " + std::to_string(first_year()) + "-" +
                std::to_string(last_year()));
    return static_cast<std::size_t>(year - first_year());
  }

  /// Sub-panel restricted to [from, to].
  MortalityPanel years_between(int from, int to) const {
    const std::size_t a = year_index(from), b = year_index(to);
    require(a <= b, ErrorCode::InvalidArgument, "empty year window");
    const std::size_t X = num_ages(), C = num_causes(), T = b - a + 1;
    Tensor3 d(X, T, C);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t x = 0; x < X; ++x) d(x, t, c) = deaths_(x, a + t, c);
    std::vector<int> yrs(years_.begin() + static_cast<long>(a),
                         years_.begin() + static_cast<long>(b) + 1);
    return MortalityPanel(ages_, std::move(yrs), causes_, std::move(d),
                          exposures_.middleCols(static_cast<long>(a), static_cast<long>(T)));
  }

  std::vector<CanonicalRow> to_rows() const {
    std::vector<CanonicalRow> rows;
    rows.reserve(deaths_.size());
    for (std::size_t x = 0; x < num_ages(); ++x)
      for (std::size_t t = 0; t < num_years(); ++t)
        for (std::size_t c = 0; c < num_causes(); ++c)
          rows.push_back({ages_.bands()[x].label, years_[t], causes_.labels()[c],
                          deaths_(x, t, c), exposures_(x, t)});
    return rows;
  }

 private:
  std::string cell_name(std::size_t x, std::size_t t) const {
    return "age " + ages_.bands()[x].label + ", year " + std::to_string(years_[t]);
  }
  std::string cell_name(std::size_t x, std::size_t t, std::size_t c) const {
    return cell_name(x, t) + ", cause " + causes_.labels()[c];
  }

  AgeAxis ages_;
  std::vector<int> years_;
  CauseAxis causes_;
  Tensor3 deaths_;
  Eigen::MatrixXd exposures_;
  Tensor3 rates_;
};

namespace detail {

inline bool all_integer_labels(const std::vector<std::string>& labels) {
  return std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
      return std::isdigit(static_cast<unsigned char>(ch)) != 0;
    });
  });
}

/// Orders the distinct cause labels: the built-in six-group order when the
/// labels match it, numeric order for integer labels, otherwise sorted.
/// The last cause is taken as the residual one unless the six-group axis applies.
inline CauseAxis infer_cause_axis(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  CauseAxis six = CauseAxis::six_group();
  auto six_sorted = six.labels();
  std::sort(six_sorted.begin(), six_sorted.end());
  if (labels == six_sorted) return six;
  if (all_integer_labels(labels))
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return std::stoll(a) < std::stoll(b);
    });
  const std::size_t residual = labels.size() - 1;
  return CauseAxis(std::move(labels), residual);
}

}  // namespace detail

/// Builds a dense panel from long-format rows. Axes are sorted (ages by lower
/// bound, years ascending, causes as in detail::infer_cause_axis).
inline MortalityPanel panel_from_rows(const std::vector<CanonicalRow>& rows,
                                      const CauseAxis* cause_axis = nullptr,
                                      double open_offset = AgeAxis::kDefaultOpenOffset) {
  require(!rows.empty(), ErrorCode::EmptyExport, "no data rows");
  std::map<int, std::string> age_by_lo;
  std::set<int> year_set;
  std::vector<std::string> cause_labels;
  for (const auto& row : rows) {
    const int lo = AgeAxis::parse_label(row.age_group).first;
    auto [it, inserted] = age_by_lo.emplace(lo, row.age_group);
    require(inserted || it->second == row.age_group, ErrorCode::InvalidArgument,
            "age groups " + it->second + " and " + row.age_group + " share a lower bound");
    year_set.insert(row.year);
    cause_labels.push_back(row.cause);
  }
  std::vector<std::string> age_labels;
  for (const auto& [lo, label] : age_by_lo) age_labels.push_back(label);
  AgeAxis ages = AgeAxis::from_labels(age_labels, open_offset);
  CauseAxis causes = cause_axis ? *cause_axis : detail::infer_cause_axis(cause_labels);
  std::vector<int> years(year_set.begin(), year_set.end());
  for (std::size_t t = 1; t < years.size(); ++t)
    require(years[t] == years[t - 1] + 1, ErrorCode::RaggedYears,
            "no rows for year " + std::to_string(years[t - 1] + 1));

  const std::size_t X = ages.size(), T = years.size(), C = causes.size();
  Tensor3 deaths(X, T, C);
  std::vector<char> seen(X * T * C, 0);
  Eigen::MatrixXd exposures = Eigen::MatrixXd::Constant(static_cast<long>(X),
                                                        static_cast<long>(T), -1.0);
  std::map<std::string, std::size_t> age_index;
  for (std::size_t x = 0; x < X; ++x) age_index[ages.bands()[x].label] = x;
  for (const auto& row : rows) {
    const std::size_t x = age_index.at(row.age_group);
    const std::size_t t = static_cast<std::size_t>(row.year - years.front());
    auto c_opt = causes.index_of(row.cause);
    require(c_opt.has_value(), ErrorCode::InvalidArgument, "unknown cause " + row.cause);
    const std::size_t c = *c_opt;
    const std::string where = "age " + row.age_group + ", year " + std::to_string(row.year) +
                              ", cause " + row.cause;
    require(!seen[deaths.flat_index(x, t, c)], ErrorCode::MalformedRow, "duplicate row for " + where);
    seen[deaths.flat_index(x, t, c)] = 1;
    require(std::isfinite(row.deaths) && row.deaths >= 0.0, ErrorCode::NegativeDeaths, where);
    require(std::isfinite(row.population) && row.population > 0.0,
            ErrorCode::NonPositiveExposure, where);
    deaths(x, t, c) = row.deaths;
    double& e = exposures(static_cast<long>(x), static_cast<long>(t));
    if (e < 0.0)
      e = row.population;
    else
      require(e == row.population, ErrorCode::InconsistentExposure,
              "age " + row.age_group + ", year " + std::to_string(row.year));
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t x = 0; x < X; ++x)
        require(seen[deaths.flat_index(x, t, c)], ErrorCode::MissingCell,
                "age " + ages.bands()[x].label + ", year " + std::to_string(years[t]) +
                    ", cause " + causes.labels()[c]);
  return MortalityPanel(std::move(ages), std::move(years), std::move(causes), std::move(deaths),
                        std::move(exposures));
}

inline std::vector<CanonicalRow> read_canonical_rows(const std::string& path) {
  const auto lines = io::read_lines(path);
  require(!lines.empty(), ErrorCode::EmptyExport, path + " is empty");
  const auto header = io::split_delimited(lines.front(), ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[io::trim(header[i])] = i;
  for (const char* name : {"age_group", "year", "cause", "deaths", "population"})
    require(col.count(name) > 0, ErrorCode::Schema, std::string("missing column ") + name);
  std::vector<CanonicalRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_delimited(lines[i], ',');
    require(f.size() == header.size(), ErrorCode::MalformedRow,
            "line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
    CanonicalRow row;
    row.age_group = io::trim(f[col["age_group"]]);
    row.year = static_cast<int>(io::parse_int(f[col["year"]], "year"));
    row.cause = io::trim(f[col["cause"]]);
    row.deaths = io::parse_double(f[col["deaths"]], "deaths");
    row.population = io::parse_double(f[col["population"]], "population");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MortalityPanel load_canonical_csv(const std::string& path,
                                         double open_offset = AgeAxis::kDefaultOpenOffset) {
  return panel_from_rows(read_canonical_rows(path), nullptr, open_offset);
}

inline std::string canonical_csv_text(const std::vector<CanonicalRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "age_group,year,cause,deaths,population\n";
  for (const auto& r : rows) {
    auto quote = [](const std::string& s) {
      if (s.find_first_of(",\"") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q.push_back('"');
        q.push_back(ch);
      }
      return q + "\"";
    };
    out << quote(r.age_group) << ',' << r.year << ',' << quote(r.cause) << ',' << r.deaths << ','
        << r.population << '\n';
  }
  return out.str();
}

}  // namespace lingermort
