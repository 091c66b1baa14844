#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "lingermort/core/errors.hpp"
#include "lingermort/data/axes.hpp"
#include "lingermort/data/panel.hpp"
#include "lingermort/io/csv.hpp"

namespace lingermort {

namespace detail {

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

/// "< 1 year" / "1" (infant code) -> "0-1"; "1-4 years" -> "1-4"; "85+ years" -> "85+".
inline std::string normalize_wonder_age(const std::string& raw) {
  std::string s = io::trim(raw);
  const std::string l = lower(s);
  if (l == "1" || l.rfind("< 1", 0) == 0 || l.rfind("<1", 0) == 0) return "0-1";
  if (auto pos = l.find(" year"); pos != std::string::npos) s = io::trim(s.substr(0, pos));
  return s;
}

inline std::size_t find_column(const std::vector<std::string>& header,
                               const std::vector<std::vector<std::string>>& candidates,
                               const std::string& what) {
  for (const auto& all_of : candidates)
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string h = lower(io::trim(header[i]));
      if (std::all_of(all_of.begin(), all_of.end(),
                      [&](const std::string& part) { return h.find(part) != std::string::npos; }))
        return i;
    }
  throw Error(ErrorCode::Schema, "export has no " + what + " column");
}

}  // namespace detail

/// Reads a tab-delimited WONDER export and collapses ICD chapters into the
/// causes of `axis`. Deaths are summed within each (age, year, cause);
/// population must agree across the chapters of an (age, year).
inline std::vector<CanonicalRow> load_wonder_export(const std::string& path,
                                                    const CauseAxis& axis, IcdEra era) {
  const auto lines = io::read_lines(path);
  std::size_t first = 0;
  while (first < lines.size() && io::trim(lines[first]).empty()) ++first;
  require(first < lines.size(), ErrorCode::EmptyExport, path + " has no header");
  const auto header = io::split_delimited(lines[first], '\t');

  const std::size_t notes_col = [&]() -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::lower(io::trim(header[i])) == "notes") return i;
    return header.size();
  }();
  const std::size_t year_col =
      detail::find_column(header, {{"year", "code"}, {"year"}}, "year");
  const std::size_t age_col =
      detail::find_column(header, {{"age group", "code"}, {"age group"}, {"age"}}, "age group");
  const std::size_t cause_col = detail::find_column(
      header, {{"icd", "code"}, {"cause", "code"}, {"icd"}, {"cause"}}, "ICD chapter");
  const std::size_t deaths_col = detail::find_column(header, {{"deaths"}}, "deaths");
  const std::size_t pop_col = detail::find_column(header, {{"population"}}, "population");

  using Key = std::tuple<int, std::string, std::size_t>;  // year, age, cause
  std::map<Key, double> deaths;
  std::map<std::pair<int, std::string>, double> population;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_delimited(lines[i], '\t');
    if (io::trim(f[0]).rfind("Notes", 0) == 0 || io::trim(f[0]).rfind("---", 0) == 0) continue;
    if (notes_col < f.size() && !io::trim(f[notes_col]).empty()) continue;  // totals
    require(f.size() >= header.size(), ErrorCode::MalformedRow,
            "line " + std::to_string(i + 1) + " is short");
    const int year = static_cast<int>(io::parse_int(f[year_col], "year"));
    const std::string age = detail::normalize_wonder_age(f[age_col]);
    if (detail::lower(age).find("not stated") != std::string::npos) continue;
    const std::size_t cause = axis.classify(io::trim(f[cause_col]), era);
    const double d = io::parse_double(f[deaths_col], "deaths");
    const double p = io::parse_double(f[pop_col], "population");
    deaths[{year, age, cause}] += d;
    auto [it, inserted] = population.emplace(std::make_pair(year, age), p);
    require(inserted || it->second == p, ErrorCode::InconsistentExposure,
            "age " + age + ", year " + std::to_string(year));
  }
  require(!deaths.empty(), ErrorCode::EmptyExport, path + " has no data rows");

  // every cause gets a row for every (age, year) seen, zero if no chapter mapped to it
  std::vector<CanonicalRow> rows;
  for (const auto& [ya, pop] : population)
    for (std::size_t c = 0; c < axis.size(); ++c) {
      auto it = deaths.find({ya.first, ya.second, c});
      rows.push_back({ya.second, ya.first, axis.labels()[c],
                      it == deaths.end() ? 0.0 : it->second, pop});
    }
  return rows;
}

}  // namespace lingermort
