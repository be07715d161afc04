#pragma once

// CSV ingestion into a Dataset and CSV export of datasets.
//
// Input: header row, comma-delimited, optional double quotes around cells,
// decimal-point reals. Rows with a missing or unparseable mapped cell are
// dropped (listwise deletion); binary outcomes must be literally 0 or 1.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "medscale/dataset.hpp"
#include "medscale/error.hpp"

namespace medscale::harness {

struct ColumnMapping {
  std::string outcome;
  std::string exposure;
  std::vector<std::string> mediators;
  std::vector<std::string> covariates;
  OutcomeKind outcome_kind = OutcomeKind::continuous;

  void validate() const {
    require(!outcome.empty() && !exposure.empty(), ErrorKind::schema, "mapping needs outcome and exposure columns");
    require(!mediators.empty(), ErrorKind::schema, "mapping needs at least one mediator column");
    std::set<std::string> seen;
    auto add = [&](const std::string& name) {
      require(seen.insert(name).second, ErrorKind::schema, "column '" + name + "' mapped more than once");
    };
    add(outcome);
    add(exposure);
    for (const auto& m : mediators) add(m);
    for (const auto& z : covariates) add(z);
  }
};

struct LoadResult {
  Dataset data;
  std::int64_t rows_read = 0;
  std::int64_t rows_dropped = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Parses CSV text already in memory; `source` names it in error messages.
inline LoadResult parse_csv(std::istream& in, const ColumnMapping& mapping, const std::string& source = "<input>") {
  mapping.validate();
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::empty_data, source + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::map<std::string, std::size_t> position;
  const auto header = detail::split_csv_line(line);
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(std::string(detail::trim(header[i])), i);
  auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    require(it != position.end(), ErrorKind::schema, source + ": column '" + name + "' not found in header");
    return it->second;
  };

  const std::size_t y_col = column(mapping.outcome);
  const std::size_t x_col = column(mapping.exposure);
  std::vector<std::size_t> m_cols, z_cols;
  for (const auto& m : mapping.mediators) m_cols.push_back(column(m));
  for (const auto& z : mapping.covariates) z_cols.push_back(column(z));

  std::vector<double> xs, ys, ms, zs;
  std::vector<std::int64_t> bad_outcome_rows;
  LoadResult result;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++result.rows_read;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::size_t col) -> std::optional<double> {
      if (col >= cells.size()) return std::nullopt;
      return detail::parse_real(cells[col]);
    };

    bool ok = true;
    const auto y = cell(y_col);
    const auto x = cell(x_col);
    ok = ok && y && x;
    std::vector<double> row_m, row_z;
    for (auto c : m_cols) {
      const auto v = cell(c);
      ok = ok && v.has_value();
      row_m.push_back(v.value_or(0.0));
    }
    for (auto c : z_cols) {
      const auto v = cell(c);
      ok = ok && v.has_value();
      row_z.push_back(v.value_or(0.0));
    }
    if (!ok) {
      ++result.rows_dropped;
      continue;
    }
    if (mapping.outcome_kind == OutcomeKind::binary && *y != 0.0 && *y != 1.0) {
      bad_outcome_rows.push_back(line_no);
      continue;
    }
    xs.push_back(*x);
    ys.push_back(*y);
    ms.insert(ms.end(), row_m.begin(), row_m.end());
    zs.insert(zs.end(), row_z.begin(), row_z.end());
  }

  if (!bad_outcome_rows.empty()) {
    std::ostringstream msg;
    msg << source << ": binary outcome '" << mapping.outcome << "' must be 0 or 1; offending lines:";
    for (std::size_t i = 0; i < bad_outcome_rows.size() && i < 20; ++i) msg << ' ' << bad_outcome_rows[i];
    if (bad_outcome_rows.size() > 20) msg << " ... (" << bad_outcome_rows.size() << " total)";
    fail(ErrorKind::validation, msg.str());
  }
  require(!xs.empty(), ErrorKind::empty_data, source + ": no usable rows after dropping missing values");

  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto d = static_cast<Eigen::Index>(m_cols.size());
  const auto q = static_cast<Eigen::Index>(z_cols.size());
  Dataset& data = result.data;
  data.exposure = Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
  data.outcome = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  data.mediators = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ms.data(), n, d);
  data.covariates = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(zs.data(), n, q);
  data.exposure_name = mapping.exposure;
  data.outcome_name = mapping.outcome;
  data.mediator_names = mapping.mediators;
  data.covariate_names = mapping.covariates;
  return result;
}

inline LoadResult load_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open '" + path + "'");
  return parse_csv(in, mapping, path);
}

/// Writes X, M..., Y, Z... with full round-trip precision.
inline void write_csv(std::ostream& out, const Dataset& data) {
  Dataset named = data;
  named.fill_default_names();
  out << named.exposure_name;
  for (const auto& m : named.mediator_names) out << ',' << m;
  out << ',' << named.outcome_name;
  for (const auto& z : named.covariate_names) out << ',' << z;
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    out << data.exposure(i);
    for (Eigen::Index k = 0; k < data.mediator_count(); ++k) out << ',' << data.mediators(i, k);
    out << ',' << data.outcome(i);
    for (Eigen::Index j = 0; j < data.covariate_count(); ++j) out << ',' << data.covariates(i, j);
    out << '\n';
  }
}

/// Mapping matching the column names `write_csv` emits.
inline ColumnMapping default_mapping(const Dataset& data, OutcomeKind kind) {
  Dataset named = data;
  named.fill_default_names();
  return {named.outcome_name, named.exposure_name, named.mediator_names, named.covariate_names, kind};
}

}  // namespace medscale::harness
