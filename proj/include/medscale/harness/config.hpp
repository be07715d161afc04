#pragma once

// Flat key-value configuration:
//
//   # comment
//   scenario = ci/linear/case1
//   n = 10000
//   mediators = M1, M2
//
// One `key = value` per line; blank lines and lines starting with '#' are
// ignored. Later keys override earlier ones. Inline form separates pairs with
// ';' instead of newlines.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "medscale/error.hpp"
#include "medscale/harness/csv.hpp"
#include "medscale/simgen.hpp"

namespace medscale::harness {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trimmed(std::string_view s) { return std::string(medscale::harness::detail::trim(s)); }

inline void parse_pair(KeyValues& out, std::string_view line, const std::string& source, int line_no) {
  const auto text = trim(line);
  if (text.empty() || text.front() == '#') return;
  const auto eq = text.find('=');
  require(eq != std::string_view::npos, ErrorKind::invalid_argument,
          source + ":" + std::to_string(line_no) + ": expected key = value");
  const std::string key = trimmed(text.substr(0, eq));
  require(!key.empty(), ErrorKind::invalid_argument, source + ":" + std::to_string(line_no) + ": empty key");
  out[key] = trimmed(text.substr(eq + 1));
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>") {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) detail::parse_pair(out, line, source, ++line_no);
  return out;
}

inline KeyValues parse_inline_key_values(std::string_view text) {
  KeyValues out;
  int item = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(';', start);
    const auto piece = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    detail::parse_pair(out, piece, "<inline>", ++item);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open config '" + path + "'");
  return parse_key_values(in, path);
}

/// Comma-separated list, whitespace trimmed, empty items skipped.
inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    auto item = detail::trimmed(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

/// Mapping from keys outcome, exposure, mediators, covariates, outcome_kind.
inline ColumnMapping mapping_from(const KeyValues& kv) {
  auto get = [&](const std::string& key) -> std::string {
    const auto it = kv.find(key);
    return it == kv.end() ? std::string{} : it->second;
  };
  ColumnMapping m;
  m.outcome = get("outcome");
  m.exposure = get("exposure");
  m.mediators = split_list(get("mediators"));
  m.covariates = split_list(get("covariates"));
  if (const auto kind = get("outcome_kind"); !kind.empty()) m.outcome_kind = parse_outcome_kind(kind);
  m.validate();
  return m;
}

/// `spec` is a path to a key-value file if one exists there, else an inline
/// "outcome=Y;exposure=X;mediators=M1,M2" string.
inline ColumnMapping load_mapping(const std::string& spec) {
  if (std::filesystem::is_regular_file(spec)) return mapping_from(load_key_values(spec));
  return mapping_from(parse_inline_key_values(spec));
}

// ---------------------------------------------------------------------------
// Scenarios as key-value files. Vectors and row-major matrices are
// comma-separated; eta is d x q and sigma_e is d x d.

namespace detail {

inline std::string join_reals(const double* data, Eigen::Index count) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < count; ++i) out << (i ? ", " : "") << data[i];
  return out.str();
}

inline std::string join_vector(const Eigen::VectorXd& v) { return join_reals(v.data(), v.size()); }

inline std::string join_matrix(const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  return join_reals(r.data(), r.size());
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    const auto v = parse_real(item);
    require(v.has_value(), ErrorKind::invalid_argument, "scenario key '" + key + "': bad number '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

inline KeyValues scenario_to_key_values(const SimScenario& s) {
  const auto& p = s.params;
  auto real = [](double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
  };
  return {{"n", std::to_string(s.n)},
          {"outcome_kind", std::string(to_string(p.outcome_kind))},
          {"exposure_case", std::to_string(static_cast<int>(s.exposure_case))},
          {"covariate_sd", real(s.covariate_sd)},
          {"c", real(p.c)},
          {"gamma", real(p.gamma)},
          {"sigma_eps", real(p.sigma_eps)},
          {"alpha", detail::join_vector(p.alpha)},
          {"beta", detail::join_vector(p.beta)},
          {"c_k", detail::join_vector(p.c_k)},
          {"theta", detail::join_vector(p.theta)},
          {"eta", detail::join_matrix(p.eta)},
          {"sigma_e", detail::join_matrix(p.sigma_e)}};
}

inline SimScenario scenario_from_key_values(const KeyValues& kv) {
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    require(it != kv.end(), ErrorKind::invalid_argument, "scenario is missing key '" + key + "'");
    return it->second;
  };
  auto scalar = [&](const std::string& key) {
    const auto v = detail::parse_reals(key, get(key));
    require(v.size() == 1, ErrorKind::invalid_argument, "scenario key '" + key + "' must hold one number");
    return v.front();
  };
  auto vector_of = [&](const std::string& key) {
    const auto v = detail::parse_reals(key, get(key));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };

  SimScenario s;
  auto& p = s.params;
  s.n = static_cast<std::int64_t>(scalar("n"));
  p.outcome_kind = parse_outcome_kind(get("outcome_kind"));
  s.exposure_case = static_cast<ExposureCase>(static_cast<int>(scalar("exposure_case")));
  s.covariate_sd = scalar("covariate_sd");
  p.c = scalar("c");
  p.gamma = scalar("gamma");
  p.sigma_eps = scalar("sigma_eps");
  p.alpha = vector_of("alpha");
  p.beta = vector_of("beta");
  p.c_k = vector_of("c_k");
  p.theta = vector_of("theta");
  const Eigen::Index d = p.alpha.size();
  const Eigen::Index q = p.theta.size();
  auto matrix = [&](const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    const auto v = detail::parse_reals(key, get(key));
    require(static_cast<Eigen::Index>(v.size()) == rows * cols, ErrorKind::invalid_argument,
            "scenario key '" + key + "' needs " + std::to_string(rows * cols) + " values");
    return Eigen::MatrixXd(
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows, cols));
  };
  p.eta = matrix("eta", d, q);
  p.sigma_e = matrix("sigma_e", d, d);
  s.validate();
  return s;
}

inline void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [key, value] : kv) out << key << " = " << value << '\n';
}

}  // namespace medscale::harness
