#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "medscale/error.hpp"

namespace medscale {

enum class OutcomeKind { continuous, binary };

constexpr std::string_view to_string(OutcomeKind kind) noexcept {
  return kind == OutcomeKind::continuous ? "continuous" : "binary";
}

inline OutcomeKind parse_outcome_kind(std::string_view text) {
  if (text == "continuous" || text == "linear") return OutcomeKind::continuous;
  if (text == "binary" || text == "logistic") return OutcomeKind::binary;
  fail(ErrorKind::invalid_argument, "unknown outcome kind '" + std::string(text) + "'");
}

/// Column-major table: exposure X (n), mediators M (n x d), outcome Y (n), covariates Z (n x q).
struct Dataset {
  Eigen::VectorXd exposure;
  Eigen::MatrixXd mediators;
  Eigen::VectorXd outcome;
  Eigen::MatrixXd covariates;

  std::string exposure_name = "X";
  std::string outcome_name = "Y";
  std::vector<std::string> mediator_names;
  std::vector<std::string> covariate_names;

  Eigen::Index rows() const { return exposure.size(); }
  Eigen::Index mediator_count() const { return mediators.cols(); }
  Eigen::Index covariate_count() const { return covariates.cols(); }

  /// Outcome regressors: intercept, X, M_1..M_d, Z_1..Z_q.
  Eigen::Index outcome_regressors() const { return 2 + mediator_count() + covariate_count(); }
  /// Mediator regressors: intercept, X, Z_1..Z_q.
  Eigen::Index mediator_regressors() const { return 2 + covariate_count(); }

  void validate() const {
    const Eigen::Index n = rows();
    require(outcome.size() == n && mediators.rows() == n && covariates.rows() == n, ErrorKind::invalid_argument,
            "dataset columns have inconsistent lengths");
    require(mediator_count() >= 1, ErrorKind::invalid_argument, "dataset needs at least one mediator");
  }

  /// Default names X, M1..Md, Y, Z1..Zq where none were given.
  void fill_default_names() {
    if (mediator_names.size() != static_cast<std::size_t>(mediator_count())) {
      mediator_names.clear();
      for (Eigen::Index k = 0; k < mediator_count(); ++k) mediator_names.push_back("M" + std::to_string(k + 1));
    }
    if (covariate_names.size() != static_cast<std::size_t>(covariate_count())) {
      covariate_names.clear();
      for (Eigen::Index j = 0; j < covariate_count(); ++j) covariate_names.push_back("Z" + std::to_string(j + 1));
    }
  }
};

/// Rows of `data` selected by `indices`, in that order.
inline Dataset select_rows(const Dataset& data, std::span<const std::int64_t> indices) {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Dataset out;
  out.exposure.resize(m);
  out.outcome.resize(m);
  out.mediators.resize(m, data.mediator_count());
  out.covariates.resize(m, data.covariate_count());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(r)]);
    out.exposure(r) = data.exposure(i);
    out.outcome(r) = data.outcome(i);
    out.mediators.row(r) = data.mediators.row(i);
    out.covariates.row(r) = data.covariates.row(i);
  }
  out.exposure_name = data.exposure_name;
  out.outcome_name = data.outcome_name;
  out.mediator_names = data.mediator_names;
  out.covariate_names = data.covariate_names;
  return out;
}

/// Which columns enter a regression design, in order: intercept, exposure,
/// mediators (by index), covariates (by index).
struct DesignSpec {
  bool include_intercept = true;
  bool include_exposure = true;
  std::vector<Eigen::Index> mediator_cols;
  std::vector<Eigen::Index> covariate_cols;

  Eigen::Index columns() const {
    return (include_intercept ? 1 : 0) + (include_exposure ? 1 : 0) +
           static_cast<Eigen::Index>(mediator_cols.size() + covariate_cols.size());
  }

  /// Y on (1, X, M, Z).
  static DesignSpec outcome(const Dataset& data) {
    DesignSpec spec;
    for (Eigen::Index k = 0; k < data.mediator_count(); ++k) spec.mediator_cols.push_back(k);
    for (Eigen::Index j = 0; j < data.covariate_count(); ++j) spec.covariate_cols.push_back(j);
    return spec;
  }

  /// M_k on (1, X, Z).
  static DesignSpec mediator(const Dataset& data) {
    DesignSpec spec;
    for (Eigen::Index j = 0; j < data.covariate_count(); ++j) spec.covariate_cols.push_back(j);
    return spec;
  }
};

namespace detail {

template <typename RowAt>
Eigen::MatrixXd build_design(const Dataset& data, const DesignSpec& spec, Eigen::Index m, RowAt row_at) {
  require(spec.columns() >= 1, ErrorKind::invalid_argument, "design spec selects no columns");
  Eigen::MatrixXd x(m, spec.columns());
  Eigen::Index c = 0;
  if (spec.include_intercept) x.col(c++).setOnes();
  if (spec.include_exposure) {
    for (Eigen::Index r = 0; r < m; ++r) x(r, c) = data.exposure(row_at(r));
    ++c;
  }
  for (auto k : spec.mediator_cols) {
    for (Eigen::Index r = 0; r < m; ++r) x(r, c) = data.mediators(row_at(r), k);
    ++c;
  }
  for (auto j : spec.covariate_cols) {
    for (Eigen::Index r = 0; r < m; ++r) x(r, c) = data.covariates(row_at(r), j);
    ++c;
  }
  return x;
}

}  // namespace detail

inline Eigen::MatrixXd design_matrix(const Dataset& data, const DesignSpec& spec) {
  return detail::build_design(data, spec, data.rows(), [](Eigen::Index r) { return r; });
}

inline Eigen::MatrixXd design_matrix(const Dataset& data, const DesignSpec& spec,
                                     std::span<const std::int64_t> rows) {
  return detail::build_design(data, spec, static_cast<Eigen::Index>(rows.size()),
                              [&](Eigen::Index r) { return static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]); });
}

}  // namespace medscale
