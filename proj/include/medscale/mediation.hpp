#pragma once

// Multi-mediator system fits, closed-form natural effects and the Sobel
// standard error of a coefficient product.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medscale/dataset.hpp"
#include "medscale/error.hpp"
#include "medscale/regression.hpp"

namespace medscale {

/// Coefficients and error structure of the outcome and mediator equations.
struct ModelParams {
  double c = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd theta;
  Eigen::VectorXd c_k;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd eta;      // d x q
  Eigen::MatrixXd sigma_e;  // d x d
  double sigma_eps = 1.0;   // outcome error SD (continuous only)
  OutcomeKind outcome_kind = OutcomeKind::continuous;

  Eigen::Index mediator_count() const { return alpha.size(); }
  Eigen::Index covariate_count() const { return theta.size(); }

  /// alpha_k * beta_k per mediator.
  Eigen::VectorXd products() const { return alpha.cwiseProduct(beta); }

  void validate() const {
    const Eigen::Index d = alpha.size();
    const Eigen::Index q = theta.size();
    require(d >= 1, ErrorKind::invalid_argument, "model needs at least one mediator");
    require(beta.size() == d && c_k.size() == d, ErrorKind::invalid_argument, "alpha, beta and c_k lengths differ");
    require(eta.rows() == d && eta.cols() == q, ErrorKind::invalid_argument, "eta must be d x q");
    require(sigma_e.rows() == d && sigma_e.cols() == d, ErrorKind::invalid_argument, "sigma_e must be d x d");
    require(sigma_e.isApprox(sigma_e.transpose()), ErrorKind::invalid_argument, "sigma_e must be symmetric");
    require(sigma_eps >= 0.0, ErrorKind::invalid_argument, "sigma_eps must be non-negative");
  }
};

struct MediatorEstimate {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double se_alpha = 0.0;
  double se_beta = 0.0;
  double product = 0.0;
  double sobel_se = 0.0;
};

struct MediationFit {
  OutcomeKind kind = OutcomeKind::continuous;
  double gamma_hat = 0.0;
  std::vector<MediatorEstimate> mediators;
  FitResult outcome_fit;
  std::vector<FitResult> mediator_fits;
};

/// Exposure contrast x versus x*.
struct EffectQuery {
  double x = 1.0;
  double x_star = 0.0;

  double contrast() const { return x - x_star; }
};

struct LinearEffects {
  double nde = 0.0;
  double nie = 0.0;
  double te = 0.0;
  std::vector<double> per_mediator_nie;
};

struct OddsRatioEffects {
  double nde_or = 1.0;
  double nie_or = 1.0;
  double te_or = 1.0;
  /// log NDE, log NIE, log TE.
  double log_nde = 0.0;
  double log_nie = 0.0;
  double log_te = 0.0;
};

struct RareOutcomeCheck {
  double prevalence = 0.0;
  bool warning = false;
  /// Diagnostic convention, not a property of the estimator.
  static constexpr double threshold = 0.1;
};

/// Delta-method SE of alpha*beta: sqrt(alpha^2 se_beta^2 + beta^2 se_alpha^2).
inline double sobel_se(double alpha_hat, double se_alpha, double beta_hat, double se_beta) {
  // NaN standard errors (no residual df) pass through.
  require(!(se_alpha < 0.0) && !(se_beta < 0.0), ErrorKind::invalid_argument, "standard errors must be non-negative");
  const double a = alpha_hat * se_beta;
  const double b = beta_hat * se_alpha;
  return std::sqrt(a * a + b * b);
}

namespace detail {

inline MediationFit assemble(OutcomeKind kind, FitResult outcome, std::vector<FitResult> mediator_fits) {
  MediationFit fit;
  fit.kind = kind;
  fit.gamma_hat = outcome.coefficients(1);
  fit.mediators.resize(mediator_fits.size());
  for (std::size_t k = 0; k < mediator_fits.size(); ++k) {
    auto& est = fit.mediators[k];
    const auto col = static_cast<Eigen::Index>(2 + k);
    est.alpha_hat = mediator_fits[k].coefficients(1);
    est.se_alpha = mediator_fits[k].std_errors(1);
    est.beta_hat = outcome.coefficients(col);
    est.se_beta = outcome.std_errors(col);
    est.product = est.alpha_hat * est.beta_hat;
    est.sobel_se = sobel_se(est.alpha_hat, est.se_alpha, est.beta_hat, est.se_beta);
  }
  fit.outcome_fit = std::move(outcome);
  fit.mediator_fits = std::move(mediator_fits);
  return fit;
}

inline FitResult checked_outcome(OutcomeKind kind, const auto& fit_fn) {
  try {
    FitResult fit = fit_fn();
    if (kind == OutcomeKind::binary && !fit.converged) {
      fail(ErrorKind::numeric, "logistic fit did not converge in " + std::to_string(fit.iterations) + " iterations");
    }
    return fit;
  } catch (const Error& e) {
    throw e.with_context("outcome regression");
  }
}

inline std::vector<FitResult> checked_mediators(const auto& fit_fn) {
  try {
    return fit_fn();
  } catch (const Error& e) {
    throw e.with_context("mediator regressions");
  }
}

}  // namespace detail

/// Outcome regression of Y on (1, X, M, Z) (least squares or logistic) and the
/// d mediator regressions of M_k on (1, X, Z), with per-mediator products and
/// Sobel standard errors.
inline MediationFit fit_mediation(const Dataset& data, OutcomeKind kind) {
  data.validate();
  const Eigen::MatrixXd outcome_design = design_matrix(data, DesignSpec::outcome(data));
  const Eigen::MatrixXd mediator_design = design_matrix(data, DesignSpec::mediator(data));
  FitResult outcome = detail::checked_outcome(kind, [&] {
    return kind == OutcomeKind::continuous ? fit_linear(outcome_design, data.outcome)
                                           : fit_logistic(outcome_design, data.outcome);
  });
  auto mediators = detail::checked_mediators([&] { return fit_linear_multi(mediator_design, data.mediators); });
  return detail::assemble(kind, std::move(outcome), std::move(mediators));
}

/// Row-gathered regression inputs for a subset of a dataset, reusable across
/// several weightings of the same rows.
struct MediationDesign {
  Eigen::MatrixXd outcome_design;   // 1, X, M, Z
  Eigen::VectorXd outcome;
  Eigen::MatrixXd mediator_design;  // 1, X, Z
  Eigen::MatrixXd mediators;

  static MediationDesign gather(const Dataset& data, std::span<const std::int64_t> rows) {
    MediationDesign out;
    out.outcome_design = design_matrix(data, DesignSpec::outcome(data), rows);
    out.mediator_design = design_matrix(data, DesignSpec::mediator(data), rows);
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.outcome.resize(m);
    out.mediators.resize(m, data.mediator_count());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
      out.outcome(r) = data.outcome(i);
      out.mediators.row(r) = data.mediators.row(i);
    }
    return out;
  }
};

/// The mediation system on gathered rows, unweighted when `weights` is empty.
inline MediationFit fit_mediation(const MediationDesign& design, OutcomeKind kind,
                                  std::span<const std::int64_t> weights = {}, const LogisticOptions& opts = {}) {
  const bool weighted = !weights.empty();
  FitResult outcome = detail::checked_outcome(kind, [&] {
    if (kind == OutcomeKind::continuous) {
      return weighted ? fit_linear_weighted(design.outcome_design, design.outcome, weights)
                      : fit_linear(design.outcome_design, design.outcome);
    }
    return weighted ? fit_logistic_weighted(design.outcome_design, design.outcome, weights, opts)
                    : fit_logistic(design.outcome_design, design.outcome, opts);
  });
  auto mediators = detail::checked_mediators([&] {
    return weighted ? fit_linear_multi_weighted(design.mediator_design, design.mediators, weights)
                    : fit_linear_multi(design.mediator_design, design.mediators);
  });
  return detail::assemble(kind, std::move(outcome), std::move(mediators));
}

/// The same system fitted on the rows `rows` of `data` with integer frequency weights.
inline MediationFit fit_mediation_weighted(const Dataset& data, OutcomeKind kind, std::span<const std::int64_t> rows,
                                           std::span<const std::int64_t> weights, const LogisticOptions& opts = {}) {
  require(rows.size() == weights.size(), ErrorKind::invalid_argument, "row and weight counts differ");
  return fit_mediation(MediationDesign::gather(data, rows), kind, weights, opts);
}

/// Natural direct, indirect and total effects for the continuous-outcome model.
inline LinearEffects effects_linear(const ModelParams& params, const EffectQuery& query = {}) {
  require(params.outcome_kind == OutcomeKind::continuous, ErrorKind::invalid_argument,
          "linear effects need a continuous outcome model");
  require(params.alpha.size() == params.beta.size(), ErrorKind::invalid_argument, "alpha and beta lengths differ");
  const double delta = query.contrast();
  LinearEffects out;
  out.nde = params.gamma * delta;
  out.per_mediator_nie.resize(static_cast<std::size_t>(params.alpha.size()));
  for (Eigen::Index k = 0; k < params.alpha.size(); ++k) {
    out.per_mediator_nie[static_cast<std::size_t>(k)] = params.alpha(k) * params.beta(k) * delta;
  }
  for (double v : out.per_mediator_nie) out.nie += v;
  out.te = out.nde + out.nie;
  return out;
}

/// Natural effects on the odds-ratio scale for a binary outcome (rare-outcome approximation).
inline OddsRatioEffects effects_logistic_or(const ModelParams& params, const EffectQuery& query = {}) {
  require(params.outcome_kind == OutcomeKind::binary, ErrorKind::invalid_argument,
          "odds-ratio effects need a binary outcome model");
  require(params.alpha.size() == params.beta.size(), ErrorKind::invalid_argument, "alpha and beta lengths differ");
  const double delta = query.contrast();
  double indirect = 0.0;
  for (Eigen::Index k = 0; k < params.alpha.size(); ++k) indirect += params.alpha(k) * params.beta(k);

  OddsRatioEffects out;
  out.log_nde = params.gamma * delta;
  out.log_nie = indirect * delta;
  out.log_te = out.log_nde + out.log_nie;
  for (double e : {out.log_nde, out.log_nie, out.log_te}) {
    require(std::abs(e) <= 700.0, ErrorKind::range, "odds-ratio exponent out of range: " + std::to_string(e));
  }
  out.nde_or = std::exp(out.log_nde);
  out.nie_or = std::exp(out.log_nie);
  out.te_or = out.nde_or * out.nie_or;
  return out;
}

/// Outcome prevalence, flagged when it exceeds RareOutcomeCheck::threshold.
inline RareOutcomeCheck rare_outcome_check(const ModelParams& params, const Dataset& data) {
  require(params.outcome_kind == OutcomeKind::binary, ErrorKind::invalid_argument,
          "rare-outcome check applies to binary outcomes");
  require(data.outcome.size() > 0, ErrorKind::empty_data, "no outcome values");
  RareOutcomeCheck check;
  check.prevalence = data.outcome.mean();
  check.warning = check.prevalence > RareOutcomeCheck::threshold;
  return check;
}

/// Point estimates of a fit arranged as ModelParams (error structure left empty).
inline ModelParams estimated_params(const MediationFit& fit, const Dataset& data) {
  ModelParams p;
  const Eigen::Index d = data.mediator_count();
  const Eigen::Index q = data.covariate_count();
  const auto& oc = fit.outcome_fit.coefficients;
  p.outcome_kind = fit.kind;
  p.c = oc(0);
  p.gamma = oc(1);
  p.beta = oc.segment(2, d);
  p.theta = oc.segment(2 + d, q);
  p.c_k.resize(d);
  p.alpha.resize(d);
  p.eta.resize(d, q);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& mc = fit.mediator_fits[static_cast<std::size_t>(k)].coefficients;
    p.c_k(k) = mc(0);
    p.alpha(k) = mc(1);
    p.eta.row(k) = mc.segment(2, q).transpose();
  }
  p.sigma_e = Eigen::MatrixXd::Zero(d, d);
  if (fit.kind == OutcomeKind::continuous) p.sigma_eps = std::sqrt(fit.outcome_fit.residual_variance);
  return p;
}

/// Identification assumptions the effect formulas rely on. They are reported,
/// never checked.
inline const std::vector<std::string>& identification_assumptions() {
  static const std::vector<std::string> notes = {
      "consistency and no interference between units (single version of the exposure)",
      "mediators and outcome are measured without error",
      "no unmeasured exposure-outcome, mediator-outcome or exposure-mediator confounding given Z, "
      "and no exposure-induced mediator-outcome confounding",
      "mediators do not cause one another",
  };
  return notes;
}

}  // namespace medscale
