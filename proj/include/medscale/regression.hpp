#pragma once

// Ordinary and frequency-weighted least squares, and (weighted) logistic
// maximum likelihood, with standard errors.
//
// Design matrices are passed fully formed (intercept column included when
// wanted). Integer frequency weights behave exactly like repeating row i w_i
// times: coefficients, standard errors and residual variance all use the
// effective sample size sum(w).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medscale/error.hpp"
#include "medscale/stochastics.hpp"

namespace medscale {

struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  bool converged = true;
  int iterations = 0;
  /// RSS / (n - p); NaN for logistic fits and for exactly determined designs.
  double residual_variance = std::numeric_limits<double>::quiet_NaN();
  double residual_sum_squares = std::numeric_limits<double>::quiet_NaN();
};

/// b subset rows with their multinomial frequencies.
struct WeightedSample {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  ResampleWeights weights;
};

struct LogisticOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  double separation_bound = 30.0;
  /// Starting coefficients; zero when empty.
  Eigen::VectorXd start;
};

namespace detail {

inline constexpr double rank_threshold = 1e-10;

/// Rows with positive weight, scaled by sqrt(w). Returns the effective n.
inline double compact_weighted(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses,
                               std::span<const std::int64_t> weights, Eigen::MatrixXd& xs,
                               Eigen::MatrixXd& ys) {
  require(static_cast<Eigen::Index>(weights.size()) == design.rows(), ErrorKind::invalid_argument,
          "weight count does not match row count");
  Eigen::Index kept = 0;
  double total = 0.0;
  for (auto w : weights) {
    require(w >= 0, ErrorKind::invalid_argument, "weights must be non-negative");
    if (w > 0) ++kept;
    total += static_cast<double>(w);
  }
  xs.resize(kept, design.cols());
  ys.resize(kept, responses.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const auto w = weights[static_cast<std::size_t>(i)];
    if (w == 0) continue;
    const double s = std::sqrt(static_cast<double>(w));
    xs.row(r) = s * design.row(i);
    ys.row(r) = s * responses.row(i);
    ++r;
  }
  return total;
}

/// Least squares for several responses sharing one (already weight-scaled) design.
inline std::vector<FitResult> least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double effective_n) {
  const Eigen::Index p = x.cols();
  require(p >= 1, ErrorKind::invalid_argument, "design has no columns");
  require(x.rows() == y.rows(), ErrorKind::invalid_argument, "design and response row counts differ");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(rank_threshold);
  if (x.rows() < p || qr.rank() < p) {
    fail(ErrorKind::singular_design, "design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                         " < " + std::to_string(p) + " columns)");
  }

  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd unscaled = r_inv.rowwise().squaredNorm();
  const auto& perm = qr.colsPermutation().indices();

  const double df = effective_n - static_cast<double>(p);
  std::vector<FitResult> fits(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    FitResult& fit = fits[static_cast<std::size_t>(c)];
    fit.coefficients = qr.solve(y.col(c));
    fit.residual_sum_squares = (y.col(c) - x * fit.coefficients).squaredNorm();
    fit.std_errors.setConstant(p, std::numeric_limits<double>::quiet_NaN());
    if (df > 0.0) {
      fit.residual_variance = fit.residual_sum_squares / df;
      for (Eigen::Index i = 0; i < p; ++i)
        fit.std_errors(perm(i)) = std::sqrt(fit.residual_variance * unscaled(i));
    }
  }
  return fits;
}

inline double log1p_exp(double eta) {
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

inline double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double weighted_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) ll += w(i) * (y(i) * eta(i) - log1p_exp(eta(i)));
  return ll;
}

inline Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd v(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = logistic(eta(i));
    v(i) = w(i) * mu * (1.0 - mu);
  }
  const Eigen::MatrixXd xs = x.array().colwise() * v.cwiseSqrt().array();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
  return h.selfadjointView<Eigen::Lower>();
}

inline FitResult newton_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                 const LogisticOptions& opts) {
  const Eigen::Index p = x.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (opts.start.size() > 0) {
    require(opts.start.size() == p, ErrorKind::invalid_argument, "starting vector length differs from design width");
    beta = opts.start;
  }
  double ll = weighted_loglik(x, y, w, beta);

  auto factor = [&](const Eigen::MatrixXd& h) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(ldlt.rcond() > 1e-13)) {
      fail(ErrorKind::separation, "information matrix is numerically singular (possible separation)");
    }
    return ldlt;
  };

  FitResult fit;
  fit.converged = false;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) resid(i) = w(i) * (y(i) - logistic(eta(i)));
    const Eigen::VectorXd score = x.transpose() * resid;
    const Eigen::VectorXd step = factor(information(x, w, beta)).solve(score);

    // Step halving keeps every accepted iterate non-decreasing in likelihood.
    double t = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double ll_new = weighted_loglik(x, y, w, candidate);
    for (int halvings = 0; halvings < 40 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++halvings) {
      t *= 0.5;
      candidate = beta + t * step;
      ll_new = weighted_loglik(x, y, w, candidate);
    }
    if (candidate.cwiseAbs().maxCoeff() > opts.separation_bound) {
      fail(ErrorKind::separation, "coefficient magnitude exceeded " + std::to_string(opts.separation_bound) +
                                      " (complete or quasi-complete separation)");
    }
    const double change = (candidate - beta).cwiseAbs().maxCoeff();
    beta = candidate;
    ll = ll_new;
    fit.iterations = iter;
    if (change < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }

  const Eigen::MatrixXd h = information(x, w, beta);
  const Eigen::MatrixXd cov = factor(h).solve(Eigen::MatrixXd::Identity(p, p));
  fit.coefficients = beta;
  fit.std_errors = cov.diagonal().cwiseSqrt();
  return fit;
}

inline void check_binary(const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    require(y(i) == 0.0 || y(i) == 1.0, ErrorKind::invalid_argument,
            "logistic response must be 0/1 (row " + std::to_string(i) + ")");
  }
}

}  // namespace detail

/// OLS via column-pivoted QR. Standard errors use sigma^2 (X'X)^-1 with
/// sigma^2 = RSS / (n - p).
inline FitResult fit_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  return detail::least_squares(design, response, static_cast<double>(design.rows())).front();
}

/// OLS of several responses on one design; one QR factorisation serves all.
inline std::vector<FitResult> fit_linear_multi(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses) {
  return detail::least_squares(design, responses, static_cast<double>(design.rows()));
}

inline std::vector<FitResult> fit_linear_multi_weighted(const Eigen::MatrixXd& design,
                                                        const Eigen::MatrixXd& responses,
                                                        std::span<const std::int64_t> weights) {
  Eigen::MatrixXd xs, ys;
  const double n = detail::compact_weighted(design, responses, weights, xs, ys);
  return detail::least_squares(xs, ys, n);
}

/// Minimises sum_i w_i (y_i - x_i'b)^2; equal to `fit_linear` on the expanded rows.
inline FitResult fit_linear_weighted(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                     std::span<const std::int64_t> weights) {
  return fit_linear_multi_weighted(design, response, weights).front();
}

inline FitResult fit_linear_weighted(const WeightedSample& sample) {
  return fit_linear_weighted(sample.design, sample.response, sample.weights.weights);
}

/// Bernoulli maximum likelihood by Newton/IRLS with step halving. Standard
/// errors come from the inverse information at the optimum.
inline FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                              const LogisticOptions& opts = {}) {
  require(design.rows() == response.size(), ErrorKind::invalid_argument, "design and response row counts differ");
  detail::check_binary(response);
  const double ones = response.sum();
  require(ones > 0.0 && ones < static_cast<double>(response.size()), ErrorKind::invalid_argument,
          "logistic response has a single class");
  return detail::newton_logistic(design, response, Eigen::VectorXd::Ones(design.rows()), opts);
}

/// Minimises the frequency-weighted negative log-likelihood; equal to
/// `fit_logistic` on the expanded rows.
inline FitResult fit_logistic_weighted(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                       std::span<const std::int64_t> weights, const LogisticOptions& opts = {}) {
  require(design.rows() == response.size(), ErrorKind::invalid_argument, "design and response row counts differ");
  require(static_cast<Eigen::Index>(weights.size()) == design.rows(), ErrorKind::invalid_argument,
          "weight count does not match row count");
  detail::check_binary(response);

  Eigen::Index kept = 0;
  double ones = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const auto w = weights[static_cast<std::size_t>(i)];
    require(w >= 0, ErrorKind::invalid_argument, "weights must be non-negative");
    if (w == 0) continue;
    ++kept;
    total += static_cast<double>(w);
    ones += static_cast<double>(w) * response(i);
  }
  if (ones == 0.0 || ones == total) {
    fail(ErrorKind::separation, "resample carries a single outcome class");
  }

  Eigen::MatrixXd x(kept, design.cols());
  Eigen::VectorXd y(kept), w(kept);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const auto wi = weights[static_cast<std::size_t>(i)];
    if (wi == 0) continue;
    x.row(r) = design.row(i);
    y(r) = response(i);
    w(r) = static_cast<double>(wi);
    ++r;
  }
  return detail::newton_logistic(x, y, w, opts);
}

inline FitResult fit_logistic_weighted(const WeightedSample& sample, const LogisticOptions& opts = {}) {
  return fit_logistic_weighted(sample.design, sample.response, sample.weights.weights, opts);
}

}  // namespace medscale
