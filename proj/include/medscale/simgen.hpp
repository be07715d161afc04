#pragma once

// Simulation scenarios for the coverage, testing and timing studies.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medscale/dataset.hpp"
#include "medscale/error.hpp"
#include "medscale/mediation.hpp"
#include "medscale/regression.hpp"
#include "medscale/stochastics.hpp"

namespace medscale {

/// Exposure law: 1 = N(0,1), 2 = Student t with 5 df, 3 = Exponential(rate 1), uncentred.
enum class ExposureCase { normal = 1, student_t5 = 2, exponential = 3 };

/// How the second argument of N(mu, s) in a scenario description is read.
enum class NormalReading { variance, standard_deviation };

struct SimScenario {
  std::int64_t n = 100000;
  ModelParams params;
  ExposureCase exposure_case = ExposureCase::normal;
  double covariate_sd = std::sqrt(2.0);

  void validate() const {
    require(n >= 1, ErrorKind::invalid_argument, "scenario needs n >= 1");
    params.validate();
    require(covariate_sd >= 0.0, ErrorKind::invalid_argument, "covariate_sd must be non-negative");
    const int c = static_cast<int>(exposure_case);
    require(c >= 1 && c <= 3, ErrorKind::invalid_argument, "exposure case must be 1, 2 or 3");
  }
};

/// Mean and variance of the exposure law.
inline std::pair<double, double> exposure_moments(ExposureCase c) {
  switch (c) {
    case ExposureCase::normal: return {0.0, 1.0};
    case ExposureCase::student_t5: return {0.0, 5.0 / 3.0};
    case ExposureCase::exponential: return {1.0, 1.0};
  }
  return {0.0, 1.0};
}

/// Draws one dataset: X from the case law, Z_j ~ N(0, covariate_sd^2),
/// e ~ N(0, sigma_e), M_k = c_k + alpha_k X + eta_k'Z + e_k, and Y from the
/// linear or logistic outcome equation.
inline Dataset generate(const SimScenario& scenario, RngStream& rng) {
  scenario.validate();
  const auto& p = scenario.params;
  const Eigen::Index n = scenario.n;
  const Eigen::Index d = p.mediator_count();
  const Eigen::Index q = p.covariate_count();

  Dataset data;
  data.exposure.resize(n);
  switch (scenario.exposure_case) {
    case ExposureCase::normal: {
      std::normal_distribution<double> law(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) data.exposure(i) = law(rng);
      break;
    }
    case ExposureCase::student_t5: {
      std::student_t_distribution<double> law(5.0);
      for (Eigen::Index i = 0; i < n; ++i) data.exposure(i) = law(rng);
      break;
    }
    case ExposureCase::exponential: {
      std::exponential_distribution<double> law(1.0);
      for (Eigen::Index i = 0; i < n; ++i) data.exposure(i) = law(rng);
      break;
    }
  }

  data.covariates.resize(n, q);
  {
    std::normal_distribution<double> law(0.0, scenario.covariate_sd);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < q; ++j) data.covariates(i, j) = law(rng);
  }

  const Eigen::MatrixXd errors = sample_mvn(n, p.sigma_e, rng);
  data.mediators.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      data.mediators(i, k) =
          p.c_k(k) + p.alpha(k) * data.exposure(i) + p.eta.row(k).dot(data.covariates.row(i)) + errors(i, k);
    }
  }

  data.outcome.resize(n);
  std::normal_distribution<double> noise(0.0, p.sigma_eps);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double linear = p.c + p.gamma * data.exposure(i) + data.mediators.row(i).dot(p.beta) +
                          data.covariates.row(i).dot(p.theta);
    if (p.outcome_kind == OutcomeKind::continuous) {
      data.outcome(i) = linear + noise(rng);
    } else {
      data.outcome(i) = rng.uniform() < detail::logistic(linear) ? 1.0 : 0.0;
    }
  }
  data.fill_default_names();
  return data;
}

namespace detail {

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

/// Shared settings: c = c_k = gamma = 0.5, theta = eta_k = (1,1)', Sigma_e = (0.5^|i-j|),
/// outcome error N(0, 4), covariates N(0, 2).
inline SimScenario base_scenario(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta, OutcomeKind kind,
                                 ExposureCase exposure, NormalReading reading) {
  const Eigen::Index d = alpha.size();
  SimScenario s;
  s.exposure_case = exposure;
  auto& p = s.params;
  p.outcome_kind = kind;
  // The logistic outcome equation used for simulation carries no intercept.
  p.c = kind == OutcomeKind::continuous ? 0.5 : 0.0;
  p.gamma = 0.5;
  p.alpha = alpha;
  p.beta = beta;
  p.theta = vec({1.0, 1.0});
  p.c_k = Eigen::VectorXd::Constant(d, 0.5);
  p.eta = Eigen::MatrixXd::Ones(d, 2);
  p.sigma_e = ar1_covariance(d, 0.5);
  const bool variance = reading == NormalReading::variance;
  p.sigma_eps = variance ? 2.0 : 4.0;
  s.covariate_sd = variance ? std::sqrt(2.0) : 2.0;
  return s;
}

}  // namespace detail

/// Every named parameterisation of the simulation studies, keyed
/// "<study>/<model>/<case|dN>":
///   ci/{linear,logistic}/case{1,2,3}     confidence-interval study
///   test/{linear,logistic}/case{1,2,3}   divide-and-conquer testing study
///   timing/{linear,logistic}/d{5,10,20,50,100}   alpha = beta = 0.5, case 1
inline std::map<std::string, SimScenario> scenario_catalog(NormalReading reading = NormalReading::variance) {
  using detail::vec;
  std::map<std::string, SimScenario> out;
  const std::pair<const char*, OutcomeKind> models[] = {{"linear", OutcomeKind::continuous},
                                                        {"logistic", OutcomeKind::binary}};
  const ExposureCase cases[] = {ExposureCase::normal, ExposureCase::student_t5, ExposureCase::exponential};

  for (const auto& [model, kind] : models) {
    for (auto c : cases) {
      const std::string suffix = "/" + std::string(model) + "/case" + std::to_string(static_cast<int>(c));
      out["ci" + suffix] =
          detail::base_scenario(vec({0, 0.2, 0, 0.1, 0.15}), vec({0, 0, 0.2, 0.1, 0.15}), kind, c, reading);
      out["test" + suffix] =
          kind == OutcomeKind::continuous
              ? detail::base_scenario(vec({0, 0.1, 0, 0.025, 0.035}), vec({0, 0, 0.15, 0.025, 0.035}), kind, c,
                                      reading)
              : detail::base_scenario(vec({0, 0.15, 0, 0.025, 0.035}), vec({0, 0, 0.15, 0.035, 0.05}), kind, c,
                                      reading);
    }
    for (int d : {5, 10, 20, 50, 100}) {
      out["timing/" + std::string(model) + "/d" + std::to_string(d)] =
          detail::base_scenario(Eigen::VectorXd::Constant(d, 0.5), Eigen::VectorXd::Constant(d, 0.5), kind,
                                ExposureCase::normal, reading);
    }
  }
  return out;
}

inline SimScenario lookup_scenario(const std::string& key, NormalReading reading = NormalReading::variance) {
  const auto catalog = scenario_catalog(reading);
  const auto it = catalog.find(key);
  if (it == catalog.end()) {
    std::string known;
    for (const auto& [k, _] : catalog) known += (known.empty() ? "" : ", ") + k;
    fail(ErrorKind::lookup, "unknown scenario '" + key + "' (known: " + known + ")");
  }
  return it->second;
}

/// Indices (0-based) of mediators with nonzero true product.
inline std::vector<std::size_t> signal_set(const ModelParams& params) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < params.mediator_count(); ++k)
    if (params.alpha(k) * params.beta(k) != 0.0) out.push_back(static_cast<std::size_t>(k));
  return out;
}

}  // namespace medscale
