#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "catch_amalgamated.hpp"

#include "medscale/regression.hpp"

using namespace medscale;
using Catch::Approx;

namespace {

Eigen::MatrixXd with_intercept(const std::vector<double>& x) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(x.size()), 2);
  for (std::size_t i = 0; i < x.size(); ++i) d.row(static_cast<Eigen::Index>(i)) << 1.0, x[i];
  return d;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Repeats row i w_i times.
void expand(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::int64_t>& w,
            Eigen::MatrixXd& xe, Eigen::VectorXd& ye) {
  std::int64_t total = 0;
  for (auto wi : w) total += wi;
  xe.resize(total, x.cols());
  ye.resize(total);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::int64_t k = 0; k < w[static_cast<std::size_t>(i)]; ++k) {
      xe.row(r) = x.row(i);
      ye(r) = y(i);
      ++r;
    }
  }
}

double loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& b) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(b);
    ll += y(i) * eta - std::log1p(std::exp(eta));
  }
  return ll;
}

/// Reference optimiser: damped Newton on the log-likelihood with derivatives
/// taken by central finite differences only.
Eigen::VectorXd reference_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index p = x.cols();
  const double h = 1e-4;
  auto f = [&](const Eigen::VectorXd& b) { return loglik(x, y, b); };
  auto grad = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd g(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd up = b, dn = b;
      up(j) += h;
      dn(j) -= h;
      g(j) = (f(up) - f(dn)) / (2 * h);
    }
    return g;
  };
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd g = grad(b);
    Eigen::MatrixXd hess(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd up = b, dn = b;
      up(j) += h;
      dn(j) -= h;
      hess.col(j) = (grad(up) - grad(dn)) / (2 * h);
    }
    const Eigen::VectorXd step = hess.fullPivLu().solve(-g);
    double t = 1.0;
    while (f(b + t * step) < f(b) && t > 1e-8) t *= 0.5;
    b += t * step;
    if (step.cwiseAbs().maxCoeff() * t < 1e-11) break;
  }
  return b;
}

}  // namespace

TEST_CASE("fit_linear on hand-checkable designs") {
  SECTION("exact interpolation through two points") {
    const FitResult fit = fit_linear(with_intercept({0, 1}), vec({1, 3}));
    CHECK(fit.coefficients(0) == Approx(1.0).margin(1e-12));
    CHECK(fit.coefficients(1) == Approx(2.0).margin(1e-12));
    CHECK(fit.residual_sum_squares == Approx(0.0).margin(1e-20));
    // n = p leaves no residual degrees of freedom.
    CHECK(std::isnan(fit.residual_variance));
    CHECK(std::isnan(fit.std_errors(1)));
  }

  SECTION("normal equations with a repeated row") {
    const FitResult fit = fit_linear(with_intercept({1, 1, 2}), vec({2, 2, 3}));
    CHECK(fit.coefficients(0) == Approx(1.0).margin(1e-12));
    CHECK(fit.coefficients(1) == Approx(1.0).margin(1e-12));
  }

  SECTION("standard errors: hand values and textbook (X'X)^-1") {
    const Eigen::MatrixXd x = with_intercept({1, 2, 3, 4, 5});
    const Eigen::VectorXd y = vec({2, 4, 5, 4, 5});
    const FitResult fit = fit_linear(x, y);
    CHECK(fit.coefficients(0) == Approx(2.2).margin(1e-12));
    CHECK(fit.coefficients(1) == Approx(0.6).margin(1e-12));
    CHECK(fit.residual_sum_squares == Approx(2.4).margin(1e-12));
    CHECK(fit.residual_variance == Approx(0.8).margin(1e-12));
    CHECK(fit.std_errors(1) == Approx(std::sqrt(0.08)).margin(1e-10));
    CHECK(fit.std_errors(0) == Approx(std::sqrt(0.88)).margin(1e-10));

    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(fit.std_errors(j) == Approx(std::sqrt(0.8 * xtx_inv(j, j))).margin(1e-10));
  }

  SECTION("textbook SEs on a three-regressor design") {
    Eigen::MatrixXd x(7, 3);
    x << 1, 0.5, 2, 1, -1, 0, 1, 2, 1, 1, 0, -1, 1, 1.5, 3, 1, -0.5, 0.5, 1, 3, -2;
    const Eigen::VectorXd y = vec({1.2, -0.7, 2.9, 0.1, 3.3, 0.2, 1.8});
    const FitResult fit = fit_linear(x, y);
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    const Eigen::VectorXd b = xtx_inv * x.transpose() * y;
    const double s2 = (y - x * b).squaredNorm() / 4.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(fit.coefficients(j) == Approx(b(j)).margin(1e-10));
      CHECK(fit.std_errors(j) == Approx(std::sqrt(s2 * xtx_inv(j, j))).margin(1e-10));
    }
  }

  SECTION("rank deficiency is a named error") {
    Eigen::MatrixXd x(4, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    try {
      fit_linear(x, vec({1, 2, 3, 5}));
      FAIL("expected singular-design");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::singular_design);
    }
    CHECK_THROWS_AS(fit_linear(with_intercept({1}), vec({1})), Error);
  }

  SECTION("affine equivariance") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(50, 3);
    Eigen::VectorXd y(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
      x.row(i) << 1.0, normal(gen), normal(gen);
      y(i) = 0.3 + 0.8 * x(i, 1) - 0.4 * x(i, 2) + normal(gen);
    }
    const double s = 7.5;
    Eigen::MatrixXd xs = x;
    xs.col(2) *= s;
    const FitResult a = fit_linear(x, y);
    const FitResult b = fit_linear(xs, y);
    CHECK(b.coefficients(2) == Approx(a.coefficients(2) / s).margin(1e-10));
    CHECK(b.std_errors(2) == Approx(a.std_errors(2) / s).margin(1e-10));
    CHECK(((x * a.coefficients) - (xs * b.coefficients)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fit_linear_weighted equals the row-expanded fit") {
  SECTION("hand example") {
    const std::vector<std::int64_t> w{2, 1};
    const FitResult fit = fit_linear_weighted(with_intercept({1, 2}), vec({2, 3}), w);
    CHECK(fit.coefficients(0) == Approx(1.0).margin(1e-12));
    CHECK(fit.coefficients(1) == Approx(1.0).margin(1e-12));
    // Same as the expansion {(1,2),(1,2),(2,3)}: exact fit, one residual df.
    CHECK(fit.residual_sum_squares == Approx(0.0).margin(1e-20));
    CHECK(fit.residual_variance == Approx(0.0).margin(1e-20));
  }

  SECTION("unit weights") {
    const Eigen::MatrixXd x = with_intercept({1, 2, 3, 4, 5});
    const Eigen::VectorXd y = vec({2, 4, 5, 4, 5});
    const FitResult a = fit_linear(x, y);
    const FitResult b = fit_linear_weighted(x, y, std::vector<std::int64_t>(5, 1));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.std_errors - b.std_errors).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("all weight on one row") {
    try {
      fit_linear_weighted(with_intercept({1, 2, 3}), vec({1, 2, 3}), std::vector<std::int64_t>{0, 9, 0});
      FAIL("expected singular-design");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::singular_design);
    }
  }

  SECTION("random samples") {
    RngStream rng(77, 0);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index m = 40;
      Eigen::MatrixXd x(m, 3);
      Eigen::VectorXd y(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        x.row(i) << 1.0, normal(rng), normal(rng);
        y(i) = 1.0 + x(i, 1) - 2.0 * x(i, 2) + normal(rng);
      }
      const auto w = multinomial_uniform(300, m, rng).weights;
      Eigen::MatrixXd xe;
      Eigen::VectorXd ye;
      expand(x, y, w, xe, ye);
      const FitResult a = fit_linear_weighted(x, y, w);
      const FitResult b = fit_linear(xe, ye);
      CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((a.std_errors - b.std_errors).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(a.residual_variance == Approx(b.residual_variance).epsilon(1e-10));
    }
  }

  SECTION("WeightedSample overload and multi-response") {
    WeightedSample s{with_intercept({1, 2, 3}), vec({1, 3, 4}), ResampleWeights{{1, 2, 3}}};
    const FitResult a = fit_linear_weighted(s);
    Eigen::MatrixXd ys(3, 2);
    ys.col(0) = vec({1, 3, 4});
    ys.col(1) = vec({0, 1, 1});
    const auto multi = fit_linear_multi_weighted(s.design, ys, s.weights.weights);
    CHECK((a.coefficients - multi[0].coefficients).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(multi.size() == 2u);
  }
}

TEST_CASE("fit_logistic") {
  SECTION("null model") {
    // At each x, one success in four: slope 0, intercept logit(1/4).
    const Eigen::MatrixXd x = with_intercept({-1, -1, -1, -1, 1, 1, 1, 1});
    const FitResult fit = fit_logistic(x, vec({1, 0, 0, 0, 0, 1, 0, 0}));
    CHECK(fit.converged);
    CHECK(fit.coefficients(1) == Approx(0.0).margin(1e-10));
    CHECK(fit.coefficients(0) == Approx(-std::log(3.0)).margin(1e-10));
  }

  SECTION("four-row example without intercept: beta = ln 3, SE from the information") {
    Eigen::MatrixXd x(4, 1);
    x << -1, -1, 1, 1;
    const Eigen::VectorXd y = vec({0, 0, 1, 0});
    const FitResult fit = fit_logistic(x, y);
    CHECK(fit.converged);
    CHECK(fit.coefficients(0) == Approx(std::log(3.0)).margin(1e-10));
    CHECK(fit.coefficients(0) == Approx(reference_logistic(x, y)(0)).margin(1e-6));
    // I = sum x^2 p(1-p) = 4 * 3/16.
    CHECK(fit.std_errors(0) == Approx(1.0 / std::sqrt(0.75)).margin(1e-10));
  }

  SECTION("four-row example with intercept is quasi-separated") {
    try {
      fit_logistic(with_intercept({-1, -1, 1, 1}), vec({0, 0, 1, 0}));
      FAIL("expected separation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::separation);
    }
  }

  SECTION("complete separation") {
    try {
      fit_logistic(with_intercept({-2, -1, 1, 2}), vec({0, 0, 1, 1}));
      FAIL("expected separation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::separation);
    }
  }

  SECTION("single class and non-binary responses") {
    try {
      fit_logistic(with_intercept({1, 2, 3}), vec({1, 1, 1}));
      FAIL("expected invalid-argument");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_argument);
    }
    CHECK_THROWS_AS(fit_logistic(with_intercept({1, 2, 3}), vec({0, 2, 1})), Error);
  }

  SECTION("random data: reference optimiser, score equations and textbook SEs") {
    RngStream rng(8, 8);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::Index m = 200;
      Eigen::MatrixXd x(m, 3);
      Eigen::VectorXd y(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        x.row(i) << 1.0, normal(rng), normal(rng);
        const double p = 1.0 / (1.0 + std::exp(-(-0.5 + 0.8 * x(i, 1) - 0.6 * x(i, 2))));
        y(i) = rng.uniform() < p ? 1.0 : 0.0;
      }
      const FitResult fit = fit_logistic(x, y);
      REQUIRE(fit.converged);
      CHECK((fit.coefficients - reference_logistic(x, y)).cwiseAbs().maxCoeff() < 1e-6);

      Eigen::VectorXd mu(m);
      for (Eigen::Index i = 0; i < m; ++i) mu(i) = 1.0 / (1.0 + std::exp(-x.row(i).dot(fit.coefficients)));
      const Eigen::VectorXd score = x.transpose() * (y - mu);
      CHECK(score.cwiseAbs().maxCoeff() < 1e-6);

      const Eigen::MatrixXd info = x.transpose() * (mu.array() * (1 - mu.array())).matrix().asDiagonal() * x;
      const Eigen::VectorXd se = info.inverse().diagonal().cwiseSqrt();
      CHECK((fit.std_errors - se).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  SECTION("explicit starting point reaches the same optimum") {
    const Eigen::MatrixXd x = with_intercept({-2, -1, 0, 1, 2, 3, -1, 0});
    const Eigen::VectorXd y = vec({0, 1, 0, 1, 1, 1, 0, 0});
    LogisticOptions opts;
    opts.start = Eigen::Vector2d(0.3, 0.7);
    const FitResult a = fit_logistic(x, y);
    const FitResult b = fit_logistic(x, y, opts);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
    opts.start = Eigen::Vector3d(0, 0, 0);
    CHECK_THROWS_AS(fit_logistic(x, y, opts), Error);
  }
}

TEST_CASE("fit_logistic_weighted equals the row-expanded fit") {
  SECTION("unit weights") {
    const Eigen::MatrixXd x = with_intercept({-2, -1, 0, 1, 2, 3, -1, 0});
    const Eigen::VectorXd y = vec({0, 1, 0, 1, 1, 1, 0, 0});
    const FitResult a = fit_logistic(x, y);
    const FitResult b = fit_logistic_weighted(x, y, std::vector<std::int64_t>(8, 1));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.std_errors - b.std_errors).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("mass on one class") {
    const Eigen::MatrixXd x = with_intercept({-1, 0, 1, 2});
    const Eigen::VectorXd y = vec({0, 1, 0, 1});
    try {
      fit_logistic_weighted(x, y, std::vector<std::int64_t>{3, 0, 5, 0});
      FAIL("expected separation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::separation);
    }
  }

  SECTION("random samples") {
    RngStream rng(78, 0);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index m = 60;
      Eigen::MatrixXd x(m, 3);
      Eigen::VectorXd y(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        x.row(i) << 1.0, normal(rng), normal(rng);
        y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-(0.2 + 0.5 * x(i, 1) - 0.5 * x(i, 2)))) ? 1.0 : 0.0;
      }
      const auto w = multinomial_uniform(400, m, rng).weights;
      Eigen::MatrixXd xe;
      Eigen::VectorXd ye;
      expand(x, y, w, xe, ye);
      const FitResult a = fit_logistic_weighted(x, y, w);
      const FitResult b = fit_logistic(xe, ye);
      CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((a.std_errors - b.std_errors).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}
