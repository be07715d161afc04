#pragma once

// Seeded, splittable randomness plus the sampling and quantile primitives used
// by the resampling engines and the simulation generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "medscale/error.hpp"

namespace medscale {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// A random stream identified by (master_seed, stream_id).
///
/// The engine state is derived from both identifiers only, so a replicate or
/// block that owns its stream draws the same numbers regardless of which thread
/// runs it or in what order.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed),
        stream_id_(stream_id),
        engine_(derive_seed(master_seed, stream_id)) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// A child stream keyed by this stream's identity and `child`.
  RngStream split(std::uint64_t child) const {
    return RngStream(derive_seed(master_seed_, stream_id_), child);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform draw in [0, 1).
  double uniform() { return std::generate_canonical<double, 64>(engine_); }

 private:
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/// b distinct row indices drawn from [0, n).
struct SubsetDraw {
  std::vector<std::int64_t> indices;
};

/// Multinomial frequencies over a subset; always sums to the trial count.
struct ResampleWeights {
  std::vector<std::int64_t> weights;

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto w : weights) s += w;
    return s;
  }
};

/// Uniform b-subset of [0, n) in O(b) time and memory (sparse partial Fisher-Yates).
inline SubsetDraw sample_without_replacement(std::int64_t n, std::int64_t b, RngStream& rng) {
  require(b >= 1 && b <= n, ErrorKind::invalid_argument,
          "subset size b=" + std::to_string(b) + " must satisfy 1 <= b <= n=" + std::to_string(n));
  SubsetDraw draw;
  draw.indices.resize(static_cast<std::size_t>(b));
  std::unordered_map<std::int64_t, std::int64_t> swapped;
  swapped.reserve(static_cast<std::size_t>(b) * 2);
  auto at = [&](std::int64_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  for (std::int64_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, n - 1);
    const std::int64_t j = pick(rng);
    const std::int64_t vi = at(i);
    const std::int64_t vj = at(j);
    draw.indices[static_cast<std::size_t>(i)] = vj;
    swapped[j] = vi;
  }
  return draw;
}

/// Counts of n uniform draws with replacement from [0, b). O(n).
inline ResampleWeights count_uniform_draws(std::int64_t n, std::int64_t b, RngStream& rng) {
  require(n >= 1 && b >= 1, ErrorKind::invalid_argument, "need n >= 1 draws over b >= 1 categories");
  ResampleWeights out;
  out.weights.assign(static_cast<std::size_t>(b), 0);
  std::uniform_int_distribution<std::int64_t> pick(0, b - 1);
  for (std::int64_t i = 0; i < n; ++i) ++out.weights[static_cast<std::size_t>(pick(rng))];
  return out;
}

/// Classical bootstrap resample of n rows as frequencies.
inline ResampleWeights bootstrap_counts(std::int64_t n, RngStream& rng) { return count_uniform_draws(n, n, rng); }

/// Frequencies of an n-trial uniform multinomial over b categories. Uses
/// sequential conditional binomials, O(b), when n is large relative to b, and
/// direct counting otherwise (a binomial draw costs roughly 30 uniform draws).
inline ResampleWeights multinomial_uniform(std::int64_t n, std::int64_t b, RngStream& rng) {
  require(n >= 1 && b >= 1, ErrorKind::invalid_argument, "multinomial needs n >= 1 and b >= 1");
  if (n <= 32 * b) return count_uniform_draws(n, b, rng);
  ResampleWeights out;
  out.weights.resize(static_cast<std::size_t>(b));
  std::int64_t remaining = n;
  for (std::int64_t i = 0; i + 1 < b; ++i) {
    std::int64_t w = 0;
    if (remaining > 0) {
      std::binomial_distribution<std::int64_t> bin(remaining, 1.0 / static_cast<double>(b - i));
      w = bin(rng);
    }
    out.weights[static_cast<std::size_t>(i)] = w;
    remaining -= w;
  }
  out.weights.back() = remaining;
  return out;
}

/// Inverse-ECDF quantile: the ceil(v*S)-th order statistic of `values`.
inline double empirical_quantile(std::span<const double> values, double v) {
  require(!values.empty(), ErrorKind::invalid_argument, "quantile of an empty sample");
  require(v > 0.0 && v < 1.0, ErrorKind::invalid_argument, "quantile level must lie in (0, 1)");
  const auto size = static_cast<std::int64_t>(values.size());
  // Absorb representation error so that e.g. 0.95 * 100 selects the 95th value.
  auto k = static_cast<std::int64_t>(std::ceil(v * static_cast<double>(size) - 1e-9));
  k = std::clamp<std::int64_t>(k, 1, size);
  std::vector<double> scratch(values.begin(), values.end());
  auto nth = scratch.begin() + (k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

/// Covariance with entries rho^|i-j|.
inline Eigen::MatrixXd ar1_covariance(Eigen::Index dim, double rho) {
  Eigen::MatrixXd sigma(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return sigma;
}

/// `count` i.i.d. rows from N(0, covariance) via its Cholesky factor.
inline Eigen::MatrixXd sample_mvn(Eigen::Index count, const Eigen::MatrixXd& covariance, RngStream& rng) {
  const Eigen::Index dim = covariance.rows();
  require(dim >= 1 && covariance.cols() == dim, ErrorKind::invalid_argument, "covariance must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  require(llt.info() == Eigen::Success, ErrorKind::numeric, "covariance is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd draws(count, dim);
  Eigen::VectorXd z(dim);
  for (Eigen::Index r = 0; r < count; ++r) {
    for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rng);
    draws.row(r) = (lower * z).transpose();
  }
  return draws;
}

inline Eigen::MatrixXd sample_mvn_ar1(Eigen::Index count, Eigen::Index dim, double rho, RngStream& rng) {
  require(dim >= 1, ErrorKind::invalid_argument, "dimension must be >= 1");
  require(std::abs(rho) < 1.0, ErrorKind::invalid_argument, "AR(1) base must satisfy |rho| < 1");
  return sample_mvn(count, ar1_covariance(dim, rho), rng);
}

/// Subset size floor(n^r).
inline std::int64_t subset_size(std::int64_t n, double exponent) {
  require(exponent > 0.0 && exponent < 1.0, ErrorKind::invalid_argument, "subset exponent must lie in (0, 1)");
  return static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), exponent) + 1e-9));
}

}  // namespace medscale
