#pragma once

#include "qcs/rng.hpp"
#include "qcs/types.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qcs {

enum class EnsembleKind { Gaussian, Rademacher, SubsampledHadamard };
enum class SignalKind { ExactSparse, ApproxSparse };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::Gaussian: return "gaussian";
    case EnsembleKind::Rademacher: return "rademacher";
    case EnsembleKind::SubsampledHadamard: return "hadamard";
  }
  return "?";
}

inline EnsembleKind parse_ensemble_kind(const std::string& s) {
  if (s == "gaussian") return EnsembleKind::Gaussian;
  if (s == "rademacher") return EnsembleKind::Rademacher;
  if (s == "hadamard") return EnsembleKind::SubsampledHadamard;
  throw std::invalid_argument("unknown ensemble kind: " + s);
}

inline SignalKind parse_signal_kind(const std::string& s) {
  if (s == "exact") return SignalKind::ExactSparse;
  if (s == "approx") return SignalKind::ApproxSparse;
  throw std::invalid_argument("unknown signal kind: " + s);
}

/// Measurement matrix, dither and pre-quantization noise of one experiment.
///
/// Rows of `matrix` are the measurement vectors a_i. `dither_range` is the
/// half-width of the uniform dither: lambda for one-bit, Delta for multi-bit.
struct SensingInstance {
  Matrix matrix;
  Vector dither;
  Vector noise;
  double dither_range = 1.0;
  EnsembleKind kind = EnsembleKind::Gaussian;

  Index rows() const { return matrix.rows(); }
  Index dim() const { return matrix.cols(); }

  void validate() const {
    if (matrix.rows() < 1 || matrix.cols() < 1) throw DimensionError("instance: empty matrix");
    if (dither.size() != matrix.rows() || noise.size() != matrix.rows())
      throw DimensionError("instance: dither/noise length must equal the number of rows");
    if (!(dither_range > 0.0)) throw std::invalid_argument("instance: dither range must be positive");
    // 1 ulp of slack: dither may have been rescaled from another range.
    const double bound = dither_range * (1.0 + 4 * std::numeric_limits<double>::epsilon());
    if (dither.size() > 0 && dither.cwiseAbs().maxCoeff() > bound)
      throw std::invalid_argument("instance: dither outside [-range, range]");
  }
};

struct Signal {
  Vector values;
  std::optional<Index> sparsity;
};

namespace detail {
// First k entries of a uniformly random permutation of 0..n-1.
inline std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}
}  // namespace detail

/// Draws an m x n measurement matrix with isotropic rows.
///
/// SubsampledHadamard picks m distinct rows of the Sylvester Hadamard matrix of
/// order n and flips column signs at random; entries stay in {-1, +1}.
inline Matrix gen_matrix(EnsembleKind kind, Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw DimensionError("gen_matrix: m and n must be at least 1");
  Rng rng = make_rng(seed);
  Matrix a(m, n);
  switch (kind) {
    case EnsembleKind::Gaussian: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = g(rng);
      break;
    }
    case EnsembleKind::Rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case EnsembleKind::SubsampledHadamard: {
      if (!std::has_single_bit(static_cast<unsigned long long>(n)))
        throw DimensionError("gen_matrix: Hadamard ensemble needs n to be a power of two");
      if (m > n) throw DimensionError("gen_matrix: Hadamard ensemble needs m <= n (rows without replacement)");
      const auto rows = detail::sample_without_replacement(n, m, rng);
      std::bernoulli_distribution coin(0.5);
      std::vector<double> col_sign(static_cast<std::size_t>(n));
      for (auto& s : col_sign) s = coin(rng) ? 1.0 : -1.0;
      for (Index i = 0; i < m; ++i) {
        const auto r = static_cast<unsigned long long>(rows[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < n; ++j) {
          const int parity = std::popcount(r & static_cast<unsigned long long>(j)) & 1;
          a(i, j) = (parity ? -1.0 : 1.0) * col_sign[static_cast<std::size_t>(j)];
        }
      }
      break;
    }
  }
  return a;
}

/// i.i.d. Uniform([-range, range]) dither.
inline Vector gen_dither(Index m, double range, std::uint64_t seed) {
  if (m < 1) throw DimensionError("gen_dither: m must be at least 1");
  if (!(range > 0.0)) throw std::invalid_argument("gen_dither: range must be positive");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector tau(m);
  for (Index i = 0; i < m; ++i) tau(i) = range * u(rng);
  return tau;
}

/// i.i.d. N(0, sigma^2). The underlying standard normal draws depend only on
/// the seed, so two calls that differ only in sigma are paired.
inline Vector gen_noise(Index m, double sigma, std::uint64_t seed) {
  if (m < 1) throw DimensionError("gen_noise: m must be at least 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("gen_noise: sigma must be nonnegative");
  if (sigma == 0.0) return Vector::Zero(m);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector nu(m);
  for (Index i = 0; i < m; ++i) nu(i) = sigma * g(rng);
  return nu;
}

/// Random s-sparse (or s-compressible) ground truth.
///
/// ExactSparse: uniform support of size s, Gaussian values, unit l2 norm.
/// ApproxSparse: s entries with variance 1, the rest with variance 1e-3,
/// rescaled into sqrt(s) * B_1 when the l1 norm exceeds sqrt(s).
inline Signal gen_signal(SignalKind kind, Index n, Index s, std::uint64_t seed) {
  if (n < 1) throw DimensionError("gen_signal: n must be at least 1");
  if (s < 1 || s > n) throw std::invalid_argument("gen_signal: need 1 <= s <= n");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector x = Vector::Zero(n);
  const auto support = detail::sample_without_replacement(n, s, rng);
  if (kind == SignalKind::ExactSparse) {
    double norm = 0.0;
    do {
      for (Index j : support) x(j) = g(rng);
      norm = x.norm();
    } while (norm == 0.0);
    x /= norm;
  } else {
    const double small = std::sqrt(1e-3);
    for (Index j = 0; j < n; ++j) x(j) = small * g(rng);
    for (Index j : support) x(j) = g(rng);
    const double budget = std::sqrt(static_cast<double>(s));
    const double l1 = x.lpNorm<1>();
    if (l1 > budget) x *= budget / l1;
  }
  return Signal{std::move(x), s};
}

/// Assembles an instance with all parts drawn from streams of `seed`.
inline SensingInstance make_instance(EnsembleKind kind, Index m, Index n, double dither_range, double sigma,
                                     std::uint64_t seed) {
  SensingInstance inst;
  inst.kind = kind;
  inst.dither_range = dither_range;
  inst.matrix = gen_matrix(kind, m, n, derive_seed(seed, Stream::Matrix));
  inst.dither = gen_dither(m, dither_range, derive_seed(seed, Stream::Dither));
  inst.noise = gen_noise(m, sigma, derive_seed(seed, Stream::Noise));
  return inst;
}

}  // namespace qcs
