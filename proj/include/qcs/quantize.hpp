#pragma once

#include "qcs/ensemble.hpp"
#include "qcs/rng.hpp"
#include "qcs/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace qcs {

/// One-bit measurements, entries in {-1, +1}.
struct OneBitObservation {
  IntVector bits;

  Index size() const { return bits.size(); }
  Vector as_real() const { return bits.cast<double>(); }

  void validate() const {
    for (Index i = 0; i < bits.size(); ++i)
      if (bits(i) != 1 && bits(i) != -1) throw std::invalid_argument("one-bit observation: entry not in {-1,+1}");
  }
};

/// Uniform B-bit midrise quantizer with resolution delta.
///
/// Level j in {-2^(B-1), ..., 2^(B-1)-1} is the cell [j*delta, (j+1)*delta) with
/// center (2j+1)*delta/2; the outermost cells extend to infinity. B = 1 is the
/// dithered one-bit quantizer written in this form.
struct QuantizerConfig {
  double delta = 1.0;
  int bits = 2;

  static QuantizerConfig make(double delta, int bits) {
    QuantizerConfig c{delta, bits};
    c.validate();
    return c;
  }

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("quantizer: delta must be positive");
    if (bits < 1 || bits > 20) throw std::invalid_argument("quantizer: bits must lie in [1, 20]");
  }

  int min_level() const { return -(1 << (bits - 1)); }
  int max_level() const { return (1 << (bits - 1)) - 1; }
  /// Largest hyperplane index K; hyperplane j sits where value + j*delta = 0, j in [-K, K].
  int max_shift() const { return (1 << (bits - 1)) - 1; }
  int hyperplane_count() const { return 2 * max_shift() + 1; }
  double center(int level) const { return (2.0 * level + 1.0) * delta / 2.0; }
  /// M = (2^(B-1) - 1) delta - delta/2: the range on which dithered quantization is unbiased.
  double range() const { return max_shift() * delta - delta / 2.0; }
};

/// Level indices of B-bit measurements.
struct MultiBitObservation {
  IntVector levels;
  QuantizerConfig cfg;

  Index size() const { return levels.size(); }

  Vector centers() const {
    Vector c(levels.size());
    for (Index i = 0; i < levels.size(); ++i) c(i) = cfg.center(levels(i));
    return c;
  }

  void validate() const {
    cfg.validate();
    for (Index i = 0; i < levels.size(); ++i)
      if (levels(i) < cfg.min_level() || levels(i) > cfg.max_level())
        throw std::invalid_argument("multi-bit observation: level outside the alphabet");
  }
};

/// Pre-quantization values <a_i, x> + nu_i + tau_i.
inline Vector measurement_values(const SensingInstance& inst, const Vector& x, bool with_noise = true) {
  if (x.size() != inst.dim()) throw DimensionError("measurement: signal length does not match matrix");
  Vector v = inst.matrix * x + inst.dither;
  if (with_noise) v += inst.noise;
  return v;
}

inline OneBitObservation one_bit_quantize(const SensingInstance& inst, const Vector& x) {
  const Vector v = measurement_values(inst, x);
  OneBitObservation q{IntVector(v.size())};
  for (Index i = 0; i < v.size(); ++i) q.bits(i) = sign_of(v(i));
  return q;
}

/// Nearest alphabet center; cell boundaries go to the upper cell and values
/// outside the alphabet range saturate at the extreme levels.
inline int quantize_level(double value, const QuantizerConfig& cfg) {
  const double cell = std::floor(value / cfg.delta);
  if (!(cell >= cfg.min_level())) return cfg.min_level();  // also catches NaN
  if (cell > cfg.max_level()) return cfg.max_level();
  return static_cast<int>(cell);
}

inline double quantize_center(double value, const QuantizerConfig& cfg) {
  return cfg.center(quantize_level(value, cfg));
}

/// levels_i = quantize_level(<a_i, x> + tau_i). The multi-bit model carries no
/// additive noise; inst.noise is ignored.
inline MultiBitObservation multi_bit_quantize(const SensingInstance& inst, const Vector& x,
                                              const QuantizerConfig& cfg) {
  cfg.validate();
  if (std::abs(inst.dither_range - cfg.delta) > 1e-12 * cfg.delta)
    throw std::invalid_argument("multi_bit_quantize: instance dither range must equal delta");
  const Vector v = measurement_values(inst, x, false);
  MultiBitObservation obs{IntVector(v.size()), cfg};
  for (Index i = 0; i < v.size(); ++i) obs.levels(i) = quantize_level(v(i), cfg);
  return obs;
}

/// Hyperplane form Q in {-1,+1}^{m x (2^B - 1)} of level observations; column
/// c holds shift j = c - K. Row i is -1 for j < -level_i and +1 otherwise.
inline IntMatrix hyperplane_matrix(const MultiBitObservation& obs) {
  const int k = obs.cfg.max_shift();
  IntMatrix q(obs.size(), obs.cfg.hyperplane_count());
  for (Index i = 0; i < obs.size(); ++i)
    for (int j = -k; j <= k; ++j) q(i, j + k) = (j >= -obs.levels(i)) ? 1 : -1;
  return q;
}

/// Q(x)_{i,j} = sign(<a_i, x> + tau_i + j*delta), evaluated directly.
inline IntMatrix hyperplane_signs(const SensingInstance& inst, const Vector& x, const QuantizerConfig& cfg) {
  const Vector v = measurement_values(inst, x, false);
  const int k = cfg.max_shift();
  IntMatrix q(v.size(), cfg.hyperplane_count());
  for (Index i = 0; i < v.size(); ++i)
    for (int j = -k; j <= k; ++j) q(i, j + k) = sign_of(v(i) + j * cfg.delta);
  return q;
}

/// Inverse of hyperplane_matrix via q = (Q 1) delta / 2.
inline Vector centers_from_hyperplanes(const IntMatrix& q, double delta) {
  return q.cast<double>().rowwise().sum() * (delta / 2.0);
}

inline Index hamming(const OneBitObservation& a, const OneBitObservation& b) {
  if (a.size() != b.size()) throw DimensionError("hamming: length mismatch");
  return (a.bits.array() != b.bits.array()).count();
}

enum class CorruptionPolicy { Random, MinMargin };

inline CorruptionPolicy parse_corruption_policy(const std::string& s) {
  if (s == "random") return CorruptionPolicy::Random;
  if (s == "min-margin") return CorruptionPolicy::MinMargin;
  throw std::invalid_argument("unknown corruption policy: " + s);
}

/// Flips exactly floor(beta * m) bits. MinMargin flips those with the smallest
/// margins (ties to the lower index); Random flips a uniform subset.
inline OneBitObservation corrupt_bits(const OneBitObservation& q, double beta, CorruptionPolicy policy,
                                      const Vector& margins, std::uint64_t seed) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("corrupt_bits: beta must lie in [0, 1)");
  const Index m = q.size();
  const auto flips = static_cast<Index>(std::floor(beta * static_cast<double>(m)));
  OneBitObservation out = q;
  if (flips == 0) return out;
  std::vector<Index> chosen;
  if (policy == CorruptionPolicy::Random) {
    Rng rng = make_rng(seed);
    chosen = detail::sample_without_replacement(m, flips, rng);
  } else {
    if (margins.size() != m) throw DimensionError("corrupt_bits: margins length mismatch");
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(margins(a)) < std::abs(margins(b)); });
    chosen.assign(order.begin(), order.begin() + flips);
  }
  for (Index i : chosen) out.bits(i) = -out.bits(i);
  return out;
}

}  // namespace qcs
