#pragma once

// Monte-Carlo and counting diagnostics for the hyperplane tessellation.

#include "qcs/ensemble.hpp"
#include "qcs/loss.hpp"
#include "qcs/quantize.hpp"
#include "qcs/rng.hpp"
#include "qcs/types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

namespace qcs {

struct SeparationReport {
  double theta = 0.0;
  Index count = 0;
  double fraction = 0.0;
  Vector x;
  Vector z;
};

namespace detail {
inline SeparationReport make_report(double theta, Index count, Index m, const Vector& x, const Vector& z) {
  return SeparationReport{theta, count, static_cast<double>(count) / static_cast<double>(m), x, z};
}
}  // namespace detail

/// Hyperplanes H_{a_i, tau_i} that theta-well-separate x and z: the noisy sign
/// of x differs from the sign of z and both sit at least theta ||x - z|| away.
inline SeparationReport well_separated_count_1bit(const SensingInstance& inst, const Vector& x, const Vector& z,
                                                  double theta) {
  if (x.size() != inst.dim() || z.size() != inst.dim()) throw DimensionError("well_separated_count_1bit: size mismatch");
  if (x == z) throw std::invalid_argument("well_separated_count_1bit: x and z must differ");
  if (!(theta >= 0.0)) throw std::invalid_argument("well_separated_count_1bit: theta must be nonnegative");
  const double margin = theta * (x - z).norm();
  const Vector vx = inst.matrix * x + inst.dither + inst.noise;
  const Vector vz = inst.matrix * z + inst.dither;
  Index count = 0;
  for (Index i = 0; i < inst.rows(); ++i)
    count += sign_of(vx(i)) != sign_of(vz(i)) && std::abs(vx(i)) >= margin && std::abs(vz(i)) >= margin;
  return detail::make_report(theta, count, inst.rows(), x, z);
}

struct MultiBitSeparation {
  IntVector crossings;      // hyperplanes between x and z per direction, from the levels
  IntVector crossings_xor;  // the same, counted on the rows of Q(x) and Q(z)
  SeparationReport report;  // directions with a theta-well-separating shifted hyperplane
};

inline MultiBitSeparation separation_counts_mbit(const SensingInstance& inst, const QuantizerConfig& cfg,
                                                 const Vector& x, const Vector& z, double theta) {
  if (x.size() != inst.dim() || z.size() != inst.dim()) throw DimensionError("separation_counts_mbit: size mismatch");
  if (!(theta >= 0.0)) throw std::invalid_argument("separation_counts_mbit: theta must be nonnegative");
  const MultiBitObservation ox = multi_bit_quantize(inst, x, cfg);
  const MultiBitObservation oz = multi_bit_quantize(inst, z, cfg);
  const IntMatrix qx = hyperplane_signs(inst, x, cfg);
  const IntMatrix qz = hyperplane_signs(inst, z, cfg);
  const Vector vx = measurement_values(inst, x, false);
  const Vector vz = measurement_values(inst, z, false);
  const double margin = theta * (x - z).norm();
  const int k = cfg.max_shift();

  MultiBitSeparation out;
  out.crossings = (ox.levels - oz.levels).cwiseAbs();
  out.crossings_xor = (qx.array() != qz.array()).cast<int>().rowwise().sum();
  Index count = 0;
  for (Index i = 0; i < inst.rows(); ++i) {
    bool separated = false;
    for (int j = -k; j <= k && !separated; ++j) {
      const double sx = vx(i) + j * cfg.delta;
      const double sz = vz(i) + j * cfg.delta;
      separated = qx(i, j + k) != qz(i, j + k) && std::abs(sx) >= margin && std::abs(sz) >= margin;
    }
    count += separated;
  }
  out.report = detail::make_report(theta, count, inst.rows(), x, z);
  return out;
}

struct ExpectedLossParams {
  Index n = 20;
  double radius = 1.0;
  double sigma = 0.0;
  double lambda = 1.0;
  Index trials = 1000000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ExpectedLossEstimate {
  double estimate = 0.0;
  double closed_form = 0.0;     // (||x - z||^2 + sigma^2) / (2 lambda)
  double rel_err = 0.0;         // |estimate - closed_form| / closed_form
  double closed_form_4 = 0.0;   // (||x - z||^2 + sigma^2) / (4 lambda)
  double rel_err_4 = 0.0;
  double std_error = 0.0;       // of the Monte-Carlo mean
};

namespace detail {
inline double rel_gap(double est, double ref) {
  return ref == 0.0 ? std::abs(est) : std::abs(est - ref) / std::abs(ref);
}

// Runs fn(chunk) for chunk = 0..chunks-1 on up to `threads` workers.
template <class Fn>
void for_chunks(Index chunks, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, chunks));
  if (threads <= 1) {
    for (Index c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (Index c = t; c < chunks; c += threads) fn(c);
    });
  for (auto& th : pool) th.join();
}
}  // namespace detail

/// Monte-Carlo mean of one term of the one-bit ReLU loss over fresh Gaussian
/// a, tau ~ U[-lambda, lambda] and nu ~ N(0, sigma^2), next to the closed-form
/// large-lambda laws. Chunks use their own streams and are summed in order, so
/// the result does not depend on the thread count.
inline ExpectedLossEstimate mc_expected_loss(const ExpectedLossParams& p, const Vector& x, const Vector& z) {
  if (x.size() != p.n || z.size() != p.n) throw DimensionError("mc_expected_loss: x and z must have length n");
  if (p.trials < 1) throw std::invalid_argument("mc_expected_loss: trials must be at least 1");
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("mc_expected_loss: sigma must be nonnegative");
  if (!(p.lambda >= 10.0 * (p.radius + p.sigma)))
    throw std::invalid_argument("mc_expected_loss: lambda must be at least 10 (R + sigma)");

  constexpr Index chunk = 1 << 14;
  const Index chunks = (p.trials + chunk - 1) / chunk;
  std::vector<double> sums(static_cast<std::size_t>(chunks)), squares(static_cast<std::size_t>(chunks));
  detail::for_chunks(chunks, p.threads, [&](Index c) {
    Rng rng = make_rng(derive_seed(p.seed, Stream::Diagnostics, {static_cast<std::uint64_t>(c)}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-p.lambda, p.lambda);
    const Index begin = c * chunk;
    const Index end = std::min(p.trials, begin + chunk);
    Vector a(p.n);
    double s = 0.0, s2 = 0.0;
    for (Index t = begin; t < end; ++t) {
      for (Index j = 0; j < p.n; ++j) a(j) = gauss(rng);
      const double tau = unif(rng);
      const double nu = p.sigma * gauss(rng);
      const double q = sign_of(a.dot(x) + nu + tau);
      const double term = relu(-q * (a.dot(z) + tau));
      s += term;
      s2 += term * term;
    }
    sums[static_cast<std::size_t>(c)] = s;
    squares[static_cast<std::size_t>(c)] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (Index c = 0; c < chunks; ++c) {
    s += sums[static_cast<std::size_t>(c)];
    s2 += squares[static_cast<std::size_t>(c)];
  }
  const double t = static_cast<double>(p.trials);
  const double mean = s / t;
  const double var = std::max(0.0, s2 / t - mean * mean);

  ExpectedLossEstimate out;
  const double num = (x - z).squaredNorm() + p.sigma * p.sigma;
  out.estimate = mean;
  out.closed_form = num / (2.0 * p.lambda);
  out.rel_err = detail::rel_gap(mean, out.closed_form);
  out.closed_form_4 = num / (4.0 * p.lambda);
  out.rel_err_4 = detail::rel_gap(mean, out.closed_form_4);
  out.std_error = std::sqrt(var / t);
  return out;
}

/// Monte-Carlo Gaussian width of sqrt(s) B_1^n: E sqrt(s) ||g||_inf.
inline double gaussian_width_l1(Index n, Index s, Index trials, std::uint64_t seed) {
  if (n < 1 || s < 1) throw std::invalid_argument("gaussian_width_l1: n and s must be at least 1");
  if (trials < 1) throw std::invalid_argument("gaussian_width_l1: trials must be at least 1");
  Rng rng = make_rng(derive_seed(seed, Stream::Diagnostics));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0;
  for (Index t = 0; t < trials; ++t) {
    double mx = 0.0;
    for (Index j = 0; j < n; ++j) mx = std::max(mx, std::abs(gauss(rng)));
    sum += mx;
  }
  return std::sqrt(static_cast<double>(s)) * sum / static_cast<double>(trials);
}

}  // namespace qcs
