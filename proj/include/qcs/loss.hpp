#pragma once

#include "qcs/ensemble.hpp"
#include "qcs/quantize.hpp"
#include "qcs/types.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace qcs {

// ---------------------------------------------------------------------------
// One-bit ReLU loss  L(z) = (1/m) sum_i [ -q_i (<a_i,z> + tau_i) ]_+
// ---------------------------------------------------------------------------

namespace detail {
inline void check_shapes(const SensingInstance& inst, Index obs_size, const Vector& z) {
  if (obs_size != inst.rows()) throw DimensionError("loss: observation length does not match instance");
  if (z.size() != inst.dim()) throw DimensionError("loss: z length does not match instance");
}
}  // namespace detail

inline double relu_loss_1bit(const SensingInstance& inst, const OneBitObservation& q, const Vector& z) {
  detail::check_shapes(inst, q.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) sum += relu(-q.bits(i) * v(i));
  return sum / static_cast<double>(v.size());
}

/// Subgradient with the strict active set {i : -q_i (<a_i,z> + tau_i) > 0}.
inline Vector subgradient_1bit(const SensingInstance& inst, const OneBitObservation& q, const Vector& z) {
  detail::check_shapes(inst, q.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  Vector weight = Vector::Zero(v.size());
  for (Index i = 0; i < v.size(); ++i)
    if (-q.bits(i) * v(i) > 0.0) weight(i) = -q.bits(i);
  return inst.matrix.transpose() * weight / static_cast<double>(v.size());
}

/// Number of terms with strictly positive ReLU argument.
inline Index active_count_1bit(const SensingInstance& inst, const OneBitObservation& q, const Vector& z) {
  detail::check_shapes(inst, q.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  Index count = 0;
  for (Index i = 0; i < v.size(); ++i) count += (-q.bits(i) * v(i) > 0.0);
  return count;
}

// ---------------------------------------------------------------------------
// Multi-bit ReLU loss over the hyperplane ladder
//   L(z) = (1/m) sum_i sum_j [ -Q_ij (<a_i,z> + tau_i + j delta) ]_+
// ---------------------------------------------------------------------------

inline double relu_loss_mbit_sum(const SensingInstance& inst, const MultiBitObservation& obs, const Vector& z) {
  detail::check_shapes(inst, obs.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  const int k = obs.cfg.max_shift();
  const double delta = obs.cfg.delta;
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const int level = obs.levels(i);
    for (int j = -k; j <= k; ++j) {
      const double q = (j >= -level) ? 1.0 : -1.0;
      sum += relu(-q * (v(i) + j * delta));
    }
  }
  return sum / static_cast<double>(v.size());
}

/// Per-measurement loss through the count K of separating hyperplanes:
/// with d = |v - center|, the K crossed hyperplanes sit at distances
/// d - (k - 1/2) delta, k = 1..K, summing to K (d + delta/2) - K (K+1) delta/2.
/// K is capped by the hyperplanes that exist on that side of the cell.
inline double ladder_term(double v, int level, const QuantizerConfig& cfg) {
  const double center = cfg.center(level);
  const double d = std::abs(v - center);
  const int available = v >= center ? cfg.max_shift() - level : level + cfg.max_shift() + 1;
  const double raw = 1.0 + std::floor((d - cfg.delta / 2.0) / cfg.delta);
  const double kk = std::clamp(raw, 0.0, static_cast<double>(available));
  return kk * (d + cfg.delta / 2.0) - kk * (kk + 1.0) * cfg.delta / 2.0;
}

inline double relu_loss_mbit_K(const SensingInstance& inst, const MultiBitObservation& obs, const Vector& z) {
  detail::check_shapes(inst, obs.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) sum += ladder_term(v(i), obs.levels(i), obs.cfg);
  return sum / static_cast<double>(v.size());
}

inline Vector subgradient_mbit(const SensingInstance& inst, const MultiBitObservation& obs, const Vector& z) {
  detail::check_shapes(inst, obs.size(), z);
  const Vector v = inst.matrix * z + inst.dither;
  const int k = obs.cfg.max_shift();
  const double delta = obs.cfg.delta;
  Vector weight = Vector::Zero(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const int level = obs.levels(i);
    int w = 0;
    for (int j = -k; j <= k; ++j) {
      const double arg = v(i) + j * delta;
      if (j >= -level) {
        w -= (arg < 0.0);
      } else {
        w += (arg > 0.0);
      }
    }
    weight(i) = w;
  }
  return inst.matrix.transpose() * weight / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Comparison objectives (to be maximized)
// ---------------------------------------------------------------------------

/// (1/m) sum_i q_i <a_i, z>
inline double plan_objective(const SensingInstance& inst, const OneBitObservation& q, const Vector& z) {
  detail::check_shapes(inst, q.size(), z);
  return q.as_real().dot(inst.matrix * z) / static_cast<double>(q.size());
}

/// plan_objective(z) - ||z||^2 / (2 lambda); maximized over R^n by (lambda/m) A^T q.
inline double dirksen_objective(const SensingInstance& inst, const OneBitObservation& q, const Vector& z,
                                double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("dirksen_objective: lambda must be positive");
  return plan_objective(inst, q, z) - z.squaredNorm() / (2.0 * lambda);
}

// ---------------------------------------------------------------------------

/// An instance paired with its quantized observation.
class LossContext {
 public:
  LossContext(const SensingInstance& inst, OneBitObservation q) : inst_(&inst), obs_(std::move(q)) { check(); }
  LossContext(const SensingInstance& inst, MultiBitObservation q) : inst_(&inst), obs_(std::move(q)) { check(); }

  const SensingInstance& instance() const { return *inst_; }
  bool is_multibit() const { return std::holds_alternative<MultiBitObservation>(obs_); }
  const OneBitObservation& one_bit() const { return std::get<OneBitObservation>(obs_); }
  const MultiBitObservation& multi_bit() const { return std::get<MultiBitObservation>(obs_); }
  Index rows() const { return inst_->rows(); }
  Index dim() const { return inst_->dim(); }

  double value(const Vector& z) const {
    return is_multibit() ? relu_loss_mbit_K(*inst_, multi_bit(), z) : relu_loss_1bit(*inst_, one_bit(), z);
  }

  Vector subgradient(const Vector& z) const {
    return is_multibit() ? subgradient_mbit(*inst_, multi_bit(), z) : subgradient_1bit(*inst_, one_bit(), z);
  }

  /// Quantized measurements of z, using the observation's quantizer and dither:
  /// signs for one-bit, alphabet centers for multi-bit.
  Vector requantize(const Vector& z) const {
    const Vector v = inst_->matrix * z + inst_->dither;
    Vector out(v.size());
    if (is_multibit()) {
      for (Index i = 0; i < v.size(); ++i) out(i) = quantize_center(v(i), multi_bit().cfg);
    } else {
      for (Index i = 0; i < v.size(); ++i) out(i) = sign_of(v(i));
    }
    return out;
  }

  /// Observation in the same real-valued representation as requantize().
  Vector observed() const { return is_multibit() ? multi_bit().centers() : one_bit().as_real(); }

 private:
  void check() const {
    inst_->validate();
    const Index size = is_multibit() ? multi_bit().size() : one_bit().size();
    if (size != inst_->rows()) throw DimensionError("LossContext: observation length does not match instance");
  }

  const SensingInstance* inst_;
  std::variant<OneBitObservation, MultiBitObservation> obs_;
};

}  // namespace qcs
