#pragma once

#include "qcs/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qcs {

/// Signal prior T: an l1 ball R * B_1^n or the set of s-sparse vectors.
class PriorSet {
 public:
  enum class Kind { L1Ball, SSparse };

  static PriorSet l1_ball(double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("PriorSet: radius must be positive");
    return PriorSet(Kind::L1Ball, radius, 0);
  }

  static PriorSet s_sparse(Index s) {
    if (s < 1) throw std::invalid_argument("PriorSet: sparsity must be at least 1");
    return PriorSet(Kind::SSparse, 0.0, s);
  }

  Kind kind() const { return kind_; }
  double radius() const { return radius_; }
  Index sparsity() const { return sparsity_; }

 private:
  PriorSet(Kind k, double r, Index s) : kind_(k), radius_(r), sparsity_(s) {}

  Kind kind_;
  double radius_;
  Index sparsity_;
};

/// Euclidean projection onto radius * B_1 by sorting magnitudes and
/// shrinking with the largest feasible threshold.
inline Vector project_l1_ball(const Vector& v, double radius) {
  const double l1 = v.lpNorm<1>();
  // Outputs of this function may exceed the radius by rounding; treating
  // those as interior keeps the projection idempotent.
  if (l1 <= radius * (1.0 + 1e-12)) return v;
  std::vector<double> mag(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) mag[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::sort(mag.begin(), mag.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mag.size(); ++j) {
    cumsum += mag[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (mag[j] - t > 0.0) theta = t;
  }
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double shrunk = std::abs(v(i)) - theta;
    out(i) = shrunk > 0.0 ? std::copysign(shrunk, v(i)) : 0.0;
  }
  // |v_i| - theta cancels badly when |v| >> radius; the answer lies on the
  // sphere, so put it back there.
  const double got = out.lpNorm<1>();
  if (got > 0.0) out *= radius / got;
  return out;
}

/// Keeps the s largest magnitudes; ties go to the lower index.
inline Vector hard_threshold(const Vector& v, Index s) {
  if (s >= v.size()) return v;
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(v(a)) > std::abs(v(b)); });
  Vector out = Vector::Zero(v.size());
  for (Index k = 0; k < s; ++k) out(order[static_cast<std::size_t>(k)]) = v(order[static_cast<std::size_t>(k)]);
  return out;
}

inline Vector project(const PriorSet& prior, const Vector& v) {
  return prior.kind() == PriorSet::Kind::L1Ball ? project_l1_ball(v, prior.radius())
                                                : hard_threshold(v, prior.sparsity());
}

inline bool membership(const PriorSet& prior, const Vector& v, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("membership: tol must be nonnegative");
  if (prior.kind() == PriorSet::Kind::L1Ball) return v.lpNorm<1>() <= prior.radius() + tol;
  return (v.array() != 0.0).count() <= prior.sparsity();
}

}  // namespace qcs
