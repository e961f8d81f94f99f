#pragma once

#include "qcs/loss.hpp"
#include "qcs/prior.hpp"
#include "qcs/quantize.hpp"
#include "qcs/rng.hpp"
#include "qcs/simplex.hpp"
#include "qcs/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qcs {

enum class StepRule {
  Polyak,       // (L(z) - f*) / ||g||^2 with a fixed target f* (0 by default)
  Diminishing,  // c / sqrt(k+1) along g / ||g||, c = radius
  TargetLevel,  // Polyak towards best - delta, delta adapted along the path
};

inline StepRule parse_step_rule(const std::string& s) {
  if (s == "polyak") return StepRule::Polyak;
  if (s == "diminishing") return StepRule::Diminishing;
  if (s == "target-level") return StepRule::TargetLevel;
  throw std::invalid_argument("unknown step rule: " + s);
}

enum class SubgradientMethod {
  Projected,      // z <- P_T(z - step * g)
  SpaceDilation,  // Shor's r-algorithm on the loss plus an exact l1 penalty
};

inline SubgradientMethod parse_subgradient_method(const std::string& s) {
  if (s == "projected") return SubgradientMethod::Projected;
  if (s == "space-dilation") return SubgradientMethod::SpaceDilation;
  throw std::invalid_argument("unknown subgradient method: " + s);
}

struct SolverConfig {
  Index max_iter = 1000;  // loss/subgradient evaluations
  double tol = 1e-8;
  StepRule step_rule = StepRule::Polyak;
  std::uint64_t seed = 0;
  SubgradientMethod method = SubgradientMethod::Projected;

  double polyak_target = 0.0;
  double relaxation = 1.0;    // step multiplier in (0, 2) for Polyak-type rules
  bool random_start = false;  // start from a seeded random point of the prior instead of 0

  // TargetLevel: delta starts at half the initial loss, grows by target_grow
  // when the level is reached and halves once the path walked without reaching
  // it exceeds target_path * radius.
  double target_path = 2.0;
  double target_grow = 1.5;

  // SpaceDilation: dilation coefficient and step growth along a direction.
  double dilation = 3.0;
  double step_growth = 1.1;
  int steps_per_growth = 3;

  void validate() const {
    if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be at least 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("SolverConfig: tol must be nonnegative");
    if (!(relaxation > 0.0 && relaxation < 2.0)) throw std::invalid_argument("SolverConfig: relaxation must lie in (0, 2)");
    if (!(dilation > 1.0)) throw std::invalid_argument("SolverConfig: dilation must exceed 1");
  }
};

struct RecoveryOutput {
  Vector estimate;
  double final_loss = 0.0;
  Index iterations = 0;
  std::string solver_id;
  bool consistent = false;
  std::optional<double> lp_objective;  // sum form, set by the LP route
};

namespace detail {
inline double prior_radius(const PriorSet& prior, Index n) {
  if (prior.kind() == PriorSet::Kind::L1Ball) return prior.radius();
  return std::sqrt(static_cast<double>(std::min(prior.sparsity(), n)));
}

inline Vector start_point(const PriorSet& prior, Index n, const SolverConfig& cfg) {
  if (!cfg.random_start) return Vector::Zero(n);
  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector z(n);
  for (Index j = 0; j < n; ++j) z(j) = g(rng);
  return project(prior, z);
}

// Tracks the best projected point seen.
struct BestPoint {
  Vector z;
  double f = std::numeric_limits<double>::infinity();

  bool offer(const Vector& cand, double fc) {
    if (!(fc < f)) return false;
    z = cand;
    f = fc;
    return true;
  }
};

inline void projected_subgradient(const LossContext& ctx, const PriorSet& prior, const SolverConfig& cfg,
                                  BestPoint& best, Index& evals) {
  const double radius = prior_radius(prior, ctx.dim());
  Vector z = best.z;
  double f = best.f;
  double delta = 0.5 * f;
  double path = 0.0;
  while (evals < cfg.max_iter && best.f > cfg.tol) {
    const Vector g = ctx.subgradient(z);
    const double gg = g.squaredNorm();
    if (gg == 0.0) break;  // 0 is a subgradient: z is optimal
    double step = 0.0;
    switch (cfg.step_rule) {
      case StepRule::Polyak:
        step = cfg.relaxation * std::max(f - cfg.polyak_target, 0.0) / gg;
        break;
      case StepRule::Diminishing:
        step = radius / (std::sqrt(static_cast<double>(evals)) * std::sqrt(gg));
        break;
      case StepRule::TargetLevel:
        step = cfg.relaxation * std::max(f - (best.f - delta), 0.0) / gg;
        break;
    }
    if (step == 0.0) break;
    z = project(prior, z - step * g);
    f = ctx.value(z);
    ++evals;
    const double level = best.f - delta;
    best.offer(z, f);
    if (cfg.step_rule == StepRule::TargetLevel) {
      path += step * std::sqrt(gg);
      if (best.f <= level) {
        delta *= cfg.target_grow;
        path = 0.0;
      } else if (path > cfg.target_path * radius) {
        delta /= 2.0;
        path = 0.0;
      }
    }
  }
}

// Shor's r-algorithm with the adaptive step of Stetsyuk's ralgb5: move along
// the dilated anti-subgradient while the directional derivative stays
// negative, then dilate space along the difference of successive subgradients.
// The l1 ball enters as an exact penalty rho * (||z||_1 - R)_+, with rho above
// any subgradient's sup-norm; iterates are projected before they are scored.
inline void space_dilation(const LossContext& ctx, const PriorSet& prior, const SolverConfig& cfg, BestPoint& best,
                           Index& evals) {
  const Index n = ctx.dim();
  const double radius = prior_radius(prior, n);
  const bool l1 = prior.kind() == PriorSet::Kind::L1Ball;
  const Matrix& a = ctx.instance().matrix;
  const double weight = ctx.is_multibit() ? ctx.multi_bit().cfg.hyperplane_count() : 1.0;
  const double rho = 2.0 * weight * a.cwiseAbs().rowwise().maxCoeff().mean();

  auto penalized = [&](const Vector& z, Vector& g) {
    g = ctx.subgradient(z);
    if (!l1) return;
    if (z.lpNorm<1>() > radius)
      for (Index j = 0; j < n; ++j) g(j) += rho * (z(j) > 0.0 ? 1.0 : (z(j) < 0.0 ? -1.0 : 0.0));
  };
  auto score = [&](const Vector& z) {
    const Vector p = project(prior, z);
    best.offer(p, ctx.value(p));
  };

  Matrix b = Matrix::Identity(n, n);
  Vector z = best.z;
  Vector g, g_next;
  penalized(z, g);
  double h = radius;
  while (evals < cfg.max_iter && best.f > cfg.tol) {
    const Vector bg = b.transpose() * g;
    const double nbg = bg.norm();
    if (nbg == 0.0) break;
    const Vector dir = b * (bg / nbg);
    double slope = 1.0;
    int moves = 0;
    double travelled = 0.0;
    while (slope > 0.0 && evals < cfg.max_iter) {
      z -= h * dir;
      travelled += h;
      if (++moves % cfg.steps_per_growth == 0) h *= cfg.step_growth;
      penalized(z, g_next);
      score(z);
      ++evals;
      slope = dir.dot(g_next);
    }
    if (travelled * dir.norm() < 1e-15 * std::max(1.0, z.norm())) break;
    const Vector dg = b.transpose() * (g_next - g);
    const double ndg = dg.norm();
    if (ndg > 0.0) {
      const Vector xi = dg / ndg;
      b += (1.0 / cfg.dilation - 1.0) * (b * xi) * xi.transpose();
    }
    g = g_next;
  }
}
}  // namespace detail

/// Minimizes the context's ReLU loss over the prior with a subgradient method
/// and returns the best (projected, hence feasible) point visited.
inline RecoveryOutput solve_relu_subgradient(const LossContext& ctx, const PriorSet& prior, const SolverConfig& cfg = {}) {
  cfg.validate();
  detail::BestPoint best;
  const Vector z0 = detail::start_point(prior, ctx.dim(), cfg);
  best.offer(z0, ctx.value(z0));
  Index evals = 1;
  if (cfg.method == SubgradientMethod::Projected) detail::projected_subgradient(ctx, prior, cfg, best, evals);
  else detail::space_dilation(ctx, prior, cfg, best, evals);

  RecoveryOutput out;
  out.solver_id = cfg.method == SubgradientMethod::Projected ? "relu-sg" : "relu-ralg";
  out.estimate = std::move(best.z);
  out.final_loss = best.f;
  out.iterations = evals;
  out.consistent = best.f <= cfg.tol;
  return out;
}

/// Terms of the ReLU program as an LP: one row per one-bit measurement, or one
/// row per (measurement, hyperplane) for multi-bit observations. Rows that no
/// point of radius * B_1 can activate are dropped.
inline lp::ReluProgram relu_program(const LossContext& ctx, double radius) {
  const SensingInstance& inst = ctx.instance();
  lp::ReluProgram p;
  p.matrix = &inst.matrix;
  p.radius = radius;
  const Vector reach = radius * inst.matrix.cwiseAbs().rowwise().maxCoeff();
  auto add = [&](Index i, double s, double c) {
    if (c + reach(i) <= 0.0) return;
    p.measurement.push_back(i);
    p.sign.push_back(s);
    p.offset.push_back(c);
  };
  if (ctx.is_multibit()) {
    const auto& obs = ctx.multi_bit();
    const int kmax = obs.cfg.max_shift();
    for (Index i = 0; i < inst.rows(); ++i)
      for (int j = -kmax; j <= kmax; ++j) {
        const double q = (j >= -obs.levels(i)) ? 1.0 : -1.0;
        add(i, -q, -q * (inst.dither(i) + j * obs.cfg.delta));
      }
  } else {
    const auto& q = ctx.one_bit();
    for (Index i = 0; i < inst.rows(); ++i) add(i, -q.bits(i), -q.bits(i) * inst.dither(i));
  }
  return p;
}

/// Exact minimizer of the ReLU loss over an l1 ball via the revised simplex.
inline RecoveryOutput solve_relu_lp(const LossContext& ctx, const PriorSet& prior, double tol = 1e-8,
                                    lp::SimplexOptions opt = {}) {
  if (prior.kind() != PriorSet::Kind::L1Ball) throw std::invalid_argument("solve_relu_lp: prior must be an l1 ball");
  const lp::ReluProgram program = relu_program(ctx, prior.radius());
  lp::SimplexResult res = lp::solve_relu_program(program, opt);
  if (res.status == lp::SimplexStatus::NumericalFailure) throw std::runtime_error("solve_relu_lp: numerical failure");
  RecoveryOutput out;
  out.solver_id = "relu-lp";
  out.estimate = project_l1_ball(res.z, prior.radius());
  out.final_loss = ctx.value(out.estimate);
  out.iterations = res.pivots;
  out.consistent = out.final_loss <= tol && res.status == lp::SimplexStatus::Optimal;
  out.lp_objective = res.lp_objective / static_cast<double>(ctx.rows());
  return out;
}

// ---------------------------------------------------------------------------
// Back-projection and thresholding
// ---------------------------------------------------------------------------

enum class BackProjection {
  DitheredScale,          // (lambda / m) A^T q
  UnditheredOneBitScale,  // sqrt(pi/2) / m A^T q
};

/// x# = P_T(c A^T q). For multi-bit observations q is the vector of centers and
/// c = 1/m; `lambda` only enters the one-bit dithered scale.
inline RecoveryOutput back_projection(const LossContext& ctx, const PriorSet& prior, BackProjection mode,
                                      double lambda) {
  const SensingInstance& inst = ctx.instance();
  const double m = static_cast<double>(ctx.rows());
  double scale = 0.0;
  if (ctx.is_multibit()) {
    scale = 1.0 / m;
  } else if (mode == BackProjection::DitheredScale) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("back_projection: lambda must be nonnegative");
    scale = lambda / m;
  } else {
    scale = std::sqrt(std::numbers::pi / 2.0) / m;
  }
  RecoveryOutput out;
  out.solver_id = "back-projection";
  out.estimate = project(prior, scale * (inst.matrix.transpose() * ctx.observed()));
  out.final_loss = ctx.value(out.estimate);
  out.iterations = 1;
  out.consistent = out.final_loss == 0.0;
  return out;
}

/// maximizer of plan(z) - ||z||^2/(2 lambda) over R^n, projected onto T.
inline RecoveryOutput solve_dirksen(const LossContext& ctx, const PriorSet& prior, double lambda) {
  if (ctx.is_multibit()) throw std::invalid_argument("solve_dirksen: one-bit observation required");
  RecoveryOutput out = back_projection(ctx, prior, BackProjection::DitheredScale, lambda);
  out.solver_id = "dirksen";
  return out;
}

enum class ThresholdVariant { BIHT, BIST, QIHT, QIST };

inline std::string to_string(ThresholdVariant v) {
  switch (v) {
    case ThresholdVariant::BIHT: return "biht";
    case ThresholdVariant::BIST: return "bist";
    case ThresholdVariant::QIHT: return "qiht";
    case ThresholdVariant::QIST: return "qist";
  }
  return "?";
}

/// mu = (1/m)(1 - sqrt(2s/m)), clamped at 0.
inline double threshold_step(Index m, Index s) {
  const double md = static_cast<double>(m);
  return std::max(0.0, (1.0 - std::sqrt(2.0 * static_cast<double>(s) / md)) / md);
}

struct ThresholdOptions {
  Index max_iter = 1000;
  // false: requantize with the measurement dither; true: drop it, as in the
  // undithered form of the iteration.
  bool raw_residual = false;
};

/// x^{k+1} = P_T(x^k + mu A^T (q - Q(A x^k))), x^0 = 0. Hard variants project
/// onto s-sparse vectors, soft variants onto sqrt(s) B_1. Stops on a zero
/// residual; returns the iterate with the smallest residual norm.
/// final_loss is the fraction of measurements whose quantization disagrees.
inline RecoveryOutput iterative_threshold(const LossContext& ctx, Index s, ThresholdVariant variant,
                                          ThresholdOptions opt = {}) {
  const bool multibit_variant = variant == ThresholdVariant::QIHT || variant == ThresholdVariant::QIST;
  if (multibit_variant != ctx.is_multibit())
    throw std::invalid_argument("iterative_threshold: variant does not match the observation type");
  if (s < 1) throw std::invalid_argument("iterative_threshold: s must be at least 1");
  const bool hard = variant == ThresholdVariant::BIHT || variant == ThresholdVariant::QIHT;
  const PriorSet prior = hard ? PriorSet::s_sparse(s) : PriorSet::l1_ball(std::sqrt(static_cast<double>(s)));
  const SensingInstance& inst = ctx.instance();
  const Index m = ctx.rows();
  const double mu = threshold_step(m, s);
  const Vector q = ctx.observed();

  auto quantized = [&](const Vector& x) {
    Vector v = inst.matrix * x;
    if (!opt.raw_residual) v += inst.dither;
    if (ctx.is_multibit()) {
      for (Index i = 0; i < m; ++i) v(i) = quantize_center(v(i), ctx.multi_bit().cfg);
    } else {
      for (Index i = 0; i < m; ++i) v(i) = sign_of(v(i));
    }
    return v;
  };

  Vector x = Vector::Zero(ctx.dim());
  Vector best = x;
  Vector r = q - quantized(x);
  double best_res = r.squaredNorm();
  Index best_mismatch = (r.array() != 0.0).count();
  Index k = 0;
  while (k < opt.max_iter && best_res > 0.0) {
    x = project(prior, x + mu * (inst.matrix.transpose() * r));
    ++k;
    r = q - quantized(x);
    const double res = r.squaredNorm();
    if (res < best_res) {
      best_res = res;
      best = x;
      best_mismatch = (r.array() != 0.0).count();
    }
  }

  RecoveryOutput out;
  out.solver_id = to_string(variant);
  out.estimate = std::move(best);
  out.final_loss = static_cast<double>(best_mismatch) / static_cast<double>(m);
  out.iterations = k;
  out.consistent = best_mismatch == 0;
  return out;
}

}  // namespace qcs
