#include "qcs/prior.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qcs;

namespace {

// Soft threshold with the level found by bisection on sum (|v| - t)_+ = R.
Vector bisection_projection(const Vector& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((v.cwiseAbs().array() - mid).max(0.0).sum() > radius ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return (v.cwiseAbs().array() - t).max(0.0).matrix().cwiseProduct(v.cwiseSign());
}

// Smallest distance from v to a grid of points on the l1 sphere of radius R
// in 2 or 3 dimensions; h is the grid step in each free coordinate.
double sphere_grid_distance(const Vector& v, double radius, int steps) {
  const double h = 2.0 * radius / steps;
  double best = std::numeric_limits<double>::infinity();
  if (v.size() == 2) {
    for (int a = 0; a <= steps; ++a) {
      const double x = -radius + a * h;
      const double rest = radius - std::abs(x);
      for (double s : {-1.0, 1.0}) best = std::min(best, std::hypot(v(0) - x, v(1) - s * rest));
    }
    return best;
  }
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; b <= steps; ++b) {
      const double x = -radius + a * h, y = -radius + b * h;
      const double rest = radius - std::abs(x) - std::abs(y);
      if (rest < 0.0) continue;
      for (double s : {-1.0, 1.0}) best = std::min(best, (v - Vector{{x, y, s * rest}}).norm());
    }
  return best;
}

}  // namespace

TEST(Project, InteriorUnchanged) {
  const Vector v{{0.2, -0.3, 0.1}};
  EXPECT_EQ(project(PriorSet::l1_ball(1.0), v), v);
}

TEST(Project, AxisProjection) { EXPECT_EQ(project(PriorSet::l1_ball(1.0), Vector{{2.0, 0.0}}), (Vector{{1.0, 0.0}})); }

TEST(Project, DiagonalProjection) {
  const Vector out = project(PriorSet::l1_ball(1.0), Vector{{1.0, 1.0}});
  EXPECT_NEAR(out(0), 0.5, 1e-15);
  EXPECT_NEAR(out(1), 0.5, 1e-15);
  EXPECT_NEAR(out.lpNorm<1>(), 1.0, 1e-15);
}

TEST(Project, HardThresholdKeepsLargestLowestIndexTies) {
  EXPECT_EQ(hard_threshold(Vector{{1.0, -3.0, 2.0, 0.5}}, 2), (Vector{{0.0, -3.0, 2.0, 0.0}}));
  EXPECT_EQ(hard_threshold(Vector{{1.0, -1.0, 1.0}}, 2), (Vector{{1.0, -1.0, 0.0}}));
  EXPECT_EQ(hard_threshold(Vector{{1.0, 2.0}}, 5), (Vector{{1.0, 2.0}}));
}

TEST(Membership, Examples) {
  EXPECT_FALSE(membership(PriorSet::l1_ball(1.0), Vector{{0.6, 0.6}}, 0.0));
  EXPECT_TRUE(membership(PriorSet::s_sparse(2), Vector{{1.0, 0.0, 2.0, 0.0}}, 0.0));
  EXPECT_FALSE(membership(PriorSet::s_sparse(1), Vector{{1.0, 0.0, 2.0, 0.0}}, 0.0));
  EXPECT_THROW(membership(PriorSet::l1_ball(1.0), Vector::Zero(2), -1.0), std::invalid_argument);
}

TEST(PriorSetTest, RejectsInvalid) {
  EXPECT_THROW(PriorSet::l1_ball(0.0), std::invalid_argument);
  EXPECT_THROW(PriorSet::s_sparse(0), std::invalid_argument);
}

TEST(ProjectProperties, MembershipIdempotenceNonExpansive) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 50);
    const double scale = std::exp(3.0 * g(rng));
    Vector u(n), v(n);
    for (Index j = 0; j < n; ++j) {
      u(j) = scale * g(rng);
      v(j) = scale * g(rng);
    }
    const double radius = std::exp(g(rng));
    for (const PriorSet& prior : {PriorSet::l1_ball(radius), PriorSet::s_sparse(1 + t % 7)}) {
      const Vector pu = project(prior, u);
      EXPECT_TRUE(membership(prior, pu, 1e-10 * std::max(1.0, radius)));
      const Vector ppu = project(prior, pu);
      EXPECT_EQ(ppu, pu);
    }
    const PriorSet ball = PriorSet::l1_ball(radius);
    EXPECT_LE((project(ball, u) - project(ball, v)).norm(), (u - v).norm() + 1e-12 * std::max(1.0, scale));
  }
}

TEST(ProjectProperties, MatchesBisectionOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 40);
    Vector v(n);
    for (Index j = 0; j < n; ++j) v(j) = 3.0 * g(rng);
    const double radius = 0.1 + std::abs(g(rng));
    EXPECT_LE((project_l1_ball(v, radius) - bisection_projection(v, radius)).norm(), 1e-9);
  }
}

TEST(ProjectProperties, GridOptimalityLowDimension) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Index n : {2, 3}) {
    const int steps = n == 2 ? 20000 : 400;
    const double h = 2.0 / steps;
    int tested = 0;
    while (tested < (n == 2 ? 1000 : 200)) {
      Vector v(n);
      for (Index j = 0; j < n; ++j) v(j) = 2.0 * g(rng);
      if (v.lpNorm<1>() <= 1.0) continue;
      ++tested;
      const double ours = (v - project_l1_ball(v, 1.0)).norm();
      const double grid = sphere_grid_distance(v, 1.0, steps);
      EXPECT_LE(ours, grid + 1e-12);
      EXPECT_GE(ours, grid - 2.0 * h);
    }
  }
}

TEST(ProjectProperties, SampledOptimalityUpToEight) {
  // Random points of the sphere never beat the projection.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 1000; ++t) {
    const Index n = 2 + t % 7;
    Vector v(n);
    for (Index j = 0; j < n; ++j) v(j) = 2.0 * g(rng);
    if (v.lpNorm<1>() <= 1.5) continue;
    const double ours = (v - project_l1_ball(v, 1.5)).norm();
    for (int k = 0; k < 200; ++k) {
      Vector w(n);
      for (Index j = 0; j < n; ++j) w(j) = e(rng) * (g(rng) < 0 ? -1.0 : 1.0);
      w *= 1.5 / w.lpNorm<1>();
      EXPECT_LE(ours, (v - w).norm() + 1e-12);
    }
  }
}
