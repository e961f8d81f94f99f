#include "qcs/ensemble.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace qcs;

namespace {

// Empirical second-moment matrix of the rows, accumulated in chunks of fresh
// matrices so Hadamard (m <= n) can reach many samples.
Matrix row_covariance(EnsembleKind kind, Index n, Index samples, std::uint64_t seed) {
  Matrix cov = Matrix::Zero(n, n);
  const Index block = kind == EnsembleKind::SubsampledHadamard ? n : 1000;
  Index seen = 0;
  for (std::uint64_t k = 0; seen < samples; ++k) {
    const Matrix a = gen_matrix(kind, block, n, derive_seed(seed, {k}));
    cov += a.transpose() * a;
    seen += block;
  }
  return cov / static_cast<double>(seen);
}

double variance(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

}  // namespace

TEST(GenMatrix, RademacherEntriesAreSigns) {
  const Matrix a = gen_matrix(EnsembleKind::Rademacher, 4, 4, 11);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_TRUE(a(i, j) == 1.0 || a(i, j) == -1.0);
}

TEST(GenMatrix, GaussianColumnSecondMoment) {
  const Matrix a = gen_matrix(EnsembleKind::Gaussian, 10000, 8, 3);
  for (Index j = 0; j < 8; ++j) EXPECT_NEAR(a.col(j).squaredNorm() / 10000.0, 1.0, 0.05);
}

TEST(GenMatrix, HadamardRowsHaveUnitEntries) {
  const Matrix a = gen_matrix(EnsembleKind::SubsampledHadamard, 4, 8, 5);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(a.row(i).squaredNorm(), 8.0);
    for (Index j = 0; j < 8; ++j) EXPECT_EQ(std::abs(a(i, j)), 1.0);
  }
}

TEST(GenMatrix, HadamardRowsAreOrthogonal) {
  const Matrix a = gen_matrix(EnsembleKind::SubsampledHadamard, 16, 16, 9);
  const Matrix g = a * a.transpose();
  EXPECT_TRUE(g.isApprox(16.0 * Matrix::Identity(16, 16)));
}

TEST(GenMatrix, RejectsBadShapes) {
  EXPECT_THROW(gen_matrix(EnsembleKind::SubsampledHadamard, 4, 12, 1), DimensionError);
  EXPECT_THROW(gen_matrix(EnsembleKind::SubsampledHadamard, 9, 8, 1), DimensionError);
  EXPECT_THROW(gen_matrix(EnsembleKind::Gaussian, 0, 8, 1), DimensionError);
}

TEST(GenMatrix, Deterministic) {
  for (auto kind : {EnsembleKind::Gaussian, EnsembleKind::Rademacher, EnsembleKind::SubsampledHadamard}) {
    const Matrix a = gen_matrix(kind, 8, 16, 1234);
    const Matrix b = gen_matrix(kind, 8, 16, 1234);
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
    EXPECT_FALSE(a == gen_matrix(kind, 8, 16, 1235));
  }
}

TEST(GenMatrix, RowsAreIsotropic) {
  const Index n = 16;
  for (auto kind : {EnsembleKind::Gaussian, EnsembleKind::Rademacher, EnsembleKind::SubsampledHadamard}) {
    const Matrix cov = row_covariance(kind, n, 100000, 77);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) EXPECT_NEAR(cov(i, j), 1.0, 0.02) << to_string(kind);
        else EXPECT_LT(std::abs(cov(i, j)), 0.02) << to_string(kind);
      }
  }
}

TEST(GenDither, Support) {
  const Vector tau = gen_dither(5, 0.5, 8);
  EXPECT_LE(tau.cwiseAbs().maxCoeff(), 0.5);
}

TEST(GenDither, Moments) {
  const Vector tau = gen_dither(1000000, 1.0, 21);
  EXPECT_NEAR(tau.mean(), 0.0, 0.01);
  EXPECT_NEAR(variance(tau), 1.0 / 3.0, 0.02 / 3.0);
  EXPECT_LE(tau.cwiseAbs().maxCoeff(), 1.0);
}

TEST(GenDither, RejectsNonpositiveRange) { EXPECT_THROW(gen_dither(3, 0.0, 1), std::invalid_argument); }

TEST(GenNoise, ZeroSigmaGivesZero) { EXPECT_TRUE(gen_noise(17, 0.0, 4).isZero(0.0)); }

TEST(GenNoise, Variance) {
  EXPECT_NEAR(variance(gen_noise(1000000, 1.0, 31)), 1.0, 0.02);
  EXPECT_NEAR(variance(gen_noise(1000000, 0.1, 32)), 0.01, 0.0002);
}

TEST(GenNoise, PairedAcrossSigma) {
  const Vector a = gen_noise(50, 0.1, 99);
  const Vector b = gen_noise(50, 2.0, 99);
  EXPECT_TRUE((20.0 * a).isApprox(b));
}

TEST(GenSignal, ExactSparse) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Signal x = gen_signal(SignalKind::ExactSparse, 200, 10, seed);
    EXPECT_NEAR(x.values.norm(), 1.0, 1e-12);
    EXPECT_EQ((x.values.array() != 0.0).count(), 10);
    EXPECT_LE(x.values.lpNorm<1>(), std::sqrt(10.0) + 1e-12);
  }
}

TEST(GenSignal, ApproxSparseInScaledBall) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Signal x = gen_signal(SignalKind::ApproxSparse, 200, 10, seed);
    EXPECT_LE(x.values.lpNorm<1>(), std::sqrt(10.0) + 1e-9);
    EXPECT_EQ((x.values.array() != 0.0).count(), 200);
  }
}

TEST(GenSignal, RejectsSparsityAboveDimension) {
  EXPECT_THROW(gen_signal(SignalKind::ExactSparse, 5, 6, 0), std::invalid_argument);
}

TEST(MakeInstance, StreamsAreSeparatedAndValid) {
  const SensingInstance a = make_instance(EnsembleKind::Gaussian, 30, 10, 0.7, 0.2, 5);
  a.validate();
  EXPECT_EQ(a.rows(), 30);
  EXPECT_EQ(a.dim(), 10);
  EXPECT_LE(a.dither.cwiseAbs().maxCoeff(), 0.7);
  // Same seed, different noise level: matrix and dither unchanged.
  const SensingInstance b = make_instance(EnsembleKind::Gaussian, 30, 10, 0.7, 0.4, 5);
  EXPECT_EQ(a.matrix, b.matrix);
  EXPECT_EQ(a.dither, b.dither);
  EXPECT_TRUE((2.0 * a.noise).isApprox(b.noise));
}

TEST(SensingInstance, ValidateCatchesDitherOutsideRange) {
  SensingInstance inst = make_instance(EnsembleKind::Gaussian, 4, 3, 1.0, 0.0, 1);
  inst.dither(2) = 1.5;
  EXPECT_THROW(inst.validate(), std::invalid_argument);
  inst.dither(2) = 0.0;
  inst.noise.resize(3);
  EXPECT_THROW(inst.validate(), DimensionError);
}
