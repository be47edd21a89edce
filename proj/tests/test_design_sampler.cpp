#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "recert/design_sampler.hpp"

namespace recert {
namespace {

Matrix sample_covariance(const Matrix& rows) {
  return rows.transpose() * rows / static_cast<double>(rows.rows());
}

TEST(SampleDesign, CleanDesignHasNoCorruption) {
  const auto sample = sample_design(3, 10, CovarianceSpec::identity(3),
                                    ContaminationSpec::clean(10), 1);
  EXPECT_TRUE(sample.E_D.isZero());
  EXPECT_TRUE(sample.E_R.isZero());
  EXPECT_TRUE(sample.X == sample.Y);
  EXPECT_TRUE(sample.Sigma_S == Matrix::Identity(3, 3));
}

TEST(SampleDesign, ConstantRowTouchesOnlyOutlierRows) {
  Vector mu(2);
  mu << 5, 0;
  const auto spec = ContaminationSpec::constant_row(SupportSet({1}, 6), mu);
  const auto sample = sample_design(2, 6, CovarianceSpec::identity(2), spec, 3);
  EXPECT_TRUE(sample.E_D.row(0).transpose() == mu);
  EXPECT_TRUE(sample.E_D.bottomRows(5).isZero());
}

TEST(SampleDesign, LawOfLargeNumbersIdentity) {
  const Index n = 100000;
  const auto sample = sample_design(2, n, CovarianceSpec::identity(2),
                                    ContaminationSpec::clean(n), 2024);
  const Matrix cov = sample_covariance(sample.Y);
  EXPECT_LE((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(SampleDesign, RandomizedPartMatchesSigmaS) {
  const Index n = 100000;
  Vector d(3);
  d << 0.5, 1.0, 1.5;
  ContaminationSpec contamination =
      ContaminationSpec::gaussian_rows(n, CovarianceSpec::diagonal(d));
  const auto sample = sample_design(3, n, CovarianceSpec::ar1(3, 0.5),
                                    contamination, 77);
  const Matrix x_r = sample.Y + sample.E_R;
  const Matrix cov = sample_covariance(x_r);
  EXPECT_LE((cov - sample.Sigma_S).cwiseAbs().maxCoeff(), 0.03);
  // Sigma_S itself is the entrywise sum.
  Matrix expected = CovarianceSpec::ar1(3, 0.5).dense_matrix();
  expected += Matrix(d.asDiagonal());
  EXPECT_TRUE(sample.Sigma_S == expected);
}

TEST(SampleDesign, IndependentStreams) {
  // Turning the random corruption on must leave Y bit-identical.
  const Index n = 50;
  const auto clean = sample_design(4, n, CovarianceSpec::identity(4),
                                   ContaminationSpec::clean(n), 99);
  ContaminationSpec noisy =
      ContaminationSpec::gaussian_rows(n, CovarianceSpec::identity(4));
  const auto corrupted =
      sample_design(4, n, CovarianceSpec::identity(4), noisy, 99);
  EXPECT_TRUE(clean.Y == corrupted.Y);
  EXPECT_FALSE(corrupted.E_R.isZero());
}

TEST(SampleDesign, SeedDeterminism) {
  const auto a = sample_design(3, 20, CovarianceSpec::ar1(3, -0.4),
                               ContaminationSpec::clean(20), 5);
  const auto b = sample_design(3, 20, CovarianceSpec::ar1(3, -0.4),
                               ContaminationSpec::clean(20), 5);
  EXPECT_TRUE(a.X == b.X);
  const auto c = sample_design(3, 20, CovarianceSpec::ar1(3, -0.4),
                               ContaminationSpec::clean(20), 6);
  EXPECT_FALSE(a.X == c.X);
}

TEST(SampleDesign, SumAndNormalization) {
  Matrix e_d = Matrix::Zero(12, 2);
  e_d.row(3) << 1.5, -2.0;
  ContaminationSpec spec = ContaminationSpec::explicit_matrix(
      SupportSet({4}, 12), e_d, CovarianceSpec::identity(2));
  const auto sample = sample_design(2, 12, CovarianceSpec::identity(2), spec, 8);
  EXPECT_TRUE(sample.X == sample.Y + sample.E_D + sample.E_R);
  EXPECT_LE((sample.X_norm * std::sqrt(12.0) - sample.X).cwiseAbs().maxCoeff(),
            1e-12 * sample.X.cwiseAbs().maxCoeff());

  SubstreamRng rng(4, "test");
  for (int rep = 0; rep < 20; ++rep) {
    const Vector b = Vector::NullaryExpr(2, [&](Index) { return rng.normal(); });
    EXPECT_NEAR((sample.X_norm * b).norm(), (sample.X * b).norm() / std::sqrt(12.0),
                1e-12 * (1.0 + (sample.X * b).norm()));
  }
}

TEST(SampleDesign, DeterministicCorruptionNeedsNonsingularSigma) {
  Vector d(2);
  d << 1.0, 0.0;  // singular
  Vector mu(2);
  mu << 1, 1;
  const auto contamination =
      ContaminationSpec::constant_row(SupportSet({1}, 5), mu);
  EXPECT_THROW(
      sample_design(2, 5, CovarianceSpec::diagonal(d), contamination, 1),
      std::invalid_argument);
}

TEST(SigmaS, Examples) {
  const auto eye = CovarianceSpec::identity(2);
  EXPECT_TRUE(sigma_s(eye, eye) == 2.0 * Matrix::Identity(2, 2));
  EXPECT_TRUE(sigma_s(eye, std::nullopt) == Matrix::Identity(2, 2));

  const auto ar = CovarianceSpec::ar1(3, 0.5);
  const auto diag = CovarianceSpec::diagonal(Vector::Ones(3));
  const Matrix sum = sigma_s(ar, diag);
  EXPECT_NEAR(sum(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(sum(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(sum(0, 2), 0.25, 1e-12);
}

TEST(SigmaSummary, ImplicitPathMatchesDense) {
  Vector d(3);
  d << 2.0, 0.5, 1.0;
  const auto cov = CovarianceSpec::diagonal(d);
  const auto cov_e = CovarianceSpec::identity(3);
  const auto summary = sigma_s_summary(cov, cov_e);
  EXPECT_NEAR(summary.lambda_min, 1.5, 1e-12);
  EXPECT_NEAR(summary.varrho, std::sqrt(3.0), 1e-12);
}

TEST(Varrho, Examples) {
  EXPECT_NEAR(varrho(Matrix::Identity(3, 3)), 1.0, 1e-12);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  EXPECT_NEAR(varrho(d), 2.0, 1e-12);
  EXPECT_NEAR(varrho(CovarianceSpec::ar1(4, 0.9).dense_matrix()), 1.0, 1e-12);
  d(1, 1) = -0.5;
  EXPECT_THROW(varrho(d), std::invalid_argument);
}

TEST(PseudoInverseSqrt, Examples) {
  EXPECT_TRUE(pseudo_inverse_sqrt(Matrix::Identity(2, 2))
                  .isApprox(Matrix::Identity(2, 2), 1e-12));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  const Matrix r = pseudo_inverse_sqrt(d);
  EXPECT_NEAR(r(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(r(1, 1), 0.0, 1e-12);

  // Defining identity of the pseudo-inverse on a random PSD matrix.
  SubstreamRng rng(21, "test");
  const Matrix g =
      Matrix::NullaryExpr(3, 3, [&](Index, Index) { return rng.normal(); });
  const Matrix psd = g * g.transpose();
  const Matrix half = symmetric_sqrt(psd);
  const Matrix pinv = pseudo_inverse_sqrt(psd);
  EXPECT_TRUE((half * pinv * half).isApprox(half, 1e-8));

  Matrix skew(2, 2);
  skew << 1, 2, -2, 1;
  EXPECT_THROW(pseudo_inverse_sqrt(skew), std::invalid_argument);
}

TEST(CovarianceSpec, RejectsNonPsd) {
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;  // eigenvalues 3 and -1
  EXPECT_THROW(CovarianceSpec::dense(bad), std::invalid_argument);
  EXPECT_THROW(CovarianceSpec::diagonal((Vector(2) << 1, -1).finished()),
               std::invalid_argument);
  EXPECT_THROW(CovarianceSpec::ar1(3, 1.0), std::invalid_argument);
}

TEST(CovarianceSpec, HugeImplicitDimensions) {
  const auto spec = CovarianceSpec::identity(100000000);
  EXPECT_EQ(spec.lambda_min(), 1.0);
  EXPECT_EQ(spec.max_diagonal(), 1.0);
  EXPECT_THROW(spec.dense_matrix(), std::invalid_argument);
}

TEST(SampleResponse, Examples) {
  const auto sample = sample_design(3, 8, CovarianceSpec::identity(3),
                                    ContaminationSpec::clean(8), 31);
  Vector b_star(3);
  b_star << 1, -2, 0.5;
  const Vector theta_star = Vector::Zero(8);
  const Vector y = sample_response(sample.X_norm, b_star, theta_star, 0.0, 9);
  EXPECT_TRUE(y == sample.X_norm * b_star);

  const Vector y2 =
      sample_response(sample.X_norm, Vector::Zero(3),
                      Vector::Constant(8, 2.0), 0.0, 9);
  EXPECT_TRUE(y2 == -Vector::Constant(8, 2.0));

  const Vector a = sample_response(sample.X_norm, b_star, theta_star, 0.7, 42);
  const Vector b = sample_response(sample.X_norm, b_star, theta_star, 0.7, 42);
  EXPECT_TRUE(a == b);
}

}  // namespace
}  // namespace recert
