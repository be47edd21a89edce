#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "recert/core_types.hpp"
#include "recert/rng.hpp"

namespace recert {
namespace {

Matrix random_matrix(Index rows, Index cols, SubstreamRng& rng) {
  return Matrix::NullaryExpr(rows, cols, [&](Index, Index) { return rng.normal(); });
}

SupportSet random_support(Index dim, SubstreamRng& rng) {
  std::vector<Index> idx;
  for (Index i = 1; i <= dim; ++i)
    if (rng.uniform01() < 0.4) idx.push_back(i);
  return SupportSet(idx, dim);
}

TEST(MixedNorm, KnownValues) {
  Matrix a(2, 2);
  a << 3, 4, 0, 0;
  EXPECT_NEAR(mixed_norm(a, 2, 1), 5.0, 1e-12);

  EXPECT_NEAR(mixed_norm(Matrix::Identity(2, 2), 1, 2), std::sqrt(2.0), 1e-12);

  Matrix c(2, 2);
  c << 1, 2, 3, 4;
  EXPECT_NEAR(mixed_norm(c, 1, 1), 10.0, 1e-12);
}

TEST(MixedNorm, InfinityExponents) {
  Matrix a(2, 3);
  a << 1, -5, 2, 3, 1, -2;
  // row-wise max, then sum
  EXPECT_NEAR(mixed_norm(a, kInf, 1), 5.0 + 3.0, 1e-12);
  // row-wise l1, then max over rows
  EXPECT_NEAR(mixed_norm(a, 1, kInf), 8.0, 1e-12);
}

TEST(MixedNorm, FrobeniusIdentity) {
  SubstreamRng rng(11, "test");
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix a = random_matrix(4, 3, rng);
    EXPECT_NEAR(mixed_norm(a, 2, 2) * mixed_norm(a, 2, 2), a.squaredNorm(),
                1e-10 * a.squaredNorm());
  }
}

TEST(MixedNorm, RejectsNonFinite) {
  Matrix a(1, 2);
  a << 1.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(mixed_norm(a, 2, 1), std::invalid_argument);
}

TEST(MixedNorm, TriangleInequality) {
  SubstreamRng rng(12, "test");
  const double qs[] = {1.0, 1.5, 2.0, 3.0, kInf};
  for (int rep = 0; rep < 200; ++rep) {
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(3, 4, rng);
    const double q1 = qs[rep % 5];
    const double q2 = qs[(rep / 5) % 5];
    const double lhs = mixed_norm(a + b, q1, q2);
    const double rhs = mixed_norm(a, q1, q2) + mixed_norm(b, q1, q2);
    EXPECT_LE(lhs, rhs * (1.0 + 1e-10));
  }
}

TEST(RestrictVector, Examples) {
  Vector b(3);
  b << 1, 2, 3;
  const Vector kept = restrict_vector(b, SupportSet({1, 3}, 3));
  EXPECT_EQ(kept[0], 1.0);
  EXPECT_EQ(kept[1], 0.0);
  EXPECT_EQ(kept[2], 3.0);
  EXPECT_TRUE(restrict_vector(b, SupportSet::empty(3)).isZero());
  EXPECT_TRUE(restrict_vector(b, SupportSet::all(3)) == b);
}

TEST(RestrictVector, ExactDecomposition) {
  SubstreamRng rng(13, "test");
  for (int rep = 0; rep < 100; ++rep) {
    Vector b = Vector::NullaryExpr(6, [&](Index) { return rng.normal(); });
    const SupportSet s = random_support(6, rng);
    const Vector on = restrict_vector(b, s);
    const Vector off = restrict_vector(b, s.complement());
    EXPECT_TRUE((on + off) == b);  // disjoint supports, exact equality
  }
}

TEST(RestrictVector, OutOfRangeIndex) {
  EXPECT_THROW(SupportSet({4}, 3), std::invalid_argument);
  EXPECT_THROW(SupportSet({0}, 3), std::invalid_argument);
}

TEST(RestrictMatrix, Examples) {
  const Matrix eye = Matrix::Identity(2, 2);
  SupportCollection diag({SupportSet({1}, 2), SupportSet({2}, 2)});
  EXPECT_TRUE(restrict_matrix(eye, diag) == eye);

  EXPECT_TRUE(restrict_matrix(eye, SupportCollection::empty(2)).isZero());

  const Matrix ones = Matrix::Ones(2, 2);
  SupportCollection off({SupportSet({2}, 2), SupportSet({1}, 2)});
  Matrix expected(2, 2);
  expected << 0, 1, 1, 0;
  EXPECT_TRUE(restrict_matrix(ones, off) == expected);
}

TEST(RestrictMatrix, DecompositionIdentity) {
  SubstreamRng rng(14, "test");
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix a = random_matrix(5, 5, rng);
    std::vector<SupportSet> cols;
    for (Index j = 0; j < 5; ++j) cols.push_back(random_support(5, rng));
    const SupportCollection j(cols);
    const Matrix on = restrict_matrix(a, j);
    const Matrix off = restrict_matrix(a, j.complement());
    EXPECT_TRUE((on + off) == a);
    const double total = mixed_norm(a, 1, 1);
    const double split = (on.cwiseAbs().sum() + off.cwiseAbs().sum());
    EXPECT_NEAR(total, split, 1e-10 * (1.0 + total));
  }
}

TEST(RowRestriction, L21Split) {
  SubstreamRng rng(15, "test");
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix theta = random_matrix(6, 3, rng);
    const SupportSet o = random_support(6, rng);
    const double total = mixed_norm(theta, 2, 1);
    const double split = l21_on_rows(theta, o) + l21_on_rows(theta, o.complement());
    EXPECT_NEAR(total, split, 1e-10 * (1.0 + total));
  }
}

TEST(SupportBounds, CauchySchwarz) {
  SubstreamRng rng(16, "test");
  for (int rep = 0; rep < 200; ++rep) {
    const Matrix b = random_matrix(5, 5, rng);
    std::vector<SupportSet> cols;
    for (Index j = 0; j < 5; ++j) cols.push_back(random_support(5, rng));
    const SupportCollection j(cols);
    const Matrix on = restrict_matrix(b, j);
    EXPECT_LE(on.cwiseAbs().sum(),
              std::sqrt(static_cast<double>(j.total_size())) * b.norm() +
                  1e-10);

    const Matrix theta = random_matrix(5, 3, rng);
    const SupportSet o = random_support(5, rng);
    EXPECT_LE(l21_on_rows(theta, o),
              std::sqrt(static_cast<double>(o.size())) * theta.norm() + 1e-10);
  }
}

TEST(SupportBounds, ColumnL1VersusRowL2) {
  SubstreamRng rng(17, "test");
  for (int rep = 0; rep < 200; ++rep) {
    const Matrix theta = random_matrix(6, 4, rng);
    double lhs = 0.0;
    for (Index j = 0; j < theta.cols(); ++j) {
      const double col_l1 = theta.col(j).lpNorm<1>();
      lhs += col_l1 * col_l1;
    }
    const double rhs = mixed_norm(theta, 2, 1);
    EXPECT_LE(lhs, rhs * rhs * (1.0 + 1e-10));
  }
}

TEST(ConeMarginVector, Examples) {
  {
    AugmentedPoint pt{(Vector(2) << 1, 0).finished(), Vector::Zero(2)};
    ConeSpecVector spec({SupportSet({1}, 2), SupportSet::empty(2)}, 2.0, 1.0);
    EXPECT_NEAR(cone_margin_vector(pt, spec), 2.0, 1e-12);
    EXPECT_TRUE(cone_member_vector(pt, spec));
  }
  {
    AugmentedPoint pt{(Vector(2) << 0, 1).finished(), Vector::Zero(2)};
    ConeSpecVector spec({SupportSet({1}, 2), SupportSet::empty(2)}, 2.0, 1.0);
    EXPECT_NEAR(cone_margin_vector(pt, spec), -1.0, 1e-12);
    EXPECT_FALSE(cone_member_vector(pt, spec));
  }
  {
    AugmentedPoint pt{(Vector(2) << 1, 1).finished(),
                      (Vector(2) << 0.5, 0).finished()};
    ConeSpecVector spec({SupportSet({1}, 2), SupportSet({1}, 2)}, 2.0, 1.0);
    EXPECT_NEAR(cone_margin_vector(pt, spec), 2.0, 1e-12);
  }
}

TEST(ConeMarginMatrix, Examples) {
  // B supported entirely on J, Theta = 0: member for any c.
  {
    Matrix b(2, 2);
    b << 1, 0, 0, -2;
    SupportCollection j({SupportSet({1}, 2), SupportSet({2}, 2)});
    ConeSpecMatrix spec(j, SupportSet::empty(3), 1.5, 0.7);
    AugmentedMatrixPoint pt{b, Matrix::Zero(3, 2)};
    EXPECT_GE(cone_margin_matrix(pt, spec), 0.0);
  }
  // B = 0, Theta rows only outside O: margin is -|Theta|_{2,1}.
  {
    Matrix theta = Matrix::Zero(3, 2);
    theta.row(2) << 3, 4;
    ConeSpecMatrix spec(SupportCollection::all(2), SupportSet({1}, 3), 2.0, 1.0);
    AugmentedMatrixPoint pt{Matrix::Zero(2, 2), theta};
    EXPECT_NEAR(cone_margin_matrix(pt, spec), -5.0, 1e-12);
  }
  // 2x2 instance evaluated directly.
  {
    SupportCollection j({SupportSet({1}, 2), SupportSet::empty(2)});
    ConeSpecMatrix spec(j, SupportSet::empty(2), 2.0, 1.0);
    AugmentedMatrixPoint pt{Matrix::Ones(2, 2), Matrix::Zero(2, 2)};
    EXPECT_NEAR(cone_margin_matrix(pt, spec), -1.0, 1e-12);
  }
}

TEST(ConeMargin, ScaleInvariance) {
  SubstreamRng rng(18, "test");
  for (int rep = 0; rep < 200; ++rep) {
    AugmentedPoint pt;
    pt.b = Vector::NullaryExpr(5, [&](Index) { return rng.normal(); });
    pt.theta = Vector::NullaryExpr(4, [&](Index) { return rng.normal(); });
    ConeSpecVector spec({random_support(5, rng), random_support(4, rng)},
                        1.0 + 2.0 * rng.uniform01(), 0.5 + rng.uniform01());
    const double margin = cone_margin_vector(pt, spec);
    const double lambda = 0.1 + 5.0 * rng.uniform01();
    AugmentedPoint scaled{lambda * pt.b, lambda * pt.theta};
    EXPECT_NEAR(cone_margin_vector(scaled, spec), lambda * margin,
                1e-10 * (1.0 + std::abs(lambda * margin)));
    EXPECT_EQ(cone_member_vector(pt, spec), cone_member_vector(scaled, spec));
  }
}

TEST(ConeMargin, ZeroThetaReducesToStandardCone) {
  SubstreamRng rng(19, "test");
  for (int rep = 0; rep < 200; ++rep) {
    Vector b = Vector::NullaryExpr(6, [&](Index) { return rng.normal(); });
    const SupportSet s = random_support(6, rng);
    const double c = 1.0 + 2.0 * rng.uniform01();
    const double gamma = 0.5 + rng.uniform01();
    ConeSpecVector spec({s, random_support(3, rng)}, c, gamma);
    AugmentedPoint pt{b, Vector::Zero(3)};
    const double on = l1_on_support(b, s);
    const double off = b.cwiseAbs().sum() - on;
    // membership of [b; 0] is exactly the standard cone condition on b
    EXPECT_EQ(cone_margin_vector(pt, spec) >= 0.0, off <= c * on);
  }
}

TEST(ConeMargin, EmptySupportsDegenerate) {
  ConeSpecVector spec({SupportSet::empty(2), SupportSet::empty(2)}, 2.0, 1.0);
  AugmentedPoint pt{(Vector(2) << 1, 0).finished(), Vector::Zero(2)};
  EXPECT_LT(cone_margin_vector(pt, spec), 0.0);
  AugmentedPoint zero{Vector::Zero(2), Vector::Zero(2)};
  EXPECT_EQ(cone_margin_vector(zero, spec), 0.0);
  EXPECT_TRUE(cone_member_vector(zero, spec));
}

TEST(SupportSet, DeduplicatesAndSorts) {
  const SupportSet s({3, 1, 3, 1}, 4);
  EXPECT_EQ(s.size(), 2);
  EXPECT_TRUE(s.contains(1));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(2));
  EXPECT_EQ(s.complement().size(), 2);
}

TEST(ConeSpec, ValidatesParameters) {
  SupportSetVector sup{SupportSet::all(2), SupportSet::all(2)};
  EXPECT_THROW(ConeSpecVector(sup, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ConeSpecVector(sup, 2.0, 0.0), std::invalid_argument);
  // c in (0, 1] is accepted: the standard-cone regime allows any c > 0.
  EXPECT_NO_THROW(ConeSpecVector(sup, 0.5, 1.0));
}

}  // namespace
}  // namespace recert
