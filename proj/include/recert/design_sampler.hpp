#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "recert/core_types.hpp"
#include "recert/rng.hpp"

namespace recert {

// Largest dimension for which structured covariances are materialized as
// dense matrices.  Identity and diagonal kinds never materialize, so they
// stay usable at arbitrary dimension (needed for the closed-form corollary
// arithmetic at p ~ 1e8).
inline constexpr Index kMaxDenseDim = 4096;

namespace detail {

inline void require_square_symmetric(const Eigen::Ref<const Matrix>& m,
                                     const char* what) {
  require(m.rows() == m.cols(), std::string(what) + ": matrix must be square");
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          std::string(what) + ": matrix must be symmetric");
}

}  // namespace detail

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at
// zero with tolerance 1e-12 * (max eigenvalue) so near-PSD inputs pass.
// Throws if an eigenvalue is more negative than the tolerance allows.
inline Matrix symmetric_sqrt(const Eigen::Ref<const Matrix>& m) {
  detail::require_square_symmetric(m, "symmetric_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  Vector lambda = eig.eigenvalues();
  const double lmax = std::max(lambda.maxCoeff(), 0.0);
  const double tol = 1e-12 * std::max(lmax, 1.0);
  detail::require(lambda.minCoeff() >= -tol,
                  "symmetric_sqrt: matrix is not positive semidefinite");
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal() *
         eig.eigenvectors().transpose();
}

// Pseudo-inverse of the symmetric PSD square root of m.  Eigenvalues at or
// below the clamping tolerance are treated as exact zeros and inverted to
// zero; for nonsingular input this is m^{-1/2}.
inline Matrix pseudo_inverse_sqrt(const Eigen::Ref<const Matrix>& m) {
  detail::require_square_symmetric(m, "pseudo_inverse_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const Vector lambda = eig.eigenvalues();
  const double lmax = std::max(lambda.maxCoeff(), 0.0);
  const double tol = 1e-12 * std::max(lmax, 1.0);
  detail::require(lambda.minCoeff() >= -tol,
                  "pseudo_inverse_sqrt: matrix is not positive semidefinite");
  Vector inv = Vector::Zero(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i)
    if (lambda[i] > tol) inv[i] = 1.0 / std::sqrt(lambda[i]);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

// Square root of the largest diagonal entry.
inline double varrho(const Eigen::Ref<const Matrix>& sigma_s) {
  detail::require(sigma_s.rows() == sigma_s.cols(),
                  "varrho: matrix must be square");
  const double max_diag = sigma_s.diagonal().maxCoeff();
  detail::require(sigma_s.diagonal().minCoeff() >= 0.0,
                  "varrho: negative diagonal entry");
  return std::sqrt(max_diag);
}

// Parametric positive-semidefinite covariance.  Identity and diagonal kinds
// are held implicitly; ar1 and dense kinds are materialized (and validated)
// at construction, which caps their dimension at kMaxDenseDim.  Instances
// are immutable after construction and safe to share across threads.
class CovarianceSpec {
 public:
  enum class Kind { identity, diagonal, ar1, dense };

  static CovarianceSpec identity(Index p) {
    detail::require(p >= 1, "CovarianceSpec: dimension must be >= 1");
    CovarianceSpec spec;
    spec.kind_ = Kind::identity;
    spec.dim_ = p;
    spec.lambda_min_ = 1.0;
    spec.max_diag_ = 1.0;
    return spec;
  }

  static CovarianceSpec diagonal(Vector d) {
    detail::require(d.size() >= 1, "CovarianceSpec: dimension must be >= 1");
    detail::require(d.allFinite() && d.minCoeff() >= 0.0,
                    "CovarianceSpec: diagonal entries must be >= 0");
    CovarianceSpec spec;
    spec.kind_ = Kind::diagonal;
    spec.dim_ = d.size();
    spec.lambda_min_ = d.minCoeff();
    spec.max_diag_ = d.maxCoeff();
    spec.diag_ = std::move(d);
    return spec;
  }

  static CovarianceSpec ar1(Index p, double phi) {
    detail::require(p >= 1, "CovarianceSpec: dimension must be >= 1");
    detail::require(std::abs(phi) < 1.0,
                    "CovarianceSpec: ar1 phi must be in (-1, 1)");
    detail::require(p <= kMaxDenseDim,
                    "CovarianceSpec: ar1 dimension exceeds dense limit");
    Matrix m(p, p);
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j)
        m(i, j) = std::pow(phi, static_cast<double>(std::abs(i - j)));
    CovarianceSpec spec = dense(std::move(m));
    spec.kind_ = Kind::ar1;
    spec.ar1_phi_ = phi;
    return spec;
  }

  static CovarianceSpec dense(Matrix m) {
    detail::require(m.rows() >= 1, "CovarianceSpec: dimension must be >= 1");
    detail::require(m.rows() <= kMaxDenseDim,
                    "CovarianceSpec: dense dimension exceeds limit");
    detail::require_square_symmetric(m, "CovarianceSpec");
    CovarianceSpec spec;
    spec.kind_ = Kind::dense;
    spec.dim_ = m.rows();
    spec.dense_ = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.dense_);
    Vector lambda = eig.eigenvalues();
    const double lmax = std::max(lambda.maxCoeff(), 0.0);
    const double tol = 1e-12 * std::max(lmax, 1.0);
    detail::require(lambda.minCoeff() >= -tol,
                    "CovarianceSpec: matrix is not positive semidefinite");
    lambda = lambda.cwiseMax(0.0);
    spec.lambda_min_ = lambda.minCoeff();
    spec.max_diag_ = spec.dense_.diagonal().maxCoeff();
    detail::require(spec.dense_.diagonal().minCoeff() >= -tol,
                    "CovarianceSpec: negative diagonal entry");
    spec.sqrt_ = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() *
                 eig.eigenvectors().transpose();
    return spec;
  }

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double lambda_min() const { return lambda_min_; }
  double max_diagonal() const { return max_diag_; }
  bool is_materialized() const { return dense_.size() > 0; }

  // Diagonal of Sigma; implicit kinds avoid materialization.
  Vector diagonal_vector() const {
    switch (kind_) {
      case Kind::identity:
        return Vector::Ones(dim_);
      case Kind::diagonal:
        return diag_;
      default:
        return dense_.diagonal();
    }
  }

  // Dense representation; throws for implicit kinds above kMaxDenseDim.
  Matrix dense_matrix() const {
    switch (kind_) {
      case Kind::identity:
        check_materializable();
        return Matrix::Identity(dim_, dim_);
      case Kind::diagonal:
        check_materializable();
        return diag_.asDiagonal();
      default:
        return dense_;
    }
  }

  // n rows, each an independent N(0, Sigma) draw from the given stream.
  // Standard normals are consumed row by row in column order.
  Matrix sample_rows(Index n, SubstreamRng& rng) const {
    Matrix z(n, dim_);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < dim_; ++j) z(i, j) = rng.normal();
    switch (kind_) {
      case Kind::identity:
        return z;
      case Kind::diagonal:
        return z * diag_.cwiseSqrt().asDiagonal();
      default:
        return z * sqrt_;  // sqrt_ is symmetric, so rows get covariance Sigma
    }
  }

 private:
  CovarianceSpec() = default;

  void check_materializable() const {
    detail::require(dim_ <= kMaxDenseDim,
                    "CovarianceSpec: dimension too large to materialize");
  }

  Kind kind_ = Kind::identity;
  Index dim_ = 0;
  double lambda_min_ = 0.0;
  double max_diag_ = 0.0;
  double ar1_phi_ = 0.0;
  Vector diag_;
  Matrix dense_;
  Matrix sqrt_;
};

// Entrywise sum Sigma + Sigma_E; absent Sigma_E returns Sigma.
inline Matrix sigma_s(const CovarianceSpec& cov,
                      const std::optional<CovarianceSpec>& cov_e) {
  if (!cov_e) return cov.dense_matrix();
  detail::require(cov.dim() == cov_e->dim(), "sigma_s: dimension mismatch");
  return cov.dense_matrix() + cov_e->dense_matrix();
}

inline Matrix sigma_s(const Eigen::Ref<const Matrix>& sigma,
                      const std::optional<Matrix>& sigma_e) {
  if (!sigma_e) return sigma;
  detail::require(sigma.rows() == sigma_e->rows() &&
                      sigma.cols() == sigma_e->cols(),
                  "sigma_s: dimension mismatch");
  return sigma + *sigma_e;
}

// Smallest eigenvalue and varrho of Sigma + Sigma_E without materializing
// when both parts are implicit (identity/diagonal); otherwise falls back to
// the dense path.
struct CovarianceSummary {
  double lambda_min = 0.0;
  double varrho = 0.0;
};

inline CovarianceSummary sigma_s_summary(
    const CovarianceSpec& cov, const std::optional<CovarianceSpec>& cov_e) {
  if (cov_e) detail::require(cov.dim() == cov_e->dim(),
                             "sigma_s_summary: dimension mismatch");
  const auto implicit_diag = [](const CovarianceSpec& c) {
    return c.kind() == CovarianceSpec::Kind::identity ||
           c.kind() == CovarianceSpec::Kind::diagonal;
  };
  if (implicit_diag(cov) && (!cov_e || implicit_diag(*cov_e))) {
    // For diagonal matrices eigenvalues are the diagonal entries.
    if (!cov_e)
      return {cov.lambda_min(), std::sqrt(cov.max_diagonal())};
    if (cov.kind() == CovarianceSpec::Kind::identity &&
        cov_e->kind() == CovarianceSpec::Kind::identity)
      return {2.0, std::sqrt(2.0)};
    // General diagonal sum: eigenvalues of a diagonal sum are the entries.
    const Vector d = cov.diagonal_vector() + cov_e->diagonal_vector();
    return {d.minCoeff(), std::sqrt(d.maxCoeff())};
  }
  const Matrix s = sigma_s(cov, cov_e);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  return {std::max(eig.eigenvalues().minCoeff(), 0.0), varrho(s)};
}

// Contamination layout: deterministic part applied to the outlier rows O,
// optional Gaussian part with covariance Sigma_E on every row.
struct ContaminationSpec {
  enum class DeterministicKind { none, constant_row, explicit_matrix };

  SupportSet outlier_rows;  // O, subset of {1..n}
  DeterministicKind deterministic = DeterministicKind::none;
  Vector mu_e;   // constant_row: the row written into each row of O
  Matrix e_d;    // explicit_matrix: full n-by-p deterministic corruption
  std::optional<CovarianceSpec> random_part;  // Sigma_E

  static ContaminationSpec clean(Index n) {
    ContaminationSpec spec;
    spec.outlier_rows = SupportSet::empty(n);
    return spec;
  }

  static ContaminationSpec constant_row(SupportSet o, Vector mu,
                                        std::optional<CovarianceSpec> random =
                                            std::nullopt) {
    ContaminationSpec spec;
    spec.outlier_rows = std::move(o);
    spec.deterministic = DeterministicKind::constant_row;
    spec.mu_e = std::move(mu);
    spec.random_part = std::move(random);
    return spec;
  }

  static ContaminationSpec explicit_matrix(SupportSet o, Matrix e_d,
                                           std::optional<CovarianceSpec>
                                               random = std::nullopt) {
    ContaminationSpec spec;
    spec.outlier_rows = std::move(o);
    spec.deterministic = DeterministicKind::explicit_matrix;
    spec.e_d = std::move(e_d);
    spec.random_part = std::move(random);
    return spec;
  }

  static ContaminationSpec gaussian_rows(Index n, CovarianceSpec sigma_e) {
    ContaminationSpec spec;
    spec.outlier_rows = SupportSet::empty(n);
    spec.random_part = std::move(sigma_e);
    return spec;
  }
};

// One draw from the contamination model.  X = Y + E_D + E_R holds exactly
// as floating-point sums; X_norm is X / sqrt(n).
struct DesignSample {
  Index p = 0;
  Index n = 0;
  Matrix Y;
  Matrix E_D;
  Matrix E_R;
  Matrix X;
  Matrix X_norm;
  Matrix Sigma_S;
  std::uint64_t seed = 0;

  // Spectral norm of E_D^{(n)} * Sigma_S^{+/2}, the design-corruption term
  // entering every bound.  Zero when E_D is zero.
  double corruption_spectral() const {
    if (E_D.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    const Matrix a =
        (E_D / std::sqrt(static_cast<double>(n))) * pseudo_inverse_sqrt(Sigma_S);
    return a.bdcSvd().singularValues()[0];
  }
};

// Draws Y (stream "Y") and E_R (stream "ER") from independently seeded
// substreams, so changing the contamination leaves Y bit-identical.
inline DesignSample sample_design(Index p, Index n, const CovarianceSpec& cov,
                                  const ContaminationSpec& contamination,
                                  std::uint64_t seed) {
  detail::require(p >= 1 && n >= 1, "sample_design: p, n must be >= 1");
  detail::require(cov.dim() == p, "sample_design: covariance dimension mismatch");
  detail::require(contamination.outlier_rows.dim() == n,
                  "sample_design: outlier row set universe must be n");
  if (contamination.random_part)
    detail::require(contamination.random_part->dim() == p,
                    "sample_design: Sigma_E dimension mismatch");
  const bool has_deterministic =
      contamination.deterministic != ContaminationSpec::DeterministicKind::none;
  if (has_deterministic)
    detail::require(cov.lambda_min() > 1e-12 * std::max(cov.max_diagonal(), 1.0),
                    "sample_design: deterministic corruption requires a "
                    "non-singular covariance");

  DesignSample sample;
  sample.p = p;
  sample.n = n;
  sample.seed = seed;

  SubstreamRng rng_y(seed, "Y");
  sample.Y = cov.sample_rows(n, rng_y);

  if (contamination.random_part) {
    SubstreamRng rng_e(seed, "ER");
    sample.E_R = contamination.random_part->sample_rows(n, rng_e);
  } else {
    sample.E_R = Matrix::Zero(n, p);
  }

  sample.E_D = Matrix::Zero(n, p);
  switch (contamination.deterministic) {
    case ContaminationSpec::DeterministicKind::none:
      break;
    case ContaminationSpec::DeterministicKind::constant_row:
      detail::require(contamination.mu_e.size() == p,
                      "sample_design: mu_E dimension mismatch");
      for (const Index i : contamination.outlier_rows.indices())
        sample.E_D.row(i - 1) = contamination.mu_e.transpose();
      break;
    case ContaminationSpec::DeterministicKind::explicit_matrix:
      detail::require(contamination.e_d.rows() == n &&
                          contamination.e_d.cols() == p,
                      "sample_design: explicit E_D dimension mismatch");
      sample.E_D = contamination.e_d;
      break;
  }

  sample.X = sample.Y + sample.E_D + sample.E_R;
  sample.X_norm = sample.X / std::sqrt(static_cast<double>(n));
  sample.Sigma_S = sigma_s(cov, contamination.random_part);
  return sample;
}

// y = X_norm * b_star - theta_star + w with w iid N(0, noise_sd^2), drawn
// from the "noise" substream.
inline Vector sample_response(const Eigen::Ref<const Matrix>& x_norm,
                              const Eigen::Ref<const Vector>& b_star,
                              const Eigen::Ref<const Vector>& theta_star,
                              double noise_sd, std::uint64_t seed) {
  detail::require(x_norm.cols() == b_star.size(),
                  "sample_response: b_star dimension mismatch");
  detail::require(x_norm.rows() == theta_star.size(),
                  "sample_response: theta_star dimension mismatch");
  detail::require(noise_sd >= 0.0, "sample_response: noise_sd must be >= 0");
  Vector y = x_norm * b_star - theta_star;
  if (noise_sd > 0.0) {
    SubstreamRng rng(seed, "noise");
    for (Index i = 0; i < y.size(); ++i) y[i] += noise_sd * rng.normal();
  }
  return y;
}

}  // namespace recert
