#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace recert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_finite(const Eigen::Ref<const Matrix>& a,
                           const char* what) {
  if (!a.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace detail

// Set of 1-based indices inside a universe {1..dim}.  Deduplicated and
// sorted on construction; all public interfaces speak 1-based indices.
class SupportSet {
 public:
  SupportSet() = default;

  SupportSet(std::vector<Index> indices, Index dim) : dim_(dim) {
    detail::require(dim >= 0, "SupportSet: negative dimension");
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (const Index i : indices)
      detail::require(i >= 1 && i <= dim,
                      "SupportSet: index " + std::to_string(i) +
                          " out of range [1, " + std::to_string(dim) + "]");
    indices_ = std::move(indices);
    mask_.assign(static_cast<std::size_t>(dim), false);
    for (const Index i : indices_) mask_[static_cast<std::size_t>(i - 1)] = true;
  }

  static SupportSet all(Index dim) {
    std::vector<Index> idx(static_cast<std::size_t>(dim));
    for (Index i = 0; i < dim; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
    return SupportSet(std::move(idx), dim);
  }

  static SupportSet empty(Index dim) { return SupportSet({}, dim); }

  Index dim() const { return dim_; }
  Index size() const { return static_cast<Index>(indices_.size()); }
  bool is_empty() const { return indices_.empty(); }
  bool contains(Index one_based) const {
    return one_based >= 1 && one_based <= dim_ &&
           mask_[static_cast<std::size_t>(one_based - 1)];
  }
  const std::vector<Index>& indices() const { return indices_; }

  SupportSet complement() const {
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(dim_ - size()));
    for (Index i = 1; i <= dim_; ++i)
      if (!contains(i)) idx.push_back(i);
    return SupportSet(std::move(idx), dim_);
  }

 private:
  std::vector<Index> indices_;
  std::vector<bool> mask_;
  Index dim_ = 0;
};

// Supports for the vector cone: S over parameter coordinates {1..p},
// O over sample coordinates {1..n}.
struct SupportSetVector {
  SupportSet S;  // subset of {1..p}
  SupportSet O;  // subset of {1..n}

  Index p() const { return S.dim(); }
  Index n() const { return O.dim(); }
};

// Collection of p column supports J_1..J_p, each a subset of {1..p}.
// Entry (i, j) of a p-by-p matrix is "on support" iff i is in J_j.
class SupportCollection {
 public:
  SupportCollection() = default;

  explicit SupportCollection(std::vector<SupportSet> column_supports)
      : columns_(std::move(column_supports)) {
    const Index p = static_cast<Index>(columns_.size());
    total_ = 0;
    for (const SupportSet& J : columns_) {
      detail::require(J.dim() == p,
                      "SupportCollection: column support universe must be p");
      total_ += J.size();
    }
  }

  static SupportCollection all(Index p) {
    return SupportCollection(
        std::vector<SupportSet>(static_cast<std::size_t>(p), SupportSet::all(p)));
  }

  static SupportCollection empty(Index p) {
    return SupportCollection(std::vector<SupportSet>(
        static_cast<std::size_t>(p), SupportSet::empty(p)));
  }

  Index p() const { return static_cast<Index>(columns_.size()); }
  Index total_size() const { return total_; }
  bool is_empty() const { return total_ == 0; }
  const SupportSet& column(Index j_one_based) const {
    detail::require(j_one_based >= 1 && j_one_based <= p(),
                    "SupportCollection: column index out of range");
    return columns_[static_cast<std::size_t>(j_one_based - 1)];
  }
  bool contains(Index i_one_based, Index j_one_based) const {
    return column(j_one_based).contains(i_one_based);
  }

  SupportCollection complement() const {
    std::vector<SupportSet> cols;
    cols.reserve(columns_.size());
    for (const SupportSet& J : columns_) cols.push_back(J.complement());
    return SupportCollection(std::move(cols));
  }

 private:
  std::vector<SupportSet> columns_;
  Index total_ = 0;
};

// Vector cone description: membership of [b; theta] means
//   gamma*|b off S|_1 + |theta off O|_1 <= c * (gamma*|b on S|_1 + |theta on O|_1).
struct ConeSpecVector {
  SupportSetVector supports;
  double c = 2.0;
  double gamma = 1.0;

  ConeSpecVector(SupportSetVector sup, double c_, double gamma_)
      : supports(std::move(sup)), c(c_), gamma(gamma_) {
    detail::require(c > 0.0 && std::isfinite(c), "ConeSpecVector: c must be > 0");
    detail::require(gamma > 0.0 && std::isfinite(gamma),
                    "ConeSpecVector: gamma must be > 0");
  }
};

// Matrix cone description over [B; Theta] with column supports for B and a
// row support O for Theta.
struct ConeSpecMatrix {
  SupportCollection J;  // supports of the p columns of B
  SupportSet O;         // row support of Theta, subset of {1..n}
  double c = 2.0;
  double gamma = 1.0;

  ConeSpecMatrix(SupportCollection J_, SupportSet O_, double c_, double gamma_)
      : J(std::move(J_)), O(std::move(O_)), c(c_), gamma(gamma_) {
    detail::require(c > 0.0 && std::isfinite(c), "ConeSpecMatrix: c must be > 0");
    detail::require(gamma > 0.0 && std::isfinite(gamma),
                    "ConeSpecMatrix: gamma must be > 0");
  }
};

// Point of the augmented space R^{p+n}, split into the parameter part b and
// the corruption part theta.
struct AugmentedPoint {
  Vector b;
  Vector theta;

  double squared_norm() const { return b.squaredNorm() + theta.squaredNorm(); }
  double norm() const { return std::sqrt(squared_norm()); }
};

// Matrix analogue: B is p-by-p, Theta is n-by-p, equal column counts.
struct AugmentedMatrixPoint {
  Matrix B;
  Matrix Theta;
};

// ---------------------------------------------------------------------------
// Norms and restrictions
// ---------------------------------------------------------------------------

inline double vector_q_norm(const Eigen::Ref<const Vector>& v, double q) {
  detail::require(q > 0.0, "q-norm: exponent must be in (0, inf]");
  if (v.size() == 0) return 0.0;
  if (std::isinf(q)) return v.cwiseAbs().maxCoeff();
  if (q == 1.0) return v.cwiseAbs().sum();
  if (q == 2.0) return v.norm();
  return std::pow(v.cwiseAbs().array().pow(q).sum(), 1.0 / q);
}

// Mixed norm |A|_{q1,q2}: the q2-norm of the vector of row-wise q1-norms.
// q = inf means max.  |A|_{2,2} coincides with the entrywise 2-norm.
inline double mixed_norm(const Eigen::Ref<const Matrix>& a, double q1,
                         double q2) {
  detail::require(a.size() > 0, "mixed_norm: empty matrix");
  detail::require(q1 > 0.0 && q2 > 0.0, "mixed_norm: exponents must be > 0");
  detail::require_finite(a, "mixed_norm");
  Vector row_norms(a.rows());
  for (Index i = 0; i < a.rows(); ++i)
    row_norms[i] = vector_q_norm(a.row(i).transpose(), q1);
  return vector_q_norm(row_norms, q2);
}

// b restricted to S: coordinates outside S zeroed.  b == restrict_vector(b,S)
// + restrict_vector(b,S.complement()) exactly.
inline Vector restrict_vector(const Eigen::Ref<const Vector>& b,
                              const SupportSet& s) {
  detail::require(s.dim() == b.size(),
                  "restrict_vector: support universe does not match vector");
  Vector out = Vector::Zero(b.size());
  for (const Index i : s.indices()) out[i - 1] = b[i - 1];
  return out;
}

// A restricted to a support collection: entry (i, j) kept iff i is in J_j.
inline Matrix restrict_matrix(const Eigen::Ref<const Matrix>& a,
                              const SupportCollection& j) {
  detail::require(a.rows() == a.cols(), "restrict_matrix: matrix must be square");
  detail::require(j.p() == a.rows(),
                  "restrict_matrix: support collection does not match matrix");
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Index col = 1; col <= j.p(); ++col)
    for (const Index row : j.column(col).indices())
      out(row - 1, col - 1) = a(row - 1, col - 1);
  return out;
}

// Matrix with only the rows in O kept (others zeroed).
inline Matrix restrict_rows(const Eigen::Ref<const Matrix>& a,
                            const SupportSet& o) {
  detail::require(o.dim() == a.rows(),
                  "restrict_rows: support universe does not match row count");
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (const Index i : o.indices()) out.row(i - 1) = a.row(i - 1);
  return out;
}

// Sum of |b_i| over i in S.
inline double l1_on_support(const Eigen::Ref<const Vector>& b,
                            const SupportSet& s) {
  detail::require(s.dim() == b.size(), "l1_on_support: dimension mismatch");
  double acc = 0.0;
  for (const Index i : s.indices()) acc += std::abs(b[i - 1]);
  return acc;
}

// Sum of row 2-norms of Theta over rows in O.
inline double l21_on_rows(const Eigen::Ref<const Matrix>& theta,
                          const SupportSet& o) {
  detail::require(o.dim() == theta.rows(), "l21_on_rows: dimension mismatch");
  double acc = 0.0;
  for (const Index i : o.indices()) acc += theta.row(i - 1).norm();
  return acc;
}

// ---------------------------------------------------------------------------
// Cone margins and membership
// ---------------------------------------------------------------------------

// Signed margin of the vector cone inequality:
//   c*(gamma*|b_S|_1 + |theta_O|_1) - (gamma*|b_{S^c}|_1 + |theta_{O^c}|_1).
// Nonnegative margin means membership; the margin scales linearly with the
// point.
inline double cone_margin_vector(const AugmentedPoint& point,
                                 const ConeSpecVector& spec) {
  detail::require(point.b.size() == spec.supports.p(),
                  "cone_margin_vector: b dimension mismatch");
  detail::require(point.theta.size() == spec.supports.n(),
                  "cone_margin_vector: theta dimension mismatch");
  detail::require_finite(point.b, "cone_margin_vector");
  detail::require_finite(point.theta, "cone_margin_vector");
  const double b_on = l1_on_support(point.b, spec.supports.S);
  const double b_all = point.b.cwiseAbs().sum();
  const double t_on = l1_on_support(point.theta, spec.supports.O);
  const double t_all = point.theta.cwiseAbs().sum();
  const double on_mass = spec.gamma * b_on + t_on;
  const double off_mass = spec.gamma * (b_all - b_on) + (t_all - t_on);
  return spec.c * on_mass - off_mass;
}

inline double cone_margin_matrix(const AugmentedMatrixPoint& point,
                                 const ConeSpecMatrix& spec) {
  detail::require(point.B.rows() == point.B.cols(),
                  "cone_margin_matrix: B must be square");
  detail::require(point.B.cols() == point.Theta.cols(),
                  "cone_margin_matrix: column count mismatch");
  detail::require(point.B.rows() == spec.J.p(),
                  "cone_margin_matrix: B dimension mismatch");
  detail::require(point.Theta.rows() == spec.O.dim(),
                  "cone_margin_matrix: Theta dimension mismatch");
  detail::require_finite(point.B, "cone_margin_matrix");
  detail::require_finite(point.Theta, "cone_margin_matrix");
  double b_on = 0.0;
  for (Index col = 1; col <= spec.J.p(); ++col)
    b_on += l1_on_support(point.B.col(col - 1), spec.J.column(col));
  const double b_all = point.B.cwiseAbs().sum();
  double t_on = 0.0;
  for (const Index i : spec.O.indices()) t_on += point.Theta.row(i - 1).norm();
  double t_all = 0.0;
  for (Index i = 0; i < point.Theta.rows(); ++i)
    t_all += point.Theta.row(i).norm();
  const double on_mass = spec.gamma * b_on + t_on;
  const double off_mass = spec.gamma * (b_all - b_on) + (t_all - t_on);
  return spec.c * on_mass - off_mass;
}

// Membership with a rounding-absorbing tolerance proportional to the scale
// of the point; exact zero margin counts as a member.
inline bool cone_member_vector(const AugmentedPoint& point,
                               const ConeSpecVector& spec) {
  return cone_margin_vector(point, spec) >= -1e-12 * point.norm();
}

inline bool cone_member_matrix(const AugmentedMatrixPoint& point,
                               const ConeSpecMatrix& spec) {
  const double scale =
      std::sqrt(point.B.squaredNorm() + point.Theta.squaredNorm());
  return cone_margin_matrix(point, spec) >= -1e-12 * scale;
}

}  // namespace recert
