#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "recert/bound_calculator.hpp"
#include "recert/core_types.hpp"
#include "recert/design_sampler.hpp"
#include "recert/parallel.hpp"
#include "recert/rng.hpp"

namespace recert {

// ---------------------------------------------------------------------------
// Cone sampling
// ---------------------------------------------------------------------------
//
// Sampling convention for degenerate supports: a block whose support set is
// empty is pinned to zero (an empty O samples only theta = 0, an empty S
// only b = 0).  Pinned points are always cone members, and the empirical
// minimum over the pinned sub-cone remains an upper estimate of the cone's
// RE constant.  With both supports empty the cone is the zero cone and the
// sampler returns zero points.

namespace detail {

// Scales the off-support mass of the point so the cone margin is >= 0; the
// on-support mass is left untouched.  Blocks with empty supports are zeroed
// first.  Returns false when the point collapses to zero.
inline bool project_to_cone_vector(AugmentedPoint& point,
                                   const ConeSpecVector& spec) {
  if (spec.supports.S.is_empty()) point.b.setZero();
  if (spec.supports.O.is_empty()) point.theta.setZero();
  const double b_on = l1_on_support(point.b, spec.supports.S);
  const double t_on = l1_on_support(point.theta, spec.supports.O);
  const double on_mass = spec.gamma * b_on + t_on;
  const double off_mass = spec.gamma * (point.b.cwiseAbs().sum() - b_on) +
                          (point.theta.cwiseAbs().sum() - t_on);
  if (off_mass > spec.c * on_mass) {
    // Shrink slightly inside the boundary so rounding cannot flip the sign.
    const double t = spec.c * on_mass / off_mass * (1.0 - 1e-13);
    const Vector b_on_part = restrict_vector(point.b, spec.supports.S);
    const Vector t_on_part = restrict_vector(point.theta, spec.supports.O);
    point.b = b_on_part + t * (point.b - b_on_part);
    point.theta = t_on_part + t * (point.theta - t_on_part);
  }
  return point.squared_norm() > 0.0;
}

inline bool project_to_cone_matrix(AugmentedMatrixPoint& point,
                                   const ConeSpecMatrix& spec) {
  for (Index j = 1; j <= spec.J.p(); ++j)
    if (spec.J.column(j).is_empty()) point.B.col(j - 1).setZero();
  if (spec.O.is_empty()) point.Theta.setZero();
  double b_on = 0.0;
  for (Index j = 1; j <= spec.J.p(); ++j)
    b_on += l1_on_support(point.B.col(j - 1), spec.J.column(j));
  double t_on = 0.0;
  for (const Index i : spec.O.indices()) t_on += point.Theta.row(i - 1).norm();
  double t_all = 0.0;
  for (Index i = 0; i < point.Theta.rows(); ++i)
    t_all += point.Theta.row(i).norm();
  const double on_mass = spec.gamma * b_on + t_on;
  const double off_mass =
      spec.gamma * (point.B.cwiseAbs().sum() - b_on) + (t_all - t_on);
  if (off_mass > spec.c * on_mass) {
    const double t = spec.c * on_mass / off_mass * (1.0 - 1e-13);
    const Matrix b_on_part = restrict_matrix(point.B, spec.J);
    const Matrix t_on_part = restrict_rows(point.Theta, spec.O);
    point.B = b_on_part + t * (point.B - b_on_part);
    point.Theta = t_on_part + t * (point.Theta - t_on_part);
  }
  return point.B.squaredNorm() + point.Theta.squaredNorm() > 0.0;
}

}  // namespace detail

// K cone members of unit Euclidean norm (zero points when the cone is the
// zero cone).  Construction: Gaussian draw, off-support rescale, normalize.
inline std::vector<AugmentedPoint> sample_cone_points(const ConeSpecVector& spec,
                                                      Index p, Index n, Index K,
                                                      std::uint64_t seed) {
  detail::require(K >= 1, "sample_cone_points: K must be >= 1");
  detail::require(spec.supports.p() == p && spec.supports.n() == n,
                  "sample_cone_points: spec dimensions disagree with (p, n)");
  SubstreamRng rng(seed, "cone-sampler");
  std::vector<AugmentedPoint> points;
  points.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    AugmentedPoint point;
    point.b = Vector::NullaryExpr(p, [&](Index) { return rng.normal(); });
    point.theta = Vector::NullaryExpr(n, [&](Index) { return rng.normal(); });
    if (detail::project_to_cone_vector(point, spec)) {
      const double norm = point.norm();
      point.b /= norm;
      point.theta /= norm;
    }
    points.push_back(std::move(point));
  }
  return points;
}

// ---------------------------------------------------------------------------
// Empirical RE estimation
// ---------------------------------------------------------------------------

struct ReCertificate {
  double kappa_hat = 0.0;              // empirical upper estimate of kappa
  std::optional<double> bound;         // theoretical lower bound, if computed
  std::optional<double> margin;        // kappa_hat - bound
  Index num_points = 0;                // sampled cone points
  Index num_refinements = 0;           // refinement evaluations
  Index violations = 0;                // pointwise theorem violations observed
  AugmentedPoint arg_min;              // point achieving kappa_hat
};

// Optional model context: supplies the theorem side of the certificate and
// turns on per-point violation counting.
struct TheoremContext {
  BoundMode mode = BoundMode::special;
  std::optional<BoundParams> params;   // required for BoundMode::general
  Matrix sigma_s;
  double corruption_spectral = 0.0;

  RhsValue rhs(Index n, Index p, const AugmentedPoint& point) const {
    const double vr = varrho(sigma_s);
    if (mode == BoundMode::special)
      return special_vector_rhs(n, p, vr, corruption_spectral, point, sigma_s);
    detail::require(params.has_value(),
                    "TheoremContext: general mode requires params");
    return general_vector_rhs(*params, n, p, vr, corruption_spectral, point,
                              sigma_s);
  }

  RhsValue rhs(Index n, Index p, const AugmentedMatrixPoint& point) const {
    const double vr = varrho(sigma_s);
    if (mode == BoundMode::special)
      return special_matrix_rhs(n, p, vr, corruption_spectral, point, sigma_s);
    detail::require(params.has_value(),
                    "TheoremContext: general mode requires params");
    return general_matrix_rhs(*params, n, p, vr, corruption_spectral, point,
                              sigma_s);
  }

  double cone_bound(Index n, Index p, ConeL1Budget budget) const {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_s);
    return cone_re_lower_bound_with_budget(
        mode, params.value_or(BoundParams::paper()), n, p,
        std::max(eig.eigenvalues().minCoeff(), 0.0),
        std::max(eig.eigenvalues().maxCoeff(), 0.0), varrho(sigma_s),
        corruption_spectral, budget);
  }
};

namespace detail {

inline double re_ratio_vector(const Eigen::Ref<const Matrix>& x_norm,
                              const AugmentedPoint& point) {
  const double denom = point.norm();
  if (denom == 0.0) return kInf;
  return (x_norm * point.b - point.theta).norm() / denom;
}

// Projected local descent on |X_norm b - theta|_2 over the unit sphere
// intersected with the cone: tangent gradient step, cone re-projection,
// re-normalization; step halved on non-decrease.  Every evaluated candidate
// is reported through the callback (all are cone members).
inline double refine_re_vector(
    const Eigen::Ref<const Matrix>& x_norm, const ConeSpecVector& spec,
    AugmentedPoint point, Index iters, Index& evals,
    const std::function<void(const AugmentedPoint&, double)>& on_point,
    AugmentedPoint* best_point) {
  double best = re_ratio_vector(x_norm, point);
  double step = 0.25;
  for (Index it = 0; it < iters; ++it) {
    const Vector residual = x_norm * point.b - point.theta;
    AugmentedPoint grad;
    grad.b = x_norm.transpose() * residual;
    grad.theta = -residual;
    const double radial = grad.b.dot(point.b) + grad.theta.dot(point.theta);
    grad.b -= radial * point.b;
    grad.theta -= radial * point.theta;
    const double gnorm = grad.norm();
    if (gnorm < 1e-15) break;
    AugmentedPoint candidate;
    candidate.b = point.b - (step / gnorm) * grad.b;
    candidate.theta = point.theta - (step / gnorm) * grad.theta;
    if (!project_to_cone_vector(candidate, spec)) break;
    const double norm = candidate.norm();
    candidate.b /= norm;
    candidate.theta /= norm;
    const double value = re_ratio_vector(x_norm, candidate);
    ++evals;
    if (on_point) on_point(candidate, value);
    if (value < best) {
      best = value;
      point = std::move(candidate);
      if (best_point) *best_point = point;
      step = std::min(step * 1.25, 1.0);
    } else {
      step *= 0.5;
      if (step < 1e-12) break;
    }
  }
  return best;
}

}  // namespace detail

// Empirical upper estimate of the augmented RE constant of X_norm over the
// cone: minimum of |X_norm b - theta|_2 over sampled unit cone points, with
// the best starts polished by projected local descent.
inline ReCertificate empirical_re_vector(
    const Eigen::Ref<const Matrix>& x_norm, const ConeSpecVector& spec, Index K,
    Index refine_iters, std::uint64_t seed,
    const TheoremContext* context = nullptr) {
  detail::require(K >= 1, "empirical_re_vector: K must be >= 1");
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();
  detail::require(spec.supports.p() == p && spec.supports.n() == n,
                  "empirical_re_vector: spec dimensions disagree with design");

  ReCertificate cert;
  cert.num_points = K;

  std::function<void(const AugmentedPoint&, double)> on_point;
  if (context) {
    on_point = [&](const AugmentedPoint& point, double lhs) {
      const RhsValue rhs = context->rhs(n, p, point);
      if (lhs < rhs.value - 1e-9 * (1.0 + point.norm())) ++cert.violations;
    };
  }

  const std::vector<AugmentedPoint> points =
      sample_cone_points(spec, p, n, K, seed);
  std::vector<std::pair<double, Index>> ranked;
  ranked.reserve(points.size());
  bool any_valid = false;
  cert.kappa_hat = kInf;
  for (Index k = 0; k < K; ++k) {
    const AugmentedPoint& point = points[static_cast<std::size_t>(k)];
    if (point.squared_norm() == 0.0) continue;  // zero cone
    any_valid = true;
    const double value = detail::re_ratio_vector(x_norm, point);
    if (on_point) on_point(point, value);
    if (value < cert.kappa_hat) {
      cert.kappa_hat = value;
      cert.arg_min = point;
    }
    ranked.emplace_back(value, k);
  }
  detail::require(any_valid,
                  "empirical_re_vector: cone is the zero cone, no RE ratio");

  std::sort(ranked.begin(), ranked.end());
  const Index starts = std::min<Index>(10, static_cast<Index>(ranked.size()));
  for (Index i = 0; i < starts; ++i) {
    AugmentedPoint best_here;
    const double refined = detail::refine_re_vector(
        x_norm, spec, points[static_cast<std::size_t>(ranked[i].second)],
        refine_iters, cert.num_refinements, on_point, &best_here);
    if (refined < cert.kappa_hat) {
      cert.kappa_hat = refined;
      cert.arg_min = best_here;
    }
  }

  if (context) {
    ConeL1Budget budget = cone_l1_budget(spec.supports.S.size(),
                                         spec.supports.O.size(), spec.c,
                                         spec.gamma);
    if (spec.supports.S.is_empty()) budget.b_budget = 0.0;
    if (spec.supports.O.is_empty()) budget.theta_budget = 0.0;
    cert.bound = context->cone_bound(n, p, budget);
    cert.margin = cert.kappa_hat - *cert.bound;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Matrix certifier
// ---------------------------------------------------------------------------

namespace detail {

inline double re_ratio_matrix(const Eigen::Ref<const Matrix>& x_norm,
                              const AugmentedMatrixPoint& point) {
  const double denom = std::max(point.B.norm(), point.Theta.norm());
  if (denom == 0.0) return kInf;
  return (x_norm * point.B - point.Theta).norm() / denom;
}

inline void normalize_matrix_point(AugmentedMatrixPoint& point) {
  const double denom = std::max(point.B.norm(), point.Theta.norm());
  if (denom > 0.0) {
    point.B /= denom;
    point.Theta /= denom;
  }
}

}  // namespace detail

// Matrix analogue over Definition-2 cones.  Candidates are drawn
// column-block-wise with the vector sampler and re-projected by one global
// rescale; single-column embeddings are added so the matrix estimate is
// never worse than the worst embedded column estimate.  Extra candidates
// (pre-verified cone members, e.g. embedded vector minimizers) join the
// candidate pool.
inline ReCertificate empirical_re_matrix(
    const Eigen::Ref<const Matrix>& x_norm, const ConeSpecMatrix& spec, Index K,
    Index refine_iters, std::uint64_t seed,
    const std::vector<AugmentedMatrixPoint>* extra_candidates = nullptr,
    const TheoremContext* context = nullptr) {
  detail::require(K >= 1, "empirical_re_matrix: K must be >= 1");
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();
  detail::require(spec.J.p() == p && spec.O.dim() == n,
                  "empirical_re_matrix: spec dimensions disagree with design");

  SubstreamRng rng(seed, "cone-sampler");
  std::vector<AugmentedMatrixPoint> candidates;
  candidates.reserve(static_cast<std::size_t>(K + p));
  for (Index k = 0; k < K; ++k) {
    AugmentedMatrixPoint point;
    point.B = Matrix::NullaryExpr(p, p, [&](Index, Index) { return rng.normal(); });
    point.Theta =
        Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); });
    if (!detail::project_to_cone_matrix(point, spec)) continue;
    detail::normalize_matrix_point(point);
    candidates.push_back(std::move(point));
  }
  // Single-column embeddings: column j uses the vector cone (J_j, O).
  for (Index j = 1; j <= p; ++j) {
    ConeSpecVector col_spec({spec.J.column(j), spec.O}, spec.c, spec.gamma);
    const auto col_points = sample_cone_points(
        col_spec, p, n, 1, SubstreamRng::derive_seed(seed, "column-embed", j));
    AugmentedMatrixPoint point;
    point.B = Matrix::Zero(p, p);
    point.Theta = Matrix::Zero(n, p);
    point.B.col(j - 1) = col_points[0].b;
    point.Theta.col(j - 1) = col_points[0].theta;
    if (point.B.squaredNorm() + point.Theta.squaredNorm() == 0.0) continue;
    detail::normalize_matrix_point(point);
    candidates.push_back(std::move(point));
  }
  if (extra_candidates) {
    for (AugmentedMatrixPoint point : *extra_candidates) {
      detail::require(cone_member_matrix(point, spec),
                      "empirical_re_matrix: extra candidate outside the cone");
      detail::normalize_matrix_point(point);
      candidates.push_back(std::move(point));
    }
  }
  detail::require(!candidates.empty(),
                  "empirical_re_matrix: cone is the zero cone, no RE ratio");

  ReCertificate cert;
  cert.num_points = static_cast<Index>(candidates.size());
  cert.kappa_hat = kInf;
  Index best_index = 0;
  const auto check_point = [&](const AugmentedMatrixPoint& point, double lhs) {
    if (!context) return;
    const double scale =
        std::sqrt(point.B.squaredNorm() + point.Theta.squaredNorm());
    const RhsValue rhs = context->rhs(n, p, point);
    // lhs is the normalized ratio; candidates have unit max block norm.
    if (lhs < rhs.value - 1e-9 * (1.0 + scale)) ++cert.violations;
  };
  for (Index k = 0; k < cert.num_points; ++k) {
    const auto& candidate = candidates[static_cast<std::size_t>(k)];
    const double value = detail::re_ratio_matrix(x_norm, candidate);
    check_point(candidate, (x_norm * candidate.B - candidate.Theta).norm());
    if (value < cert.kappa_hat) {
      cert.kappa_hat = value;
      best_index = k;
    }
  }

  // Local descent from the best candidate: gradient step on the residual,
  // cone re-projection, renormalization; step halved on non-decrease.
  AugmentedMatrixPoint current = candidates[static_cast<std::size_t>(best_index)];
  double step = 0.25;
  for (Index it = 0; it < refine_iters; ++it) {
    const Matrix residual = x_norm * current.B - current.Theta;
    AugmentedMatrixPoint candidate = current;
    const Matrix grad_b = x_norm.transpose() * residual;
    const double gnorm = std::sqrt(grad_b.squaredNorm() + residual.squaredNorm());
    if (gnorm < 1e-15) break;
    candidate.B -= (step / gnorm) * grad_b;
    candidate.Theta += (step / gnorm) * residual;
    if (!detail::project_to_cone_matrix(candidate, spec)) break;
    detail::normalize_matrix_point(candidate);
    const double value = detail::re_ratio_matrix(x_norm, candidate);
    check_point(candidate, (x_norm * candidate.B - candidate.Theta).norm());
    ++cert.num_refinements;
    if (value < cert.kappa_hat) {
      cert.kappa_hat = value;
      current = std::move(candidate);
      step = std::min(step * 1.25, 1.0);
    } else {
      step *= 0.5;
      if (step < 1e-12) break;
    }
  }

  if (context) {
    ConeL1Budget budget =
        cone_l1_budget(spec.J.total_size(), spec.O.size(), spec.c, spec.gamma);
    if (spec.J.is_empty()) budget.b_budget = 0.0;
    if (spec.O.is_empty()) budget.theta_budget = 0.0;
    cert.bound = context->cone_bound(n, p, budget);
    cert.margin = cert.kappa_hat - *cert.bound;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Brute-force oracle (tiny dimensions)
// ---------------------------------------------------------------------------

// Dense direction search over the unit sphere of the augmented space,
// filtered to cone members, plus all support-aligned coordinate directions.
// An upper estimate of the cone minimum that converges to the truth as the
// budget grows; the direction stream is fixed, so a larger budget extends a
// smaller one and the result is non-increasing in grid_budget.
inline double brute_force_re(const Eigen::Ref<const Matrix>& x_norm,
                             const ConeSpecVector& spec, Index grid_budget) {
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();
  detail::require(p + n <= 12, "brute_force_re: p + n must be <= 12");
  detail::require(grid_budget >= 1, "brute_force_re: grid budget must be >= 1");
  detail::require(spec.supports.p() == p && spec.supports.n() == n,
                  "brute_force_re: spec dimensions disagree with design");
  detail::require(!(spec.supports.S.is_empty() && spec.supports.O.is_empty()),
                  "brute_force_re: cone is the zero cone, no RE ratio");

  double best = kInf;
  AugmentedPoint point;
  // Support-aligned coordinate directions are members by construction.
  for (const Index i : spec.supports.S.indices()) {
    point.b = Vector::Zero(p);
    point.theta = Vector::Zero(n);
    point.b[i - 1] = 1.0;
    best = std::min(best, detail::re_ratio_vector(x_norm, point));
  }
  for (const Index i : spec.supports.O.indices()) {
    point.b = Vector::Zero(p);
    point.theta = Vector::Zero(n);
    point.theta[i - 1] = 1.0;
    best = std::min(best, detail::re_ratio_vector(x_norm, point));
  }

  SubstreamRng rng(0x9e0a5eedULL, "brute-force");
  const bool zero_b = spec.supports.S.is_empty();
  const bool zero_theta = spec.supports.O.is_empty();
  for (Index g = 0; g < grid_budget; ++g) {
    point.b = Vector::NullaryExpr(p, [&](Index) { return rng.normal(); });
    point.theta = Vector::NullaryExpr(n, [&](Index) { return rng.normal(); });
    if (zero_b) point.b.setZero();
    if (zero_theta) point.theta.setZero();
    const double norm = point.norm();
    if (norm == 0.0) continue;
    point.b /= norm;
    point.theta /= norm;
    if (cone_margin_vector(point, spec) < 0.0) continue;
    best = std::min(best, detail::re_ratio_vector(x_norm, point));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Pointwise theorem checks
// ---------------------------------------------------------------------------

struct ViolationReport {
  Index num_points = 0;
  Index violations = 0;
  double worst_violation = 0.0;  // most negative slack observed, as a magnitude
  double min_slack = kInf;       // smallest lhs - rhs over the points
  bool n_warning = false;
};

// K unit-norm Gaussian directions of the augmented space; the theorems
// quantify over every point, so arbitrary directions are valid test points.
inline std::vector<AugmentedPoint> sample_augmented_points(Index p, Index n,
                                                           Index K,
                                                           SubstreamRng& rng) {
  std::vector<AugmentedPoint> points;
  points.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    AugmentedPoint point;
    point.b = Vector::NullaryExpr(p, [&](Index) { return rng.normal(); });
    point.theta = Vector::NullaryExpr(n, [&](Index) { return rng.normal(); });
    const double norm = point.norm();
    if (norm > 0.0) {
      point.b /= norm;
      point.theta /= norm;
    }
    points.push_back(std::move(point));
  }
  return points;
}

// Evaluates lhs = |X_norm b - theta|_2 against the selected bound for every
// point and counts violations below the floating-point tolerance.
inline ViolationReport check_theorem_pointwise(
    const DesignSample& sample, const std::vector<AugmentedPoint>& points,
    BoundMode mode, const std::optional<BoundParams>& params = std::nullopt) {
  if (mode == BoundMode::general)
    detail::require(params.has_value(),
                    "check_theorem_pointwise: general mode requires params");
  ViolationReport report;
  report.num_points = static_cast<Index>(points.size());
  if (points.empty()) return report;

  const Index n = sample.n;
  const Index p = sample.p;
  const double vr = varrho(sample.Sigma_S);
  const double corruption = sample.corruption_spectral();

  // Batched evaluation: stack the points column-wise.
  const Index K = report.num_points;
  Matrix B(p, K);
  Matrix T(n, K);
  for (Index k = 0; k < K; ++k) {
    B.col(k) = points[static_cast<std::size_t>(k)].b;
    T.col(k) = points[static_cast<std::size_t>(k)].theta;
  }
  const Matrix residual = sample.X_norm * B - T;
  const Matrix sigma_b = sample.Sigma_S * B;

  const double dn = static_cast<double>(n);
  const double log_p_n = std::sqrt(std::log(static_cast<double>(p)) / dn);
  const double log_n_n = std::sqrt(std::log(dn) / dn);
  double lead, a_coef, b_coef;
  if (mode == BoundMode::special) {
    lead = 0.24 - corruption;
    a_coef = 36.0 * vr * log_p_n;
    b_coef = 33.0 * log_n_n;
    report.n_warning = n < kSpecialNMin;
  } else {
    lead = lead_constant(*params, n, corruption);
    a_coef = l1_coefficient(*params) * vr * log_p_n;
    b_coef = rho_factor(params->tau, params->sigma) * params->beta *
             std::sqrt(2.0 * std::log(dn) / dn);
    report.n_warning = n < n_min(*params);
  }

  for (Index k = 0; k < K; ++k) {
    const double lhs = residual.col(k).norm();
    const double ellipse = std::sqrt(
        std::max(B.col(k).dot(sigma_b.col(k)), 0.0) + T.col(k).squaredNorm());
    const double rhs = lead * ellipse - a_coef * B.col(k).lpNorm<1>() -
                       b_coef * T.col(k).lpNorm<1>();
    const double slack = lhs - rhs;
    report.min_slack = std::min(report.min_slack, slack);
    const double tol =
        1e-9 * (1.0 + std::sqrt(B.col(k).squaredNorm() + T.col(k).squaredNorm()));
    if (slack < -tol) {
      ++report.violations;
      report.worst_violation = std::max(report.worst_violation, -slack);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Constraint-set samplers for the splitting sets V1(r1) and V(r1, r2)
// ---------------------------------------------------------------------------

namespace detail {

inline double ellipse_norm(const Eigen::Ref<const Matrix>& sigma,
                           const Eigen::Ref<const Vector>& b) {
  return std::sqrt(std::max(b.dot(sigma * b), 0.0));
}

// Index of the largest diagonal entry; the corresponding coordinate vector
// is the cheapest (in l1) way to reach a given ellipse norm.
inline Index anchor_index(const Eigen::Ref<const Matrix>& sigma) {
  Index best = 0;
  sigma.diagonal().maxCoeff(&best);
  return best;
}

// Draws b with |Sigma^{1/2} b|_2 = target and |b|_1 <= r1.  A plain scaled
// Gaussian is used when feasible; otherwise the draw is shrunk toward the
// top-diagonal coordinate direction by bisection.  Returns false when even
// the anchor direction is infeasible.
inline bool sample_ellipse_l1_point(const Eigen::Ref<const Matrix>& sigma,
                                    double target, double r1, SubstreamRng& rng,
                                    Vector& out) {
  const Index p = sigma.rows();
  if (target == 0.0) {
    out = Vector::Zero(p);
    return true;
  }
  const Index j = anchor_index(sigma);
  const double anchor_scale = std::sqrt(sigma(j, j));
  if (anchor_scale == 0.0 || target / anchor_scale > r1 * (1.0 + 1e-12))
    return false;
  Vector g = Vector::NullaryExpr(p, [&](Index) { return rng.normal(); });
  const double gn = ellipse_norm(sigma, g);
  if (gn > 0.0) {
    Vector direct = g * (target / gn);
    if (direct.lpNorm<1>() <= r1) {
      out = std::move(direct);
      return true;
    }
  }
  Vector anchor = Vector::Zero(p);
  anchor[j] = 1.0 / anchor_scale;  // unit ellipse norm, minimal l1 cost
  double lo = 0.0, hi = 1.0;       // mix weight of the Gaussian component
  for (int it = 0; it < 60; ++it) {
    const double w = 0.5 * (lo + hi);
    Vector v = (1.0 - w) * anchor + w * g;
    const double vn = ellipse_norm(sigma, v);
    if (vn == 0.0) {
      hi = w;
      continue;
    }
    v *= target / vn;
    if (v.lpNorm<1>() <= r1)
      lo = w;
    else
      hi = w;
  }
  Vector v = (1.0 - lo) * anchor + lo * g;
  const double vn = ellipse_norm(sigma, v);
  if (vn == 0.0) return false;
  v *= target / vn;
  if (v.lpNorm<1>() > r1 * (1.0 + 1e-9)) {
    v = anchor * target;  // lo collapsed to the anchor
  }
  out = std::move(v);
  return true;
}

// Identity-metric variant for the theta block.
inline bool sample_sphere_l1_point(Index n, double target, double r2,
                                   SubstreamRng& rng, Vector& out) {
  if (target == 0.0) {
    out = Vector::Zero(n);
    return true;
  }
  if (target > r2 * (1.0 + 1e-12)) return false;  // |theta|_1 >= |theta|_2
  Vector g = Vector::NullaryExpr(n, [&](Index) { return rng.normal(); });
  const double gn = g.norm();
  if (gn > 0.0) {
    Vector direct = g * (target / gn);
    if (direct.lpNorm<1>() <= r2) {
      out = std::move(direct);
      return true;
    }
  }
  Index j = 0;
  g.cwiseAbs().maxCoeff(&j);
  Vector anchor = Vector::Zero(n);
  anchor[j] = g[j] >= 0.0 ? 1.0 : -1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double w = 0.5 * (lo + hi);
    Vector v = (1.0 - w) * anchor + w * g;
    const double vn = v.norm();
    if (vn == 0.0) {
      hi = w;
      continue;
    }
    v *= target / vn;
    if (v.lpNorm<1>() <= r2)
      lo = w;
    else
      hi = w;
  }
  Vector v = (1.0 - lo) * anchor + lo * g;
  const double vn = v.norm();
  if (vn == 0.0) return false;
  v *= target / vn;
  if (v.lpNorm<1>() > r2 * (1.0 + 1e-9)) v = anchor * target;
  out = std::move(v);
  return true;
}

}  // namespace detail

// Feasibility of V1(r1) = {b : |Sigma_S^{1/2} b| = 1, |b|_1 <= r1}, checked
// by constructing the cheapest coordinate-aligned point.
inline bool v1_feasible(const Eigen::Ref<const Matrix>& sigma_s, double r1) {
  const double vr = varrho(sigma_s);
  return vr > 0.0 && r1 * vr >= 1.0 - 1e-12;
}

// Constructive feasibility of V(r1, r2): some norm split (rho_b, rho_t) with
// rho_b^2 + rho_t^2 = 1 must satisfy both l1 caps.
inline bool v_feasible(const Eigen::Ref<const Matrix>& sigma_s, double r1,
                       double r2) {
  const double vr = varrho(sigma_s);
  const double reach_b = std::min(1.0, r1 * vr);
  const double reach_t = std::min(1.0, std::max(r2, 0.0));
  return reach_b * reach_b + reach_t * reach_t >= 1.0 - 1e-12;
}

// One point of V(r1, r2): a feasible norm split is drawn uniformly over the
// feasible arc, then each block is sampled on its shell under its l1 cap.
inline bool sample_v_point(const Eigen::Ref<const Matrix>& sigma_s, double r1,
                           double r2, SubstreamRng& rng, AugmentedPoint& out,
                           Index n) {
  const double vr = varrho(sigma_s);
  const double hi = std::min(1.0, r1 * vr);
  const double lo = std::sqrt(
      std::max(0.0, 1.0 - std::min(1.0, std::max(r2, 0.0)) *
                              std::min(1.0, std::max(r2, 0.0))));
  if (hi < lo - 1e-12) return false;
  const double rho_b = lo + (hi - lo) * rng.uniform01();
  const double rho_t = std::sqrt(std::max(0.0, 1.0 - rho_b * rho_b));
  return detail::sample_ellipse_l1_point(sigma_s, rho_b, r1, rng, out.b) &&
         detail::sample_sphere_l1_point(n, rho_t, r2, rng, out.theta);
}

// ---------------------------------------------------------------------------
// Bilinear-form maximization over V(r1, r2)
// ---------------------------------------------------------------------------

namespace detail {

// Maximizes v' g over {|v|_2 = rho2, |v|_1 <= rho1} via the soft-threshold
// family v(t) = rho2 * soft(g, t)/|soft(g, t)|_2, whose l1 norm decreases in
// t; requires rho1 >= rho2.
inline Vector max_linear_sphere_l1(const Eigen::Ref<const Vector>& g,
                                   double rho2, double rho1) {
  const Index n = g.size();
  if (rho2 == 0.0) return Vector::Zero(n);
  const double gmax = g.cwiseAbs().maxCoeff();
  if (gmax == 0.0) {
    Vector v = Vector::Zero(n);
    v[0] = rho2;
    return v;
  }
  const auto shrunk = [&](double t) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
      const double a = std::abs(g[i]) - t;
      v[i] = a > 0.0 ? std::copysign(a, g[i]) : 0.0;
    }
    return v;
  };
  Vector v = g * (rho2 / g.norm());
  if (v.lpNorm<1>() <= rho1) return v;
  double lo = 0.0, hi = gmax * (1.0 - 1e-12);
  for (int it = 0; it < 80; ++it) {
    const double t = 0.5 * (lo + hi);
    Vector cand = shrunk(t);
    const double cn = cand.norm();
    if (cn == 0.0) {
      hi = t;
      continue;
    }
    cand *= rho2 / cn;
    if (cand.lpNorm<1>() <= rho1)
      hi = t;
    else
      lo = t;
  }
  Vector cand = shrunk(hi);
  const double cn = cand.norm();
  if (cn == 0.0) {
    Index j = 0;
    g.cwiseAbs().maxCoeff(&j);
    cand = Vector::Zero(n);
    cand[j] = std::copysign(rho2, g[j]);
    return cand;
  }
  cand *= rho2 / cn;
  return cand;
}

}  // namespace detail

// Sampled estimate of sup over V(r1, r2) of theta' X b.  Starts from K
// sampled points (with both theta signs) and improves the best start by
// alternating maximization: the theta block is optimized exactly over its
// sphere-with-l1-cap slice, the b block by a feasibility-checked
// soft-threshold scan.  Every candidate is verified feasible, so the result
// never exceeds the true supremum.
inline double sampled_bilinear_sup(const Eigen::Ref<const Matrix>& x_r_norm,
                                   const Eigen::Ref<const Matrix>& sigma_s,
                                   double r1, double r2, Index K,
                                   SubstreamRng& rng) {
  detail::require(v_feasible(sigma_s, r1, r2),
                  "sampled_bilinear_sup: V(r1, r2) is empty");
  const Index n = x_r_norm.rows();
  double best = 0.0;  // theta -> -theta stays feasible, so the sup is >= 0
  AugmentedPoint best_point;
  bool have_point = false;
  for (Index k = 0; k < K; ++k) {
    AugmentedPoint point;
    if (!sample_v_point(sigma_s, r1, r2, rng, point, n)) continue;
    const double value = point.theta.dot(x_r_norm * point.b);
    if (std::abs(value) > best || !have_point) {
      best = std::abs(value);
      if (value < 0.0) point.theta = -point.theta;
      best_point = point;
      have_point = true;
    }
  }
  if (!have_point) return 0.0;

  for (int round = 0; round < 4; ++round) {
    // theta step: exact maximization on its slice.
    const double rho_b = detail::ellipse_norm(sigma_s, best_point.b);
    const double rho_t = std::sqrt(std::max(0.0, 1.0 - rho_b * rho_b));
    if (rho_t > 0.0 && rho_t <= r2) {
      const Vector g = x_r_norm * best_point.b;
      Vector theta = detail::max_linear_sphere_l1(g, rho_t, r2);
      if (theta.lpNorm<1>() <= r2 * (1.0 + 1e-9) &&
          g.dot(theta) >= g.dot(best_point.theta))
        best_point.theta = std::move(theta);
    }
    // b step: soft-threshold scan in the gradient, keeping only feasible
    // candidates that improve the objective.
    const Vector h = x_r_norm.transpose() * best_point.theta;
    const double hmax = h.cwiseAbs().maxCoeff();
    if (hmax > 0.0) {
      const double keep_rho_b = detail::ellipse_norm(sigma_s, best_point.b);
      double current = h.dot(best_point.b);
      for (int level = 0; level <= 40; ++level) {
        const double t = level == 0 ? 0.0
                                    : hmax * std::pow(10.0, -6.0 + 6.0 *
                                                                 (40 - level) /
                                                                 40.0);
        Vector v(h.size());
        for (Index i = 0; i < h.size(); ++i) {
          const double a = std::abs(h[i]) - t;
          v[i] = a > 0.0 ? std::copysign(a, h[i]) : 0.0;
        }
        const double vn = detail::ellipse_norm(sigma_s, v);
        if (vn == 0.0) continue;
        v *= keep_rho_b / vn;
        if (v.lpNorm<1>() > r1 * (1.0 + 1e-12)) continue;
        const double value = h.dot(v);
        if (value > current) {
          current = value;
          best_point.b = v;
        }
      }
    }
    best = std::max(best, best_point.theta.dot(x_r_norm * best_point.b));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Splitting diagnostics and lemma verifiers
// ---------------------------------------------------------------------------

struct SplittingDiagnostics {
  double I1_hat = 0.0;  // sampled inf over V1(sqrt(2) r1); over-estimates
  double I2_hat = 0.0;  // sampled sup of the bilinear form; under-estimates
  double rhs = 0.0;     // assembled splitting right-hand side (diagnostic only)
};

inline SplittingDiagnostics splitting_diagnostics(const DesignSample& sample,
                                                  double r1, double r2, Index K,
                                                  std::uint64_t seed) {
  detail::require(K >= 1, "splitting_diagnostics: K must be >= 1");
  detail::require(v_feasible(sample.Sigma_S, r1, r2),
                  "splitting_diagnostics: V(r1, r2) is empty");
  const double r1_lifted = kSqrt2 * r1;
  detail::require(v1_feasible(sample.Sigma_S, r1_lifted),
                  "splitting_diagnostics: V1(sqrt(2) r1) is empty");
  const Matrix x_r_norm =
      (sample.Y + sample.E_R) / std::sqrt(static_cast<double>(sample.n));

  SubstreamRng rng(seed, "splitting");
  double inf_value = kInf;
  for (Index k = 0; k < K; ++k) {
    Vector b;
    if (!detail::sample_ellipse_l1_point(sample.Sigma_S, 1.0, r1_lifted, rng, b))
      continue;
    inf_value = std::min(inf_value, (x_r_norm * b).norm());
  }

  SplittingDiagnostics diag;
  diag.I1_hat = inf_value;
  diag.I2_hat =
      sampled_bilinear_sup(x_r_norm, sample.Sigma_S, r1, r2, K, rng);
  diag.rhs = std::min(diag.I1_hat, 1.0) / kSqrt2 -
             std::sqrt(2.0 * std::max(diag.I2_hat, 0.0)) -
             sample.corruption_spectral();
  return diag;
}

struct LemmaTailReport {
  Index trials = 0;
  Index violations = 0;
  double frequency = 0.0;
  double bound = 0.0;             // the lemma's deterministic lower bound
  double probability_bound = 0.0; // exp(-n t^2 / 2)
};

// Tail check for the high-probability lower bound: each trial draws a fresh
// Gaussian design with Sigma_S rows and compares a sampled infimum over
// V1(r1) (an over-estimate of the true infimum) against the bound.  A trial
// flagged here is a genuine violation, so the observed frequency must stay
// below the probability bound plus Monte Carlo slack.
inline LemmaTailReport verify_lemma_aux1(Index p, Index n,
                                         const CovarianceSpec& cov_s, double t,
                                         double r1, Index trials, Index K,
                                         std::uint64_t seed, int workers = 1) {
  detail::require(cov_s.dim() == p, "verify_lemma_aux1: dimension mismatch");
  detail::require(trials >= 1 && K >= 1,
                  "verify_lemma_aux1: trials and K must be >= 1");
  const Matrix sigma_s = cov_s.dense_matrix();
  detail::require(v1_feasible(sigma_s, r1),
                  "verify_lemma_aux1: V1(r1) is empty");
  LemmaTailReport report;
  report.trials = trials;
  report.bound = lemma_aux1_bound(n, p, t, r1, varrho(sigma_s));
  report.probability_bound =
      std::exp(-static_cast<double>(n) * t * t / 2.0);

  std::vector<int> violated(static_cast<std::size_t>(trials), 0);
  parallel_for_indexed(trials, workers, [&](Index trial) {
    SubstreamRng rng(SubstreamRng::derive_seed(seed, "lemma-aux1", trial),
                     "trial");
    const Matrix x = cov_s.sample_rows(n, rng) /
                     std::sqrt(static_cast<double>(n));
    double inf_value = kInf;
    for (Index k = 0; k < K; ++k) {
      Vector b;
      if (!detail::sample_ellipse_l1_point(sigma_s, 1.0, r1, rng, b)) continue;
      inf_value = std::min(inf_value, (x * b).norm());
    }
    violated[static_cast<std::size_t>(trial)] = inf_value < report.bound;
  });
  for (const int v : violated) report.violations += v;
  report.frequency =
      static_cast<double>(report.violations) / static_cast<double>(trials);
  return report;
}

struct LemmaMeanReport {
  Index trials = 0;
  double empirical_mean = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;  // expectation upper bound from the closed form
};

// Expectation check for the bilinear supremum: per-trial sampled suprema
// under-estimate the true supremum, whose mean the lemma bounds, so the
// empirical mean must stay below bound plus Monte Carlo slack.
inline LemmaMeanReport verify_lemma_aux2(Index p, Index n,
                                         const CovarianceSpec& cov_s, double r1,
                                         double r2, Index trials, Index K,
                                         std::uint64_t seed, int workers = 1) {
  detail::require(cov_s.dim() == p, "verify_lemma_aux2: dimension mismatch");
  detail::require(trials >= 1 && K >= 1,
                  "verify_lemma_aux2: trials and K must be >= 1");
  const Matrix sigma_s = cov_s.dense_matrix();
  detail::require(v_feasible(sigma_s, r1, r2),
                  "verify_lemma_aux2: V(r1, r2) is empty");
  LemmaMeanReport report;
  report.trials = trials;
  report.bound = lemma_aux2_bound(n, p, r1, r2, varrho(sigma_s));

  std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
  parallel_for_indexed(trials, workers, [&](Index trial) {
    SubstreamRng rng(SubstreamRng::derive_seed(seed, "lemma-aux2", trial),
                     "trial");
    const Matrix x = cov_s.sample_rows(n, rng) /
                     std::sqrt(static_cast<double>(n));
    values[static_cast<std::size_t>(trial)] =
        sampled_bilinear_sup(x, sigma_s, r1, r2, K, rng);
  });
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= std::max<double>(1.0, static_cast<double>(trials - 1));
  report.empirical_mean = mean;
  report.standard_error = std::sqrt(var / static_cast<double>(trials));
  return report;
}

}  // namespace recert
