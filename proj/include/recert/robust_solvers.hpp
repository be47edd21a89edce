#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "recert/core_types.hpp"

namespace recert {

struct SolverConfig {
  double lambda_b = 0.0;      // l1 penalty on the parameter block
  double lambda_theta = 0.0;  // l1 (or row-group) penalty on the corruption
  Index max_iters = 10000;
  double tol = 1e-8;  // relative objective decrease, two consecutive sweeps

  SolverConfig(double lb, double lt, Index iters = 10000, double tol_ = 1e-8)
      : lambda_b(lb), lambda_theta(lt), max_iters(iters), tol(tol_) {
    detail::require(lambda_b >= 0.0 && lambda_theta >= 0.0,
                    "SolverConfig: penalties must be >= 0");
    detail::require(tol > 0.0, "SolverConfig: tol must be > 0");
    detail::require(max_iters >= 1, "SolverConfig: max_iters must be >= 1");
  }
};

// Penalty pair used by the simulations: lambda_theta = 2 sqrt(log n / n) and
// lambda_b = gamma * lambda_theta with gamma = 1.1 sqrt(log p / log n), the
// same ratio the cone corollary ties to the penalization factors.
inline SolverConfig default_simulation_config(Index p, Index n) {
  const double dn = static_cast<double>(n);
  const double lambda_theta = 2.0 * std::sqrt(std::log(dn) / dn);
  const double gamma =
      1.1 * std::sqrt(std::log(static_cast<double>(p)) / std::log(dn));
  return SolverConfig(gamma * lambda_theta, lambda_theta);
}

struct SolverResult {
  Vector b_hat;
  Vector theta_hat;
  Matrix B_hat;      // multitask case
  Matrix Theta_hat;  // multitask case
  std::vector<double> objective_trace;
  bool converged = false;
  Index iterations = 0;
  bool non_unique = false;  // zero design column with lambda_b == 0
};

namespace detail {

inline double soft_threshold(double x, double lambda) {
  if (std::isinf(lambda)) return 0.0;
  const double a = std::abs(x) - lambda;
  return a > 0.0 ? std::copysign(a, x) : 0.0;
}

inline double penalty_term(double lambda, double norm_value) {
  if (lambda == 0.0) return 0.0;
  if (std::isinf(lambda)) return norm_value == 0.0 ? 0.0 : kInf;
  return lambda * norm_value;
}

}  // namespace detail

// Objective of the joint-l1 robust regression
//   F(b, theta) = 0.5 |y - X b + theta|_2^2 + lb |b|_1 + lt |theta|_1.
inline double robust_lasso_objective(const Eigen::Ref<const Vector>& y,
                                     const Eigen::Ref<const Matrix>& x_norm,
                                     const Eigen::Ref<const Vector>& b,
                                     const Eigen::Ref<const Vector>& theta,
                                     const SolverConfig& cfg) {
  detail::require(x_norm.rows() == y.size() && x_norm.cols() == b.size() &&
                      theta.size() == y.size(),
                  "robust_lasso_objective: dimension mismatch");
  const double quad = 0.5 * (y - x_norm * b + theta).squaredNorm();
  return quad + detail::penalty_term(cfg.lambda_b, b.lpNorm<1>()) +
         detail::penalty_term(cfg.lambda_theta, theta.lpNorm<1>());
}

// Cyclic coordinate descent for the robust Lasso.  Sweep order: b_1..b_p,
// then theta_1..theta_n (each theta update is an exact scalar shrinkage of
// the residual).  The objective is jointly convex, so a fixed point of the
// sweeps is a global minimizer.  lambda_theta = +inf freezes theta at zero.
inline SolverResult solve_robust_lasso(
    const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& x_norm,
    const SolverConfig& cfg, std::optional<Vector> b_init = std::nullopt,
    std::optional<Vector> theta_init = std::nullopt) {
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();
  detail::require(y.size() == n, "solve_robust_lasso: y dimension mismatch");
  detail::require_finite(y, "solve_robust_lasso");
  detail::require_finite(x_norm, "solve_robust_lasso");

  SolverResult result;
  result.b_hat = b_init.value_or(Vector::Zero(p));
  result.theta_hat = theta_init.value_or(Vector::Zero(n));
  detail::require(result.b_hat.size() == p && result.theta_hat.size() == n,
                  "solve_robust_lasso: warm start dimension mismatch");
  if (std::isinf(cfg.lambda_theta)) result.theta_hat.setZero();

  const Vector col_sq = x_norm.colwise().squaredNorm();
  for (Index j = 0; j < p; ++j)
    if (col_sq[j] == 0.0 && cfg.lambda_b == 0.0) result.non_unique = true;

  Vector residual = y - x_norm * result.b_hat + result.theta_hat;
  double objective = 0.5 * residual.squaredNorm() +
                     detail::penalty_term(cfg.lambda_b,
                                          result.b_hat.lpNorm<1>()) +
                     detail::penalty_term(cfg.lambda_theta,
                                          result.theta_hat.lpNorm<1>());
  result.objective_trace.push_back(objective);

  Index stable_sweeps = 0;
  for (Index sweep = 0; sweep < cfg.max_iters; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;  // coordinate has no effect on the fit
      const double old = result.b_hat[j];
      const double partial = x_norm.col(j).dot(residual) + col_sq[j] * old;
      const double updated =
          detail::soft_threshold(partial, cfg.lambda_b) / col_sq[j];
      if (updated != old) {
        residual += x_norm.col(j) * (old - updated);
        result.b_hat[j] = updated;
      }
    }
    if (!std::isinf(cfg.lambda_theta)) {
      for (Index i = 0; i < n; ++i) {
        const double old = result.theta_hat[i];
        const double without = residual[i] - old;
        const double updated =
            detail::soft_threshold(-without, cfg.lambda_theta);
        if (updated != old) {
          residual[i] = without + updated;
          result.theta_hat[i] = updated;
        }
      }
    }
    const double previous = objective;
    objective = 0.5 * residual.squaredNorm() +
                detail::penalty_term(cfg.lambda_b, result.b_hat.lpNorm<1>()) +
                detail::penalty_term(cfg.lambda_theta,
                                     result.theta_hat.lpNorm<1>());
    result.objective_trace.push_back(objective);
    ++result.iterations;
    const double rel =
        (previous - objective) / std::max(std::abs(previous), 1e-300);
    if (rel < cfg.tol) {
      if (++stable_sweeps >= 2) {
        result.converged = true;
        break;
      }
    } else {
      stable_sweeps = 0;
    }
  }
  return result;
}

// Largest subgradient-optimality violation of the robust Lasso at (b, theta);
// zero (up to tolerance) certifies a global minimizer.
inline double robust_lasso_kkt_violation(const Eigen::Ref<const Vector>& y,
                                         const Eigen::Ref<const Matrix>& x_norm,
                                         const Eigen::Ref<const Vector>& b,
                                         const Eigen::Ref<const Vector>& theta,
                                         const SolverConfig& cfg) {
  const Vector residual = y - x_norm * b + theta;
  double worst = 0.0;
  for (Index j = 0; j < x_norm.cols(); ++j) {
    const double corr = x_norm.col(j).dot(residual);
    if (b[j] != 0.0)
      worst = std::max(worst, std::abs(corr - cfg.lambda_b * (b[j] > 0 ? 1.0 : -1.0)));
    else
      worst = std::max(worst, std::max(0.0, std::abs(corr) - cfg.lambda_b));
  }
  if (!std::isinf(cfg.lambda_theta)) {
    for (Index i = 0; i < x_norm.rows(); ++i) {
      if (theta[i] != 0.0)
        worst = std::max(worst, std::abs(residual[i] + cfg.lambda_theta *
                                                           (theta[i] > 0 ? 1.0
                                                                         : -1.0)));
      else
        worst = std::max(worst,
                         std::max(0.0, std::abs(residual[i]) - cfg.lambda_theta));
    }
  }
  return worst;
}

// Objective of the multitask model
//   0.5 |M - X B + Theta|_{2,2}^2 + lB |B|_{1,1} + lT |Theta|_{2,1}.
inline double multitask_objective(const Eigen::Ref<const Matrix>& m,
                                  const Eigen::Ref<const Matrix>& x_norm,
                                  const Eigen::Ref<const Matrix>& b,
                                  const Eigen::Ref<const Matrix>& theta,
                                  const SolverConfig& cfg) {
  const double quad = 0.5 * (m - x_norm * b + theta).squaredNorm();
  double theta_21 = 0.0;
  for (Index i = 0; i < theta.rows(); ++i) theta_21 += theta.row(i).norm();
  return quad + detail::penalty_term(cfg.lambda_b, b.cwiseAbs().sum()) +
         detail::penalty_term(cfg.lambda_theta, theta_21);
}

// Proximal gradient on the stacked variable [B; Theta] with fixed step
// 1/L, L = sigma_max([X | -I])^2 = 1 + sigma_max(X)^2: entrywise shrinkage
// for B, row-group shrinkage for Theta.  The step size guarantees descent.
inline SolverResult solve_multitask_robust(const Eigen::Ref<const Matrix>& m,
                                           const Eigen::Ref<const Matrix>& x_norm,
                                           const SolverConfig& cfg) {
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();
  detail::require(m.rows() == n && m.cols() == p,
                  "solve_multitask_robust: response must be n x p");
  detail::require_finite(m, "solve_multitask_robust");
  detail::require_finite(x_norm, "solve_multitask_robust");

  const double sigma_max =
      x_norm.squaredNorm() == 0.0
          ? 0.0
          : x_norm.bdcSvd().singularValues()[0];
  const double step = 1.0 / (1.0 + sigma_max * sigma_max);

  SolverResult result;
  result.B_hat = Matrix::Zero(p, p);
  result.Theta_hat = Matrix::Zero(n, p);
  double objective = multitask_objective(m, x_norm, result.B_hat,
                                         result.Theta_hat, cfg);
  result.objective_trace.push_back(objective);

  Index stable_iters = 0;
  for (Index iter = 0; iter < cfg.max_iters; ++iter) {
    const Matrix residual = m - x_norm * result.B_hat + result.Theta_hat;
    const Matrix grad_b = -x_norm.transpose() * residual;
    // gradient step
    Matrix b_next = result.B_hat - step * grad_b;
    Matrix theta_next = result.Theta_hat - step * residual;
    // proximal maps
    if (std::isinf(cfg.lambda_b)) {
      b_next.setZero();
    } else if (cfg.lambda_b > 0.0) {
      const double shift = step * cfg.lambda_b;
      b_next = b_next.unaryExpr(
          [shift](double v) { return detail::soft_threshold(v, shift); });
    }
    if (std::isinf(cfg.lambda_theta)) {
      theta_next.setZero();
    } else if (cfg.lambda_theta > 0.0) {
      const double shift = step * cfg.lambda_theta;
      for (Index i = 0; i < n; ++i) {
        const double row_norm = theta_next.row(i).norm();
        if (row_norm <= shift)
          theta_next.row(i).setZero();
        else
          theta_next.row(i) *= (row_norm - shift) / row_norm;
      }
    }
    result.B_hat = std::move(b_next);
    result.Theta_hat = std::move(theta_next);

    const double previous = objective;
    objective =
        multitask_objective(m, x_norm, result.B_hat, result.Theta_hat, cfg);
    result.objective_trace.push_back(objective);
    ++result.iterations;
    const double rel =
        (previous - objective) / std::max(std::abs(previous), 1e-300);
    if (rel < cfg.tol) {
      if (++stable_iters >= 2) {
        result.converged = true;
        break;
      }
    } else {
      stable_iters = 0;
    }
  }
  return result;
}

// Largest violation of the stacked proximal-gradient optimality conditions.
inline double multitask_kkt_violation(const Eigen::Ref<const Matrix>& m,
                                      const Eigen::Ref<const Matrix>& x_norm,
                                      const Eigen::Ref<const Matrix>& b,
                                      const Eigen::Ref<const Matrix>& theta,
                                      const SolverConfig& cfg) {
  const Matrix residual = m - x_norm * b + theta;
  const Matrix grad_b = -x_norm.transpose() * residual;
  double worst = 0.0;
  for (Index j = 0; j < b.cols(); ++j)
    for (Index i = 0; i < b.rows(); ++i) {
      const double g = grad_b(i, j);
      if (b(i, j) != 0.0)
        worst = std::max(worst,
                         std::abs(g + cfg.lambda_b * (b(i, j) > 0 ? 1.0 : -1.0)));
      else
        worst = std::max(worst, std::max(0.0, std::abs(g) - cfg.lambda_b));
    }
  if (!std::isinf(cfg.lambda_theta)) {
    for (Index i = 0; i < theta.rows(); ++i) {
      const double row_norm = theta.row(i).norm();
      if (row_norm != 0.0)
        worst = std::max(
            worst, (residual.row(i) +
                    cfg.lambda_theta / row_norm * theta.row(i)).norm());
      else
        worst = std::max(worst,
                         std::max(0.0, residual.row(i).norm() - cfg.lambda_theta));
    }
  }
  return worst;
}

// Margin of the estimation error [b_hat - b_star; theta_hat - theta_star]
// in the given cone; connects solver runs to the RE certificates.
inline double error_in_cone_check(const SolverResult& result,
                                  const Eigen::Ref<const Vector>& b_star,
                                  const Eigen::Ref<const Vector>& theta_star,
                                  const ConeSpecVector& spec) {
  AugmentedPoint error;
  error.b = result.b_hat - b_star;
  error.theta = result.theta_hat - theta_star;
  return cone_margin_vector(error, spec);
}

}  // namespace recert
