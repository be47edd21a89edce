#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "recert/design_sampler.hpp"
#include "recert/robust_solvers.hpp"

namespace recert {
namespace {

struct LassoInstance {
  Matrix x;
  Vector y;
  Vector b_star;
  Vector theta_star;
};

LassoInstance make_instance(Index p, Index n, Index sparsity, Index outliers,
                            double noise_sd, std::uint64_t seed) {
  LassoInstance inst;
  const auto sample = sample_design(p, n, CovarianceSpec::identity(p),
                                    ContaminationSpec::clean(n), seed);
  inst.x = sample.X_norm;
  inst.b_star = Vector::Zero(p);
  SubstreamRng rng(seed, "truth");
  for (Index k = 0; k < sparsity; ++k)
    inst.b_star[k] = rng.normal() + (rng.normal() > 0 ? 2.0 : -2.0);
  inst.theta_star = Vector::Zero(n);
  for (Index k = 0; k < outliers; ++k)
    inst.theta_star[k] = 10.0 * (rng.uniform01() > 0.5 ? 1.0 : -1.0);
  inst.y = sample_response(inst.x, inst.b_star, inst.theta_star, noise_sd,
                           seed + 1);
  return inst;
}

TEST(RobustLasso, LargePenaltiesGiveExactZeros) {
  const auto inst = make_instance(6, 40, 3, 2, 0.1, 1);
  const double lb = (inst.x.transpose() * inst.y).cwiseAbs().maxCoeff();
  const double lt = inst.y.cwiseAbs().maxCoeff();
  SolverConfig cfg(lb * 1.001, lt * 1.001);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  EXPECT_TRUE(result.b_hat.isZero(0.0));
  EXPECT_TRUE(result.theta_hat.isZero(0.0));
  EXPECT_TRUE(result.converged);
}

TEST(RobustLasso, NoiselessRecoveryMatchesLeastSquares) {
  const auto inst = make_instance(8, 64, 3, 0, 0.0, 2);
  SolverConfig cfg(1e-8, kInf, 20000, 1e-12);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  EXPECT_TRUE(result.theta_hat.isZero(0.0));
  // Independent oracle: unpenalized least squares on the full design.
  const Vector ls = inst.x.colPivHouseholderQr().solve(inst.y);
  EXPECT_LE((result.b_hat - ls).norm(), 1e-3);
  EXPECT_LE((result.b_hat - inst.b_star).norm(), 1e-3);
}

TEST(RobustLasso, ObjectiveBeatsRandomPerturbations) {
  const auto inst = make_instance(3, 5, 2, 1, 0.2, 3);
  SolverConfig cfg(0.05, 0.08, 20000, 1e-12);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  const double opt = robust_lasso_objective(inst.y, inst.x, result.b_hat,
                                            result.theta_hat, cfg);
  SubstreamRng rng(4, "perturb");
  double best_perturbed = kInf;
  for (int trial = 0; trial < 100000; ++trial) {
    const double scale = std::pow(10.0, -4.0 + 4.0 * rng.uniform01());
    Vector b = result.b_hat;
    Vector theta = result.theta_hat;
    for (Index j = 0; j < b.size(); ++j) b[j] += scale * rng.normal();
    for (Index i = 0; i < theta.size(); ++i) theta[i] += scale * rng.normal();
    best_perturbed = std::min(
        best_perturbed, robust_lasso_objective(inst.y, inst.x, b, theta, cfg));
  }
  EXPECT_GE(best_perturbed, opt - 1e-10);
}

TEST(RobustLasso, TraceIsMonotone) {
  const auto inst = make_instance(10, 50, 4, 3, 0.5, 5);
  SolverConfig cfg(0.02, 0.05);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  for (std::size_t k = 1; k < result.objective_trace.size(); ++k)
    EXPECT_LE(result.objective_trace[k],
              result.objective_trace[k - 1] + 1e-12);
  // The trace starts at the all-zero objective, half the squared norm of y.
  EXPECT_NEAR(result.objective_trace.front(), 0.5 * inst.y.squaredNorm(),
              1e-12 * (1.0 + inst.y.squaredNorm()));
  EXPECT_EQ(robust_lasso_objective(inst.y, inst.x, Vector::Zero(10),
                                   Vector::Zero(50), cfg),
            0.5 * inst.y.squaredNorm());
}

TEST(RobustLasso, KktCertificateAtConvergence) {
  // Near-interpolating instance: coordinate descent reaches an exact sweep
  // fixed point, where every subgradient condition holds to rounding error.
  const auto inst = make_instance(8, 64, 3, 0, 0.0, 6);
  SolverConfig cfg(1e-8, 0.9, 50000, 1e-8);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  ASSERT_TRUE(result.converged);
  const double kkt = robust_lasso_kkt_violation(inst.y, inst.x, result.b_hat,
                                                result.theta_hat, cfg);
  EXPECT_LE(kkt, 10.0 * cfg.tol);
}

TEST(RobustLasso, ModerateInstanceKktSanity) {
  // With an O(1) optimum the relative-decrease stop leaves a residual on
  // the sqrt(tol * objective) scale; this documents the achieved accuracy.
  const auto inst = make_instance(8, 64, 3, 2, 0.0, 6);
  SolverConfig cfg(0.02, 0.9, 50000, 1e-12);
  const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
  ASSERT_TRUE(result.converged);
  const double kkt = robust_lasso_kkt_violation(inst.y, inst.x, result.b_hat,
                                                result.theta_hat, cfg);
  EXPECT_LE(kkt, 1e-4);
}

TEST(RobustLasso, ZeroColumnFlagsNonUniqueness) {
  Matrix x = Matrix::Zero(5, 2);
  x.col(0).setConstant(0.5);
  Vector y(5);
  y << 1, 2, 0, -1, 1;
  const auto flagged = solve_robust_lasso(y, x, SolverConfig(0.0, kInf));
  EXPECT_TRUE(flagged.non_unique);
  const auto penalized = solve_robust_lasso(y, x, SolverConfig(0.01, kInf));
  EXPECT_FALSE(penalized.non_unique);
  EXPECT_EQ(penalized.b_hat[1], 0.0);
}

TEST(RobustLasso, ResidualDecreasesAlongLambdaThetaGrid) {
  const auto inst = make_instance(6, 48, 3, 4, 0.3, 7);
  const double grid[] = {kInf, 1.0, 0.3, 0.1, 0.03, 0.0};
  double previous = kInf;
  for (const double lt : grid) {
    SolverConfig cfg(0.02, lt, 20000, 1e-11);
    const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
    const double residual =
        0.5 * (inst.y - inst.x * result.b_hat + result.theta_hat).squaredNorm();
    EXPECT_LE(residual, previous + 1e-8);
    previous = residual;
  }
}

TEST(RobustLasso, WarmStartFromOptimumConvergesImmediately) {
  const auto inst = make_instance(6, 48, 3, 2, 0.3, 15);
  SolverConfig cfg(0.04, 0.07, 20000, 1e-12);
  const auto cold = solve_robust_lasso(inst.y, inst.x, cfg);
  const auto warm =
      solve_robust_lasso(inst.y, inst.x, cfg, cold.b_hat, cold.theta_hat);
  EXPECT_TRUE(warm.converged);
  EXPECT_LE(warm.iterations, 3);
  EXPECT_NEAR(warm.objective_trace.back(), cold.objective_trace.back(),
              1e-12 * (1.0 + cold.objective_trace.back()));
}

TEST(RobustLasso, PermutationEquivariance) {
  const auto inst = make_instance(5, 30, 2, 2, 0.2, 8);
  SolverConfig cfg(0.03, 0.06, 20000, 1e-12);
  const auto base = solve_robust_lasso(inst.y, inst.x, cfg);

  std::vector<Index> perm(30);
  for (Index i = 0; i < 30; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::reverse(perm.begin(), perm.end());
  Matrix xp(30, 5);
  Vector yp(30);
  for (Index i = 0; i < 30; ++i) {
    xp.row(i) = inst.x.row(perm[static_cast<std::size_t>(i)]);
    yp[i] = inst.y[perm[static_cast<std::size_t>(i)]];
  }
  const auto permuted = solve_robust_lasso(yp, xp, cfg);
  EXPECT_LE((permuted.b_hat - base.b_hat).norm(), 1e-9);
  for (Index i = 0; i < 30; ++i)
    EXPECT_NEAR(permuted.theta_hat[i],
                base.theta_hat[perm[static_cast<std::size_t>(i)]], 1e-9);
}

TEST(Objective, MatchesFiniteDifferenceGradient) {
  const auto inst = make_instance(4, 12, 2, 1, 0.3, 9);
  SubstreamRng rng(10, "fd");
  for (int rep = 0; rep < 5; ++rep) {
    Vector b = Vector::NullaryExpr(4, [&](Index) { return rng.normal(); });
    Vector theta = Vector::NullaryExpr(12, [&](Index) { return rng.normal(); });
    const Vector residual = inst.y - inst.x * b + theta;
    const Vector grad_b = -inst.x.transpose() * residual;
    const Vector grad_theta = residual;
    const double scale = std::max(1.0, std::max(b.norm(), theta.norm()));
    const double h = 1e-6 * scale;
    const auto smooth = [&](const Vector& bb, const Vector& tt) {
      return 0.5 * (inst.y - inst.x * bb + tt).squaredNorm();
    };
    for (Index j = 0; j < 4; ++j) {
      Vector hi = b, lo = b;
      hi[j] += h;
      lo[j] -= h;
      const double fd = (smooth(hi, theta) - smooth(lo, theta)) / (2.0 * h);
      EXPECT_NEAR(fd, grad_b[j], 1e-5 * (1.0 + std::abs(grad_b[j])));
    }
    for (Index i = 0; i < 12; ++i) {
      Vector hi = theta, lo = theta;
      hi[i] += h;
      lo[i] -= h;
      const double fd = (smooth(b, hi) - smooth(b, lo)) / (2.0 * h);
      EXPECT_NEAR(fd, grad_theta[i], 1e-5 * (1.0 + std::abs(grad_theta[i])));
    }
  }
}

TEST(Multitask, HugePenaltiesGiveZeros) {
  SubstreamRng rng(11, "mt");
  const Index p = 4, n = 16;
  const Matrix x =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); }) / 4.0;
  const Matrix m =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); });
  SolverConfig cfg(1e6, 1e6);
  const auto result = solve_multitask_robust(m, x, cfg);
  EXPECT_TRUE(result.B_hat.isZero(0.0));
  EXPECT_TRUE(result.Theta_hat.isZero(0.0));
}

TEST(Multitask, UnpenalizedThetaWithZeroDesign) {
  SubstreamRng rng(12, "mt");
  const Index p = 3, n = 8;
  const Matrix m =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); });
  SolverConfig cfg(1.0, 0.0, 100, 1e-12);
  const auto result = solve_multitask_robust(m, Matrix::Zero(n, p), cfg);
  EXPECT_LE((result.Theta_hat + m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(result.B_hat.isZero(0.0));
}

TEST(Multitask, PlantedRowRecovery) {
  // Two corrupted rows of magnitude 10; moderate row penalty recovers
  // exactly that support.
  const std::uint64_t seed = 20240814;
  const Index p = 6, n = 32;
  const auto sample = sample_design(p, n, CovarianceSpec::identity(p),
                                    ContaminationSpec::clean(n), seed);
  SubstreamRng rng(seed, "planted");
  Matrix b_star = Matrix::Zero(p, p);
  for (Index j = 0; j < p; ++j) b_star(j, j) = 1.0 + rng.uniform01();
  Matrix theta_star = Matrix::Zero(n, p);
  for (Index j = 0; j < p; ++j) {
    theta_star(4, j) = 10.0 * rng.normal();
    theta_star(17, j) = 10.0 * rng.normal();
  }
  Matrix noise =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return 0.01 * rng.normal(); });
  const Matrix m = sample.X_norm * b_star - theta_star + noise;

  SolverConfig cfg(0.01, 0.8, 20000, 1e-12);
  const auto result = solve_multitask_robust(m, sample.X_norm, cfg);
  for (Index i = 0; i < n; ++i) {
    const bool planted = (i == 4 || i == 17);
    EXPECT_EQ(result.Theta_hat.row(i).norm() > 0.0, planted) << "row " << i;
  }
}

TEST(Multitask, TraceIsMonotone) {
  SubstreamRng rng(13, "mt");
  const Index p = 5, n = 20;
  const Matrix x =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); }) /
      std::sqrt(static_cast<double>(n));
  const Matrix m =
      Matrix::NullaryExpr(n, p, [&](Index, Index) { return rng.normal(); });
  SolverConfig cfg(0.05, 0.1);
  const auto result = solve_multitask_robust(m, x, cfg);
  for (std::size_t k = 1; k < result.objective_trace.size(); ++k)
    EXPECT_LE(result.objective_trace[k],
              result.objective_trace[k - 1] + 1e-12);
}

TEST(Multitask, KktOnNearInterpolatingInstance) {
  const std::uint64_t seed = 99;
  const Index p = 4, n = 32;
  const auto sample = sample_design(p, n, CovarianceSpec::identity(p),
                                    ContaminationSpec::clean(n), seed);
  SubstreamRng rng(seed, "truth");
  Matrix b_star = Matrix::Zero(p, p);
  for (Index j = 0; j < p; ++j) b_star(j, j) = 1.0 + rng.uniform01();
  const Matrix m = sample.X_norm * b_star;
  SolverConfig cfg(1e-10, 1e-10, 100000, 1e-8);
  const auto result = solve_multitask_robust(m, sample.X_norm, cfg);
  const double kkt = multitask_kkt_violation(m, sample.X_norm, result.B_hat,
                                             result.Theta_hat, cfg);
  EXPECT_LE(kkt, 10.0 * cfg.tol);
}

TEST(ErrorInConeCheck, Examples) {
  const auto inst = make_instance(5, 20, 2, 1, 0.1, 14);
  ConeSpecVector spec({SupportSet({1, 2}, 5), SupportSet({1}, 20)}, 2.0, 1.0);
  SolverResult exact;
  exact.b_hat = inst.b_star;
  exact.theta_hat = inst.theta_star;
  EXPECT_EQ(error_in_cone_check(exact, inst.b_star, inst.theta_star, spec), 0.0);

  // Error supported entirely on (S, O) is a member for any c > 1.
  SolverResult shifted = exact;
  shifted.b_hat[0] += 0.7;
  shifted.theta_hat[0] -= 0.4;
  EXPECT_GT(error_in_cone_check(shifted, inst.b_star, inst.theta_star, spec), 0.0);
}

TEST(ErrorInConeCheck, MembershipFrequencyReport) {
  // Diagnostic Monte Carlo: solve replicated corrupted problems at the
  // simulation-default penalties and report how often the error lands in
  // the cone at gamma = 1.1 sqrt(log p / log n).  No threshold asserted.
  const Index p = 8, n = 64;
  int member_count = 0;
  const int runs = 100;
  for (int rep = 0; rep < runs; ++rep) {
    const auto inst = make_instance(p, n, 2, 2, 0.05, 3000 + rep);
    const SolverConfig cfg = default_simulation_config(p, n);
    const auto result = solve_robust_lasso(inst.y, inst.x, cfg);
    std::vector<Index> s_idx, o_idx;
    for (Index j = 0; j < p; ++j)
      if (inst.b_star[j] != 0.0) s_idx.push_back(j + 1);
    for (Index i = 0; i < n; ++i)
      if (inst.theta_star[i] != 0.0) o_idx.push_back(i + 1);
    const double gamma = 1.1 * std::sqrt(std::log(static_cast<double>(p)) /
                                         std::log(static_cast<double>(n)));
    ConeSpecVector spec({SupportSet(s_idx, p), SupportSet(o_idx, n)}, 3.0, gamma);
    if (error_in_cone_check(result, inst.b_star, inst.theta_star, spec) >= 0.0)
      ++member_count;
  }
  RecordProperty("membership_count", member_count);
  EXPECT_GE(member_count, 0);  // diagnostic only
}

}  // namespace
}  // namespace recert
