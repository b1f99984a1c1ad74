#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "elw/el_core.hpp"
#include "elw/estimators.hpp"
#include "elw/simlab.hpp"
#include "oracles.hpp"

using namespace elw;

namespace {

ConstraintMatrix cm(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return ConstraintMatrix(m);
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no elw::Error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(CenterConstraints, SubtractsTargets) {
  Matrix raw(3, 1);
  raw << 1, 2, 3;
  const ConstraintMatrix u = center_constraints(raw, Vector::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(u.values()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(u.values()(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(u.values()(2, 0), 1.0);
}

TEST(CenterConstraints, ZeroRow) {
  Matrix raw(1, 2);
  raw << 2, 0;
  Vector t(2);
  t << 2, 0;
  const ConstraintMatrix u = center_constraints(raw, t);
  EXPECT_EQ(u.values(), Matrix::Zero(1, 2));
}

TEST(CenterConstraints, PooledSim3RowsHaveZeroPooledMean) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::sim3;
  cfg.n = 300;
  std::mt19937_64 rng(11);
  const TrialData d = gen_sim3(cfg, rng).data;
  // Pooled means recomputed with a plain loop.
  Vector pooled = Vector::Zero(4);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < 4; ++j) pooled[j] += d.x()(static_cast<Index>(i), j);
  }
  pooled /= static_cast<double>(d.size());
  const ConstraintMatrix u = center_constraints(d.x(), pooled);
  EXPECT_LT(u.values().colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CenterConstraints, RejectsNonFinite) {
  Matrix raw(2, 1);
  raw << 1, std::nan("");
  EXPECT_EQ(code_of([&] { center_constraints(raw, Vector::Zero(1)); }), ErrorCode::NonFinite);
  Matrix ok(2, 1);
  ok << 1, 2;
  Vector t(1);
  t << std::numeric_limits<double>::infinity();
  EXPECT_EQ(code_of([&] { center_constraints(ok, t); }), ErrorCode::NonFinite);
}

TEST(DualObjective, Values) {
  const ConstraintMatrix u = cm({{-1}, {0}, {2}});
  EXPECT_DOUBLE_EQ(dual_objective(Vector::Zero(1), u), 0.0);
  EXPECT_NEAR(dual_objective(Vector::Constant(1, 0.25), u), std::log(0.75) + std::log(1.5), 1e-15);
  EXPECT_NEAR(dual_objective(Vector::Constant(1, 0.25), u), 0.117783, 1e-6);
  EXPECT_EQ(code_of([&] { dual_objective(Vector::Constant(1, 1.0), u); }),
            ErrorCode::InfeasibleLambda);
}

TEST(SolveWeights, ZeroConstraintGivesUniform) {
  const DualSolution s = solve_weights(cm({{0}, {0}, {0}}), {});
  EXPECT_EQ(s.lambda[0], 0.0);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(s.weights[i], 1.0 / 3.0);
  EXPECT_FALSE(s.augmented);
}

TEST(SolveWeights, SymmetricPair) {
  const DualSolution s = solve_weights(cm({{-1}, {1}}), {});
  EXPECT_NEAR(s.lambda[0], 0.0, 1e-15);
  EXPECT_NEAR(s.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(s.weights[1], 0.5, 1e-15);
}

TEST(SolveWeights, ExactScalarCase) {
  // Score -1/(1 - l) + 2/(1 + 2 l) = 0 gives l = 1/4.
  const DualSolution s = solve_weights(cm({{-1}, {0}, {2}}), {});
  EXPECT_NEAR(s.lambda[0], 0.25, 1e-10);
  EXPECT_NEAR(s.weights[0], 4.0 / 9.0, 1e-10);
  EXPECT_NEAR(s.weights[1], 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(s.weights[2], 2.0 / 9.0, 1e-10);
  EXPECT_NEAR(s.weights.sum(), 1.0, 1e-12);
  EXPECT_NEAR(s.constraint_residual[0], 0.0, 1e-12);
  EXPECT_TRUE(s.converged);
}

TEST(SolveWeights, RelaxationScheduleStillConverges) {
  // Far from the origin the damped schedule needs several accepted steps.
  const DualSolution s = solve_weights(cm({{-1}, {0.01}, {0.02}, {0.03}}), {});
  EXPECT_GT(s.iterations, 2);
  EXPECT_LT(std::abs(s.constraint_residual[0]), 1e-10);
}

TEST(SolveWeights, HullViolationWithoutAugmentation) {
  SolverOptions o;
  o.auto_augment = false;
  EXPECT_EQ(code_of([&] { solve_weights(cm({{1}, {2}, {3}}), o); }), ErrorCode::HullViolation);
  // Zero on the hull boundary is not attainable either.
  EXPECT_EQ(code_of([&] { solve_weights(cm({{0}, {1}, {2}}), o); }), ErrorCode::HullViolation);
}

TEST(SolveWeights, ConvergenceFailureWhenIterationsRunOut) {
  SolverOptions o;
  o.auto_augment = false;
  o.max_iterations = 1;
  EXPECT_EQ(code_of([&] { solve_weights(cm({{-1}, {0.01}, {0.02}, {0.03}}), o); }),
            ErrorCode::ConvergenceFailure);
}

TEST(SolveWeights, InvalidOptions) {
  SolverOptions o;
  o.epsilon = 0.0;
  EXPECT_EQ(code_of([&] { solve_weights(cm({{-1}, {1}}), o); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { solve_weights(cm({{1}}), {}); }), ErrorCode::InvalidArgument);
}

TEST(SolveWeights, CollinearColumnsStillSolve) {
  const DualSolution s = solve_weights(cm({{-1, -2}, {0, 0}, {2, 4}}), {});
  EXPECT_NEAR(s.weights[0], 4.0 / 9.0, 1e-8);
  EXPECT_LT(s.constraint_residual.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Augment, WorkedExample) {
  // S = [[1/3, -1/6], [-1/6, 1/3]], S^-1 = [[4, 2], [2, 4]], u'S^-1u = 6.
  const ConstraintMatrix a = augment(cm({{1, 0}, {0, 1}, {1, 1}}), 2.0);
  ASSERT_EQ(a.rows(), 5);
  const double off = 2.0 / std::sqrt(6.0) / std::sqrt(2.0);
  EXPECT_NEAR(a.values()(3, 0), -off, 1e-12);
  EXPECT_NEAR(a.values()(3, 1), -off, 1e-12);
  EXPECT_NEAR(a.values()(3, 0), -0.57735, 1e-5);
  EXPECT_NEAR(a.values()(4, 0), 4.0 / 3.0 + off, 1e-12);
  EXPECT_NEAR(a.values()(4, 1), 1.91068, 1e-5);
  const Vector mean = a.values().colwise().mean();
  EXPECT_NEAR(mean[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mean[1], 2.0 / 3.0, 1e-15);
}

TEST(Augment, ZeroMeanDirection) {
  EXPECT_EQ(code_of([&] { augment(cm({{1}, {-1}}), 2.0); }), ErrorCode::ZeroMeanDirection);
}

TEST(Augment, SingularCovariance) {
  EXPECT_EQ(code_of([&] { augment(cm({{1}, {1}, {1}}), 2.0); }), ErrorCode::SingularCovariance);
}

TEST(Augment, MeanPreservedOnRandomMatrices) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> rows(3, 12), cols(1, 4);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = rows(rng);
    const int r = std::min(cols(rng), n - 1);
    Matrix m(n, r);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < r; ++j) m(i, j) = z(rng) + 0.5;
    }
    const Vector before = m.colwise().mean();
    const Vector after = augment(ConstraintMatrix(m), 0.5 + rep % 5).values().colwise().mean();
    EXPECT_LE((after - before).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, before.cwiseAbs().maxCoeff()));
  }
}

TEST(SolveWeightsAugmented, ZeroRowsGiveUniform) {
  const DualSolution s = solve_weights_augmented(cm({{0}, {0}}), {});
  EXPECT_EQ(s.weights[0], 0.5);
  EXPECT_EQ(s.weights[1], 0.5);
}

TEST(SolveWeightsAugmented, InsideHullReportsItsResidual) {
  const ConstraintMatrix u = cm({{-1}, {0}, {2}});
  const DualSolution s = solve_weights_augmented(u, {});
  EXPECT_TRUE(s.augmented);
  EXPECT_NEAR(s.weights.sum(), 1.0, 1e-12);
  EXPECT_TRUE((s.weights.array() > 0.0).all());
  EXPECT_NEAR(s.constraint_residual[0], u.values().col(0).dot(s.weights), 1e-15);
}

TEST(SolveWeightsAugmented, OneSidedRowsRecover) {
  const ConstraintMatrix u = cm({{1}, {2}, {3}});
  SolverOptions plain;
  plain.auto_augment = false;
  EXPECT_EQ(code_of([&] { solve_weights(u, plain); }), ErrorCode::HullViolation);
  const DualSolution s = solve_weights(u, {});
  EXPECT_TRUE(s.converged);
  EXPECT_TRUE(s.augmented);
  EXPECT_NEAR(s.weights.sum(), 1.0, 1e-12);
  EXPECT_TRUE((s.weights.array() > 0.0).all());
}

TEST(SolveWeightsInvariants, NormalizationResidualAscent) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 3 + rep % 20;
    const int r = 1 + rep % 3;
    if (n <= r) continue;
    const Matrix u = oracle::random_hull_instance(rng, n, r);
    const DualSolution s = solve_weights(ConstraintMatrix(u), {});
    EXPECT_NEAR(s.weights.sum(), 1.0, 1e-10);
    EXPECT_GT(s.weights.minCoeff(), 0.0);
    if (!s.augmented) {
      EXPECT_LE(s.constraint_residual.cwiseAbs().maxCoeff(), 1e-8);
    }
    for (std::size_t k = 1; k < s.objective_trace.size(); ++k) {
      EXPECT_GE(s.objective_trace[k], s.objective_trace[k - 1]);
    }
  }
}

TEST(SolveWeightsInvariants, ColumnScalingInvariance) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix u = oracle::random_hull_instance(rng, 8, 2);
    const DualSolution a = solve_weights(ConstraintMatrix(u), {});
    u.col(1) *= -7.5;
    const DualSolution b = solve_weights(ConstraintMatrix(u), {});
    EXPECT_LE((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(b.lambda[1], a.lambda[1] / -7.5, 1e-8);
  }
}

TEST(SolveWeightsInvariants, MatchesPrimalOracle) {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 200; ++rep) {
    const int r = 1 + rep % 2;
    const int n = r + 2 + rep % (5 - r);
    const Matrix u = oracle::random_hull_instance(rng, n, r);
    const Vector expected = oracle::primal_el_weights(u);
    const DualSolution s = solve_weights(ConstraintMatrix(u), {});
    EXPECT_FALSE(s.augmented);
    EXPECT_LE((s.weights - expected).cwiseAbs().maxCoeff(), 1e-5) << "instance " << rep;
  }
}

TEST(SolveWeightsInvariants, Deterministic) {
  std::mt19937_64 rng(31);
  const Matrix u = oracle::random_hull_instance(rng, 30, 3);
  const DualSolution a = solve_weights(ConstraintMatrix(u), {});
  const DualSolution b = solve_weights(ConstraintMatrix(u), {});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}
