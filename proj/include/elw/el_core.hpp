#pragma once

// Empirical-likelihood weights through the Lagrange dual.
//
// Maximizing prod p_i subject to sum p_i = 1 and sum p_i u_i = 0 gives
// p_i = 1 / (n (1 + lambda' u_i)), where lambda maximizes the concave dual
// l(lambda) = sum log(1 + lambda' u_i). The dual is solved by a damped
// Newton-Raphson iteration with step halving; when zero is outside the convex
// hull of the rows, two artificial rows are appended that keep the row mean
// and put zero back inside the hull.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "elw/error.hpp"

namespace elw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Centered estimating-function rows, one row per retained subject.
class ConstraintMatrix {
 public:
  explicit ConstraintMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.cols() < 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "constraint matrix needs at least one column");
    }
    if (values_.rows() < 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "constraint matrix needs at least one row");
    }
    if (!values_.allFinite()) {
      throw Error(ErrorCode::NonFinite, "constraint matrix has NaN or Inf");
    }
  }

  const Matrix& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

struct SolverOptions {
  double epsilon = 1e-8;
  int max_iterations = 500;
  double augmentation_scale = 2.0;
  double hessian_ridge = 0.0;
  bool auto_augment = true;

  void validate() const {
    if (!(epsilon > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    }
    if (max_iterations < 1) {
      throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
    }
    if (!(augmentation_scale > 0.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  "augmentation_scale must be positive");
    }
    if (!(hessian_ridge >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  "hessian_ridge must be non-negative");
    }
  }
};

struct DualSolution {
  Vector lambda;
  /// Probability weights over the original (non-artificial) rows.
  Vector weights;
  int iterations = 0;
  bool converged = false;
  bool augmented = false;
  /// Euclidean norm of the dual gradient at the reported lambda.
  double gradient_norm = 0.0;
  /// Dual objective at lambda = 0 followed by its value after every
  /// accepted step.
  std::vector<double> objective_trace;
  /// sum_i weights_i * u_i over the original rows. Zero up to roundoff for a
  /// plain solve; after augmentation the artificial rows absorb part of it.
  Vector constraint_residual;
};

/// Rows of `raw_rows` minus `targets`.
inline ConstraintMatrix center_constraints(const Matrix& raw_rows,
                                           const Vector& targets) {
  if (raw_rows.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "raw rows need at least one column");
  }
  if (targets.size() != raw_rows.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                "target length " + std::to_string(targets.size()) +
                    " does not match " + std::to_string(raw_rows.cols()) +
                    " columns");
  }
  if (!raw_rows.allFinite() || !targets.allFinite()) {
    throw Error(ErrorCode::NonFinite, "raw rows or targets contain NaN or Inf");
  }
  return ConstraintMatrix(raw_rows.rowwise() - targets.transpose());
}

/// sum_i log(1 + lambda' u_i).
inline double dual_objective(const Vector& lambda, const ConstraintMatrix& u) {
  if (lambda.size() != u.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "lambda length does not match columns");
  }
  const Vector denom = (u.values() * lambda).array() + 1.0;
  double total = 0.0;
  for (Index i = 0; i < denom.size(); ++i) {
    if (!(denom[i] > 0.0)) {
      throw Error(ErrorCode::InfeasibleLambda,
                  "1 + lambda'u is non-positive at row " + std::to_string(i));
    }
    total += std::log(denom[i]);
  }
  return total;
}

namespace detail {

struct NewtonResult {
  Vector lambda;
  Vector denom;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> trace;
};

// Solves (-H) step = grad. Escalates a ridge proportional to the mean
// diagonal before giving up.
inline Vector newton_direction(const Matrix& neg_hessian, const Vector& grad,
                               double base_ridge) {
  const Index r = grad.size();
  if (grad.isZero(0.0)) return Vector::Zero(r);

  auto attempt = [&](double ridge, Vector& out) {
    Matrix a = neg_hessian;
    if (ridge > 0.0) a.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) return false;
    if (!(llt.rcond() > 1e-14)) return false;
    out = llt.solve(grad);
    return out.allFinite();
  };

  Vector step;
  if (attempt(base_ridge, step)) return step;
  const double mean_diag = neg_hessian.diagonal().mean();
  if (mean_diag > 0.0) {
    for (double scale = 1e-10; scale <= 1.0001e-6; scale *= 10.0) {
      if (attempt(base_ridge + scale * mean_diag, step)) return step;
    }
  }
  throw Error(ErrorCode::SingularHessian,
              "Newton system is singular even after ridge regularization");
}

// Certificate that zero is outside the open convex hull of the rows: some
// direction has a non-negative inner product with every row. Checked for the
// coordinate directions and for the final iterate.
inline bool hull_certificate(const Matrix& u, const Vector& lambda) {
  for (Index k = 0; k < u.cols(); ++k) {
    const double lo = u.col(k).minCoeff();
    const double hi = u.col(k).maxCoeff();
    if ((lo >= 0.0 && hi > 0.0) || (hi <= 0.0 && lo < 0.0)) return true;
  }
  if (lambda.allFinite() && lambda.squaredNorm() > 0.0) {
    const Vector proj = u * lambda;
    if (proj.minCoeff() >= 0.0 && proj.maxCoeff() > 0.0) return true;
  }
  return false;
}

// Damped Newton-Raphson ascent on the dual, lambda starting at zero:
//   gamma_0 = 1; the step is gamma_t times the Newton step, halved until
//   every 1 + lambda'u stays positive and the dual does not decrease;
//   gamma_{t+1} = (t + 1)^{-1/2}. Stops once the Newton step norm drops
//   below epsilon, then takes at most a few undamped Newton steps so the
//   calibration equations hold to roundoff.
inline NewtonResult modified_newton(const Matrix& u, const SolverOptions& opts) {
  const Index n = u.rows();
  const Index r = u.cols();
  constexpr double kMinGamma = 1e-12;
  constexpr int kPolishSteps = 3;

  NewtonResult res;
  res.lambda = Vector::Zero(r);
  res.denom = Vector::Ones(n);
  res.trace.push_back(0.0);

  Vector inv(n);
  Vector grad(r);
  Matrix neg_h(r, r);
  Vector step(r);
  Vector u_step(n);

  auto evaluate = [&]() {
    inv = res.denom.cwiseInverse();
    grad.noalias() = u.transpose() * inv;
    const Matrix scaled = u.array().colwise() * inv.array();
    neg_h.noalias() = scaled.transpose() * scaled;
    step = newton_direction(neg_h, grad, opts.hessian_ridge);
  };

  // Tries lambda + gamma * step. Returns the objective increase, or a
  // negative value when the candidate is rejected.
  Vector cand_denom(n);
  auto try_step = [&](double gamma) -> double {
    cand_denom = res.denom + gamma * u_step;
    double increase = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (!(cand_denom[i] > 0.0)) return -1.0;
      increase += std::log1p(gamma * u_step[i] / res.denom[i]);
    }
    return increase >= 0.0 ? increase : -1.0;
  };

  double gamma = 1.0;
  int t = 0;
  evaluate();
  while (!(step.norm() < opts.epsilon)) {
    if (t >= opts.max_iterations) {
      res.iterations = t;
      if (hull_certificate(u, res.lambda)) {
        throw Error(ErrorCode::HullViolation,
                    "zero is not inside the convex hull of the constraint rows");
      }
      throw Error(ErrorCode::ConvergenceFailure,
                  "no convergence after " + std::to_string(t) + " iterations");
    }
    u_step.noalias() = u * step;
    double increase = -1.0;
    while (true) {
      if (gamma < kMinGamma) {
        throw Error(ErrorCode::HullViolation,
                    "step halving found no admissible ascent step");
      }
      increase = try_step(gamma);
      if (increase >= 0.0) break;
      gamma *= 0.5;
    }
    res.lambda += gamma * step;
    // Recompute from lambda so rounding in the denominators does not drift.
    res.denom = (u * res.lambda).array() + 1.0;
    res.trace.push_back(res.trace.back() + increase);
    ++t;
    gamma = 1.0 / std::sqrt(static_cast<double>(t + 1));
    if (!res.lambda.allFinite() || !(res.denom.array() > 0.0).all()) {
      throw Error(ErrorCode::ConvergenceFailure, "iterate left the dual domain");
    }
    evaluate();
  }

  for (int k = 0; k < kPolishSteps; ++k) {
    if (step.isZero(0.0)) break;
    u_step.noalias() = u * step;
    const double increase = try_step(1.0);
    if (increase < 0.0) break;
    const Vector candidate = res.lambda + step;
    const Vector denom = (u * candidate).array() + 1.0;
    if (!(denom.array() > 0.0).all()) break;
    res.lambda = candidate;
    res.denom = denom;
    res.trace.push_back(res.trace.back() + increase);
    ++t;
    evaluate();
  }

  res.iterations = t;
  res.gradient_norm = grad.norm();
  return res;
}

inline void require_rows(const ConstraintMatrix& u, Index min_rows) {
  if (u.rows() < min_rows) {
    throw Error(ErrorCode::InvalidArgument,
                "need at least " + std::to_string(min_rows) +
                    " constraint rows, got " + std::to_string(u.rows()));
  }
}

inline Vector normalized_weights(const Vector& denom, Index count, double n_total) {
  Vector w = (denom.head(count).array() * n_total).inverse();
  w /= w.sum();
  return w;
}

inline DualSolution solve_plain(const ConstraintMatrix& u, const SolverOptions& opts) {
  NewtonResult nr = modified_newton(u.values(), opts);
  DualSolution sol;
  sol.weights = normalized_weights(nr.denom, u.rows(), static_cast<double>(u.rows()));
  sol.constraint_residual = u.values().transpose() * sol.weights;
  sol.lambda = std::move(nr.lambda);
  sol.iterations = nr.iterations;
  sol.converged = true;
  sol.augmented = false;
  sol.gradient_norm = nr.gradient_norm;
  sol.objective_trace = std::move(nr.trace);
  return sol;
}

}  // namespace detail

/// Appends the two balancing rows -s c u_dir and 2 u_bar + s c u_dir, where
/// u_bar is the row mean, u_dir = u_bar / |u_bar| and
/// c = (u_dir' S^{-1} u_dir)^{-1/2} with S the sample covariance of the rows.
/// The row mean is unchanged.
inline ConstraintMatrix augment(const ConstraintMatrix& u, double s) {
  detail::require_rows(u, 2);
  if (!(s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "augmentation scale must be positive");
  }
  const Matrix& x = u.values();
  const Index n = x.rows();
  const Vector mean = x.colwise().mean().transpose();
  const double mean_norm = mean.norm();
  if (mean_norm == 0.0) {
    throw Error(ErrorCode::ZeroMeanDirection,
                "row mean is the zero vector; augmentation direction undefined");
  }
  const Vector dir = mean / mean_norm;

  const Matrix centered = x.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::LDLT<Matrix> ldlt(cov);
  auto usable = [](const Eigen::LDLT<Matrix>& f) {
    return f.info() == Eigen::Success && f.isPositive() && f.rcond() > 1e-14;
  };
  if (!usable(ldlt)) {
    const double ridge = 1e-8 * cov.diagonal().mean();
    if (ridge > 0.0) cov.diagonal().array() += ridge;
    ldlt.compute(cov);
    if (!(ridge > 0.0) || !usable(ldlt)) {
      throw Error(ErrorCode::SingularCovariance,
                  "sample covariance of the constraint rows is singular");
    }
  }
  const double mahal = dir.dot(ldlt.solve(dir));
  if (!(mahal > 0.0) || !std::isfinite(mahal)) {
    throw Error(ErrorCode::SingularCovariance,
                "sample covariance of the constraint rows is singular");
  }
  const Vector offset = (s / std::sqrt(mahal)) * dir;

  Matrix out(n + 2, x.cols());
  out.topRows(n) = x;
  out.row(n) = -offset.transpose();
  out.row(n + 1) = (2.0 * mean + offset).transpose();
  return ConstraintMatrix(std::move(out));
}

/// Newton iteration on the augmented rows. The reported weights are the
/// real-row weights renormalized to sum to one.
inline DualSolution solve_weights_augmented(const ConstraintMatrix& u,
                                            const SolverOptions& opts) {
  opts.validate();
  detail::require_rows(u, 2);
  // A zero row mean needs no repair and leaves the direction undefined.
  if (u.values().colwise().sum().isZero(0.0)) {
    return detail::solve_plain(u, opts);
  }
  const ConstraintMatrix aug = augment(u, opts.augmentation_scale);
  detail::NewtonResult nr = detail::modified_newton(aug.values(), opts);

  DualSolution sol;
  sol.weights = detail::normalized_weights(nr.denom, u.rows(),
                                           static_cast<double>(aug.rows()));
  sol.constraint_residual = u.values().transpose() * sol.weights;
  sol.lambda = std::move(nr.lambda);
  sol.iterations = nr.iterations;
  sol.converged = true;
  sol.augmented = true;
  sol.gradient_norm = nr.gradient_norm;
  sol.objective_trace = std::move(nr.trace);
  return sol;
}

/// Solves for the EL weights. The plain iteration runs first; when it hits a
/// hull violation or does not converge and `auto_augment` is set, the
/// augmented iteration takes over and the result is flagged `augmented`.
inline DualSolution solve_weights(const ConstraintMatrix& u, const SolverOptions& opts) {
  opts.validate();
  detail::require_rows(u, 2);
  try {
    return detail::solve_plain(u, opts);
  } catch (const Error& e) {
    const bool repairable = e.code() == ErrorCode::HullViolation ||
                            e.code() == ErrorCode::ConvergenceFailure;
    if (!opts.auto_augment || !repairable) throw;
  }
  return solve_weights_augmented(u, opts);
}

}  // namespace elw
