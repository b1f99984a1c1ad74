#pragma once

// Working nuisance models: least-squares outcome regressions, identity
// pass-throughs and logistic propensity (observation) models.

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "elw/error.hpp"
#include "elw/trial_data.hpp"

namespace elw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct LinearModel {
  /// Intercept first when `intercept` is set.
  Vector coefficients;
  std::vector<int> feature_indices;
  bool intercept = true;
};

struct IdentityModel {
  std::vector<int> feature_indices;
};

struct LogisticModel {
  Vector coefficients;
  std::vector<int> feature_indices;
  bool intercept = true;
  bool converged = false;
  bool separation_flag = false;
  int iterations = 0;
};

using OutcomeModel = std::variant<LinearModel, IdentityModel>;

inline Matrix select_columns(const Matrix& x, const std::vector<int>& idx) {
  Matrix out(x.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int c = idx[k];
    if (c < 0 || c >= x.cols()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "feature index " + std::to_string(c) + " outside " +
                      std::to_string(x.cols()) + " covariate columns");
    }
    out.col(static_cast<Index>(k)) = x.col(c);
  }
  return out;
}

namespace detail {

inline Matrix design(const Matrix& x, bool intercept) {
  if (!intercept) return x;
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

inline std::vector<int> iota_indices(Index count) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = static_cast<int>(k);
  return idx;
}

inline double expit(double eta) {
  eta = std::clamp(eta, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-eta));
}

}  // namespace detail

/// Least-squares fit of y on (1, X).
inline LinearModel fit_ols(const Matrix& x, const Vector& y, bool intercept = true) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::ShapeMismatch, "design rows do not match outcome length");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw Error(ErrorCode::NonFinite, "regression inputs contain NaN or Inf");
  }
  const Matrix d = detail::design(x, intercept);
  if (d.cols() == 0) {
    throw Error(ErrorCode::InvalidArgument, "regression has no columns");
  }
  if (d.rows() <= d.cols()) {
    throw Error(ErrorCode::RankDeficient,
                "need more than " + std::to_string(d.cols()) + " rows, got " +
                    std::to_string(d.rows()));
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(d);
  if (qr.rank() < d.cols()) {
    throw Error(ErrorCode::RankDeficient, "design matrix is rank deficient");
  }
  LinearModel model;
  model.coefficients = qr.solve(y);
  model.feature_indices = detail::iota_indices(x.cols());
  model.intercept = intercept;
  return model;
}

/// Model values at every row of the full covariate matrix `x`: one column for
/// a linear model, the selected covariates for an identity model.
inline Matrix predict_outcome(const OutcomeModel& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IdentityModel>) {
          return select_columns(x, m.feature_indices);
        } else {
          const Matrix d = detail::design(select_columns(x, m.feature_indices), m.intercept);
          if (d.cols() != m.coefficients.size()) {
            throw Error(ErrorCode::ShapeMismatch, "coefficient count mismatch");
          }
          return d * m.coefficients;
        }
      },
      model);
}

inline Index output_columns(const OutcomeModel& model) {
  if (const auto* id = std::get_if<IdentityModel>(&model)) {
    return static_cast<Index>(id->feature_indices.size());
  }
  return 1;
}

/// Binomial maximum likelihood for P(r = 1 | x) = expit(a0 + x'a), by
/// Newton-Raphson from the zero vector (capped at 100 iterations).
/// Separation is reported through `separation_flag`, not thrown.
inline LogisticModel fit_logistic(const Matrix& x, const Vector& r, bool intercept = true) {
  constexpr int kMaxIter = 100;
  constexpr double kCoefLimit = 30.0;
  constexpr double kScoreTol = 1e-6;

  if (x.rows() != r.size()) {
    throw Error(ErrorCode::ShapeMismatch, "design rows do not match response length");
  }
  if (!x.allFinite()) {
    throw Error(ErrorCode::NonFinite, "logistic design contains NaN or Inf");
  }
  Index ones = 0;
  for (Index i = 0; i < r.size(); ++i) {
    if (r[i] != 0.0 && r[i] != 1.0) {
      throw Error(ErrorCode::InvalidData, "logistic response must be 0 or 1");
    }
    if (r[i] == 1.0) ++ones;
  }
  if (ones == 0 || ones == r.size()) {
    throw Error(ErrorCode::OneClass, "logistic response has a single class");
  }
  const Matrix d = detail::design(x, intercept);
  if (d.cols() == 0) {
    throw Error(ErrorCode::InvalidArgument, "logistic model has no columns");
  }
  if (d.rows() < d.cols()) {
    throw Error(ErrorCode::RankDeficient, "fewer rows than logistic coefficients");
  }

  const Index q = d.cols();
  Vector beta = Vector::Zero(q);
  Vector eta = Vector::Zero(d.rows());

  auto loglik = [&](const Vector& e) {
    double total = 0.0;
    for (Index i = 0; i < e.size(); ++i) {
      // log(1 + exp(e)) without overflow
      const double softplus = e[i] > 0.0 ? e[i] + std::log1p(std::exp(-e[i]))
                                         : std::log1p(std::exp(e[i]));
      total += r[i] * e[i] - softplus;
    }
    return total;
  };
  auto score_at = [&](const Vector& e, Vector& prob) {
    prob = e.unaryExpr([](double v) { return detail::expit(v); });
    return Vector(d.transpose() * (r - prob));
  };

  LogisticModel model;
  model.feature_indices = detail::iota_indices(x.cols());
  model.intercept = intercept;

  Vector prob;
  Vector score = score_at(eta, prob);
  double ll = loglik(eta);
  int it = 0;
  bool diverging = false;
  for (; it < kMaxIter; ++it) {
    const Vector wts = prob.array() * (1.0 - prob.array());
    const Matrix scaled = d.array().colwise() * wts.array().sqrt();
    const Matrix info = scaled.transpose() * scaled;
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      if (it == 0) {
        throw Error(ErrorCode::RankDeficient, "logistic design is rank deficient");
      }
      diverging = true;
      break;
    }
    const Vector delta = llt.solve(score);
    double step = 1.0;
    Vector cand = beta + delta;
    Vector cand_eta = d * cand;
    double cand_ll = loglik(cand_eta);
    for (int h = 0; h < 30 && cand_ll < ll; ++h) {
      step *= 0.5;
      cand = beta + step * delta;
      cand_eta = d * cand;
      cand_ll = loglik(cand_eta);
    }
    beta = cand;
    eta = cand_eta;
    ll = cand_ll;
    score = score_at(eta, prob);
    if (beta.cwiseAbs().maxCoeff() > kCoefLimit) {
      diverging = true;
      ++it;
      break;
    }
    if ((step * delta).cwiseAbs().maxCoeff() < 1e-10 ||
        score.cwiseAbs().maxCoeff() < 1e-12) {
      ++it;
      break;
    }
  }
  model.coefficients = beta;
  model.iterations = it;
  const bool score_ok = score.cwiseAbs().maxCoeff() <= kScoreTol;
  model.converged = score_ok && !diverging;
  model.separation_flag = diverging || !score_ok;
  return model;
}

/// expit of the linear predictor at every row of the full covariate matrix.
inline Vector predict_propensity(const LogisticModel& model, const Matrix& x) {
  const Matrix d = detail::design(select_columns(x, model.feature_indices), model.intercept);
  if (d.cols() != model.coefficients.size()) {
    throw Error(ErrorCode::ShapeMismatch, "coefficient count mismatch");
  }
  const Vector eta = d * model.coefficients;
  return eta.unaryExpr([](double v) { return detail::expit(v); });
}

// ---------------------------------------------------------------------------
// Model sets

enum class Family { identity, linear, logistic };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::identity: return "identity";
    case Family::linear: return "linear";
    case Family::logistic: return "logistic";
  }
  return "?";
}

/// One working model: which arm it describes, its family and the covariate
/// columns it uses. Logistic specs are propensity models; the others are
/// outcome models.
struct ModelSpec {
  Arm arm = Arm::treated;
  Family family = Family::identity;
  std::vector<int> features;
  bool intercept = true;
};

/// Candidate models per arm: p1/p0 are propensity models, g/h outcome
/// models for the treated and control arms.
struct WorkingModelSet {
  std::vector<LogisticModel> p1;
  std::vector<LogisticModel> p0;
  std::vector<OutcomeModel> g;
  std::vector<OutcomeModel> h;

  const std::vector<LogisticModel>& propensity(Arm a) const { return a == Arm::treated ? p1 : p0; }
  const std::vector<OutcomeModel>& outcome(Arm a) const { return a == Arm::treated ? g : h; }
};

/// Fits every spec: outcome regressions on the arm's observed-outcome
/// subjects, propensity models on the arm's full sample with R as response.
inline WorkingModelSet assemble_model_set(const std::vector<ModelSpec>& specs,
                                          const TrialData& data) {
  if (specs.empty()) {
    throw Error(ErrorCode::EmptyConstraints,
                "model set needs at least one propensity or outcome model");
  }
  WorkingModelSet set;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const ModelSpec& spec = specs[k];
    try {
      for (int c : spec.features) {
        if (c < 0 || c >= data.x().cols()) {
          throw Error(ErrorCode::BadColumn,
                      "feature index " + std::to_string(c) + " does not exist");
        }
      }
      switch (spec.family) {
        case Family::identity: {
          IdentityModel m{spec.features};
          (spec.arm == Arm::treated ? set.g : set.h).push_back(std::move(m));
          break;
        }
        case Family::linear: {
          const auto& rows = data.observed(spec.arm);
          Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(spec.features.size()));
          Vector y(static_cast<Index>(rows.size()));
          for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < spec.features.size(); ++j) {
              x(static_cast<Index>(i), static_cast<Index>(j)) = data.x()(rows[i], spec.features[j]);
            }
            y[static_cast<Index>(i)] = data.y()[static_cast<std::size_t>(rows[i])];
          }
          LinearModel m = fit_ols(x, y, spec.intercept);
          m.feature_indices = spec.features;
          (spec.arm == Arm::treated ? set.g : set.h).push_back(std::move(m));
          break;
        }
        case Family::logistic: {
          const auto& rows = data.arm(spec.arm);
          Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(spec.features.size()));
          Vector r(static_cast<Index>(rows.size()));
          for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < spec.features.size(); ++j) {
              x(static_cast<Index>(i), static_cast<Index>(j)) = data.x()(rows[i], spec.features[j]);
            }
            r[static_cast<Index>(i)] = data.r()[static_cast<std::size_t>(rows[i])];
          }
          LogisticModel m = fit_logistic(x, r, spec.intercept);
          m.feature_indices = spec.features;
          (spec.arm == Arm::treated ? set.p1 : set.p0).push_back(std::move(m));
          break;
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "model " + std::to_string(k) + " (" + to_string(spec.arm) +
                                ", " + to_string(spec.family) + "): " + e.detail());
    }
  }
  return set;
}

}  // namespace elw
