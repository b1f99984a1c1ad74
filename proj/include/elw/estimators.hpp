#pragma once

// Average-treatment-effect estimators built on EL calibration weights, plus
// the unadjusted and change-score baselines.
//
// Each arm gets its own constraint block: propensity-model values first, then
// outcome-model values, evaluated on that arm's observed-outcome subjects and
// centered at a target. The pooled rule (ELW family) centers at the mean over
// both full arms; the own-arm rule (Qin-Zhang / Han-Wang comparators) centers
// at the mean over the subject's own full arm.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "elw/el_core.hpp"
#include "elw/error.hpp"
#include "elw/models.hpp"
#include "elw/trial_data.hpp"

namespace elw {

enum class Method { elw, elw_mis, elw_mr, qz, hw, unadjusted, change_score };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::elw: return "elw";
    case Method::elw_mis: return "elw_mis";
    case Method::elw_mr: return "elw_mr";
    case Method::qz: return "qz";
    case Method::hw: return "hw";
    case Method::unadjusted: return "unadjusted";
    case Method::change_score: return "change_score";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::elw, Method::elw_mis, Method::elw_mr, Method::qz, Method::hw,
                   Method::unadjusted, Method::change_score}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

inline bool is_weight_based(Method m) {
  return m != Method::unadjusted && m != Method::change_score;
}

enum class TargetRule { pooled, own_arm };

struct EstimateResult {
  double theta_hat = 0.0;
  Method method = Method::elw;
  /// Weights over the observed-outcome subjects of each arm, in data order.
  Vector weights_treated;
  Vector weights_control;
  /// Per-arm dual solutions; empty when the arm had no constraints.
  std::optional<DualSolution> treated;
  std::optional<DualSolution> control;
  std::vector<std::string> warnings;
};

/// Column means over the stacked treated and control rows.
inline Vector pooled_targets(const Matrix& treated_full, const Matrix& control_full) {
  if (treated_full.cols() != control_full.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "arms have different model-value columns");
  }
  const double total = static_cast<double>(treated_full.rows() + control_full.rows());
  if (total == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "no rows to average");
  }
  return (treated_full.colwise().sum() + control_full.colwise().sum()).transpose() / total;
}

/// Column means over one full arm.
inline Vector arm_targets(const Matrix& arm_full) {
  if (arm_full.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "no rows to average");
  }
  return arm_full.colwise().mean().transpose();
}

namespace detail {

inline Matrix gather_rows(const Matrix& values, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = values.row(rows[i]);
  }
  return out;
}

inline Vector gather(const std::vector<double>& v, const std::vector<int>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[static_cast<std::size_t>(rows[i])];
  return out;
}

// Model values at every subject, propensity columns before outcome columns.
inline Matrix arm_model_values(const TrialData& data, const WorkingModelSet& models, Arm arm) {
  const auto& props = models.propensity(arm);
  const auto& outs = models.outcome(arm);
  Index cols = static_cast<Index>(props.size());
  for (const auto& m : outs) cols += output_columns(m);
  Matrix values(static_cast<Index>(data.size()), cols);
  Index c = 0;
  for (const auto& p : props) values.col(c++) = predict_propensity(p, data.x());
  for (const auto& o : outs) {
    const Matrix v = predict_outcome(o, data.x());
    values.middleCols(c, v.cols()) = v;
    c += v.cols();
  }
  return values;
}

struct ArmWeights {
  Vector weights;
  std::optional<DualSolution> solution;
};

inline ArmWeights calibrate_arm(const TrialData& data, const WorkingModelSet& models, Arm arm,
                                TargetRule rule, const SolverOptions& opts) {
  const auto& obs = data.observed(arm);
  if (obs.size() < 2) {
    throw Error(ErrorCode::InvalidData,
                std::string(to_string(arm)) + " arm has fewer than two observed outcomes");
  }
  const Matrix values = arm_model_values(data, models, arm);
  ArmWeights out;
  if (values.cols() == 0) {
    out.weights = Vector::Constant(static_cast<Index>(obs.size()), 1.0 / static_cast<double>(obs.size()));
    return out;
  }
  Vector targets;
  if (rule == TargetRule::pooled) {
    targets = pooled_targets(gather_rows(values, data.arm(Arm::treated)),
                             gather_rows(values, data.arm(Arm::control)));
  } else {
    targets = arm_targets(gather_rows(values, data.arm(arm)));
  }
  const ConstraintMatrix u = center_constraints(gather_rows(values, obs), targets);
  try {
    out.solution = solve_weights(u, opts);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(to_string(arm)) + " arm: " + e.detail());
  }
  out.weights = out.solution->weights;
  return out;
}

inline void collect_separation_warnings(const WorkingModelSet& models, EstimateResult& res) {
  for (Arm arm : {Arm::treated, Arm::control}) {
    const auto& props = models.propensity(arm);
    for (std::size_t k = 0; k < props.size(); ++k) {
      if (props[k].separation_flag) {
        res.warnings.push_back(std::string(to_string(arm)) + " propensity model " +
                               std::to_string(k) + " shows separation");
      }
    }
  }
}

}  // namespace detail

/// Calibrated difference of weighted means for any model set and target rule.
inline EstimateResult estimate_calibrated(const TrialData& data, const WorkingModelSet& models,
                                          const SolverOptions& opts, TargetRule rule,
                                          Method tag) {
  EstimateResult res;
  res.method = tag;
  detail::ArmWeights t = detail::calibrate_arm(data, models, Arm::treated, rule, opts);
  detail::ArmWeights c = detail::calibrate_arm(data, models, Arm::control, rule, opts);
  const Vector y1 = detail::gather(data.y(), data.observed(Arm::treated));
  const Vector y0 = detail::gather(data.y(), data.observed(Arm::control));
  res.theta_hat = t.weights.dot(y1) - c.weights.dot(y0);
  res.weights_treated = std::move(t.weights);
  res.weights_control = std::move(c.weights);
  res.treated = std::move(t.solution);
  res.control = std::move(c.solution);
  detail::collect_separation_warnings(models, res);
  return res;
}

/// ELW estimator for complete outcomes with one outcome model per arm.
inline EstimateResult estimate_elw(const TrialData& data, const OutcomeModel& g,
                                   const OutcomeModel& h, const SolverOptions& opts) {
  if (data.has_missing()) {
    throw Error(ErrorCode::InvalidData, "elw requires complete outcomes; use elw_mis");
  }
  WorkingModelSet set;
  set.g.push_back(g);
  set.h.push_back(h);
  return estimate_calibrated(data, set, opts, TargetRule::pooled, Method::elw);
}

/// ELW estimator for complete outcomes with any number of outcome models
/// (propensity models are not allowed).
inline EstimateResult estimate_elw(const TrialData& data, const WorkingModelSet& models,
                                   const SolverOptions& opts) {
  if (data.has_missing()) {
    throw Error(ErrorCode::InvalidData, "elw requires complete outcomes; use elw_mis");
  }
  if (!models.p1.empty() || !models.p0.empty()) {
    throw Error(ErrorCode::InvalidArgument, "elw takes no propensity models");
  }
  return estimate_calibrated(data, models, opts, TargetRule::pooled, Method::elw);
}

namespace detail {
inline void require_constraints(const WorkingModelSet& models) {
  if (models.p1.empty() && models.g.empty()) {
    throw Error(ErrorCode::EmptyConstraints, "treated arm has no propensity or outcome model");
  }
  if (models.p0.empty() && models.h.empty()) {
    throw Error(ErrorCode::EmptyConstraints, "control arm has no propensity or outcome model");
  }
}
inline bool single_models(const WorkingModelSet& m) {
  return m.p1.size() <= 1 && m.p0.size() <= 1 && m.g.size() <= 1 && m.h.size() <= 1;
}
}  // namespace detail

/// ELW under missing outcomes: single models give the elw_mis estimator,
/// several candidates per condition give elw_mr.
inline EstimateResult estimate_elw_missing(const TrialData& data, const WorkingModelSet& models,
                                           const SolverOptions& opts) {
  detail::require_constraints(models);
  return estimate_calibrated(data, models, opts, TargetRule::pooled,
                             detail::single_models(models) ? Method::elw_mis : Method::elw_mr);
}

/// Qin-Zhang comparator: own-arm targets.
inline EstimateResult estimate_qz(const TrialData& data, const WorkingModelSet& models,
                                  const SolverOptions& opts) {
  detail::require_constraints(models);
  return estimate_calibrated(data, models, opts, TargetRule::own_arm, Method::qz);
}

/// Han-Wang comparator: own-arm targets with multiple candidate models.
inline EstimateResult estimate_hw(const TrialData& data, const WorkingModelSet& models,
                                  const SolverOptions& opts) {
  detail::require_constraints(models);
  return estimate_calibrated(data, models, opts, TargetRule::own_arm, Method::hw);
}

/// Difference of observed-outcome arm means.
inline EstimateResult estimate_unadjusted(const TrialData& data) {
  const auto& t = data.observed(Arm::treated);
  const auto& c = data.observed(Arm::control);
  if (t.empty() || c.empty()) {
    throw Error(ErrorCode::InvalidData, "an arm has no observed outcomes");
  }
  EstimateResult res;
  res.method = Method::unadjusted;
  res.weights_treated = Vector::Constant(static_cast<Index>(t.size()), 1.0 / static_cast<double>(t.size()));
  res.weights_control = Vector::Constant(static_cast<Index>(c.size()), 1.0 / static_cast<double>(c.size()));
  res.theta_hat = detail::gather(data.y(), t).mean() - detail::gather(data.y(), c).mean();
  return res;
}

/// Unadjusted difference minus the arm difference in a baseline covariate
/// measured in outcome units. Both means run over observed-outcome subjects.
inline EstimateResult estimate_change_score(const TrialData& data, int baseline_column) {
  if (baseline_column < 0 || baseline_column >= data.x().cols()) {
    throw Error(ErrorCode::BadColumn,
                "baseline column " + std::to_string(baseline_column) + " does not exist");
  }
  EstimateResult res = estimate_unadjusted(data);
  res.method = Method::change_score;
  auto mean_x = [&](Arm arm) {
    double s = 0.0;
    for (int i : data.observed(arm)) s += data.x()(i, baseline_column);
    return s / static_cast<double>(data.observed(arm).size());
  };
  res.theta_hat -= mean_x(Arm::treated) - mean_x(Arm::control);
  return res;
}

// ---------------------------------------------------------------------------
// Declarative estimator specs, refit from scratch on every dataset (the
// bootstrap and the Monte Carlo harness rely on this).

struct EstimatorSpec {
  std::string name;
  Method method = Method::unadjusted;
  std::vector<ModelSpec> models;
  int baseline_column = -1;
};

inline EstimateResult run_estimator(const TrialData& data, const EstimatorSpec& spec,
                                    const SolverOptions& opts) {
  switch (spec.method) {
    case Method::unadjusted:
      return estimate_unadjusted(data);
    case Method::change_score:
      return estimate_change_score(data, spec.baseline_column);
    case Method::elw: {
      WorkingModelSet set;
      if (!spec.models.empty()) set = assemble_model_set(spec.models, data);
      return estimate_elw(data, set, opts);
    }
    case Method::elw_mis:
    case Method::elw_mr: {
      EstimateResult res = estimate_elw_missing(data, assemble_model_set(spec.models, data), opts);
      res.method = spec.method;
      return res;
    }
    case Method::qz:
      return estimate_qz(data, assemble_model_set(spec.models, data), opts);
    case Method::hw:
      return estimate_hw(data, assemble_model_set(spec.models, data), opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace elw
