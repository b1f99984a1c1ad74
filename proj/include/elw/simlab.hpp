#pragma once

// Simulation designs, missingness injection and the Monte Carlo harness.
//
// Normal(a, b) in the design descriptions means mean a and VARIANCE b.
// Every generator draws its subjects from the stream it is handed, so a
// replicate is a pure function of (seed, replicate index).

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "elw/el_core.hpp"
#include "elw/error.hpp"
#include "elw/estimators.hpp"
#include "elw/inference.hpp"
#include "elw/models.hpp"
#include "elw/parallel.hpp"
#include "elw/trial_data.hpp"

namespace elw {

enum class Scenario { sim2_linear, sim2_nonlinear, sim3, sim4, custom };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::sim2_linear: return "sim2-linear";
    case Scenario::sim2_nonlinear: return "sim2-nonlinear";
    case Scenario::sim3: return "sim3";
    case Scenario::sim4: return "sim4";
    case Scenario::custom: return "custom";
  }
  return "?";
}

/// Accepts both "sim2-linear" and "sim2_linear" spellings.
inline std::optional<Scenario> parse_scenario(std::string_view s) {
  std::string t(s);
  for (char& c : t) {
    if (c == '_') c = '-';
  }
  for (Scenario v : {Scenario::sim2_linear, Scenario::sim2_nonlinear, Scenario::sim3,
                     Scenario::sim4, Scenario::custom}) {
    if (t == to_string(v)) return v;
  }
  return std::nullopt;
}

/// User-supplied design: a Gaussian covariate block followed by Bernoulli
/// covariates, linear arm outcomes and optional logistic missingness.
struct CustomDesign {
  Vector gaussian_mean;
  Matrix gaussian_cov;
  std::vector<double> bernoulli_p;
  /// Intercept followed by one coefficient per covariate.
  Vector beta1, beta0;
  double sd1 = 1.0, sd0 = 1.0;
  /// Logit of P(outcome missing), intercept first; empty means complete data.
  Vector alpha1, alpha0;

  Index covariates() const {
    return gaussian_mean.size() + static_cast<Index>(bernoulli_p.size());
  }
};

namespace sim3_defaults {
inline Vector alpha1() {
  return (Vector(5) << -5.147, -0.3, 0.8, 0.5, 0.3).finished();
}
inline Vector alpha0() {
  return (Vector(5) << -3.247, 0.2, -0.3, 0.4, 0.5).finished();
}
}  // namespace sim3_defaults

struct ScenarioConfig {
  Scenario scenario = Scenario::sim2_linear;
  int n = 400;
  double delta = 0.5;
  int reps = 1000;
  /// 0 skips the bootstrap; standard error columns are then reported as NA.
  int bootstrap_B = 500;
  std::uint64_t seed = 1;
  bool stratified = false;
  int threads = 1;
  /// Logit of P(outcome missing) in Simulation 3, intercept then x1..x4.
  Vector sim3_alpha1 = sim3_defaults::alpha1();
  Vector sim3_alpha0 = sim3_defaults::alpha0();
  CustomDesign custom;

  void validate() const {
    if (n < 20) throw Error(ErrorCode::InvalidArgument, "n must be at least 20");
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "delta must lie strictly between 0 and 1");
    }
    if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
    if (bootstrap_B != 0 && bootstrap_B < 2) {
      throw Error(ErrorCode::InvalidArgument, "bootstrap replicates must be 0 or at least 2");
    }
    if (sim3_alpha1.size() != 5 || sim3_alpha0.size() != 5) {
      throw Error(ErrorCode::InvalidArgument, "sim3 missingness vectors need 5 entries");
    }
  }
};

struct SimulatedData {
  TrialData data;
  double theta = 10.0;
};

namespace detail {

inline std::vector<std::string> numbered(const char* stem, Index count) {
  std::vector<std::string> names;
  for (Index k = 0; k < count; ++k) names.push_back(stem + std::to_string(k + 1));
  return names;
}

inline std::vector<int> draw_arms(int n, double delta, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(delta);
  std::vector<int> w(static_cast<std::size_t>(n));
  for (int& v : w) v = coin(rng) ? 1 : 0;
  return w;
}

inline double dot1(const Vector& beta, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return beta[0] + x.dot(beta.tail(beta.size() - 1));
}

/// Gaussian factor L with L L' = cov; BadMoments unless cov is PSD.
inline Matrix psd_factor(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::BadMoments, "covariance must be square");
  if (cov.size() == 0) return cov;
  if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::BadMoments, "covariance must be finite and symmetric");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw Error(ErrorCode::BadMoments, "covariance is not positive semidefinite");
  }
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// Simulation 2: trivariate normal covariates, linear or sin(X1) outcomes.
inline SimulatedData gen_sim2(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  if (cfg.scenario != Scenario::sim2_linear && cfg.scenario != Scenario::sim2_nonlinear) {
    throw Error(ErrorCode::InvalidArgument, "gen_sim2 needs a sim2 scenario");
  }
  const bool linear = cfg.scenario == Scenario::sim2_linear;
  const Vector mu = (Vector(3) << 1, 2, 3).finished();
  const Matrix sigma = (Matrix(3, 3) << 1, 1, 1, 1, 2, 2, 1, 2, 3).finished();
  const Matrix chol = Eigen::LLT<Matrix>(sigma).matrixL();
  // Nonlinear coefficients and error SDs are paired so that
  // E(Y1) - E(Y0) = +10, as in Simulation 3.
  const Vector beta1 = linear ? (Vector(4) << 3, 10, 13, 10).finished()
                              : (Vector(4) << 9, 19.593, 13, 10).finished();
  const Vector beta0 = linear ? (Vector(4) << 5, 7, 10, 9).finished()
                              : (Vector(4) << 12, 11.756, 10, 9).finished();
  const double sd1 = linear ? 4.0 : 6.0;
  const double sd0 = linear ? 6.0 : 4.0;

  std::normal_distribution<double> z;
  std::vector<int> w = detail::draw_arms(cfg.n, cfg.delta, rng);
  Matrix x(cfg.n, 3);
  std::vector<double> y(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    Vector e(3);
    for (Index k = 0; k < 3; ++k) e[k] = z(rng);
    x.row(i) = (mu + chol * e).transpose();
    Eigen::RowVector3d f = x.row(i);
    if (!linear) f[0] = std::sin(f[0]);
    const bool treated = w[static_cast<std::size_t>(i)] == 1;
    y[static_cast<std::size_t>(i)] =
        detail::dot1(treated ? beta1 : beta0, f) + (treated ? sd1 : sd0) * z(rng);
  }
  std::vector<int> r(static_cast<std::size_t>(cfg.n), 1);
  return {TrialData(std::move(w), std::move(r), std::move(y), std::move(x),
                    detail::numbered("x", 3)),
          10.0};
}

/// Simulation 3: mixed covariates, linear outcomes, logistic missingness.
inline SimulatedData gen_sim3(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  // Coefficients and error SDs are paired so that E(Y1) - E(Y0) = +10.
  const Vector beta1 = (Vector(5) << 10, 8, 11, 10, 4).finished();
  const Vector beta0 = (Vector(5) << 5, 7, 10, 9, 6).finished();
  constexpr double sd1 = 4.0, sd0 = 6.0;
  const double var_x1 = 3.0, var_x2 = 3.0, var_x3 = 1.0;

  std::normal_distribution<double> z;
  std::bernoulli_distribution half(0.5);
  std::uniform_real_distribution<double> unif;
  std::vector<int> w = detail::draw_arms(cfg.n, cfg.delta, rng);
  Matrix x(cfg.n, 4);
  std::vector<int> r(static_cast<std::size_t>(cfg.n));
  std::vector<double> y(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    x(i, 0) = 1.0 + std::sqrt(var_x1) * z(rng);
    x(i, 1) = 2.0 + std::sqrt(var_x2) * z(rng);
    x(i, 2) = 3.0 + std::sqrt(var_x3) * z(rng);
    x(i, 3) = half(rng) ? 1.0 : 0.0;
    const bool treated = w[static_cast<std::size_t>(i)] == 1;
    // R is drawn from (X, W) before Y exists.
    const double p_missing =
        detail::expit(detail::dot1(treated ? cfg.sim3_alpha1 : cfg.sim3_alpha0, x.row(i)));
    r[static_cast<std::size_t>(i)] = unif(rng) < p_missing ? 0 : 1;
    y[static_cast<std::size_t>(i)] =
        detail::dot1(treated ? beta1 : beta0, x.row(i)) + (treated ? sd1 : sd0) * z(rng);
  }
  return {TrialData(std::move(w), std::move(r), std::move(y), std::move(x),
                    detail::numbered("x", 4)),
          10.0};
}

/// Simulation 4: covariates x1..x4 plus auxiliaries s1, s2, s3 (columns
/// 4, 5, 6) that share correlated noise with the outcome.
inline SimulatedData gen_sim4(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  const Vector beta1 = (Vector(5) << 10, 8, 12, 10, 4).finished();
  const Vector beta0 = (Vector(5) << 6, 7, 10, 9, 6).finished();
  Matrix noise_cov = Matrix::Zero(4, 4);
  noise_cov.diagonal() << 2, 2, 1, 1;
  noise_cov(0, 1) = noise_cov(1, 0) = 0.5;
  const Matrix chol = Eigen::LLT<Matrix>(noise_cov).matrixL();

  std::normal_distribution<double> z;
  std::bernoulli_distribution half(0.5);
  std::uniform_real_distribution<double> unif;
  std::vector<int> w = detail::draw_arms(cfg.n, cfg.delta, rng);
  Matrix x(cfg.n, 7);
  std::vector<int> r(static_cast<std::size_t>(cfg.n));
  std::vector<double> y(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    x(i, 0) = 5.0 + z(rng);
    x(i, 1) = half(rng) ? 1.0 : 0.0;
    x(i, 2) = z(rng);
    x(i, 3) = z(rng);
    Vector e(4);
    for (Index k = 0; k < 4; ++k) e[k] = z(rng);
    const Vector eps = chol * e;  // (eps_y, eps_1, eps_2, eps_3)
    const double s1 = 1.0 + x(i, 0) - x(i, 1) + eps[1];
    const double s2 = s1 + 0.3 * eps[2] > 5.8 ? 1.0 : 0.0;
    const double s3 = std::exp((s1 / 9.0) * (s1 / 9.0)) + eps[3];
    x(i, 4) = s1;
    x(i, 5) = s2;
    x(i, 6) = s3;
    const double p_observed = detail::expit(3.5 - 5.0 * s2);
    r[static_cast<std::size_t>(i)] = unif(rng) < p_observed ? 1 : 0;
    const bool treated = w[static_cast<std::size_t>(i)] == 1;
    y[static_cast<std::size_t>(i)] = detail::dot1(treated ? beta1 : beta0, x.row(i).head(4)) + eps[0];
  }
  return {TrialData(std::move(w), std::move(r), std::move(y), std::move(x),
                    {"x1", "x2", "x3", "x4", "s1", "s2", "s3"}),
          10.0};
}

/// Validates a custom design and returns its true effect
/// (beta1 - beta0)' (1, E X).
inline double custom_theta(const CustomDesign& d) {
  const Index p = d.covariates();
  if (d.gaussian_cov.rows() != d.gaussian_mean.size() ||
      d.gaussian_cov.cols() != d.gaussian_mean.size()) {
    throw Error(ErrorCode::BadMoments, "covariance size does not match the mean vector");
  }
  if (!d.gaussian_mean.allFinite()) throw Error(ErrorCode::BadMoments, "mean is not finite");
  for (double q : d.bernoulli_p) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw Error(ErrorCode::BadMoments, "Bernoulli proportions must lie in [0, 1]");
    }
  }
  if (p == 0) throw Error(ErrorCode::BadMoments, "design has no covariates");
  if (d.beta1.size() != p + 1 || d.beta0.size() != p + 1) {
    throw Error(ErrorCode::InvalidArgument, "outcome coefficients need intercept + one per covariate");
  }
  if ((d.alpha1.size() != 0 && d.alpha1.size() != p + 1) ||
      (d.alpha0.size() != 0 && d.alpha0.size() != p + 1)) {
    throw Error(ErrorCode::InvalidArgument, "missingness coefficients need intercept + one per covariate");
  }
  if (!(d.sd1 >= 0.0 && d.sd0 >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "error standard deviations must be non-negative");
  }
  Vector mean_x(p);
  mean_x << d.gaussian_mean, Eigen::Map<const Vector>(d.bernoulli_p.data(),
                                                      static_cast<Index>(d.bernoulli_p.size()));
  const Vector diff = d.beta1 - d.beta0;
  return diff[0] + diff.tail(p).dot(mean_x);
}

inline SimulatedData gen_custom(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  const CustomDesign& d = cfg.custom;
  const double theta = custom_theta(d);
  const Matrix factor = detail::psd_factor(d.gaussian_cov);
  const Index g = d.gaussian_mean.size();
  const Index p = d.covariates();

  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif;
  std::vector<int> w = detail::draw_arms(cfg.n, cfg.delta, rng);
  Matrix x(cfg.n, p);
  std::vector<int> r(static_cast<std::size_t>(cfg.n), 1);
  std::vector<double> y(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    if (g > 0) {
      Vector e(g);
      for (Index k = 0; k < g; ++k) e[k] = z(rng);
      x.row(i).head(g) = (d.gaussian_mean + factor * e).transpose();
    }
    for (std::size_t k = 0; k < d.bernoulli_p.size(); ++k) {
      x(i, g + static_cast<Index>(k)) = unif(rng) < d.bernoulli_p[k] ? 1.0 : 0.0;
    }
    const bool treated = w[static_cast<std::size_t>(i)] == 1;
    const Vector& alpha = treated ? d.alpha1 : d.alpha0;
    if (alpha.size() > 0) {
      r[static_cast<std::size_t>(i)] = unif(rng) < detail::expit(detail::dot1(alpha, x.row(i))) ? 0 : 1;
    }
    y[static_cast<std::size_t>(i)] =
        detail::dot1(treated ? d.beta1 : d.beta0, x.row(i)) + (treated ? d.sd1 : d.sd0) * z(rng);
  }
  return {TrialData(std::move(w), std::move(r), std::move(y), std::move(x),
                    detail::numbered("x", p)),
          theta};
}

inline SimulatedData generate(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  switch (cfg.scenario) {
    case Scenario::sim2_linear:
    case Scenario::sim2_nonlinear:
      return gen_sim2(cfg, rng);
    case Scenario::sim3:
      return gen_sim3(cfg, rng);
    case Scenario::sim4:
      return gen_sim4(cfg, rng);
    case Scenario::custom:
      return gen_custom(cfg, rng);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown scenario");
}

/// Covariate column names produced by the scenario's generator.
inline std::vector<std::string> scenario_covariates(const ScenarioConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::sim2_linear:
    case Scenario::sim2_nonlinear:
      return detail::numbered("x", 3);
    case Scenario::sim3:
      return detail::numbered("x", 4);
    case Scenario::sim4:
      return {"x1", "x2", "x3", "x4", "s1", "s2", "s3"};
    case Scenario::custom:
      return detail::numbered("x", cfg.custom.covariates());
  }
  return {};
}

// ---------------------------------------------------------------------------
// Estimator suites.

namespace detail {
inline ModelSpec model(Arm arm, Family family, std::vector<int> features) {
  return ModelSpec{arm, family, std::move(features), true};
}
inline std::vector<ModelSpec> both_arms(Family family, const std::vector<int>& features) {
  return {model(Arm::treated, family, features), model(Arm::control, family, features)};
}
}  // namespace detail

/// Model specs for an eight-digit Simulation 4 code. Digits select, in
/// order, propensity models 1 and 2 and outcome models 1 and 2 for the
/// treated arm, then the same four for the control arm. Propensity model 1
/// is logistic in s2, model 2 logistic in (x1..x4, s1); outcome model 1 is
/// linear in (x1..x4, s1), model 2 linear in (s1, s2, s3).
inline std::vector<ModelSpec> sim4_model_specs(std::string_view code) {
  if (code.size() != 8 || code.find_first_not_of("01") != std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument, "model code must be 8 binary digits: " + std::string(code));
  }
  const std::vector<int> p1_features{5};
  const std::vector<int> p2_features{0, 1, 2, 3, 4};
  const std::vector<int> o1_features{0, 1, 2, 3, 4};
  const std::vector<int> o2_features{4, 5, 6};
  std::vector<ModelSpec> specs;
  for (int a = 0; a < 2; ++a) {
    const Arm arm = a == 0 ? Arm::treated : Arm::control;
    const std::string_view d = code.substr(static_cast<std::size_t>(4 * a), 4);
    if (d[0] == '1') specs.push_back(detail::model(arm, Family::logistic, p1_features));
    if (d[1] == '1') specs.push_back(detail::model(arm, Family::logistic, p2_features));
    if (d[2] == '1') specs.push_back(detail::model(arm, Family::linear, o1_features));
    if (d[3] == '1') specs.push_back(detail::model(arm, Family::linear, o2_features));
  }
  return specs;
}

/// Configurations reported for Simulation 4.
inline std::vector<std::string> sim4_codes() {
  return {"10101010", "01010101", "11111111", "10011001", "10101001", "10011010",
          "10111011", "01100110", "10100110", "01101010", "11101110"};
}

inline std::vector<EstimatorSpec> default_suite(Scenario s) {
  std::vector<EstimatorSpec> out;
  out.push_back({"Unadjusted", Method::unadjusted, {}, -1});
  switch (s) {
    case Scenario::sim2_linear:
    case Scenario::sim2_nonlinear: {
      const std::vector<int> f{0, 1, 2};
      out.push_back({"ELW-Identity", Method::elw, detail::both_arms(Family::identity, f), -1});
      out.push_back({"ELW-Linear", Method::elw, detail::both_arms(Family::linear, f), -1});
      break;
    }
    case Scenario::sim3: {
      const std::vector<int> f{0, 1, 2, 3};
      for (Family fam : {Family::identity, Family::linear}) {
        std::vector<ModelSpec> m = detail::both_arms(Family::logistic, f);
        for (const ModelSpec& o : detail::both_arms(fam, f)) m.push_back(o);
        const std::string suffix = fam == Family::identity ? "Identity" : "Linear";
        out.push_back({"ELW-" + suffix, Method::elw_mis, m, -1});
        out.push_back({"QZ-" + suffix, Method::qz, m, -1});
      }
      break;
    }
    case Scenario::sim4: {
      out.clear();
      for (const std::string& code : sim4_codes()) {
        out.push_back({"ELW-" + code, Method::elw_mr, sim4_model_specs(code), -1});
        out.push_back({"HW-" + code, Method::hw, sim4_model_specs(code), -1});
      }
      break;
    }
    case Scenario::custom:
      break;
  }
  return out;
}

/// Default suite for a concrete configuration; the custom scenario needs
/// the covariate count to build its models.
inline std::vector<EstimatorSpec> default_suite(const ScenarioConfig& cfg) {
  if (cfg.scenario != Scenario::custom) return default_suite(cfg.scenario);
  std::vector<int> f(static_cast<std::size_t>(cfg.custom.covariates()));
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<int>(k);
  const bool missing = cfg.custom.alpha1.size() > 0 || cfg.custom.alpha0.size() > 0;
  std::vector<EstimatorSpec> out;
  out.push_back({"Unadjusted", Method::unadjusted, {}, -1});
  for (Family fam : {Family::identity, Family::linear}) {
    std::vector<ModelSpec> m;
    if (missing) m = detail::both_arms(Family::logistic, f);
    for (const ModelSpec& o : detail::both_arms(fam, f)) m.push_back(o);
    out.push_back({std::string("ELW-") + (fam == Family::identity ? "Identity" : "Linear"),
                   missing ? Method::elw_mis : Method::elw, m, -1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo harness.

struct ReplicateRecord {
  bool ok = false;
  double theta_hat = 0.0;
  /// NaN when no bootstrap was run.
  double se = std::numeric_limits<double>::quiet_NaN();
  double truth = 0.0;
  std::string error;
};

struct MetricsRow {
  std::string estimator;
  double bias = 0.0;
  double ave_boot_se = std::numeric_limits<double>::quiet_NaN();
  double cov_prob_boot = std::numeric_limits<double>::quiet_NaN();
  double mse = 0.0;
  /// Standard deviation of theta-hat across replicates and the Monte Carlo
  /// standard error of the bias.
  double empirical_sd = std::numeric_limits<double>::quiet_NaN();
  double mcse_bias = std::numeric_limits<double>::quiet_NaN();
  int used = 0;
  int failures = 0;
  std::string first_error;
};

/// Aggregates one estimator's replicate records; failed records are
/// excluded and counted.
inline MetricsRow compute_metrics(const std::string& name,
                                  const std::vector<ReplicateRecord>& records) {
  MetricsRow row;
  row.estimator = name;
  double sum_err = 0.0, sum_sq = 0.0, sum_se = 0.0;
  int covered = 0, with_se = 0;
  for (const ReplicateRecord& rec : records) {
    if (!rec.ok) {
      ++row.failures;
      if (row.first_error.empty()) row.first_error = rec.error;
      continue;
    }
    ++row.used;
    const double err = rec.theta_hat - rec.truth;
    sum_err += err;
    sum_sq += err * err;
    if (std::isfinite(rec.se)) {
      ++with_se;
      sum_se += rec.se;
      const WaldSummary ci = wald(rec.theta_hat, rec.se);
      if (ci.ci_low <= rec.truth && rec.truth <= ci.ci_high) ++covered;
    }
  }
  if (row.used == 0) {
    throw Error(ErrorCode::AllReplicatesFailed,
                name + ": every replicate failed" +
                    (row.first_error.empty() ? "" : " (" + row.first_error + ")"));
  }
  const double used = static_cast<double>(row.used);
  row.bias = sum_err / used;
  row.mse = sum_sq / used;
  if (with_se > 0) {
    row.ave_boot_se = sum_se / with_se;
    row.cov_prob_boot = static_cast<double>(covered) / with_se;
  }
  if (row.used >= 2) {
    double ss = 0.0;
    for (const ReplicateRecord& rec : records) {
      if (rec.ok) ss += (rec.theta_hat - rec.truth - row.bias) * (rec.theta_hat - rec.truth - row.bias);
    }
    row.empirical_sd = std::sqrt(ss / (used - 1.0));
    row.mcse_bias = row.empirical_sd / std::sqrt(used);
  }
  return row;
}

/// Runs every estimator on `cfg.reps` generated datasets. Replicate b draws
/// its data and bootstrap resamples from streams keyed by (cfg.seed, b), so
/// the table does not depend on `cfg.threads`.
inline std::vector<MetricsRow> run_monte_carlo(const ScenarioConfig& cfg,
                                               const std::vector<EstimatorSpec>& specs,
                                               const SolverOptions& opts = {}) {
  cfg.validate();
  opts.validate();
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "no estimators to run");
  if (cfg.scenario == Scenario::custom) custom_theta(cfg.custom);

  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  const std::size_t s_count = specs.size();
  std::vector<ReplicateRecord> records(reps * s_count);

  parallel_for(reps, cfg.threads, [&](std::size_t b) {
    ReplicateRecord* row = &records[b * s_count];
    std::mt19937_64 rng = make_stream(cfg.seed, b, 0x51AB);
    std::optional<SimulatedData> sim;
    try {
      sim.emplace(generate(cfg, rng));
    } catch (const Error& e) {
      for (std::size_t s = 0; s < s_count; ++s) row[s].error = e.what();
      return;
    }
    for (std::size_t s = 0; s < s_count; ++s) {
      row[s].truth = sim->theta;
      try {
        row[s].theta_hat = run_estimator(sim->data, specs[s], opts).theta_hat;
        row[s].ok = true;
      } catch (const Error& e) {
        row[s].error = e.what();
      }
    }
    if (cfg.bootstrap_B == 0) return;
    BootstrapSettings bs;
    bs.replicates = cfg.bootstrap_B;
    bs.seed = mix_seed(cfg.seed ^ mix_seed(b));
    bs.stratified = cfg.stratified;
    bs.threads = 1;
    const std::vector<BootstrapResult> boot = bootstrap_se(sim->data, specs, opts, bs);
    for (std::size_t s = 0; s < s_count; ++s) {
      if (!row[s].ok) continue;
      if (!boot[s].usable()) {
        row[s].ok = false;
        row[s].error = std::string(to_string(ErrorCode::TooManyFailures)) + ": " +
                       std::to_string(boot[s].failures) + " bootstrap replicates failed";
        continue;
      }
      row[s].se = boot[s].se;
    }
  });

  std::vector<MetricsRow> out;
  out.reserve(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    std::vector<ReplicateRecord> col(reps);
    for (std::size_t b = 0; b < reps; ++b) col[b] = std::move(records[b * s_count + s]);
    out.push_back(compute_metrics(specs[s].name, col));
  }
  return out;
}

}  // namespace elw
