#pragma once

// Uncertainty quantification: nonparametric bootstrap standard errors, Wald
// summaries and the plug-in influence-function variance of the complete-data
// ELW estimator.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "elw/el_core.hpp"
#include "elw/error.hpp"
#include "elw/estimators.hpp"
#include "elw/models.hpp"
#include "elw/parallel.hpp"
#include "elw/trial_data.hpp"

namespace elw {

/// 97.5% standard normal quantile.
inline constexpr double kWaldZ = 1.959964;

struct BootstrapSettings {
  int replicates = 500;
  std::uint64_t seed = 1;
  /// Resample m treated and n control rows separately instead of N rows
  /// from the pooled sample.
  bool stratified = false;
  int threads = 1;
};

struct BootstrapResult {
  double se = std::numeric_limits<double>::quiet_NaN();
  int replicates_requested = 0;
  int replicates_used = 0;
  int failures = 0;
  std::uint64_t seed = 0;

  bool usable() const noexcept {
    return 2 * failures <= replicates_requested && replicates_used >= 2;
  }
};

struct WaldSummary {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double test_stat = 0.0;
};

inline WaldSummary wald(double estimate, double se) {
  if (!(se >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "standard error must be non-negative");
  }
  WaldSummary w;
  w.estimate = estimate;
  w.se = se;
  w.ci_low = estimate - kWaldZ * se;
  w.ci_high = estimate + kWaldZ * se;
  if (se > 0.0) {
    w.test_stat = estimate / se;
  } else if (estimate != 0.0) {
    w.test_stat = std::copysign(std::numeric_limits<double>::infinity(), estimate);
  } else {
    w.test_stat = std::numeric_limits<double>::quiet_NaN();
  }
  return w;
}

/// Row indices of one bootstrap resample.
inline std::vector<int> resample_rows(const TrialData& data, bool stratified,
                                      std::mt19937_64& rng) {
  std::vector<int> rows;
  rows.reserve(data.size());
  if (stratified) {
    for (Arm arm : {Arm::treated, Arm::control}) {
      const auto& pool = data.arm(arm);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t k = 0; k < pool.size(); ++k) rows.push_back(pool[pick(rng)]);
    }
  } else {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(data.size()) - 1);
    for (std::size_t k = 0; k < data.size(); ++k) rows.push_back(pick(rng));
  }
  return rows;
}

namespace detail {
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}
}  // namespace detail

/// Bootstrap standard errors for several estimators on shared resamples.
/// Every nuisance model is refit inside each replicate; replicates whose
/// estimate fails are counted and dropped. Results do not depend on
/// `settings.threads`.
inline std::vector<BootstrapResult> bootstrap_se(const TrialData& data,
                                                 const std::vector<EstimatorSpec>& specs,
                                                 const SolverOptions& opts,
                                                 const BootstrapSettings& settings) {
  if (settings.replicates < 2) {
    throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 2 replicates");
  }
  const std::size_t b_count = static_cast<std::size_t>(settings.replicates);
  const std::size_t s_count = specs.size();
  std::vector<double> thetas(b_count * s_count, std::numeric_limits<double>::quiet_NaN());

  parallel_for(b_count, settings.threads, [&](std::size_t b) {
    std::mt19937_64 rng = make_stream(settings.seed, b, 0xB007);
    std::optional<TrialData> sample;
    try {
      sample.emplace(data.subset(resample_rows(data, settings.stratified, rng)));
    } catch (const Error&) {
      return;
    }
    for (std::size_t s = 0; s < s_count; ++s) {
      try {
        thetas[b * s_count + s] = run_estimator(*sample, specs[s], opts).theta_hat;
      } catch (const Error&) {
      }
    }
  });

  std::vector<BootstrapResult> out(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    std::vector<double> ok;
    ok.reserve(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
      const double v = thetas[b * s_count + s];
      if (std::isfinite(v)) ok.push_back(v);
    }
    BootstrapResult& r = out[s];
    r.replicates_requested = settings.replicates;
    r.replicates_used = static_cast<int>(ok.size());
    r.failures = settings.replicates - r.replicates_used;
    r.seed = settings.seed;
    r.se = detail::sample_sd(ok);
  }
  return out;
}

/// Bootstrap standard error of one estimator.
inline BootstrapResult bootstrap_se(const TrialData& data, const EstimatorSpec& spec,
                                    const SolverOptions& opts,
                                    const BootstrapSettings& settings) {
  BootstrapResult r = bootstrap_se(data, std::vector<EstimatorSpec>{spec}, opts, settings).front();
  if (!r.usable()) {
    throw Error(ErrorCode::TooManyFailures,
                std::to_string(r.failures) + " of " + std::to_string(r.replicates_requested) +
                    " bootstrap replicates failed for " + spec.name);
  }
  return r;
}

/// Plug-in version of the complete-data influence function
///   phi = W/d (Y - mu1) - (W - d)/d C1' D1^{-1} (g - Eg)
///       - (1 - W)/(1 - d) (Y - mu0) + (W - d)/(1 - d) C0' D0^{-1} (h - Eh)
/// with every expectation replaced by its pooled-sample mean.
struct IFVariance {
  /// Sample variance of the plug-in phi values.
  double variance_hat = 0.0;
  Vector c1, c0;
  Matrix d1, d0;
  double mu1 = 0.0, mu0 = 0.0, delta = 0.0;
  Vector phi;

  /// Variance of theta-hat, var(phi) / N.
  double theta_variance() const { return variance_hat / static_cast<double>(phi.size()); }
  double se() const { return std::sqrt(theta_variance()); }
};

namespace detail {
inline Vector solve_psd(const Matrix& d, const Vector& rhs, const char* name) {
  const Index k = d.rows();
  const double mean_diag = k > 0 ? d.diagonal().mean() : 0.0;
  Matrix a = d;
  a.diagonal().array() += 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::SingularD, std::string(name) + " is singular");
  }
  Vector x = ldlt.solve(rhs);
  if (!x.allFinite()) throw Error(ErrorCode::SingularD, std::string(name) + " is singular");
  return x;
}
}  // namespace detail

inline IFVariance if_variance_nomissing(const TrialData& data, const OutcomeModel& g,
                                        const OutcomeModel& h) {
  if (data.has_missing()) {
    throw Error(ErrorCode::InvalidData, "plug-in variance requires complete outcomes");
  }
  const Index total = static_cast<Index>(data.size());
  const double nn = static_cast<double>(total);
  IFVariance out;
  out.delta = data.delta_hat();
  const double d = out.delta;

  Matrix gv = predict_outcome(g, data.x());
  Matrix hv = predict_outcome(h, data.x());
  gv.rowwise() -= gv.colwise().mean();
  hv.rowwise() -= hv.colwise().mean();

  double s1 = 0.0, s0 = 0.0;
  for (Index k = 0; k < total; ++k) {
    (data.w()[k] == 1 ? s1 : s0) += data.y()[k];
  }
  out.mu1 = s1 / static_cast<double>(data.m());
  out.mu0 = s0 / static_cast<double>(data.n());

  Vector a1(total), a0(total);  // W/d (Y - mu1), (1 - W)/(1 - d) (Y - mu0)
  for (Index k = 0; k < total; ++k) {
    const double w = data.w()[k];
    const double y = data.y()[k];
    a1[k] = w / d * (y - out.mu1);
    a0[k] = (1.0 - w) / (1.0 - d) * (y - out.mu0);
  }
  out.c1 = gv.transpose() * a1 / nn;
  out.c0 = hv.transpose() * a0 / nn;
  out.d1 = gv.transpose() * gv / nn;
  out.d0 = hv.transpose() * hv / nn;

  const Vector coef1 = detail::solve_psd(out.d1, out.c1, "D1");
  const Vector coef0 = detail::solve_psd(out.d0, out.c0, "D0");
  const Vector proj1 = gv * coef1;
  const Vector proj0 = hv * coef0;

  out.phi.resize(total);
  for (Index k = 0; k < total; ++k) {
    const double w = data.w()[k];
    // The control projection enters with a minus sign, matching the
    // efficient influence function obtained under correct specification.
    out.phi[k] = a1[k] - (w - d) / d * proj1[k] - a0[k] - (w - d) / (1.0 - d) * proj0[k];
  }
  const double mean = out.phi.mean();
  out.variance_hat = (out.phi.array() - mean).square().sum() / (nn - 1.0);
  return out;
}

}  // namespace elw
