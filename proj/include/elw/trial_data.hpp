#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "elw/error.hpp"

namespace elw {

enum class Arm { treated, control };

inline int arm_indicator(Arm arm) { return arm == Arm::treated ? 1 : 0; }
inline const char* to_string(Arm arm) {
  return arm == Arm::treated ? "treated" : "control";
}

/// Per-subject trial records (W, R, Y, X). Outcomes of subjects with r = 0
/// are stored as NaN and never read.
class TrialData {
 public:
  TrialData(std::vector<int> w, std::vector<int> r, std::vector<double> y,
            Eigen::MatrixXd x, std::vector<std::string> covariate_names = {})
      : w_(std::move(w)),
        r_(std::move(r)),
        y_(std::move(y)),
        x_(std::move(x)),
        names_(std::move(covariate_names)) {
    const std::size_t total = w_.size();
    if (r_.size() != total || y_.size() != total ||
        static_cast<std::size_t>(x_.rows()) != total) {
      throw Error(ErrorCode::ShapeMismatch,
                  "treatment, response indicator, outcome and covariate rows "
                  "must have equal length");
    }
    if (names_.empty()) {
      for (Eigen::Index k = 0; k < x_.cols(); ++k) {
        names_.push_back("x" + std::to_string(k + 1));
      }
    }
    if (static_cast<Eigen::Index>(names_.size()) != x_.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "covariate name count mismatch");
    }
    for (std::size_t k = 0; k < total; ++k) {
      if (w_[k] != 0 && w_[k] != 1) {
        throw Error(ErrorCode::InvalidData,
                    "treatment must be 0 or 1 (subject " + std::to_string(k) + ")");
      }
      if (r_[k] != 0 && r_[k] != 1) {
        throw Error(ErrorCode::InvalidData,
                    "response indicator must be 0 or 1 (subject " +
                        std::to_string(k) + ")");
      }
      if (r_[k] == 1 && !std::isfinite(y_[k])) {
        throw Error(ErrorCode::InvalidData,
                    "observed outcome is not finite (subject " + std::to_string(k) + ")");
      }
      if (r_[k] == 0) y_[k] = std::numeric_limits<double>::quiet_NaN();
      auto& all = w_[k] == 1 ? treated_ : control_;
      all.push_back(static_cast<int>(k));
      if (r_[k] == 1) (w_[k] == 1 ? treated_obs_ : control_obs_).push_back(static_cast<int>(k));
    }
    if (!x_.allFinite()) {
      throw Error(ErrorCode::NonFinite, "covariates contain NaN or Inf");
    }
    if (treated_.size() < 2 || control_.size() < 2) {
      throw Error(ErrorCode::InvalidData, "each arm needs at least two subjects");
    }
  }

  std::size_t size() const noexcept { return w_.size(); }
  /// Treated count m.
  std::size_t m() const noexcept { return treated_.size(); }
  /// Control count n.
  std::size_t n() const noexcept { return control_.size(); }
  std::size_t m_observed() const noexcept { return treated_obs_.size(); }
  std::size_t n_observed() const noexcept { return control_obs_.size(); }
  bool has_missing() const noexcept {
    return treated_obs_.size() + control_obs_.size() != w_.size();
  }
  double delta_hat() const noexcept {
    return static_cast<double>(m()) / static_cast<double>(size());
  }

  const std::vector<int>& w() const noexcept { return w_; }
  const std::vector<int>& r() const noexcept { return r_; }
  const std::vector<double>& y() const noexcept { return y_; }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  const std::vector<int>& arm(Arm a) const noexcept {
    return a == Arm::treated ? treated_ : control_;
  }
  const std::vector<int>& observed(Arm a) const noexcept {
    return a == Arm::treated ? treated_obs_ : control_obs_;
  }

  /// Rows at `rows`, in that order (duplicates allowed).
  TrialData subset(const std::vector<int>& rows) const {
    std::vector<int> w(rows.size()), r(rows.size());
    std::vector<double> y(rows.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), x_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const int i = rows[k];
      w[k] = w_[i];
      r[k] = r_[i];
      y[k] = y_[i];
      x.row(static_cast<Eigen::Index>(k)) = x_.row(i);
    }
    return TrialData(std::move(w), std::move(r), std::move(y), std::move(x), names_);
  }

  /// Same subjects with every outcome shifted by `c`.
  TrialData shifted_outcomes(double c) const {
    std::vector<double> y = y_;
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (r_[k] == 1) y[k] += c;
    }
    return TrialData(w_, r_, std::move(y), x_, names_);
  }

 private:
  std::vector<int> w_;
  std::vector<int> r_;
  std::vector<double> y_;
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  std::vector<int> treated_, control_, treated_obs_, control_obs_;
};

}  // namespace elw
