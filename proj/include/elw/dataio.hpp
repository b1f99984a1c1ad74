#pragma once

// CSV trial data, JSON run configurations and report tables.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "elw/el_core.hpp"
#include "elw/error.hpp"
#include "elw/estimators.hpp"
#include "elw/models.hpp"
#include "elw/simlab.hpp"
#include "elw/trial_data.hpp"

namespace elw {

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
  std::string treatment_column = "w";
  std::string outcome_column = "y";
  /// Outcome cells equal to this token (or empty) are missing.
  std::string missing_token = "NA";
  std::vector<std::string> covariate_columns;
  std::optional<std::string> baseline_column;
};

/// Splits RFC 4180 text into records. Quoted fields may contain commas,
/// doubled quotes and line breaks; CRLF and LF both end a record.
inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw Error(ErrorCode::ParseError,
                      "line " + std::to_string(line) + ": stray quote inside unquoted field");
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Locale-independent decimal parse of the whole string.
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string where(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

}  // namespace detail

/// Parses CSV text against `schema`. Rows are numbered from 1 after the
/// header. Columns outside the schema are ignored.
inline TrialData parse_trial_csv(std::string_view text, const CsvSchema& schema) {
  const auto records = parse_csv_records(text);
  if (records.empty()) throw Error(ErrorCode::SchemaMismatch, "file has no header row");
  const auto& header = records.front();
  auto column = [&](const std::string& name) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (detail::trim(header[k]) == name) return k;
    }
    throw Error(ErrorCode::SchemaMismatch, "column '" + name + "' not found in header");
  };
  const std::size_t w_col = column(schema.treatment_column);
  const std::size_t y_col = column(schema.outcome_column);
  std::vector<std::size_t> x_cols;
  for (const auto& name : schema.covariate_columns) x_cols.push_back(column(name));

  const std::size_t rows = records.size() - 1;
  std::vector<int> w(rows), r(rows);
  std::vector<double> y(rows);
  Matrix x(static_cast<Index>(rows), static_cast<Index>(x_cols.size()));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(i + 1) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(rec.size()));
    }
    const std::string_view wt = detail::trim(rec[w_col]);
    if (wt != "0" && wt != "1") {
      throw Error(ErrorCode::ParseError, detail::where(i + 1, schema.treatment_column) +
                                             ": treatment must be 0 or 1, found '" +
                                             std::string(wt) + "'");
    }
    w[i] = wt == "1" ? 1 : 0;
    const std::string_view yt = detail::trim(rec[y_col]);
    if (yt.empty() || yt == schema.missing_token) {
      r[i] = 0;
      y[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto v = detail::parse_double(yt);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::ParseError, detail::where(i + 1, schema.outcome_column) +
                                               ": not a number: '" + std::string(yt) + "'");
      }
      r[i] = 1;
      y[i] = *v;
    }
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      const auto v = detail::parse_double(rec[x_cols[k]]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::ParseError, detail::where(i + 1, schema.covariate_columns[k]) +
                                               ": not a finite number: '" + rec[x_cols[k]] + "'");
      }
      x(static_cast<Index>(i), static_cast<Index>(k)) = *v;
    }
  }
  return TrialData(std::move(w), std::move(r), std::move(y), std::move(x),
                   schema.covariate_columns);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TrialData load_csv(const std::string& path, const CsvSchema& schema) {
  return parse_trial_csv(read_text_file(path), schema);
}

/// Serializes `data` with the schema's column names: treatment, outcome,
/// then covariates. Missing outcomes are written as the missing token.
inline std::string write_csv(const TrialData& data, const CsvSchema& schema) {
  if (static_cast<Index>(schema.covariate_columns.size()) != data.x().cols()) {
    throw Error(ErrorCode::ShapeMismatch, "schema covariate count does not match the data");
  }
  std::string out = csv_escape(schema.treatment_column) + "," + csv_escape(schema.outcome_column);
  for (const auto& c : schema.covariate_columns) out += "," + csv_escape(c);
  out += "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += data.w()[i] == 1 ? "1" : "0";
    out += ",";
    out += data.r()[i] == 1 ? detail::format_double(data.y()[i]) : csv_escape(schema.missing_token);
    for (Index k = 0; k < data.x().cols(); ++k) {
      out += "," + detail::format_double(data.x()(static_cast<Index>(i), k));
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration (JSON, "spec_version": "1").

enum class ReportFormat { csv, markdown };

inline std::optional<ReportFormat> parse_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  return std::nullopt;
}

/// A model spec whose features are still column names.
struct NamedModelSpec {
  Arm arm = Arm::treated;
  Family family = Family::identity;
  std::vector<std::string> features;
  bool intercept = true;
};

struct NamedEstimatorSpec {
  std::string name;
  Method method = Method::unadjusted;
  std::vector<NamedModelSpec> models;
  std::optional<std::string> baseline;
};

struct ScenarioOverrides {
  std::optional<Vector> sim3_alpha1, sim3_alpha0;
  std::optional<CustomDesign> custom;
};

struct RunConfig {
  std::optional<CsvSchema> schema;
  std::vector<NamedEstimatorSpec> estimators;
  SolverOptions solver;
  int bootstrap_replicates = 500;
  bool bootstrap_stratified = false;
  std::optional<std::uint64_t> seed;
  std::optional<ReportFormat> output;
  ScenarioOverrides scenario;
};

namespace detail {

using nlohmann::json;

inline std::string pointer_join(const std::string& base, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') {
      escaped += "~0";
    } else if (c == '/') {
      escaped += "~1";
    } else {
      escaped += c;
    }
  }
  return base + "/" + escaped;
}
inline std::string pointer_join(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, (path.empty() ? std::string("/") : path) + ": " + msg);
}

inline void require_object(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_fail(path, "expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) config_fail(pointer_join(path, item.key()), "unknown key");
  }
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) config_fail(path, "expected a string");
  return j.get<std::string>();
}
inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) config_fail(path, "expected true or false");
  return j.get<bool>();
}
inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}
inline std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  return j.get<std::int64_t>();
}
inline std::vector<std::string> get_strings(const json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_string(j[k], pointer_join(path, k)));
  return out;
}
inline Vector get_vector(const json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Index>(k)] = get_number(j[k], pointer_join(path, k));
  return v;
}
inline Matrix get_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "expected an array of rows");
  const std::size_t rows = j.size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector row = get_vector(j[i], pointer_join(path, i));
    if (static_cast<std::size_t>(row.size()) != rows) {
      config_fail(pointer_join(path, i), "covariance must be square");
    }
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

inline CsvSchema parse_schema(const json& j, const std::string& path) {
  require_object(j, path, {"treatment", "outcome", "missing_token", "covariates", "baseline"});
  CsvSchema s;
  if (j.contains("treatment")) s.treatment_column = get_string(j["treatment"], path + "/treatment");
  if (j.contains("outcome")) s.outcome_column = get_string(j["outcome"], path + "/outcome");
  if (j.contains("missing_token")) {
    s.missing_token = get_string(j["missing_token"], path + "/missing_token");
  }
  if (!j.contains("covariates")) config_fail(path, "missing key 'covariates'");
  s.covariate_columns = get_strings(j["covariates"], path + "/covariates");
  std::set<std::string> seen;
  for (std::size_t k = 0; k < s.covariate_columns.size(); ++k) {
    if (!seen.insert(s.covariate_columns[k]).second) {
      config_fail(pointer_join(path + "/covariates", k), "duplicate column");
    }
  }
  if (j.contains("baseline")) {
    s.baseline_column = get_string(j["baseline"], path + "/baseline");
    if (!seen.count(*s.baseline_column)) {
      config_fail(path + "/baseline", "baseline must be one of the covariates");
    }
  }
  return s;
}

inline NamedModelSpec parse_model(const json& j, const std::string& path) {
  require_object(j, path, {"arm", "family", "features", "intercept"});
  NamedModelSpec m;
  if (!j.contains("arm")) config_fail(path, "missing key 'arm'");
  const std::string arm = get_string(j["arm"], path + "/arm");
  if (arm == "treated") {
    m.arm = Arm::treated;
  } else if (arm == "control") {
    m.arm = Arm::control;
  } else {
    config_fail(path + "/arm", "expected 'treated' or 'control'");
  }
  if (!j.contains("family")) config_fail(path, "missing key 'family'");
  const std::string fam = get_string(j["family"], path + "/family");
  if (fam == "identity") {
    m.family = Family::identity;
  } else if (fam == "linear") {
    m.family = Family::linear;
  } else if (fam == "logistic") {
    m.family = Family::logistic;
  } else {
    config_fail(path + "/family", "expected 'identity', 'linear' or 'logistic'");
  }
  if (!j.contains("features")) config_fail(path, "missing key 'features'");
  m.features = get_strings(j["features"], path + "/features");
  if (m.features.empty()) config_fail(path + "/features", "at least one feature is required");
  if (j.contains("intercept")) m.intercept = get_bool(j["intercept"], path + "/intercept");
  return m;
}

inline NamedEstimatorSpec parse_estimator(const json& j, const std::string& path) {
  require_object(j, path, {"name", "method", "models", "baseline"});
  NamedEstimatorSpec e;
  if (!j.contains("method")) config_fail(path, "missing key 'method'");
  const std::string method = get_string(j["method"], path + "/method");
  const auto m = parse_method(method);
  if (!m) config_fail(path + "/method", "unknown method '" + method + "'");
  e.method = *m;
  e.name = j.contains("name") ? get_string(j["name"], path + "/name") : method;
  if (j.contains("models")) {
    const json& models = j["models"];
    if (!models.is_array()) config_fail(path + "/models", "expected an array");
    for (std::size_t k = 0; k < models.size(); ++k) {
      e.models.push_back(parse_model(models[k], pointer_join(path + "/models", k)));
    }
  }
  if (j.contains("baseline")) e.baseline = get_string(j["baseline"], path + "/baseline");
  const bool weighted = is_weight_based(e.method);
  if (!weighted && !e.models.empty()) {
    config_fail(path + "/models", "method '" + method + "' takes no models");
  }
  if (e.method != Method::elw && weighted && e.models.empty()) {
    config_fail(path + "/models", "method '" + method + "' needs at least one model");
  }
  if (e.method == Method::elw) {
    for (std::size_t k = 0; k < e.models.size(); ++k) {
      if (e.models[k].family == Family::logistic) {
        config_fail(pointer_join(path + "/models", k) + "/family",
                    "elw takes outcome models only; use elw_mis for propensity models");
      }
    }
  }
  return e;
}

inline SolverOptions parse_solver(const json& j, const std::string& path) {
  require_object(j, path,
                 {"epsilon", "max_iterations", "augmentation_scale", "hessian_ridge", "auto_augment"});
  SolverOptions o;
  if (j.contains("epsilon")) o.epsilon = get_number(j["epsilon"], path + "/epsilon");
  if (j.contains("max_iterations")) {
    o.max_iterations = static_cast<int>(get_integer(j["max_iterations"], path + "/max_iterations"));
  }
  if (j.contains("augmentation_scale")) {
    o.augmentation_scale = get_number(j["augmentation_scale"], path + "/augmentation_scale");
  }
  if (j.contains("hessian_ridge")) o.hessian_ridge = get_number(j["hessian_ridge"], path + "/hessian_ridge");
  if (j.contains("auto_augment")) o.auto_augment = get_bool(j["auto_augment"], path + "/auto_augment");
  try {
    o.validate();
  } catch (const Error& e) {
    config_fail(path, e.detail());
  }
  return o;
}

inline CustomDesign parse_custom(const json& j, const std::string& path) {
  require_object(j, path, {"gaussian_mean", "gaussian_cov", "bernoulli_p", "beta1", "beta0", "sd1",
                           "sd0", "alpha1", "alpha0"});
  CustomDesign d;
  if (j.contains("gaussian_mean")) d.gaussian_mean = get_vector(j["gaussian_mean"], path + "/gaussian_mean");
  d.gaussian_cov = j.contains("gaussian_cov") ? get_matrix(j["gaussian_cov"], path + "/gaussian_cov")
                                              : Matrix::Zero(d.gaussian_mean.size(), d.gaussian_mean.size());
  if (j.contains("bernoulli_p")) {
    const Vector p = get_vector(j["bernoulli_p"], path + "/bernoulli_p");
    d.bernoulli_p.assign(p.data(), p.data() + p.size());
  }
  if (!j.contains("beta1") || !j.contains("beta0")) config_fail(path, "beta1 and beta0 are required");
  d.beta1 = get_vector(j["beta1"], path + "/beta1");
  d.beta0 = get_vector(j["beta0"], path + "/beta0");
  if (j.contains("sd1")) d.sd1 = get_number(j["sd1"], path + "/sd1");
  if (j.contains("sd0")) d.sd0 = get_number(j["sd0"], path + "/sd0");
  if (j.contains("alpha1")) d.alpha1 = get_vector(j["alpha1"], path + "/alpha1");
  if (j.contains("alpha0")) d.alpha0 = get_vector(j["alpha0"], path + "/alpha0");
  try {
    custom_theta(d);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadMoments) throw;
    config_fail(path, e.detail());
  }
  return d;
}

inline ScenarioOverrides parse_scenario_section(const json& j, const std::string& path) {
  require_object(j, path, {"sim3_alpha1", "sim3_alpha0", "custom"});
  ScenarioOverrides s;
  auto alpha = [&](const char* key) -> std::optional<Vector> {
    if (!j.contains(key)) return std::nullopt;
    Vector v = get_vector(j[key], path + "/" + key);
    if (v.size() != 5) config_fail(path + "/" + key, "expected 5 coefficients");
    return v;
  };
  s.sim3_alpha1 = alpha("sim3_alpha1");
  s.sim3_alpha0 = alpha("sim3_alpha0");
  if (j.contains("custom")) s.custom = parse_custom(j["custom"], path + "/custom");
  return s;
}

}  // namespace detail

/// Resolves named features against `columns`; the error path points at the
/// offending entry of the configuration document.
inline std::vector<EstimatorSpec> resolve_estimators(const std::vector<NamedEstimatorSpec>& named,
                                                     const std::vector<std::string>& columns,
                                                     const std::optional<std::string>& default_baseline = {}) {
  auto index_of = [&](const std::string& name, const std::string& path) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (columns[k] == name) return static_cast<int>(k);
    }
    detail::config_fail(path, "column '" + name + "' is not a covariate");
  };
  std::vector<EstimatorSpec> out;
  for (std::size_t e = 0; e < named.size(); ++e) {
    const std::string base = detail::pointer_join("/estimators", e);
    const NamedEstimatorSpec& ne = named[e];
    EstimatorSpec spec;
    spec.name = ne.name;
    spec.method = ne.method;
    for (std::size_t m = 0; m < ne.models.size(); ++m) {
      const NamedModelSpec& nm = ne.models[m];
      ModelSpec ms{nm.arm, nm.family, {}, nm.intercept};
      const std::string mpath = detail::pointer_join(base + "/models", m) + "/features";
      for (std::size_t f = 0; f < nm.features.size(); ++f) {
        ms.features.push_back(index_of(nm.features[f], detail::pointer_join(mpath, f)));
      }
      spec.models.push_back(std::move(ms));
    }
    if (ne.method == Method::change_score) {
      if (ne.baseline) {
        spec.baseline_column = index_of(*ne.baseline, base + "/baseline");
      } else if (default_baseline) {
        spec.baseline_column = index_of(*default_baseline, "/schema/baseline");
      } else {
        detail::config_fail(base, "change_score needs a baseline column");
      }
    }
    out.push_back(std::move(spec));
  }
  return out;
}

inline RunConfig parse_config_text(std::string_view text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("/: invalid JSON: ") + e.what());
  }
  detail::require_object(j, "", {"spec_version", "schema", "estimators", "solver", "bootstrap",
                                 "seed", "output", "scenario"});
  if (!j.contains("spec_version")) detail::config_fail("", "missing key 'spec_version'");
  if (detail::get_string(j["spec_version"], "/spec_version") != "1") {
    detail::config_fail("/spec_version", "unsupported version (expected \"1\")");
  }
  RunConfig cfg;
  if (j.contains("schema")) cfg.schema = detail::parse_schema(j["schema"], "/schema");
  if (j.contains("estimators")) {
    const json& es = j["estimators"];
    if (!es.is_array()) detail::config_fail("/estimators", "expected an array");
    std::set<std::string> names;
    for (std::size_t k = 0; k < es.size(); ++k) {
      const std::string path = detail::pointer_join("/estimators", k);
      cfg.estimators.push_back(detail::parse_estimator(es[k], path));
      if (!names.insert(cfg.estimators.back().name).second) {
        detail::config_fail(path + "/name", "duplicate estimator name");
      }
    }
  }
  if (j.contains("solver")) cfg.solver = detail::parse_solver(j["solver"], "/solver");
  if (j.contains("bootstrap")) {
    const json& b = j["bootstrap"];
    detail::require_object(b, "/bootstrap", {"replicates", "stratified"});
    if (b.contains("replicates")) {
      const auto reps = detail::get_integer(b["replicates"], "/bootstrap/replicates");
      if (reps != 0 && reps < 2) {
        detail::config_fail("/bootstrap/replicates", "must be 0 or at least 2");
      }
      cfg.bootstrap_replicates = static_cast<int>(reps);
    }
    if (b.contains("stratified")) {
      cfg.bootstrap_stratified = detail::get_bool(b["stratified"], "/bootstrap/stratified");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) detail::config_fail("/seed", "expected a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) {
    const std::string f = detail::get_string(j["output"], "/output");
    cfg.output = parse_format(f);
    if (!cfg.output) detail::config_fail("/output", "expected 'csv' or 'markdown'");
  }
  if (j.contains("scenario")) cfg.scenario = detail::parse_scenario_section(j["scenario"], "/scenario");
  if (cfg.schema) {
    resolve_estimators(cfg.estimators, cfg.schema->covariate_columns, cfg.schema->baseline_column);
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "/: " + e.detail());
  }
  return parse_config_text(text);
}

// ---------------------------------------------------------------------------
// Reports. Values are printed with three decimals; NaN prints as NA.

struct EstimateRow {
  std::string estimator;
  double estimate = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double test_stat = std::numeric_limits<double>::quiet_NaN();
  double rel_eff = std::numeric_limits<double>::quiet_NaN();
};

inline std::string format_fixed3(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  std::string s(buf, res.ptr);
  if (s == "-0.000") s = "0.000";
  return s;
}

namespace detail {
inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows,
                                ReportFormat format) {
  std::string out;
  if (format == ReportFormat::csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ",";
        out += csv_escape(cells[k]);
      }
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) width[k] = std::max<std::size_t>(3, header[k].size());
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    out += "|";
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string pad(width[k] - cells[k].size(), ' ');
      out += " " + (k == 0 ? cells[k] + pad : pad + cells[k]) + " |";
    }
    out += "\n";
  };
  line(header);
  out += "|";
  for (std::size_t k = 0; k < header.size(); ++k) {
    out += k == 0 ? " " + std::string(width[k], '-') + " |" : " " + std::string(width[k] - 1, '-') + ": |";
  }
  out += "\n";
  for (const auto& r : rows) line(r);
  return out;
}
}  // namespace detail

inline std::string write_report(const std::vector<EstimateRow>& rows, ReportFormat format) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "report has no rows");
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.estimator, format_fixed3(r.estimate), format_fixed3(r.se),
                     format_fixed3(r.test_stat), format_fixed3(r.rel_eff)});
  }
  return detail::render_table({"Estimator", "Estimate", "Boot.SE", "Test stat.", "Rel.eff."}, cells,
                              format);
}

/// Metrics rows in declaration order; the last column counts the
/// replicates that entered each row.
inline std::string write_report(const std::vector<MetricsRow>& rows, ReportFormat format) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "report has no rows");
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.estimator, format_fixed3(r.bias), format_fixed3(r.ave_boot_se),
                     format_fixed3(r.cov_prob_boot), format_fixed3(r.mse), std::to_string(r.used)});
  }
  return detail::render_table({"Estimator", "Bias", "Ave.Boot.SE", "Cov.prob.boot.", "MSE", "Reps"},
                              cells, format);
}

}  // namespace elw
