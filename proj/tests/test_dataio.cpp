#include <clocale>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "elw/dataio.hpp"
#include "elw/estimators.hpp"

using namespace elw;

namespace {
template <class F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no elw::Error thrown";
  return Error(ErrorCode::InvalidArgument, "");
}

CsvSchema schema_x(std::vector<std::string> cols) {
  CsvSchema s;
  s.covariate_columns = std::move(cols);
  return s;
}

const char* kMinimalConfig = R"({
  "spec_version": "1",
  "schema": {"treatment": "w", "outcome": "y", "covariates": ["x1", "x2"]},
  "estimators": [
    {"name": "Unadjusted", "method": "unadjusted"},
    {"name": "ELW-Identity", "method": "elw",
     "models": [{"arm": "treated", "family": "identity", "features": ["x1", "x2"]},
                {"arm": "control", "family": "identity", "features": ["x1", "x2"]}]}
  ]
})";
}  // namespace

TEST(Csv, MissingOutcomes) {
  const std::string text = "w,y,x1\n1,3.5,0.1\n1,NA,0.2\n0,,0.3\n0,2.0,0.4\n";
  const TrialData d = parse_trial_csv(text, schema_x({"x1"}));
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.r(), (std::vector<int>{1, 0, 0, 1}));
  EXPECT_EQ(d.w(), (std::vector<int>{1, 1, 0, 0}));
  EXPECT_EQ(d.m(), 2);
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.m_observed(), 1);
  EXPECT_EQ(d.n_observed(), 1);
  EXPECT_DOUBLE_EQ(d.x()(2, 0), 0.3);
}

TEST(Csv, BadTreatmentNamesRow) {
  const std::string text = "w,y,x1\n1,3,0\n0,2,1\n2,1,0\n";
  const Error e = error_of([&] { parse_trial_csv(text, schema_x({"x1"})); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos) << e.what();
}

TEST(Csv, BadCovariateAndFieldCount) {
  EXPECT_EQ(error_of([] { parse_trial_csv("w,y,x1\n1,3,abc\n", schema_x({"x1"})); }).code(),
            ErrorCode::ParseError);
  EXPECT_EQ(error_of([] { parse_trial_csv("w,y,x1\n1,3\n", schema_x({"x1"})); }).code(),
            ErrorCode::ParseError);
  EXPECT_EQ(error_of([] { parse_trial_csv("w,y,x1\n1,3,inf\n", schema_x({"x1"})); }).code(),
            ErrorCode::ParseError);
}

TEST(Csv, SchemaMismatch) {
  const Error e = error_of([] { parse_trial_csv("w,y,x1\n1,3,0\n", schema_x({"x9"})); });
  EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  EXPECT_NE(std::string(e.what()).find("x9"), std::string::npos);
  EXPECT_EQ(error_of([] { parse_trial_csv("", schema_x({})); }).code(), ErrorCode::SchemaMismatch);
}

TEST(Csv, QuotedFieldsAndCrlf) {
  const auto recs = parse_csv_records("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,\"2\n3\",4\r\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(recs[1], (std::vector<std::string>{"1", "2\n3", "4"}));
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("q\""), "\"q\"\"\"");
}

TEST(Csv, ExtraColumnsIgnoredAndOrderFree) {
  const TrialData d = parse_trial_csv("id,x1,y,w\n7,0.5,1.5,1\n8,0.25,2.5,0\n9,0,1,1\n10,0,1,0\n",
                                      schema_x({"x1"}));
  EXPECT_EQ(d.w(), (std::vector<int>{1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(d.y()[1], 2.5);
  EXPECT_DOUBLE_EQ(d.x()(0, 0), 0.5);
}

TEST(Csv, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const int n = 50;
  std::vector<int> w(n), r(n);
  std::vector<double> y(n);
  Matrix x(n, 2);
  for (int i = 0; i < n; ++i) {
    w[i] = i % 2;
    r[i] = i % 7 == 0 ? 0 : 1;
    y[i] = r[i] ? z(rng) * 1e3 : 0.0;
    x(i, 0) = z(rng);
    x(i, 1) = z(rng) * 1e-8;
  }
  const TrialData d(w, r, y, x, {"a", "b"});
  const CsvSchema s = schema_x({"a", "b"});
  const TrialData back = parse_trial_csv(write_csv(d, s), s);
  EXPECT_EQ(back.w(), d.w());
  EXPECT_EQ(back.r(), d.r());
  EXPECT_EQ(back.x(), d.x());
  for (int i = 0; i < n; ++i) {
    if (r[i]) {
      EXPECT_EQ(back.y()[i], y[i]);
    }
  }
}

TEST(Config, Minimal) {
  const RunConfig cfg = parse_config_text(kMinimalConfig);
  ASSERT_TRUE(cfg.schema.has_value());
  EXPECT_EQ(cfg.schema->covariate_columns, (std::vector<std::string>{"x1", "x2"}));
  ASSERT_EQ(cfg.estimators.size(), 2u);
  EXPECT_EQ(cfg.estimators[1].method, Method::elw);
  EXPECT_EQ(cfg.bootstrap_replicates, 500);
  const auto specs = resolve_estimators(cfg.estimators, cfg.schema->covariate_columns);
  EXPECT_EQ(specs[1].models[0].features, (std::vector<int>{0, 1}));
}

TEST(Config, MissingColumnReportsPath) {
  std::string text = kMinimalConfig;
  text.replace(text.rfind("\"x2\""), 4, "\"x7\"");
  const Error e = error_of([&] { parse_config_text(text); });
  EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  EXPECT_NE(std::string(e.what()).find("/estimators/1/models/1/features/1"), std::string::npos) << e.what();
}

TEST(Config, Rejections) {
  auto code = [](const std::string& t) { return error_of([&] { parse_config_text(t); }).code(); };
  EXPECT_EQ(code(R"({"spec_version": "1", "bogus": 1})"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "2"})"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({})"), ErrorCode::ConfigError);
  EXPECT_EQ(code("{not json"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "estimators": [{"method": "magic"}]})"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "estimators": [{"method": "qz"}]})"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "estimators": [{"method": "unadjusted"}, {"method": "unadjusted"}]})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "estimators": [{"method": "elw", "models":
                 [{"arm": "treated", "family": "logistic", "features": ["a"]}]}]})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "bootstrap": {"replicates": 1}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"spec_version": "1", "solver": {"epsilon": -1}})"), ErrorCode::ConfigError);
  const Error e = error_of([] { parse_config_text(R"({"spec_version": "1", "solver": {"tol": 1}})"); });
  EXPECT_NE(std::string(e.what()).find("/solver"), std::string::npos) << e.what();
}

TEST(Config, Sim4EightModelsGiveTwoPerBlock) {
  const std::string text = R"({
    "spec_version": "1",
    "schema": {"covariates": ["x1", "x2", "x3", "x4", "s1", "s2", "s3"]},
    "estimators": [{"name": "ELW-11111111", "method": "elw_mr", "models": [
      {"arm": "treated", "family": "logistic", "features": ["s2"]},
      {"arm": "treated", "family": "logistic", "features": ["x1", "x2", "x3", "x4", "s1"]},
      {"arm": "treated", "family": "linear", "features": ["x1", "x2", "x3", "x4", "s1"]},
      {"arm": "treated", "family": "linear", "features": ["s1", "s2", "s3"]},
      {"arm": "control", "family": "logistic", "features": ["s2"]},
      {"arm": "control", "family": "logistic", "features": ["x1", "x2", "x3", "x4", "s1"]},
      {"arm": "control", "family": "linear", "features": ["x1", "x2", "x3", "x4", "s1"]},
      {"arm": "control", "family": "linear", "features": ["s1", "s2", "s3"]}]}]
  })";
  const RunConfig cfg = parse_config_text(text);
  const auto specs = resolve_estimators(cfg.estimators, cfg.schema->covariate_columns);
  ScenarioConfig sc;
  sc.scenario = Scenario::sim4;
  std::mt19937_64 rng(3);
  const TrialData d = gen_sim4(sc, rng).data;
  EXPECT_EQ(specs[0].models.size(), sim4_model_specs("11111111").size());
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(specs[0].models[k].features, sim4_model_specs("11111111")[k].features);
  }
  const WorkingModelSet s = assemble_model_set(specs[0].models, d);
  EXPECT_EQ(s.p1.size(), 2u);
  EXPECT_EQ(s.p0.size(), 2u);
  EXPECT_EQ(s.g.size(), 2u);
  EXPECT_EQ(s.h.size(), 2u);
}

TEST(Config, ScenarioOverrides) {
  const RunConfig cfg = parse_config_text(R"({"spec_version": "1", "seed": 7, "output": "csv",
    "scenario": {"sim3_alpha1": [0, 0, 0, 0, 0],
                 "custom": {"gaussian_mean": [1], "gaussian_cov": [[2]], "bernoulli_p": [0.5],
                            "beta1": [1, 2, 3], "beta0": [0, 1, 1]}}})");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.output, ReportFormat::csv);
  ASSERT_TRUE(cfg.scenario.sim3_alpha1.has_value());
  EXPECT_EQ(cfg.scenario.sim3_alpha1->size(), 5);
  ASSERT_TRUE(cfg.scenario.custom.has_value());
  EXPECT_DOUBLE_EQ(custom_theta(*cfg.scenario.custom), 1.0 + 1.0 + 2.0 * 0.5);
  EXPECT_EQ(error_of([] {
              parse_config_text(R"({"spec_version": "1", "scenario": {"custom":
                {"gaussian_mean": [0], "gaussian_cov": [[1]], "beta1": [1, 1, 1], "beta0": [1, 1]}}})");
            }).code(),
            ErrorCode::ConfigError);
  EXPECT_EQ(error_of([] {
              parse_config_text(R"({"spec_version": "1", "scenario": {"custom":
                {"gaussian_mean": [0], "gaussian_cov": [[1, 0]], "beta1": [1, 1], "beta0": [1, 1]}}})");
            }).code(),
            ErrorCode::ConfigError);
}

TEST(Report, MarkdownEstimateRow) {
  const std::string md = write_report(std::vector<EstimateRow>{{"ELW-Linear", 49.824, 5.2, 9.58154, 1.63}}, ReportFormat::markdown);
  std::istringstream in(md);
  std::string header, sep, row;
  std::getline(in, header);
  std::getline(in, sep);
  std::getline(in, row);
  EXPECT_NE(header.find("Boot.SE"), std::string::npos);
  EXPECT_NE(sep.find("---:"), std::string::npos);
  EXPECT_NE(row.find(" 49.824 |"), std::string::npos) << row;
  EXPECT_NE(row.find("5.200"), std::string::npos);
  EXPECT_NE(row.find("9.582"), std::string::npos);
  EXPECT_EQ(std::count(row.begin(), row.end(), '|'), 6);
}

TEST(Report, DeclarationOrderAndNa) {
  const std::string csv = write_report(std::vector<EstimateRow>{{"B", 1.0}, {"A", -0.0001}}, ReportFormat::csv);
  EXPECT_EQ(csv,
            "Estimator,Estimate,Boot.SE,Test stat.,Rel.eff.\n"
            "B,1.000,NA,NA,NA\n"
            "A,0.000,NA,NA,NA\n");
  EXPECT_EQ(format_fixed3(std::numeric_limits<double>::infinity()), "Inf");
  EXPECT_EQ(format_fixed3(2.0004), "2.000");
  EXPECT_EQ(format_fixed3(2.0006), "2.001");
  EXPECT_EQ(format_fixed3(-1.23456), "-1.235");
}

TEST(Report, CsvReparsesToThreeDecimals) {
  const std::vector<MetricsRow> rows{{"E1", 0.01234, 0.6, 0.951, 0.427, 0.65, 0.02, 1000, 0, ""},
                                     {"E2", -3.14159, 2.0, 0.9, 10.5, 1.0, 0.03, 998, 2, "x"}};
  const auto recs = parse_csv_records(write_report(rows, ReportFormat::csv));
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0], (std::vector<std::string>{"Estimator", "Bias", "Ave.Boot.SE", "Cov.prob.boot.", "MSE", "Reps"}));
  EXPECT_EQ(recs[1][0], "E1");
  EXPECT_NEAR(std::stod(recs[2][1]), -3.14159, 5e-4);
  EXPECT_NEAR(std::stod(recs[1][4]), 0.427, 5e-4);
  EXPECT_EQ(recs[2][5], "998");
}

TEST(Report, LocaleIndependent) {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") == nullptr) std::setlocale(LC_NUMERIC, "fr_FR.UTF-8");
  EXPECT_EQ(format_fixed3(1.5), "1.500");
  const TrialData d = parse_trial_csv("w,y,x1\n1,2.5,0.25\n1,1,1\n0,1,1\n0,1,1\n", schema_x({"x1"}));
  EXPECT_DOUBLE_EQ(d.y()[0], 2.5);
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(Smoke, ActgStyleDataset) {
  // Synthetic trial with a baseline measurement and a follow-up outcome.
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  std::string text = "arm,cd4_20,age,wtkg,cd40\n";
  for (int i = 0; i < 600; ++i) {
    const int w = coin(rng) ? 1 : 0;
    const double age = 35 + 8 * z(rng);
    const double wt = 75 + 12 * z(rng);
    const double cd40 = 350 + 110 * z(rng);
    const double y = 50 + 0.85 * cd40 + 0.5 * age + 50 * w + 60 * z(rng);
    text += std::to_string(w) + "," + std::to_string(y) + "," + std::to_string(age) + "," + std::to_string(wt) +
            "," + std::to_string(cd40) + "\n";
  }
  const RunConfig cfg = parse_config_text(R"({
    "spec_version": "1",
    "schema": {"treatment": "arm", "outcome": "cd4_20", "covariates": ["age", "wtkg", "cd40"], "baseline": "cd40"},
    "estimators": [
      {"name": "Unadjusted", "method": "unadjusted"},
      {"name": "Change score", "method": "change_score"},
      {"name": "ELW-Linear", "method": "elw",
       "models": [{"arm": "treated", "family": "linear", "features": ["age", "wtkg", "cd40"]},
                  {"arm": "control", "family": "linear", "features": ["age", "wtkg", "cd40"]}]}]})");
  const TrialData d = parse_trial_csv(text, *cfg.schema);
  const auto specs = resolve_estimators(cfg.estimators, cfg.schema->covariate_columns, cfg.schema->baseline_column);
  EXPECT_EQ(specs[1].baseline_column, 2);
  for (const EstimatorSpec& s : specs) {
    const double theta = run_estimator(d, s, {}).theta_hat;
    EXPECT_NEAR(theta, 50.0, 25.0) << s.name;
  }
}
