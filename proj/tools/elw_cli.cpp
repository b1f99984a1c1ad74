// elw: ELW treatment-effect estimation on CSV data and simulation studies.
//
//   elw estimate --data trial.csv --config run.json [--bootstrap B] [--seed S]
//   elw simulate --scenario sim2-linear --n 400 --delta 0.5 --reps 1000 ...
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elw/elw.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr std::uint64_t kDefaultSeed = 20240501;

struct CommonFlags {
  std::optional<int> bootstrap;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string format;
  std::string out;
  std::string config;
};

std::uint64_t pick_seed(const CommonFlags& flags, const std::optional<std::uint64_t>& config_seed) {
  if (flags.seed) return *flags.seed;
  if (config_seed) return *config_seed;
  if (const char* env = std::getenv("ELW_SEED"); env && *env) {
    std::uint64_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw elw::Error(elw::ErrorCode::InvalidArgument, "ELW_SEED is not a non-negative integer: " + s);
    }
    return v;
  }
  return kDefaultSeed;
}

elw::ReportFormat pick_format(const CommonFlags& flags, const std::optional<elw::ReportFormat>& config_format) {
  if (!flags.format.empty()) return *elw::parse_format(flags.format);
  return config_format.value_or(elw::ReportFormat::markdown);
}

void emit(const std::string& report, const CommonFlags& flags) {
  std::cout << report;
  std::cout.flush();
  if (flags.out.empty()) return;
  std::ofstream f(flags.out, std::ios::binary);
  f << report;
  if (!f) throw elw::Error(elw::ErrorCode::InvalidArgument, "cannot write " + flags.out);
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--bootstrap", flags.bootstrap, "Bootstrap replicates (0 disables)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", flags.seed, "Random seed (falls back to the config, then ELW_SEED)");
  cmd->add_option("--threads", flags.threads, "Worker threads; results do not depend on it")
      ->check(CLI::Range(1, 1024));
  cmd->add_option("--format", flags.format, "Report format")->check(CLI::IsMember({"csv", "markdown"}));
  cmd->add_option("--out", flags.out, "Also write the report to this file");
}

int run_estimate(const std::string& data_path, const CommonFlags& flags) {
  const elw::RunConfig cfg = elw::parse_config(flags.config);
  if (!cfg.schema) throw elw::Error(elw::ErrorCode::ConfigError, "/: estimate needs a 'schema' section");
  if (cfg.estimators.empty()) {
    throw elw::Error(elw::ErrorCode::ConfigError, "/estimators: at least one estimator is required");
  }
  const std::vector<elw::EstimatorSpec> specs =
      elw::resolve_estimators(cfg.estimators, cfg.schema->covariate_columns, cfg.schema->baseline_column);
  const elw::TrialData data = elw::load_csv(data_path, *cfg.schema);
  std::cerr << "loaded " << data.size() << " subjects (m=" << data.m() << ", n=" << data.n()
            << ", observed " << data.m_observed() << "/" << data.n_observed() << ")\n";

  std::vector<elw::EstimateRow> rows;
  for (const auto& spec : specs) {
    const elw::EstimateResult res = elw::run_estimator(data, spec, cfg.solver);
    for (const auto& w : res.warnings) std::cerr << "warning: " << spec.name << ": " << w << "\n";
    for (const auto* sol : {&res.treated, &res.control}) {
      if (*sol && (*sol)->augmented) {
        std::cerr << "note: " << spec.name << ": hull violation, artificial points added\n";
      }
    }
    rows.push_back({spec.name, res.theta_hat});
  }

  const int b = flags.bootstrap.value_or(cfg.bootstrap_replicates);
  if (b == 1) throw elw::Error(elw::ErrorCode::InvalidArgument, "bootstrap needs 0 or at least 2 replicates");
  if (b > 0) {
    std::vector<elw::EstimatorSpec> boot_specs = specs;
    std::size_t unadjusted = boot_specs.size();
    for (std::size_t k = 0; k < specs.size(); ++k) {
      if (specs[k].method == elw::Method::unadjusted) {
        unadjusted = k;
        break;
      }
    }
    if (unadjusted == boot_specs.size()) boot_specs.push_back({"Unadjusted", elw::Method::unadjusted, {}, -1});

    elw::BootstrapSettings bs;
    bs.replicates = b;
    bs.seed = pick_seed(flags, cfg.seed);
    bs.stratified = cfg.bootstrap_stratified;
    bs.threads = flags.threads;
    const auto boot = elw::bootstrap_se(data, boot_specs, cfg.solver, bs);
    for (std::size_t k = 0; k < boot.size(); ++k) {
      if (!boot[k].usable()) {
        throw elw::Error(elw::ErrorCode::TooManyFailures,
                         boot_specs[k].name + ": " + std::to_string(boot[k].failures) + " of " +
                             std::to_string(b) + " bootstrap replicates failed");
      }
      if (boot[k].failures > 0) {
        std::cerr << "note: " << boot_specs[k].name << ": " << boot[k].failures
                  << " bootstrap replicates failed and were dropped\n";
      }
    }
    const double se_unadj = boot[unadjusted].se;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rows[k].se = boot[k].se;
      rows[k].test_stat = elw::wald(rows[k].estimate, boot[k].se).test_stat;
      rows[k].rel_eff = boot[k].se > 0.0 ? se_unadj * se_unadj / (boot[k].se * boot[k].se)
                                         : std::numeric_limits<double>::quiet_NaN();
    }
  }
  emit(elw::write_report(rows, pick_format(flags, cfg.output)), flags);
  return 0;
}

struct SimulateFlags {
  std::string scenario;
  int n = 400;
  double delta = 0.5;
  int reps = 1000;
  bool stratified = false;
};

int run_simulate(const SimulateFlags& sf, const CommonFlags& flags) {
  const auto scenario = elw::parse_scenario(sf.scenario);
  if (!scenario) throw elw::Error(elw::ErrorCode::InvalidArgument, "unknown scenario '" + sf.scenario + "'");
  std::optional<elw::RunConfig> run;
  if (!flags.config.empty()) run = elw::parse_config(flags.config);

  elw::ScenarioConfig cfg;
  cfg.scenario = *scenario;
  cfg.n = sf.n;
  cfg.delta = sf.delta;
  cfg.reps = sf.reps;
  cfg.threads = flags.threads;
  cfg.bootstrap_B = flags.bootstrap.value_or(run ? run->bootstrap_replicates : 500);
  cfg.stratified = sf.stratified || (run && run->bootstrap_stratified);
  cfg.seed = pick_seed(flags, run ? run->seed : std::nullopt);
  elw::SolverOptions solver;
  if (run) {
    solver = run->solver;
    if (run->scenario.sim3_alpha1) cfg.sim3_alpha1 = *run->scenario.sim3_alpha1;
    if (run->scenario.sim3_alpha0) cfg.sim3_alpha0 = *run->scenario.sim3_alpha0;
    if (run->scenario.custom) cfg.custom = *run->scenario.custom;
  }
  if (cfg.scenario == elw::Scenario::custom && !(run && run->scenario.custom)) {
    throw elw::Error(elw::ErrorCode::ConfigError, "/scenario/custom: the custom scenario needs a design");
  }
  cfg.validate();

  std::vector<elw::EstimatorSpec> specs =
      run && !run->estimators.empty()
          ? elw::resolve_estimators(run->estimators, elw::scenario_covariates(cfg))
          : elw::default_suite(cfg);

  std::cerr << "simulating " << elw::to_string(cfg.scenario) << ": n=" << cfg.n << ", reps=" << cfg.reps
            << ", bootstrap=" << cfg.bootstrap_B << ", seed=" << cfg.seed << "\n";
  const auto rows = elw::run_monte_carlo(cfg, specs, solver);
  for (const auto& r : rows) {
    if (r.failures > 0) {
      std::cerr << "note: " << r.estimator << ": " << r.failures << " of " << cfg.reps
                << " replicates failed (first: " << r.first_error << ")\n";
    }
  }
  emit(elw::write_report(rows, pick_format(flags, run ? run->output : std::nullopt)), flags);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ELW average treatment effect estimation"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data_path;
  auto* estimate = app.add_subcommand("estimate", "Estimate treatment effects on a CSV dataset");
  estimate->add_option("--data", data_path, "Trial data CSV")->required();
  estimate->add_option("--config", flags.config, "Run configuration (JSON)")->required();
  add_common(estimate, flags);

  SimulateFlags sf;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo simulation study");
  simulate->add_option("--scenario", sf.scenario, "sim2-linear | sim2-nonlinear | sim3 | sim4 | custom")
      ->required();
  simulate->add_option("--n", sf.n, "Subjects per dataset");
  simulate->add_option("--delta", sf.delta, "Treatment probability");
  simulate->add_option("--reps", sf.reps, "Monte Carlo replicates");
  simulate->add_option("--config", flags.config, "Estimators, solver and scenario parameters (JSON)");
  simulate->add_flag("--stratified", sf.stratified, "Resample within arms in the bootstrap");
  add_common(simulate, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (estimate->parsed()) return run_estimate(data_path, flags);
    return run_simulate(sf, flags);
  } catch (const elw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_numeric() ? kExitNumeric : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
