#pragma once

// Config-driven replication runs, convergence sweeps and report emission.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvsim/diagnostics.hpp"
#include "fvsim/engine.hpp"
#include "fvsim/estimators.hpp"
#include "fvsim/models.hpp"

namespace fvsim {

struct TestFunctionConfig {
  /// "one", "indicator" (of `state`) or "position" (component `component`).
  std::string name = "one";
  std::size_t state = 0;
  int component = 0;
  std::optional<double> sup_norm;
};

struct RebirthConfig {
  /// "fleming_viot", "fleming_viot_custom", "fixed_point", "boundary_hugging", "survivor_squeezing".
  std::string kind = "fleming_viot";
  std::vector<double> x0;
  double epsilon = 1e-9;
  double factor = 0.5;
};

/// Deterministic start shared by all particles; absent means the model's
/// default initial law.
struct InitialConfig {
  std::optional<std::size_t> state;
  std::vector<double> position;
  std::vector<double> environment;
};

struct OutputConfig {
  std::string report;
  /// JSON lines of the first replication's events.
  std::string event_log;
  /// Phi trace CSV of the first replication.
  std::string phi_trace;
  /// Pair-proximity trace CSV of the first replication.
  std::string proximity_trace;
};

struct PhiMonitorConfig {
  bool enabled = false;
  bool unit_pi = true;
  std::size_t stride = 1;
  std::vector<double> levels = default_phi_levels();
};

struct HypothesisConfig {
  std::size_t configurations = 1000;
  std::size_t trials = 1;
  double min_distance = 0.0;
  /// h(x) = h_scale * x.
  double h_scale = 1.0;
};

struct RunConfig {
  std::string model;
  ModelParams model_params;
  std::size_t N = 0;
  double T = 0.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::size_t replications = 1;
  RebirthConfig rebirth;
  std::optional<ExplosionGuard> guard;
  TestFunctionConfig test_function;
  InitialConfig initial;
  bool bridge = false;
  OutputConfig outputs;
  PhiMonitorConfig phi_monitor;
  HypothesisConfig hypothesis;
  /// The parsed document, echoed in reports.
  nlohmann::json source;
};

/// Throws ConfigError on a missing or ill-typed field or a broken invariant
/// (N >= 2, T > 0, 0 < dt < T, replications >= 1).
RunConfig parse_run_config(const nlohmann::json& document);
RunConfig load_run_config(const std::string& path);

/// Catalog model, rebirth measure, test function and initial configuration
/// resolved from a config. Unknown names throw ConfigError.
struct ResolvedRun {
  ModelCatalogEntry model;
  RebirthMeasure rebirth;
  TestFunction f;
  std::optional<ParticleState> start;
};
ResolvedRun resolve(const RunConfig& config);

/// Initial configuration of replication `seed`.
std::vector<ParticleState> initial_configuration(const ResolvedRun& run, std::size_t n, std::uint64_t seed);

struct ReplicationResult {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Completed;
  double mu = 0.0;
  double nu = 0.0;
  double survival = 1.0;
  std::uint64_t total_rebirths = 0;
  double end_time = 0.0;
  std::optional<double> max_phi;
  std::size_t phi_sentinels = 0;
};

struct Summary {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Pairwise summation.
double pairwise_sum(const std::vector<double>& values);
/// Mean and sample standard deviation over sqrt(n); std_error is 0 for n < 2.
Summary summarize(const std::vector<double>& values);

struct RunReport {
  std::vector<ReplicationResult> replications;
  std::size_t completed = 0, failed = 0, guard_tripped = 0;
  /// Over completed replications only.
  Summary mu, nu, survival, total_rebirths;
  std::optional<ReferenceValue> oracle;
  std::vector<double> phi_exceedance;

  /// 0 all completed, 2 any failure, 3 any guard trip (failure wins).
  int exit_code() const;
};

/// Replications with seeds seed, seed + 1, ... on up to `workers` threads.
/// Aggregates do not depend on the worker count.
RunReport run(const RunConfig& config, std::size_t workers = 1);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
/// Least squares y = intercept + slope x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct SweepRow {
  std::size_t N = 0;
  double mean_abs_error = 0.0;  // of nu against the unconditioned oracle value
  double std_error = 0.0;
  double mu_mean_abs_error = 0.0;
  double mu_std_error = 0.0;
  double mean_A = 0.0;
  double mean_survival_estimate = 0.0;
  double oracle_value = 0.0;
  /// (1 + sqrt 2) |f| / sqrt N.
  double l2_bound = 0.0;
  /// 2 (1 + sqrt 2) |f| / sqrt N * sqrt E(1/P^2); only for deterministic starts.
  std::optional<double> l1_bound;
  std::size_t completed = 0, failed = 0, guard_tripped = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  LinearFit rate_fit;
  int exit_code = 0;
};

/// Throws SweepUnsupported for models without a reference solution and
/// ConfigError for fewer than three distinct N.
SweepResult sweep(const RunConfig& config, std::vector<std::size_t> n_list, std::size_t workers = 1);

struct DtRow {
  double dt = 0.0;
  Summary survival;
  Summary nu;
  Summary mu;
};

struct DtStudy {
  std::vector<DtRow> rows;
  std::optional<ReferenceValue> oracle;
  /// A consecutive change of the survival estimate against the overall
  /// direction by more than two combined standard errors.
  bool non_monotone = false;
  int exit_code = 0;
};

/// Throws ConfigError unless dt_list is strictly decreasing with >= 3 values.
DtStudy dt_study(const RunConfig& config, const std::vector<double>& dt_list, std::size_t workers = 1);

HypothesisReport check_hypothesis(const RunConfig& config);

// Report JSON. Every report has config_echo, timestamp, mode and aggregates.
nlohmann::json report_json(const RunConfig& config, const RunReport& report);
nlohmann::json report_json(const RunConfig& config, const SweepResult& result);
nlohmann::json report_json(const RunConfig& config, const DtStudy& study);
nlohmann::json report_json(const RunConfig& config, const HypothesisReport& report);

/// Writes the first replication's event log and traces requested in `outputs`.
void write_first_replication_outputs(const RunConfig& config);

}  // namespace fvsim
