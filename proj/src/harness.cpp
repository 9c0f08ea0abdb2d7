#include "fvsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "fvsim/errors.hpp"
#include "fvsim/kernels.hpp"
#include "fvsim/oracle.hpp"

namespace fvsim {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return get_or<T>(obj, key, T{});
}

std::vector<double> number_list(const json& value, const std::string& key) {
  if (value.is_number()) return {value.get<double>()};
  if (!value.is_array()) throw ConfigError("field '" + key + "' must be a number or a list of numbers");
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) throw ConfigError("field '" + key + "' must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

const json& object_field(const json& obj, const char* key) {
  static const json empty = json::object();
  if (!obj.contains(key) || obj.at(key).is_null()) return empty;
  if (!obj.at(key).is_object()) throw ConfigError(std::string("field '") + key + "' must be an object");
  return obj.at(key);
}

std::uint64_t replication_seed(std::uint64_t base, std::size_t r) { return base + r; }

// ---------------------------------------------------------------------------
// Replications

struct ReplicationSetup {
  const ResolvedRun* resolved;
  const RunConfig* config;
  std::size_t N;
  double dt;
  bool phi;
};

ReplicationResult replicate(const ReplicationSetup& setup, std::uint64_t seed) {
  const ResolvedRun& run = *setup.resolved;
  SimulationOptions options;
  options.horizon = setup.config->T;
  options.dt = setup.dt;
  options.seed = seed;
  options.guard = setup.config->guard;
  options.bridge = setup.config->bridge;
  options.log_events = false;

  std::optional<PairPhiRecorder> recorder;
  if (setup.phi && !run.model.discrete()) {
    recorder.emplace(run.model.diffusion(), setup.config->phi_monitor.unit_pi, setup.config->phi_monitor.stride);
    options.on_step = [&](double t, const ParticleSystem& sys) { recorder->observe(t, sys); };
  }

  const SimulationResult result =
      simulate(run.model.spec, run.rebirth, initial_configuration(run, setup.N, seed), options);

  ReplicationResult out;
  out.seed = seed;
  out.outcome = result.outcome;
  out.end_time = result.system.clock;
  out.total_rebirths = result.system.total_rebirths;
  out.mu = mu_estimate(result.system, run.f.evaluate);
  out.survival = survival_estimate(result.system);
  out.nu = out.survival * out.mu;
  if (recorder) {
    const PhiTrace trace = recorder->finish(setup.config->phi_monitor.levels);
    out.max_phi = trace.summary.max_phi;
    out.phi_sentinels = trace.summary.sentinel_count;
  }
  return out;
}

std::vector<ReplicationResult> replicate_all(const ReplicationSetup& setup, std::size_t count, std::size_t workers) {
  std::vector<ReplicationResult> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < count;) {
      try {
        results[r] = replicate(setup, replication_seed(setup.config->seed, r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, count);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

int exit_code_of(std::size_t failed, std::size_t guard_tripped) {
  if (failed > 0) return 2;
  if (guard_tripped > 0) return 3;
  return 0;
}

std::optional<ReferenceValue> oracle_value(const ResolvedRun& run, double T) {
  if (!run.model.known_solution) return std::nullopt;
  return run.model.known_solution(run.start, T, run.f.evaluate);
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std_error", s.std_error}}; }

json number_or_null(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

json reference_json(const std::optional<ReferenceValue>& ref) {
  if (!ref) return nullptr;
  return {{"unconditioned", ref->unconditioned}, {"survival", ref->survival}, {"conditional", ref->conditional}};
}

json report_header(const RunConfig& config, const char* mode) {
  return {{"config_echo", config.source}, {"timestamp", timestamp_utc()}, {"mode", mode}};
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.source = doc;
  c.model = require<std::string>(doc, "model");
  for (const auto& [key, value] : object_field(doc, "model_params").items())
    c.model_params[key] = number_list(value, key);

  const auto n = require<long long>(doc, "N");
  if (n < 2) throw ConfigError("N must be at least 2");
  c.N = static_cast<std::size_t>(n);
  c.T = require<double>(doc, "T");
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  c.dt = get_or<double>(doc, "dt", std::min(1e-3, c.T / 10.0));
  if (!(c.dt > 0.0 && c.dt < c.T)) throw ConfigError("dt must satisfy 0 < dt < T");
  c.seed = get_or<std::uint64_t>(doc, "seed", 0);
  const auto m = get_or<long long>(doc, "replications", 1);
  if (m < 1) throw ConfigError("replications must be at least 1");
  c.replications = static_cast<std::size_t>(m);
  c.bridge = get_or<bool>(doc, "bridge", false);

  if (doc.contains("rebirth") && doc.at("rebirth").is_string()) {
    c.rebirth.kind = doc.at("rebirth").get<std::string>();
  } else {
    const json& r = object_field(doc, "rebirth");
    c.rebirth.kind = get_or<std::string>(r, "kind", "fleming_viot");
    if (r.contains("x0")) c.rebirth.x0 = number_list(r.at("x0"), "x0");
    c.rebirth.epsilon = get_or<double>(r, "epsilon", c.rebirth.epsilon);
    c.rebirth.factor = get_or<double>(r, "factor", c.rebirth.factor);
  }

  if (doc.contains("guard") && !doc.at("guard").is_null()) {
    const json& g = object_field(doc, "guard");
    ExplosionGuard guard = ExplosionGuard::defaults(c.N);
    const auto cap = get_or<long long>(g, "cap", static_cast<long long>(guard.cap));
    if (cap < 1) throw ConfigError("guard cap must be at least 1");
    guard.cap = static_cast<std::size_t>(cap);
    guard.window = get_or<double>(g, "window", guard.window);
    if (!(guard.window > 0.0)) throw ConfigError("guard window must be positive");
    c.guard = guard;
  }

  if (doc.contains("test_function") && doc.at("test_function").is_string()) {
    c.test_function.name = doc.at("test_function").get<std::string>();
  } else {
    const json& f = object_field(doc, "test_function");
    c.test_function.name = get_or<std::string>(f, "name", "one");
    c.test_function.state = get_or<std::size_t>(f, "state", 0);
    c.test_function.component = get_or<int>(f, "component", 0);
    if (f.contains("sup_norm")) c.test_function.sup_norm = get_or<double>(f, "sup_norm", 1.0);
  }

  const json& init = object_field(doc, "initial");
  if (init.contains("state")) c.initial.state = get_or<std::size_t>(init, "state", 0);
  if (init.contains("position")) c.initial.position = number_list(init.at("position"), "position");
  if (init.contains("environment")) c.initial.environment = number_list(init.at("environment"), "environment");

  const json& out = object_field(doc, "outputs");
  c.outputs.report = get_or<std::string>(out, "report", "");
  c.outputs.event_log = get_or<std::string>(out, "event_log", "");
  c.outputs.phi_trace = get_or<std::string>(out, "phi_trace", "");
  c.outputs.proximity_trace = get_or<std::string>(out, "proximity_trace", "");

  const json& phi = object_field(doc, "phi_monitor");
  c.phi_monitor.enabled = get_or<bool>(phi, "enabled", false);
  c.phi_monitor.unit_pi = get_or<bool>(phi, "unit_pi", true);
  c.phi_monitor.stride = std::max<std::size_t>(1, get_or<std::size_t>(phi, "stride", 1));
  if (phi.contains("levels")) c.phi_monitor.levels = number_list(phi.at("levels"), "levels");

  const json& hyp = object_field(doc, "hypothesis");
  c.hypothesis.configurations = get_or<std::size_t>(hyp, "configurations", c.hypothesis.configurations);
  c.hypothesis.trials = std::max<std::size_t>(1, get_or<std::size_t>(hyp, "trials", c.hypothesis.trials));
  c.hypothesis.min_distance = get_or<double>(hyp, "min_distance", c.hypothesis.min_distance);
  c.hypothesis.h_scale = get_or<double>(hyp, "h_scale", c.hypothesis.h_scale);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return parse_run_config(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

ResolvedRun resolve(const RunConfig& config) {
  ResolvedRun run;
  try {
    run.model = builtin_catalog().make(config.model, config.model_params);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid model parameters: ") + e.what());
  }

  const auto* diffusion = std::get_if<DiffusionSpec>(&run.model.spec);
  const std::string& kind = config.rebirth.kind;
  if (kind == "fleming_viot") {
    run.rebirth = FlemingViotUniform{};
  } else if (kind == "fleming_viot_custom") {
    run.rebirth = fleming_viot_as_custom();
  } else if (kind == "fixed_point" || kind == "boundary_hugging" || kind == "survivor_squeezing") {
    if (!diffusion) throw ConfigError("rebirth kernel '" + kind + "' needs a continuous model");
    if (kind == "fixed_point") {
      if (static_cast<int>(config.rebirth.x0.size()) != diffusion->dim_position)
        throw ConfigError("fixed_point kernel needs x0 of the position dimension");
      Vec x0(diffusion->dim_position);
      for (int k = 0; k < diffusion->dim_position; ++k) x0(k) = config.rebirth.x0[k];
      if (!diffusion->domain.contains(x0)) throw ConfigError("fixed_point x0 must lie inside the domain");
      run.rebirth = fixed_point_kernel(x0);
    } else if (kind == "boundary_hugging") {
      run.rebirth = boundary_hugging_kernel(diffusion->domain, config.rebirth.epsilon);
    } else {
      if (!(config.rebirth.factor > 0.0 && config.rebirth.factor < 1.0))
        throw ConfigError("survivor_squeezing factor must lie in (0, 1)");
      run.rebirth = survivor_squeezing_kernel(diffusion->domain, config.rebirth.factor);
    }
  } else {
    throw ConfigError("unknown rebirth kernel '" + kind + "'");
  }

  const TestFunctionConfig& tf = config.test_function;
  if (tf.name == "one") {
    run.f = constant_one();
  } else if (tf.name == "indicator") {
    if (!run.model.discrete()) throw ConfigError("indicator test function needs a chain model");
    if (tf.state >= run.model.ctmc().n_states()) throw ConfigError("indicator state out of range");
    run.f = indicator_of_state(tf.state);
  } else if (tf.name == "position") {
    if (!diffusion || tf.component < 0 || tf.component >= diffusion->dim_position)
      throw ConfigError("position test function needs a valid component of a continuous model");
    double bound = 0.0;
    if (tf.sup_norm) {
      bound = *tf.sup_norm;
    } else if (auto b = diffusion->domain.one_dimensional_bounds();
               b && std::isfinite(b->first) && std::isfinite(b->second)) {
      bound = std::max(std::abs(b->first), std::abs(b->second));
    } else {
      throw ConfigError("position test function on an unbounded domain needs sup_norm");
    }
    run.f = position_component(tf.component, bound);
  } else {
    throw ConfigError("unknown test function '" + tf.name + "'");
  }
  if (tf.sup_norm && tf.name != "position") run.f.sup_norm = *tf.sup_norm;

  const InitialConfig& init = config.initial;
  if (init.state) {
    if (!run.model.discrete() || *init.state >= run.model.ctmc().n_states())
      throw ConfigError("initial state needs a chain model and a valid index");
    run.start = Discrete{*init.state};
  } else if (!init.position.empty()) {
    if (!diffusion || static_cast<int>(init.position.size()) != diffusion->dim_position ||
        static_cast<int>(init.environment.size()) != diffusion->dim_env)
      throw ConfigError("initial position/environment dimensions do not match the model");
    Continuous c{Vec(diffusion->dim_position), Vec(diffusion->dim_env)};
    for (int k = 0; k < diffusion->dim_position; ++k) c.position(k) = init.position[k];
    for (int k = 0; k < diffusion->dim_env; ++k) c.environment(k) = init.environment[k];
    if (!diffusion->domain.contains(c.position)) throw ConfigError("initial position must lie inside the domain");
    run.start = c;
  }
  return run;
}

std::vector<ParticleState> initial_configuration(const ResolvedRun& run, std::size_t n, std::uint64_t seed) {
  if (run.start) return std::vector<ParticleState>(n, *run.start);
  Stream rng(stream_key(seed, ~std::uint64_t{0} - 1, 2));
  std::vector<ParticleState> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(run.model.initial_sampler(rng));
  return out;
}

double pairwise_sum(const std::vector<double>& values) {
  auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (std::size_t k = lo; k < hi; ++k) s += values[k];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return rec(rec, 0, values.size());
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  const auto n = values.size();
  if (n == 0) return s;
  s.mean = pairwise_sum(values) / static_cast<double>(n);
  if (n < 2) return s;
  std::vector<double> sq(n);
  for (std::size_t k = 0; k < n; ++k) sq[k] = (values[k] - s.mean) * (values[k] - s.mean);
  s.std_error = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n));
  return s;
}

int RunReport::exit_code() const { return exit_code_of(failed, guard_tripped); }

RunReport run(const RunConfig& config, std::size_t workers) {
  const ResolvedRun resolved = resolve(config);
  const ReplicationSetup setup{&resolved, &config, config.N, config.dt, config.phi_monitor.enabled};

  RunReport report;
  report.replications = replicate_all(setup, config.replications, workers);
  std::vector<double> mu, nu, survival, rebirths, max_phis;
  for (const auto& r : report.replications) {
    if (r.outcome == Outcome::Failed) ++report.failed;
    if (r.outcome == Outcome::GuardTripped) ++report.guard_tripped;
    if (r.max_phi) max_phis.push_back(*r.max_phi);
    if (r.outcome != Outcome::Completed) continue;
    ++report.completed;
    mu.push_back(r.mu);
    nu.push_back(r.nu);
    survival.push_back(r.survival);
    rebirths.push_back(static_cast<double>(r.total_rebirths));
  }
  report.mu = summarize(mu);
  report.nu = summarize(nu);
  report.survival = summarize(survival);
  report.total_rebirths = summarize(rebirths);
  report.oracle = oracle_value(resolved, config.T);
  if (config.phi_monitor.enabled && !resolved.model.discrete())
    report.phi_exceedance = exceedance_frequencies(max_phis, config.phi_monitor.levels);
  return report;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("line fit needs at least two paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) mx += x[k], my += y[k];
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0) throw ConfigError("line fit needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

SweepResult sweep(const RunConfig& config, std::vector<std::size_t> n_list, std::size_t workers) {
  const ResolvedRun resolved = resolve(config);
  if (!resolved.model.known_solution) throw SweepUnsupported("model '" + config.model + "' has no reference solution");
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  if (n_list.size() < 3) throw ConfigError("sweep needs at least three distinct N");
  if (n_list.front() < 2) throw ConfigError("sweep N values must be at least 2");

  const ReferenceValue ref = *oracle_value(resolved, config.T);
  // E(1/P^2) for a deterministic start: P is the survival probability itself.
  std::optional<double> expectation_factor;
  if (resolved.start) expectation_factor = 1.0 / (ref.survival * ref.survival);

  SweepResult result;
  std::size_t failed = 0, tripped = 0;
  std::vector<double> log_n, log_err;
  for (const std::size_t n : n_list) {
    const ReplicationSetup setup{&resolved, &config, n, config.dt, false};
    const auto reps = replicate_all(setup, config.replications, workers);
    SweepRow row;
    row.N = n;
    row.oracle_value = ref.unconditioned;
    std::vector<double> err, mu_err, rebirths, survival;
    for (const auto& r : reps) {
      if (r.outcome == Outcome::Failed) ++row.failed;
      if (r.outcome == Outcome::GuardTripped) ++row.guard_tripped;
      if (r.outcome != Outcome::Completed) continue;
      ++row.completed;
      err.push_back(std::abs(r.nu - ref.unconditioned));
      mu_err.push_back(std::abs(r.mu - ref.conditional));
      rebirths.push_back(static_cast<double>(r.total_rebirths));
      survival.push_back(r.survival);
    }
    const Summary e = summarize(err), me = summarize(mu_err);
    row.mean_abs_error = e.mean;
    row.std_error = e.std_error;
    row.mu_mean_abs_error = me.mean;
    row.mu_std_error = me.std_error;
    row.mean_A = summarize(rebirths).mean;
    row.mean_survival_estimate = summarize(survival).mean;
    const double scale = resolved.f.sup_norm / std::sqrt(static_cast<double>(n));
    row.l2_bound = (1.0 + std::numbers::sqrt2) * scale;
    if (expectation_factor) row.l1_bound = 2.0 * (1.0 + std::numbers::sqrt2) * scale * std::sqrt(*expectation_factor);
    failed += row.failed;
    tripped += row.guard_tripped;
    if (row.mean_abs_error > 0.0) {
      log_n.push_back(std::log(static_cast<double>(n)));
      log_err.push_back(std::log(row.mean_abs_error));
    }
    result.rows.push_back(row);
  }
  if (log_n.size() >= 2) result.rate_fit = fit_line(log_n, log_err);
  result.exit_code = exit_code_of(failed, tripped);
  return result;
}

DtStudy dt_study(const RunConfig& config, const std::vector<double>& dt_list, std::size_t workers) {
  if (dt_list.size() < 3) throw ConfigError("dt study needs at least three step sizes");
  for (std::size_t k = 0; k < dt_list.size(); ++k) {
    if (!(dt_list[k] > 0.0 && dt_list[k] < config.T)) throw ConfigError("dt values must lie in (0, T)");
    if (k > 0 && !(dt_list[k] < dt_list[k - 1])) throw ConfigError("dt list must be strictly decreasing");
  }
  const ResolvedRun resolved = resolve(config);
  DtStudy study;
  study.oracle = oracle_value(resolved, config.T);
  std::size_t failed = 0, tripped = 0;
  for (const double dt : dt_list) {
    const ReplicationSetup setup{&resolved, &config, config.N, dt, false};
    const auto reps = replicate_all(setup, config.replications, workers);
    std::vector<double> survival, nu, mu;
    for (const auto& r : reps) {
      if (r.outcome == Outcome::Failed) ++failed;
      if (r.outcome == Outcome::GuardTripped) ++tripped;
      if (r.outcome != Outcome::Completed) continue;
      survival.push_back(r.survival);
      nu.push_back(r.nu);
      mu.push_back(r.mu);
    }
    study.rows.push_back({dt, summarize(survival), summarize(nu), summarize(mu)});
  }
  const double overall = study.rows.back().survival.mean - study.rows.front().survival.mean;
  for (std::size_t k = 1; k < study.rows.size(); ++k) {
    const Summary& a = study.rows[k - 1].survival;
    const Summary& b = study.rows[k].survival;
    const double change = b.mean - a.mean;
    const double tolerance = 2.0 * std::hypot(a.std_error, b.std_error);
    if ((overall >= 0.0 && change < -tolerance) || (overall < 0.0 && change > tolerance)) study.non_monotone = true;
  }
  study.exit_code = exit_code_of(failed, tripped);
  return study;
}

HypothesisReport check_hypothesis(const RunConfig& config) {
  const ResolvedRun resolved = resolve(config);
  if (resolved.model.discrete()) throw NotApplicable("hypothesis check needs a continuous model with a boundary");
  const DiffusionSpec& spec = resolved.model.diffusion();
  const auto configs = sample_boundary_configurations(spec, config.N, config.hypothesis.configurations,
                                                      config.hypothesis.min_distance, config.seed);
  const double scale = config.hypothesis.h_scale;
  return check_rebirth_hypothesis(resolved.rebirth, spec, configs, [scale](double x) { return scale * x; },
                                  config.hypothesis.trials, config.seed);
}

json report_json(const RunConfig& config, const RunReport& report) {
  json doc = report_header(config, "run");
  json reps = json::array();
  for (const auto& r : report.replications) {
    json row = {{"seed", r.seed},
                {"outcome", std::string(to_string(r.outcome))},
                {"mu", r.mu},
                {"nu", r.nu},
                {"survival", r.survival},
                {"A_total", r.total_rebirths},
                {"end_time", r.end_time}};
    if (r.max_phi) {
      row["max_phi"] = std::isfinite(*r.max_phi) ? json(*r.max_phi) : json("inf");
      row["phi_sentinels"] = r.phi_sentinels;
    }
    reps.push_back(row);
  }
  doc["replications"] = reps;
  json agg = {{"completed", report.completed},
              {"failed", report.failed},
              {"guard_tripped", report.guard_tripped},
              {"mean", {{"mu", report.mu.mean},
                        {"nu", report.nu.mean},
                        {"survival", report.survival.mean},
                        {"A_total", report.total_rebirths.mean}}},
              {"std_error", {{"mu", report.mu.std_error},
                             {"nu", report.nu.std_error},
                             {"survival", report.survival.std_error},
                             {"A_total", report.total_rebirths.std_error}}},
              {"oracle", reference_json(report.oracle)},
              {"exit_code", report.exit_code()}};
  if (!report.phi_exceedance.empty())
    agg["phi_exceedance"] = {{"levels", config.phi_monitor.levels}, {"frequency", report.phi_exceedance}};
  doc["aggregates"] = agg;
  return doc;
}

json report_json(const RunConfig& config, const SweepResult& result) {
  json doc = report_header(config, "sweep");
  json rows = json::array();
  for (const auto& r : result.rows)
    rows.push_back({{"N", r.N},
                    {"mean_abs_error", r.mean_abs_error},
                    {"std_error", r.std_error},
                    {"mu_mean_abs_error", r.mu_mean_abs_error},
                    {"mu_std_error", r.mu_std_error},
                    {"mean_A", r.mean_A},
                    {"mean_survival_estimate", r.mean_survival_estimate},
                    {"oracle_value", r.oracle_value},
                    {"l2_bound", r.l2_bound},
                    {"l1_bound", number_or_null(r.l1_bound)},
                    {"completed", r.completed},
                    {"failed", r.failed},
                    {"guard_tripped", r.guard_tripped}});
  doc["replications"] = json::array();
  doc["aggregates"] = {{"rows", rows}, {"exit_code", result.exit_code}};
  doc["rate_fit"] = {{"slope", result.rate_fit.slope},
                     {"intercept", result.rate_fit.intercept},
                     {"r2", result.rate_fit.r2}};
  return doc;
}

json report_json(const RunConfig& config, const DtStudy& study) {
  json doc = report_header(config, "dt-study");
  json rows = json::array();
  for (const auto& r : study.rows)
    rows.push_back({{"dt", r.dt},
                    {"survival", summary_json(r.survival)},
                    {"nu", summary_json(r.nu)},
                    {"mu", summary_json(r.mu)}});
  doc["replications"] = json::array();
  doc["aggregates"] = {{"rows", rows},
                       {"oracle", reference_json(study.oracle)},
                       {"non_monotone", study.non_monotone},
                       {"exit_code", study.exit_code}};
  return doc;
}

json report_json(const RunConfig& config, const HypothesisReport& report) {
  json doc = report_header(config, "check-hypothesis");
  doc["replications"] = json::array();
  doc["aggregates"] = {{"p0_estimate", report.p0_estimate},
                       {"b_containment_rate", report.b_containment_rate},
                       {"configurations", report.configurations},
                       {"trials", report.trials},
                       {"consistent", report.consistent()}};
  return doc;
}

void write_first_replication_outputs(const RunConfig& config) {
  const OutputConfig& out = config.outputs;
  if (out.event_log.empty() && out.phi_trace.empty() && out.proximity_trace.empty()) return;
  const ResolvedRun resolved = resolve(config);
  const bool continuous = !resolved.model.discrete();
  if (!continuous && (!out.phi_trace.empty() || !out.proximity_trace.empty()))
    throw ConfigError("phi and proximity traces need a continuous model");

  SimulationOptions options;
  options.horizon = config.T;
  options.dt = config.dt;
  options.seed = replication_seed(config.seed, 0);
  options.guard = config.guard;
  options.bridge = config.bridge;
  options.log_events = !out.event_log.empty();

  std::optional<PairPhiRecorder> recorder;
  std::vector<TraceSample> proximity;
  if (continuous) {
    recorder.emplace(resolved.model.diffusion(), config.phi_monitor.unit_pi, config.phi_monitor.stride);
    const DiffusionSpec& spec = resolved.model.diffusion();
    const bool want_proximity = !out.proximity_trace.empty();
    options.on_step = [&, want_proximity](double t, const ParticleSystem& sys) {
      recorder->observe(t, sys);
      if (want_proximity) proximity.push_back({t, pair_proximity(sys.particles, spec).value});
    };
  }
  const SimulationResult result = simulate(resolved.model.spec, resolved.rebirth,
                                           initial_configuration(resolved, config.N, options.seed), options);
  if (!out.event_log.empty()) {
    std::ofstream log(out.event_log);
    if (!log) throw ConfigError("cannot open event log '" + out.event_log + "'");
    for (const auto& e : result.system.event_log) log << event_to_json_line(e) << '\n';
  }
  if (!out.phi_trace.empty()) write_trace_csv(out.phi_trace, recorder->finish(config.phi_monitor.levels).samples);
  if (!out.proximity_trace.empty()) write_trace_csv(out.proximity_trace, proximity);
}

}  // namespace fvsim
