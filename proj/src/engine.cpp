#include "fvsim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "fvsim/diagnostics.hpp"
#include "fvsim/errors.hpp"

namespace fvsim {

namespace {

constexpr std::uint64_t kRebirthStream = ~std::uint64_t{0};

std::string json_number(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

/// Sliding-window rebirth counter shared by the two engines.
class GuardWindow {
 public:
  explicit GuardWindow(ExplosionGuard guard) : guard_(guard) {}

  /// Registers a rebirth at `time`; returns the window count on a trip.
  std::optional<std::size_t> record(double time) {
    times_.push_back(time);
    while (!times_.empty() && times_.front() <= time - guard_.window) times_.pop_front();
    if (times_.size() > guard_.cap) return times_.size();
    return std::nullopt;
  }

 private:
  ExplosionGuard guard_;
  std::deque<double> times_;
};

/// Emits snapshots at the requested times as the clock passes them.
class SnapshotSchedule {
 public:
  SnapshotSchedule(std::vector<double> times, const SystemObserver& sink, std::vector<Snapshot>& store)
      : times_(std::move(times)), sink_(sink), store_(store) {
    std::sort(times_.begin(), times_.end());
  }

  /// Emits every pending snapshot with time <= t (up to `slack`).
  void emit_until(double t, const ParticleSystem& system, double slack = 0.0) {
    while (next_ < times_.size() && times_[next_] <= t + slack) {
      emit(times_[next_], system);
      ++next_;
    }
  }

  /// Emits every pending snapshot with time < t.
  void emit_before(double t, const ParticleSystem& system) {
    while (next_ < times_.size() && times_[next_] < t) {
      emit(times_[next_], system);
      ++next_;
    }
  }

 private:
  void emit(double t, const ParticleSystem& system) {
    if (sink_) {
      sink_(t, system);
    } else {
      store_.push_back(Snapshot{t, system.total_rebirths, system.particles});
    }
  }

  std::vector<double> times_;
  std::size_t next_ = 0;
  const SystemObserver& sink_;
  std::vector<Snapshot>& store_;
};

void halt_failure(SimulationResult& result, double time, std::vector<std::size_t> indices) {
  result.outcome = Outcome::Failed;
  result.system.clock = time;
  result.system.event_log.push_back(Event{time, FailureRecord{std::move(indices)}, result.system.total_rebirths});
}

void halt_guard(SimulationResult& result, double time, std::size_t window_count, const ExplosionGuard& guard,
                std::vector<TraceSample> proximity) {
  result.outcome = Outcome::GuardTripped;
  result.system.clock = time;
  result.system.event_log.push_back(Event{time, GuardRecord{window_count}, result.system.total_rebirths});
  GuardDiagnostics diag;
  diag.window_count = window_count;
  diag.bin_width = guard.window / 10.0;
  diag.rebirth_histogram =
      rebirth_intensity(result.system.event_log, diag.bin_width, time + diag.bin_width).counts;
  diag.proximity_trace = std::move(proximity);
  result.guard_diagnostics = std::move(diag);
}

Continuous interpolate(const Continuous& a, const Continuous& b, double s) {
  Continuous out = a;
  out.position += s * (b.position - a.position);
  if (a.environment.size() > 0) out.environment += s * (b.environment - a.environment);
  return out;
}

void validate_common(const std::vector<ParticleState>& initial, const ModelSpec& model,
                     const SimulationOptions& options) {
  if (initial.size() < 2) throw StructuralError("the particle system needs N >= 2");
  if (!(options.horizon > 0.0)) throw StructuralError("horizon must be positive");
  if (!(options.dt > 0.0)) throw StructuralError("dt must be positive");
  for (const auto& s : initial)
    if (!is_live(s, model)) throw StructuralError("initial configuration contains a dead state");
}

// ---------------------------------------------------------------------------
// Diffusion engine

struct PendingKill {
  double sub_time;
  std::size_t index;
  KillType type;
  double hazard_before;
  double rate;
  bool done = false;
};

SimulationResult simulate_diffusion(const DiffusionSpec& spec, const RebirthMeasure& rebirth,
                                    std::vector<ParticleState> initial, const SimulationOptions& options) {
  const std::size_t N = initial.size();
  const int dp = spec.dim_position;
  const int de = spec.dim_env;
  const ExplosionGuard guard = options.guard.value_or(ExplosionGuard::defaults(N));
  const bool soft = spec.has_soft_killing();
  const ModelSpec model_view = spec;  // for liveness checks of kernel output

  SimulationResult result;
  result.system = ParticleSystem(std::move(initial));
  ParticleSystem& sys = result.system;

  std::vector<Stream> motion, envs;
  motion.reserve(N);
  envs.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    motion.push_back(particle_stream(options.seed, i));
    envs.push_back(environment_stream(options.seed, i));
  }
  Stream rebirth_rng = rebirth_stream(options.seed);

  std::vector<double> thresholds(N, std::numeric_limits<double>::infinity());
  if (soft)
    for (std::size_t i = 0; i < N; ++i) thresholds[i] = motion[i].exponential();

  GuardWindow window(guard);
  SnapshotSchedule snapshots(options.snapshot_times, options.on_snapshot, result.snapshots);
  std::vector<TraceSample> proximity;

  const double T = options.horizon;
  const auto n_steps = std::max<long>(1, static_cast<long>(std::ceil(T / options.dt - 1e-9)));
  const double slack = 1e-9 * options.dt;

  snapshots.emit_until(0.0, sys, slack);

  std::vector<Continuous> prev(N), next(N);
  std::vector<PendingKill> pending;
  Vec noise(dp + de);

  for (long step = 0; step < n_steps; ++step) {
    const double t0 = static_cast<double>(step) * options.dt;
    const double t1 = (step + 1 == n_steps) ? T : static_cast<double>(step + 1) * options.dt;
    const double h = t1 - t0;
    pending.clear();

    for (std::size_t i = 0; i < N; ++i) {
      prev[i] = std::get<Continuous>(sys.particles[i]);
      for (int k = 0; k < dp; ++k) noise(k) = motion[i].normal();
      for (int k = 0; k < de; ++k) noise(dp + k) = envs[i].normal();
      next[i] = step_diffusion(prev[i], spec, t0, h, noise);

      HardKillOptions hk;
      double u = 0.5;
      if (options.bridge) {
        hk.bridge = true;
        u = motion[i].uniform();
        hk.normal_variance = 0.5 * (spec.normal_diffusivity(t0, prev[i].environment, prev[i].position) +
                                    spec.normal_diffusivity(t0, next[i].environment, next[i].position));
      }
      std::optional<double> kill = detect_hard_kill(prev[i].position, next[i].position, spec.domain, h, hk, u);
      KillType type = KillType::Hard;
      double hazard_before = sys.hazard[i];
      double rate = 0.0;
      if (soft) {
        rate = spec.kill_rate_at(t0, prev[i].environment, prev[i].position);
        const SoftKillStep sk = sample_soft_kill(sys.hazard[i], rate, spec.kill_rate_max, h, thresholds[i]);
        sys.hazard[i] = sk.accumulator;
        if (sk.killed && (!kill || sk.fraction * h < *kill)) {
          kill = sk.fraction * h;
          type = KillType::Soft;
        }
      }
      sys.particles[i] = next[i];
      if (kill) pending.push_back(PendingKill{*kill, i, type, hazard_before, rate});
    }

    if (!pending.empty()) {
      std::sort(pending.begin(), pending.end(), [](const PendingKill& a, const PendingKill& b) {
        return a.sub_time != b.sub_time ? a.sub_time < b.sub_time : a.index < b.index;
      });

      for (std::size_t k = 0; k < pending.size(); ++k) {
        PendingKill& p = pending[k];
        if (p.done) continue;
        const double time = t0 + p.sub_time;

        // Exact ties between distinct particles are failures.
        std::vector<std::size_t> tied{p.index};
        for (std::size_t m = k + 1; m < pending.size() && pending[m].sub_time == p.sub_time; ++m)
          if (!pending[m].done) tied.push_back(pending[m].index);
        if (tied.size() > 1) {
          for (std::size_t m = k; m < pending.size(); ++m)
            if (!pending[m].done)
              sys.particles[pending[m].index] =
                  interpolate(prev[pending[m].index], next[pending[m].index], p.sub_time / h);
          halt_failure(result, time, std::move(tied));
          return result;
        }

        // Configuration at the kill instant: still-pending particles sit on
        // their step segment.
        for (std::size_t m = k; m < pending.size(); ++m)
          if (!pending[m].done)
            sys.particles[pending[m].index] =
                interpolate(prev[pending[m].index], next[pending[m].index], p.sub_time / h);

        if (std::holds_alternative<FlemingViotUniform>(rebirth)) {
          rebirth_fleming_viot(sys, p.index, rebirth_rng, time, p.type, options.log_events);
        } else {
          const auto before = sys.particles;
          apply_custom_rebirth(sys, std::get<CustomKernel>(rebirth), p.index, p.type, rebirth_rng, time,
                               model_view, options.log_events);
          // A later kill is void if the kernel moved that particle.
          for (std::size_t m = k + 1; m < pending.size(); ++m) {
            PendingKill& q = pending[m];
            if (q.done || sys.particles[q.index] == before[q.index]) continue;
            q.done = true;
            sys.hazard[q.index] = q.hazard_before + q.rate * q.sub_time;
            const auto& moved = std::get<Continuous>(sys.particles[q.index]);
            prev[q.index] = next[q.index] = moved;
          }
        }
        p.done = true;
        if (soft) thresholds[p.index] = motion[p.index].exponential();
        const auto& reborn = std::get<Continuous>(sys.particles[p.index]);
        prev[p.index] = next[p.index] = reborn;
        assert(sys.counters_consistent());

        if (auto count = window.record(time)) {
          halt_guard(result, time, *count, guard, std::move(proximity));
          return result;
        }
      }
    }

    sys.clock = t1;
    if (options.proximity_stride > 0 && spec.domain.has_boundary() &&
        (step % static_cast<long>(options.proximity_stride)) == 0)
      proximity.push_back({t1, pair_proximity(sys.particles, spec).value});
    if (options.on_step) options.on_step(t1, sys);
    snapshots.emit_until(t1, sys, slack);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Chain engine

struct Scheduled {
  double time;
  std::size_t index;
  std::uint64_t version;
  bool operator>(const Scheduled& o) const { return time != o.time ? time > o.time : index > o.index; }
};

SimulationResult simulate_ctmc(const CtmcSpec& spec, const RebirthMeasure& rebirth, std::vector<ParticleState> initial,
                               const SimulationOptions& options) {
  const std::size_t N = initial.size();
  const ExplosionGuard guard = options.guard.value_or(ExplosionGuard::defaults(N));
  const ModelSpec model_view = spec;

  SimulationResult result;
  result.system = ParticleSystem(std::move(initial));
  ParticleSystem& sys = result.system;

  std::vector<Stream> motion;
  motion.reserve(N);
  for (std::size_t i = 0; i < N; ++i) motion.push_back(particle_stream(options.seed, i));
  Stream rebirth_rng = rebirth_stream(options.seed);

  std::vector<ParticleState> target(N);
  std::vector<double> due(N);
  std::vector<std::uint64_t> version(N, 0);
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue;

  auto schedule = [&](std::size_t i, double now) {
    const CtmcStep step = ctmc_step(std::get<Discrete>(sys.particles[i]).index, spec, motion[i]);
    ++version[i];
    due[i] = now + step.holding_time;
    target[i] = step.next;
    if (std::isfinite(due[i])) queue.push({due[i], i, version[i]});
  };
  auto drop_stale = [&] {
    while (!queue.empty() && queue.top().version != version[queue.top().index]) queue.pop();
  };

  for (std::size_t i = 0; i < N; ++i) schedule(i, 0.0);

  GuardWindow window(guard);
  SnapshotSchedule snapshots(options.snapshot_times, options.on_snapshot, result.snapshots);
  const double T = options.horizon;
  const auto n_grid = std::max<long>(1, static_cast<long>(std::ceil(T / options.dt - 1e-9)));
  long grid = 1;
  auto grid_time = [&](long g) { return g == n_grid ? T : static_cast<double>(g) * options.dt; };
  auto emit_grid_before = [&](double t) {
    while (grid <= n_grid && grid_time(grid) < t) {
      sys.clock = grid_time(grid);
      if (options.on_step) options.on_step(sys.clock, sys);
      ++grid;
    }
  };

  snapshots.emit_until(0.0, sys);

  for (;;) {
    drop_stale();
    const double t_event = queue.empty() ? std::numeric_limits<double>::infinity() : queue.top().time;
    snapshots.emit_before(std::min(t_event, std::nextafter(T, std::numeric_limits<double>::infinity())), sys);
    emit_grid_before(std::min(t_event, std::nextafter(T, std::numeric_limits<double>::infinity())));
    if (t_event > T) break;

    const Scheduled ev = queue.top();
    queue.pop();
    drop_stale();
    const bool kill = is_cemetery(target[ev.index]);
    if (!queue.empty() && queue.top().time == ev.time && (kill || is_cemetery(target[queue.top().index]))) {
      halt_failure(result, ev.time, {ev.index, queue.top().index});
      return result;
    }

    sys.clock = ev.time;
    if (!kill) {
      sys.particles[ev.index] = target[ev.index];
      schedule(ev.index, ev.time);
      continue;
    }

    if (std::holds_alternative<FlemingViotUniform>(rebirth)) {
      rebirth_fleming_viot(sys, ev.index, rebirth_rng, ev.time, KillType::Soft, options.log_events);
      schedule(ev.index, ev.time);
    } else {
      const auto before = sys.particles;
      apply_custom_rebirth(sys, std::get<CustomKernel>(rebirth), ev.index, KillType::Soft, rebirth_rng, ev.time,
                           model_view, options.log_events);
      for (std::size_t j = 0; j < N; ++j)
        if (j == ev.index || !(sys.particles[j] == before[j])) schedule(j, ev.time);
    }
    assert(sys.counters_consistent());

    if (auto count = window.record(ev.time)) {
      halt_guard(result, ev.time, *count, guard, {});
      return result;
    }
  }

  sys.clock = T;
  emit_grid_before(std::numeric_limits<double>::infinity());
  snapshots.emit_until(T, sys, 1e-12 * T);
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(KillType type) { return type == KillType::Hard ? "hard" : "soft"; }

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Completed:
      return "completed";
    case Outcome::Failed:
      return "failed";
    case Outcome::GuardTripped:
      return "guard_tripped";
  }
  return "unknown";
}

std::string event_to_json_line(const Event& event) {
  std::ostringstream out;
  out << "{\"t\":" << json_number(event.time) << ",";
  if (const auto* r = std::get_if<RebirthRecord>(&event.kind)) {
    out << "\"kind\":\"rebirth\",\"kill_type\":\"" << to_string(r->kill_type) << "\",\"killed\":" << r->killed
        << ",\"source\":";
    if (r->source)
      out << *r->source;
    else if (!r->kernel_id.empty())
      out << "\"" << r->kernel_id << "\"";
    else
      out << "null";
  } else if (const auto* f = std::get_if<FailureRecord>(&event.kind)) {
    out << "\"kind\":\"failure\",\"killed\":[";
    for (std::size_t k = 0; k < f->indices.size(); ++k) out << (k ? "," : "") << f->indices[k];
    out << "],\"source\":null";
  } else {
    const auto& g = std::get<GuardRecord>(event.kind);
    out << "\"kind\":\"guard_tripped\",\"killed\":null,\"source\":null,\"window_count\":" << g.window_count;
  }
  out << ",\"A_total\":" << event.total_rebirths << "}";
  return out.str();
}

ParticleSystem::ParticleSystem(std::vector<ParticleState> initial)
    : particles(std::move(initial)), rebirth_counts(particles.size(), 0), hazard(particles.size(), 0.0) {}

bool ParticleSystem::counters_consistent() const {
  return std::accumulate(rebirth_counts.begin(), rebirth_counts.end(), std::uint64_t{0}) == total_rebirths;
}

std::optional<GuardRecord> explosion_guard(const std::vector<Event>& event_log, double window, std::size_t cap) {
  GuardWindow counter({cap, window});
  for (const auto& e : event_log) {
    if (!e.is_rebirth()) continue;
    if (auto count = counter.record(e.time)) return GuardRecord{*count};
  }
  return std::nullopt;
}

Stream particle_stream(std::uint64_t seed, std::size_t particle) { return Stream(stream_key(seed, particle, 0)); }

Stream environment_stream(std::uint64_t seed, std::size_t particle) { return Stream(stream_key(seed, particle, 1)); }

Stream rebirth_stream(std::uint64_t seed) { return Stream(stream_key(seed, kRebirthStream, 0)); }

bool is_live(const ParticleState& state, const ModelSpec& model) {
  if (const auto* d = std::get_if<Discrete>(&state)) {
    const auto* chain = std::get_if<CtmcSpec>(&model);
    return chain && d->index < chain->n_states();
  }
  if (const auto* c = std::get_if<Continuous>(&state)) {
    const auto* diff = std::get_if<DiffusionSpec>(&model);
    return diff && c->position.size() == diff->dim_position && c->environment.size() == diff->dim_env &&
           diff->domain.contains(c->position);
  }
  return false;
}

SimulationResult simulate(const ModelSpec& model, const RebirthMeasure& rebirth, std::vector<ParticleState> initial,
                          const SimulationOptions& options) {
  validate_common(initial, model, options);
  if (const auto* diff = std::get_if<DiffusionSpec>(&model))
    return simulate_diffusion(*diff, rebirth, std::move(initial), options);
  return simulate_ctmc(std::get<CtmcSpec>(model), rebirth, std::move(initial), options);
}

std::size_t rebirth_fleming_viot(ParticleSystem& system, std::size_t killed, Stream& rng, double time,
                                 KillType kill_type, bool log_event) {
  const std::size_t N = system.size();
  if (N < 2) throw StructuralError("no survivor to copy");
  std::size_t source = rng.below(N - 1);
  if (source >= killed) ++source;
  system.particles[killed] = system.particles[source];
  ++system.rebirth_counts[killed];
  ++system.total_rebirths;
  system.hazard[killed] = 0.0;
  if (log_event)
    system.event_log.push_back(Event{time, RebirthRecord{killed, kill_type, source, {}}, system.total_rebirths});
  return source;
}

void apply_custom_rebirth(ParticleSystem& system, const CustomKernel& kernel, std::size_t killed, KillType kill_type,
                          Stream& rng, double time, const ModelSpec& model, bool log_event) {
  const ConfigurationKernel& draw = kill_type == KillType::Hard ? kernel.hard : kernel.soft;
  if (!draw) throw KernelContractViolation("kernel '" + kernel.id + "' has no " + std::string(to_string(kill_type)) + " component");
  std::vector<ParticleState> out = draw(time, system.particles, killed, rng);
  if (out.size() != system.size()) throw KernelContractViolation("kernel '" + kernel.id + "' changed the particle count");
  for (std::size_t j = 0; j < out.size(); ++j)
    if (!is_live(out[j], model))
      throw KernelContractViolation("kernel '" + kernel.id + "' produced a dead state for particle " + std::to_string(j));
  system.particles = std::move(out);
  ++system.rebirth_counts[killed];
  ++system.total_rebirths;
  system.hazard[killed] = 0.0;
  if (log_event)
    system.event_log.push_back(
        Event{time, RebirthRecord{killed, kill_type, std::nullopt, kernel.id}, system.total_rebirths});
}

// ---------------------------------------------------------------------------

std::vector<BoundaryConfiguration> sample_boundary_configurations(const DiffusionSpec& model, std::size_t n_particles,
                                                                  std::size_t count, double min_distance,
                                                                  std::uint64_t seed) {
  if (n_particles < 2) throw StructuralError("configurations need N >= 2");
  Stream rng(stream_key(seed, 0, 7));
  std::vector<BoundaryConfiguration> out;
  out.reserve(count);
  const Vec env = Vec::Zero(model.dim_env);
  for (std::size_t c = 0; c < count; ++c) {
    BoundaryConfiguration config;
    config.killed = rng.below(n_particles);
    config.particles.reserve(n_particles);
    for (std::size_t i = 0; i < n_particles; ++i) {
      const Vec pos = i == config.killed ? model.domain.sample_boundary(rng)
                                         : model.domain.sample_interior(rng, min_distance);
      config.particles.push_back(Continuous{pos, env});
    }
    out.push_back(std::move(config));
  }
  return out;
}

HypothesisReport check_rebirth_hypothesis(const RebirthMeasure& rebirth, const DiffusionSpec& model,
                                          const std::vector<BoundaryConfiguration>& configurations,
                                          const std::function<double(double)>& h, std::size_t trials,
                                          std::uint64_t seed) {
  if (trials == 0) throw StructuralError("trials must be >= 1");
  const ModelSpec model_view = model;
  Stream rng(stream_key(seed, 1, 7));

  auto phi = [&](const ParticleState& s) {
    return std::max(0.0, model.domain.distance_to_boundary(std::get<Continuous>(s).position));
  };
  auto diffusivity = [&](double t, const ParticleState& s) {
    const auto& c = std::get<Continuous>(s);
    return model.normal_diffusivity(t, c.environment, c.position);
  };

  HypothesisReport report;
  report.configurations = configurations.size();
  report.trials = trials;
  report.p0_estimate = configurations.empty() ? 0.0 : 1.0;
  std::size_t b_hits = 0, total = 0;

  for (const auto& config : configurations) {
    const std::size_t i = config.killed;
    std::size_t a_hits = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      ParticleSystem sys(config.particles);
      if (std::holds_alternative<FlemingViotUniform>(rebirth))
        rebirth_fleming_viot(sys, i, rng, config.time, KillType::Hard, false);
      else
        apply_custom_rebirth(sys, std::get<CustomKernel>(rebirth), i, KillType::Hard, rng, config.time, model_view,
                             false);
      const auto& out = sys.particles;

      bool in_a = false;
      const double phi_i = phi(out[i]);
      for (std::size_t j = 0; j < out.size() && !in_a; ++j)
        if (j != i && phi_i >= h(phi(out[j]))) in_a = true;
      a_hits += in_a;

      bool in_b = true;
      for (std::size_t j = 0; j < out.size() && in_b; ++j) {
        const double before = phi(config.particles[j]);
        if (before == 0.0) continue;
        const double ratio = std::sqrt(diffusivity(config.time, out[j]) / diffusivity(config.time, config.particles[j]));
        in_b = phi(out[j]) >= before * std::max(1.0, ratio);
      }
      b_hits += in_b;
      ++total;
    }
    report.p0_estimate = std::min(report.p0_estimate, static_cast<double>(a_hits) / static_cast<double>(trials));
  }
  report.b_containment_rate = total ? static_cast<double>(b_hits) / static_cast<double>(total) : 0.0;
  return report;
}

}  // namespace fvsim
