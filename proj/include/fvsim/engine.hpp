#pragma once

// N-particle Fleming-Viot system with rebirths.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fvsim/process.hpp"
#include "fvsim/random.hpp"
#include "fvsim/trace.hpp"

namespace fvsim {

using ModelSpec = std::variant<DiffusionSpec, CtmcSpec>;

enum class KillType { Hard, Soft };
std::string_view to_string(KillType type);

struct RebirthRecord {
  std::size_t killed = 0;
  KillType kill_type = KillType::Hard;
  /// Survivor copied by a Fleming-Viot rebirth.
  std::optional<std::size_t> source;
  /// Identifier of the custom kernel that produced the configuration.
  std::string kernel_id;
};

struct FailureRecord {
  std::vector<std::size_t> indices;
};

struct GuardRecord {
  std::size_t window_count = 0;
};

struct Event {
  double time = 0.0;
  std::variant<RebirthRecord, FailureRecord, GuardRecord> kind;
  /// A^N right after the event.
  std::uint64_t total_rebirths = 0;

  bool is_rebirth() const { return std::holds_alternative<RebirthRecord>(kind); }
};

/// One JSON object per line: {"t", "kind", "killed", "source", "A_total"}.
std::string event_to_json_line(const Event& event);

struct ParticleSystem {
  std::vector<ParticleState> particles;
  std::vector<std::uint64_t> rebirth_counts;  // A^{i,N}
  std::uint64_t total_rebirths = 0;           // A^N
  double clock = 0.0;
  std::vector<double> hazard;
  std::vector<Event> event_log;

  ParticleSystem() = default;
  explicit ParticleSystem(std::vector<ParticleState> initial);

  std::size_t size() const { return particles.size(); }
  /// A^N == sum_i A^{i,N}.
  bool counters_consistent() const;
};

/// Killed particle jumps onto a survivor chosen uniformly among the N-1 others.
struct FlemingViotUniform {};

/// Rebirth kernel acting on the whole configuration. Receives the
/// configuration at the kill instant (the killed particle at its kill
/// position) and returns the post-rebirth configuration.
using ConfigurationKernel = std::function<std::vector<ParticleState>(
    double t, const std::vector<ParticleState>& configuration, std::size_t killed, Stream& rng)>;

struct CustomKernel {
  std::string id;
  ConfigurationKernel hard;
  ConfigurationKernel soft;
};

using RebirthMeasure = std::variant<FlemingViotUniform, CustomKernel>;

/// Trips when more than `cap` rebirths fall in a window of width `window`.
struct ExplosionGuard {
  std::size_t cap = 20;
  double window = 0.1;

  /// cap = 10 N per window 0.1.
  static ExplosionGuard defaults(std::size_t n_particles) { return {10 * n_particles, 0.1}; }
};

/// Scans a complete event log; returns the offending window count on a trip.
std::optional<GuardRecord> explosion_guard(const std::vector<Event>& event_log, double window, std::size_t cap);

enum class Outcome { Completed, Failed, GuardTripped };
std::string_view to_string(Outcome outcome);

struct Snapshot {
  double time = 0.0;
  std::uint64_t total_rebirths = 0;
  std::vector<ParticleState> particles;
};

struct GuardDiagnostics {
  std::size_t window_count = 0;
  double bin_width = 0.0;
  std::vector<std::size_t> rebirth_histogram;
  /// Minimum pair proximity over the run (continuous models with tracing on).
  std::vector<TraceSample> proximity_trace;
};

using SystemObserver = std::function<void(double t, const ParticleSystem&)>;

struct SimulationOptions {
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  /// Defaults to ExplosionGuard::defaults(N).
  std::optional<ExplosionGuard> guard;
  bool bridge = false;
  bool log_events = true;
  std::vector<double> snapshot_times;
  /// When set, snapshots are streamed here instead of being stored.
  SystemObserver on_snapshot;
  /// Called after every macro-step (every dt for chains).
  SystemObserver on_step;
  /// Record the pair proximity every k macro-steps (0 disables).
  std::size_t proximity_stride = 0;
};

struct SimulationResult {
  ParticleSystem system;
  Outcome outcome = Outcome::Completed;
  std::vector<Snapshot> snapshots;
  std::optional<GuardDiagnostics> guard_diagnostics;
};

// Random streams of one simulation. Each particle owns a motion stream
// (position noise, bridge draws, kill thresholds, chain transitions) and an
// environment stream; rebirth choices use a separate stream.
Stream particle_stream(std::uint64_t seed, std::size_t particle);
Stream environment_stream(std::uint64_t seed, std::size_t particle);
Stream rebirth_stream(std::uint64_t seed);

/// Runs the particle system up to `options.horizon` or until a failure or a
/// guard trip. Diffusions advance by Euler-Maruyama macro-steps with kills
/// processed in sub-time order; chains are simulated exactly event by event.
SimulationResult simulate(const ModelSpec& model, const RebirthMeasure& rebirth,
                          std::vector<ParticleState> initial, const SimulationOptions& options);

/// Moves `killed` onto a uniformly chosen survivor and updates the counters.
/// Returns the survivor index.
std::size_t rebirth_fleming_viot(ParticleSystem& system, std::size_t killed, Stream& rng, double time,
                                 KillType kill_type = KillType::Hard, bool log_event = true);

/// Replaces the whole configuration by a draw from `kernel`. Throws
/// KernelContractViolation when the output is not a live configuration.
void apply_custom_rebirth(ParticleSystem& system, const CustomKernel& kernel, std::size_t killed,
                          KillType kill_type, Stream& rng, double time, const ModelSpec& model,
                          bool log_event = true);

/// Whether `state` is a live state of `model`.
bool is_live(const ParticleState& state, const ModelSpec& model);

// ---------------------------------------------------------------------------
// Statistical check of the rebirth-measure conditions for hard kills.

struct BoundaryConfiguration {
  double time = 0.0;
  std::vector<ParticleState> particles;
  std::size_t killed = 0;
};

/// Configurations with particle `killed` on the boundary and the others
/// uniform over the points at distance >= min_distance.
std::vector<BoundaryConfiguration> sample_boundary_configurations(const DiffusionSpec& model, std::size_t n_particles,
                                                                  std::size_t count, double min_distance,
                                                                  std::uint64_t seed);

struct HypothesisReport {
  /// Minimum over configurations of the frequency of landing in A_i.
  double p0_estimate = 0.0;
  /// Frequency of landing in B_{e,x} over all trials.
  double b_containment_rate = 0.0;
  std::size_t configurations = 0;
  std::size_t trials = 0;

  bool consistent() const { return p0_estimate > 0.0 && b_containment_rate == 1.0; }
};

/// Samples the hard-kill rebirth kernel `trials` times per configuration and
/// checks membership of the output in
///   A_i     = {y : exists j != i, phi(y_i) >= h(phi(y_j))}
///   B_{e,x} = {(e', x') : for all j, phi(x'_j) >= phi(x_j) (1 v sqrt(f(e'_j, x'_j) / f(e_j, x_j)))}
/// with f the normal diffusivity. Report only.
HypothesisReport check_rebirth_hypothesis(const RebirthMeasure& rebirth, const DiffusionSpec& model,
                                          const std::vector<BoundaryConfiguration>& configurations,
                                          const std::function<double(double)>& h, std::size_t trials,
                                          std::uint64_t seed);

}  // namespace fvsim
