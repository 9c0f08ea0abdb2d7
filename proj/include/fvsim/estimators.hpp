#pragma once

// Estimators computed from a finished particle system.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fvsim/engine.hpp"

namespace fvsim {

/// Bounded test function with a declared sup norm.
struct TestFunction {
  StateFunction evaluate;
  double sup_norm = 1.0;
  std::string name;

  double operator()(const ParticleState& s) const { return evaluate(s); }
};

TestFunction constant_one();
/// 1{state == index} on a chain.
TestFunction indicator_of_state(std::size_t index);
/// Position component k; `sup_norm` must bound it on the live domain.
TestFunction position_component(int k, double sup_norm);

/// Checks |f| <= sup_norm on `samples` draws of `sampler`. Returns the
/// largest violation ratio |f(x)| / sup_norm (<= 1 when consistent).
double check_sup_norm(const TestFunction& f, const std::function<ParticleState(Stream&)>& sampler,
                      std::size_t samples, std::uint64_t seed);

/// Atoms sharing `total_mass` equally.
struct EmpiricalMeasure {
  std::vector<ParticleState> atoms;
  double total_mass = 0.0;

  /// Total mass 1.
  static EmpiricalMeasure normalized(const ParticleSystem& system);
  /// Total mass ((N-1)/N)^{A^N}.
  static EmpiricalMeasure mass_loss(const ParticleSystem& system);

  double weight() const { return atoms.empty() ? 0.0 : total_mass / static_cast<double>(atoms.size()); }
  /// total_mass * mean of f over the atoms.
  double integrate(const StateFunction& f) const;
  double mass() const { return total_mass; }
};

/// (1/N) sum_i f(X^i).
double mu_estimate(const ParticleSystem& system, const StateFunction& f);
/// ((N-1)/N)^{A^N}.
double survival_estimate(const ParticleSystem& system);
/// survival_estimate * mu_estimate.
double nu_estimate(const ParticleSystem& system, const StateFunction& f);

/// Uniform bins over [lo, hi).
struct Binning {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 40;

  double width() const { return (hi - lo) / static_cast<double>(bins); }
  /// Bin of x, clamped to the range.
  std::size_t bin_of(double x) const;
};

struct QsdOptions {
  std::size_t n_particles = 100;
  double burn_in = 1.0;
  double horizon = 2.0;
  std::size_t n_snapshots = 100;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  bool bridge = false;
  /// Continuous models: defaults to the one-dimensional domain bounds, 40 bins.
  std::optional<Binning> binning;
  std::optional<ExplosionGuard> guard;
};

/// Fixed-N stationary estimate: time average of the empirical measure over
/// snapshots equally spaced in (burn_in, horizon].
struct QsdEstimate {
  /// Chains: probability vector over states. Diffusions: histogram masses.
  std::vector<double> probabilities;
  std::optional<Binning> binning;
  Outcome outcome = Outcome::Completed;
  std::size_t snapshots = 0;

  /// Histogram densities (mass / bin width).
  std::vector<double> densities() const;
};

/// A failure or guard trip ends the run early; it is reported in `outcome`
/// and the estimate covers the snapshots taken before it.
QsdEstimate qsd_estimate(const ModelSpec& model, const RebirthMeasure& rebirth,
                         std::vector<ParticleState> initial, const QsdOptions& options);

/// sum_k |p_k - q_k|.
double l1_distance(const std::vector<double>& p, const std::vector<double>& q);
/// Half the l1 distance.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);
/// Integral of |histogram density - density| over the binning range by
/// Simpson's rule inside each bin.
double histogram_l1_to_density(const QsdEstimate& estimate, const std::function<double(double)>& density,
                               int points_per_bin = 64);

}  // namespace fvsim
