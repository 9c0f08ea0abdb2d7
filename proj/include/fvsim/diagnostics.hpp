#pragma once

// Runtime monitors: pairwise boundary proximity, the Phi process of a pair of
// boundary distances, and rebirth intensity.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "fvsim/engine.hpp"
#include "fvsim/trace.hpp"

namespace fvsim {

struct PairProximity {
  /// min over i < j of sqrt(phi_i^2 + phi_j^2).
  double value = 0.0;
  std::size_t i = 0;
  std::size_t j = 1;
};

PairProximity pair_proximity(const std::vector<ParticleState>& particles, const DiffusionSpec& model);
/// Throws NotApplicable for chain models.
PairProximity pair_proximity(const ParticleSystem& system, const ModelSpec& model);

struct ProximitySample {
  double t = 0.0;
  double min_pair_value = 0.0;
  std::size_t i = 0;
  std::size_t j = 1;
};
using ProximityTrace = std::vector<ProximitySample>;

/// Phi = -1/2 log(Y1^2 / pi1 + Y2^2 / pi2); +infinity at (Y1, Y2) = (0, 0).
double phi_value(double y1, double y2, double pi1, double pi2);

inline std::vector<double> default_phi_levels() { return {2.0, 4.0, 6.0, 8.0, 10.0}; }

struct PhiSummary {
  double max_phi = -std::numeric_limits<double>::infinity();
  std::vector<double> levels;
  std::vector<std::size_t> upcrossings;
  /// Samples where (Y1, Y2) = (0, 0) was observed.
  std::size_t sentinel_count = 0;

  bool attainability_violation() const { return sentinel_count > 0; }
};

struct PhiTrace {
  std::vector<TraceSample> samples;
  PhiSummary summary;
};

/// Evaluates Phi on aligned sampled traces (sample k of every input shares
/// its time). Throws NotApplicable when a pi sample is below `pi_floor` or
/// the traces have different lengths.
PhiTrace phi_monitor(const std::vector<TraceSample>& y1, const std::vector<TraceSample>& y2,
                     const std::vector<TraceSample>& pi1, const std::vector<TraceSample>& pi2,
                     const std::vector<double>& levels = default_phi_levels(), double pi_floor = 1e-12);

/// Fraction of runs whose max Phi exceeds each level.
std::vector<double> exceedance_frequencies(const std::vector<double>& max_phis, const std::vector<double>& levels);

/// Collects, at each observed instant, the boundary distances of the pair
/// with the largest Phi together with their pi values (the normal diffusivity
/// of the model, or 1 when `unit_pi`). Feed it from SimulationOptions::on_step.
class PairPhiRecorder {
 public:
  PairPhiRecorder(const DiffusionSpec& model, bool unit_pi, std::size_t stride = 1);

  void observe(double t, const ParticleSystem& system);
  PhiTrace finish(const std::vector<double>& levels = default_phi_levels()) const;

  const std::vector<TraceSample>& y1() const { return y1_; }
  const std::vector<TraceSample>& y2() const { return y2_; }

 private:
  const DiffusionSpec* model_;
  bool unit_pi_;
  std::size_t stride_;
  std::size_t calls_ = 0;
  std::vector<TraceSample> y1_, y2_, pi1_, pi2_;
};

struct RebirthIntensity {
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
  /// Bins whose count exceeds the supplied cap.
  std::vector<std::size_t> flagged_bins;
};

/// Histogram of rebirth times with bins [k w, (k+1) w). The histogram spans
/// [0, horizon) when a horizon is given, otherwise up to the last rebirth.
RebirthIntensity rebirth_intensity(const std::vector<Event>& event_log, double bin_width,
                                   std::optional<double> horizon = std::nullopt,
                                   std::optional<std::size_t> cap = std::nullopt);

}  // namespace fvsim
