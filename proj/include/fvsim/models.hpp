#pragma once

// Catalog of concrete killed processes used by the harness and the tests.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fvsim/engine.hpp"
#include "fvsim/process.hpp"

namespace fvsim {

/// Named numeric parameters; scalars are one-element vectors.
using ModelParams = std::map<std::string, std::vector<double>>;

/// Exact values at horizon T for a start law and a test function f.
struct ReferenceValue {
  double unconditioned = 0.0;  // E(f(Z_T) 1{T < tau})
  double survival = 0.0;       // P(T < tau)
  double conditional = 0.0;    // E(f(Z_T) | T < tau)
};

/// `start` empty means the model's default initial law.
using ReferenceSolver =
    std::function<ReferenceValue(const std::optional<ParticleState>& start, double T, const StateFunction& f)>;

using InitialSampler = std::function<ParticleState(Stream&)>;

struct ModelCatalogEntry {
  std::string name;
  ModelSpec spec;
  /// Default initial law; only produces live states.
  InitialSampler initial_sampler;
  /// Empty when the model has no closed-form reference.
  ReferenceSolver known_solution;

  bool discrete() const { return std::holds_alternative<CtmcSpec>(spec); }
  const DiffusionSpec& diffusion() const { return std::get<DiffusionSpec>(spec); }
  const CtmcSpec& ctmc() const { return std::get<CtmcSpec>(spec); }
};

/// Brownian motion sigma0 * B on (lo, hi), hard killing at both ends,
/// uniform initial law.
ModelCatalogEntry model_bm_interval(double lo, double hi, double sigma0);

/// Ring of n states with nearest-neighbour hops and per-state kill rates,
/// started at state 0. For n = 2 the two neighbours coincide and the switch
/// rate is hop_rate.
ModelCatalogEntry model_ctmc_ring(std::size_t n, double hop_rate, const std::vector<double>& kill);

/// Position on (0, 1) with sigma = 1 + coupling * tanh(e) (clamped to
/// [1/2, 2]) driven by an Ornstein-Uhlenbeck environment de = -ou_rate e dt + dbeta.
/// Requires |coupling| < 1.
ModelCatalogEntry model_env_ou(double ou_rate, double coupling);

/// Brownian motion on the whole line started at x0: no killing at all.
ModelCatalogEntry model_bm_free(double sigma0, double x0 = 0.0);

class ModelCatalog {
 public:
  using Factory = std::function<ModelCatalogEntry(const ModelParams&)>;

  /// Throws InvalidModel on a duplicate name.
  void add(const std::string& name, Factory factory);
  /// Throws ConfigError on an unknown name.
  ModelCatalogEntry make(const std::string& name, const ModelParams& params = {}) const;
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Factory> factories_;
};

/// bm_interval, ctmc_ring, env_ou, bm_free.
const ModelCatalog& builtin_catalog();

}  // namespace fvsim
