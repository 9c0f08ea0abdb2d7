#include "fvsim/estimators.hpp"

#include <cmath>

#include "fvsim/errors.hpp"

namespace fvsim {

TestFunction constant_one() {
  return {[](const ParticleState&) { return 1.0; }, 1.0, "one"};
}

TestFunction indicator_of_state(std::size_t index) {
  return {[index](const ParticleState& s) {
            const auto* d = std::get_if<Discrete>(&s);
            return d && d->index == index ? 1.0 : 0.0;
          },
          1.0, "indicator_" + std::to_string(index)};
}

TestFunction position_component(int k, double sup_norm) {
  if (!(sup_norm > 0.0)) throw ConfigError("sup norm must be positive");
  return {[k](const ParticleState& s) { return std::get<Continuous>(s).position(k); }, sup_norm,
          "position_" + std::to_string(k)};
}

double check_sup_norm(const TestFunction& f, const std::function<ParticleState(Stream&)>& sampler,
                      std::size_t samples, std::uint64_t seed) {
  Stream rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < samples; ++k) worst = std::max(worst, std::abs(f(sampler(rng))) / f.sup_norm);
  return worst;
}

EmpiricalMeasure EmpiricalMeasure::normalized(const ParticleSystem& system) {
  return {system.particles, 1.0};
}

EmpiricalMeasure EmpiricalMeasure::mass_loss(const ParticleSystem& system) {
  return {system.particles, survival_estimate(system)};
}

double EmpiricalMeasure::integrate(const StateFunction& f) const {
  double sum = 0.0;
  if (atoms.empty()) return 0.0;
  for (const auto& atom : atoms) sum += f(atom);
  return total_mass * (sum / static_cast<double>(atoms.size()));
}

double mu_estimate(const ParticleSystem& system, const StateFunction& f) {
  return EmpiricalMeasure::normalized(system).integrate(f);
}

double survival_estimate(const ParticleSystem& system) {
  const double n = static_cast<double>(system.size());
  return std::exp(static_cast<double>(system.total_rebirths) * std::log1p(-1.0 / n));
}

double nu_estimate(const ParticleSystem& system, const StateFunction& f) {
  return survival_estimate(system) * mu_estimate(system, f);
}

std::size_t Binning::bin_of(double x) const {
  const double k = std::floor((x - lo) / width());
  if (k < 0.0) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(k));
}

std::vector<double> QsdEstimate::densities() const {
  std::vector<double> out = probabilities;
  if (binning)
    for (double& v : out) v /= binning->width();
  return out;
}

QsdEstimate qsd_estimate(const ModelSpec& model, const RebirthMeasure& rebirth, std::vector<ParticleState> initial,
                         const QsdOptions& options) {
  if (!(options.burn_in >= 0.0 && options.burn_in < options.horizon))
    throw ConfigError("qsd_estimate requires 0 <= burn_in < horizon");
  if (options.n_snapshots == 0) throw ConfigError("qsd_estimate requires at least one snapshot");

  QsdEstimate estimate;
  std::size_t cells = 0;
  if (const auto* chain = std::get_if<CtmcSpec>(&model)) {
    cells = chain->n_states();
  } else {
    Binning binning;
    if (options.binning) {
      binning = *options.binning;
    } else {
      const auto bounds = std::get<DiffusionSpec>(model).domain.one_dimensional_bounds();
      if (!bounds || !std::isfinite(bounds->first) || !std::isfinite(bounds->second))
        throw NotApplicable("default binning needs a bounded one-dimensional domain");
      binning = {bounds->first, bounds->second, 40};
    }
    if (binning.bins == 0 || !(binning.lo < binning.hi)) throw ConfigError("invalid binning");
    estimate.binning = binning;
    cells = binning.bins;
  }
  std::vector<double> counts(cells, 0.0);

  SimulationOptions sim;
  sim.horizon = options.horizon;
  sim.dt = options.dt;
  sim.seed = options.seed;
  sim.guard = options.guard;
  sim.bridge = options.bridge;
  sim.log_events = false;
  const double spacing = (options.horizon - options.burn_in) / static_cast<double>(options.n_snapshots);
  for (std::size_t k = 1; k <= options.n_snapshots; ++k)
    sim.snapshot_times.push_back(options.burn_in + spacing * static_cast<double>(k));
  sim.on_snapshot = [&](double, const ParticleSystem& system) {
    ++estimate.snapshots;
    for (const auto& particle : system.particles) {
      if (const auto* d = std::get_if<Discrete>(&particle))
        counts[d->index] += 1.0;
      else
        counts[estimate.binning->bin_of(std::get<Continuous>(particle).position(0))] += 1.0;
    }
  };

  const SimulationResult result = simulate(model, rebirth, std::move(initial), sim);
  estimate.outcome = result.outcome;
  double total = 0.0;
  for (double c : counts) total += c;
  estimate.probabilities.resize(cells, 0.0);
  if (total > 0.0)
    for (std::size_t k = 0; k < cells; ++k) estimate.probabilities[k] = counts[k] / total;
  return estimate;
}

double l1_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ConfigError("l1_distance: size mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += std::abs(p[k] - q[k]);
  return sum;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  return 0.5 * l1_distance(p, q);
}

double histogram_l1_to_density(const QsdEstimate& estimate, const std::function<double(double)>& density,
                               int points_per_bin) {
  if (!estimate.binning) throw NotApplicable("histogram distance needs a binned estimate");
  const Binning& b = *estimate.binning;
  const int n = points_per_bin + (points_per_bin % 2);
  const double w = b.width(), h = w / n;
  const std::vector<double> dens = estimate.densities();
  double total = 0.0;
  for (std::size_t k = 0; k < b.bins; ++k) {
    const double a = b.lo + w * static_cast<double>(k);
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double c = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      sum += c * std::abs(dens[k] - density(a + h * i));
    }
    total += sum * h / 3.0;
  }
  return total;
}

}  // namespace fvsim
