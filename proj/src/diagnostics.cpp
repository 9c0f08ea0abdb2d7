#include "fvsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fvsim/errors.hpp"

namespace fvsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double boundary_distance(const ParticleState& s, const DiffusionSpec& model) {
  return std::max(0.0, model.domain.distance_to_boundary(std::get<Continuous>(s).position));
}

// Indices of the two smallest values.
std::pair<std::size_t, std::size_t> two_smallest(const std::vector<double>& v) {
  std::size_t a = 0, b = 1;
  if (v[b] < v[a]) std::swap(a, b);
  for (std::size_t k = 2; k < v.size(); ++k) {
    if (v[k] < v[a]) {
      b = a;
      a = k;
    } else if (v[k] < v[b]) {
      b = k;
    }
  }
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace

PairProximity pair_proximity(const std::vector<ParticleState>& particles, const DiffusionSpec& model) {
  if (particles.size() < 2) throw StructuralError("pair proximity needs at least two particles");
  std::vector<double> phi(particles.size());
  for (std::size_t k = 0; k < particles.size(); ++k) phi[k] = boundary_distance(particles[k], model);
  const auto [i, j] = two_smallest(phi);
  return {std::hypot(phi[i], phi[j]), i, j};
}

PairProximity pair_proximity(const ParticleSystem& system, const ModelSpec& model) {
  const auto* spec = std::get_if<DiffusionSpec>(&model);
  if (!spec) throw NotApplicable("pair proximity needs a continuous model");
  return pair_proximity(system.particles, *spec);
}

double phi_value(double y1, double y2, double pi1, double pi2) {
  if (y1 == 0.0 && y2 == 0.0) return kInf;
  return -0.5 * std::log(y1 * y1 / pi1 + y2 * y2 / pi2);
}

PhiTrace phi_monitor(const std::vector<TraceSample>& y1, const std::vector<TraceSample>& y2,
                     const std::vector<TraceSample>& pi1, const std::vector<TraceSample>& pi2,
                     const std::vector<double>& levels, double pi_floor) {
  const std::size_t n = y1.size();
  if (y2.size() != n || pi1.size() != n || pi2.size() != n)
    throw NotApplicable("phi monitor traces have different lengths");
  PhiTrace trace;
  trace.summary.levels = levels;
  trace.summary.upcrossings.assign(levels.size(), 0);
  trace.samples.reserve(n);
  double previous = -kInf;
  for (std::size_t k = 0; k < n; ++k) {
    if (pi1[k].value < pi_floor || pi2[k].value < pi_floor)
      throw NotApplicable("pi trace below its positive floor");
    const double value = phi_value(y1[k].value, y2[k].value, pi1[k].value, pi2[k].value);
    if (value == kInf) ++trace.summary.sentinel_count;
    for (std::size_t l = 0; l < levels.size(); ++l)
      if (previous < levels[l] && value >= levels[l]) ++trace.summary.upcrossings[l];
    trace.summary.max_phi = std::max(trace.summary.max_phi, value);
    trace.samples.push_back({y1[k].t, value});
    previous = value;
  }
  return trace;
}

std::vector<double> exceedance_frequencies(const std::vector<double>& max_phis, const std::vector<double>& levels) {
  std::vector<double> out(levels.size(), 0.0);
  if (max_phis.empty()) return out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto hits = std::count_if(max_phis.begin(), max_phis.end(), [&](double m) { return m > levels[l]; });
    out[l] = static_cast<double>(hits) / static_cast<double>(max_phis.size());
  }
  return out;
}

PairPhiRecorder::PairPhiRecorder(const DiffusionSpec& model, bool unit_pi, std::size_t stride)
    : model_(&model), unit_pi_(unit_pi), stride_(std::max<std::size_t>(1, stride)) {}

void PairPhiRecorder::observe(double t, const ParticleSystem& system) {
  if (calls_++ % stride_ != 0) return;
  const std::size_t n = system.size();
  std::vector<double> phi(n), pi(n), weighted(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = std::get<Continuous>(system.particles[k]);
    phi[k] = boundary_distance(system.particles[k], *model_);
    pi[k] = unit_pi_ ? 1.0 : model_->normal_diffusivity(t, c.environment, c.position);
    weighted[k] = phi[k] * phi[k] / pi[k];
  }
  // The pair with the largest Phi minimizes Y1^2/pi1 + Y2^2/pi2.
  const auto [i, j] = two_smallest(weighted);
  y1_.push_back({t, phi[i]});
  y2_.push_back({t, phi[j]});
  pi1_.push_back({t, pi[i]});
  pi2_.push_back({t, pi[j]});
}

PhiTrace PairPhiRecorder::finish(const std::vector<double>& levels) const {
  return phi_monitor(y1_, y2_, pi1_, pi2_, levels);
}

RebirthIntensity rebirth_intensity(const std::vector<Event>& event_log, double bin_width,
                                   std::optional<double> horizon, std::optional<std::size_t> cap) {
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
  RebirthIntensity out;
  out.bin_width = bin_width;
  std::size_t bins = 0;
  if (horizon) {
    bins = static_cast<std::size_t>(std::ceil(*horizon / bin_width));
  } else {
    for (const auto& e : event_log)
      if (e.is_rebirth()) bins = std::max(bins, static_cast<std::size_t>(std::floor(e.time / bin_width)) + 1);
  }
  out.counts.assign(bins, 0);
  for (const auto& e : event_log) {
    if (!e.is_rebirth() || e.time < 0.0) continue;
    const auto k = static_cast<std::size_t>(std::floor(e.time / bin_width));
    if (k < bins) ++out.counts[k];
  }
  if (cap)
    for (std::size_t k = 0; k < bins; ++k)
      if (out.counts[k] > *cap) out.flagged_bins.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------
// Trace CSV

void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples) {
  out << "t,value\n";
  out << std::setprecision(18);
  for (const auto& s : samples) out << s.t << ',' << s.value << '\n';
}

void write_trace_csv(const std::string& path, const std::vector<TraceSample>& samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trace file '" + path + "'");
  write_trace_csv(out, samples);
}

std::vector<TraceSample> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,value") throw ConfigError("trace CSV: missing 't,value' header");
  std::vector<TraceSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("trace CSV: malformed line '" + line + "'");
    try {
      std::size_t used_t = 0, used_v = 0;
      const std::string ts = line.substr(0, comma), vs = line.substr(comma + 1);
      const double t = std::stod(ts, &used_t);
      const double v = std::stod(vs, &used_v);
      if (used_t != ts.size() || used_v != vs.size()) throw std::invalid_argument("trailing characters");
      out.push_back({t, v});
    } catch (const std::logic_error&) {
      throw ConfigError("trace CSV: malformed line '" + line + "'");
    }
  }
  return out;
}

std::vector<TraceSample> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  return read_trace_csv(in);
}

}  // namespace fvsim
