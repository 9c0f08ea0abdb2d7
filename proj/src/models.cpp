#include "fvsim/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fvsim/errors.hpp"
#include "fvsim/oracle.hpp"

namespace fvsim {

namespace {

Vec scalar_vec(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

Mat scalar_mat(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

double param(const ModelParams& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->second.size() != 1) throw ConfigError("parameter '" + key + "' must be a scalar");
  return it->second.front();
}

std::vector<double> vector_param(const ModelParams& params, const std::string& key, std::vector<double> fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::function<double(double)> on_position(const StateFunction& f) {
  return [f](double y) { return f(ParticleState{Continuous{scalar_vec(y), Vec(0)}}); };
}

}  // namespace

ModelCatalogEntry model_bm_interval(double lo, double hi, double sigma0) {
  if (!(lo < hi)) throw InvalidModel("bm_interval requires lo < hi");
  if (!(sigma0 > 0.0)) throw InvalidModel("bm_interval requires sigma0 > 0");

  DiffusionSpec spec;
  spec.dim_position = 1;
  spec.dim_env = 0;
  spec.drift = [](double, const Vec&, const Vec&) { return scalar_vec(0.0); };
  spec.diffusion = [sigma0](double, const Vec&, const Vec&) { return scalar_mat(sigma0); };
  spec.domain = Domain::interval(lo, hi);

  ModelCatalogEntry entry;
  entry.name = "bm_interval";
  entry.spec = spec;
  entry.initial_sampler = [lo, hi](Stream& rng) -> ParticleState {
    return Continuous{scalar_vec(lo + (hi - lo) * rng.uniform()), Vec(0)};
  };
  entry.known_solution = [lo, hi, sigma0](const std::optional<ParticleState>& start, double T,
                                          const StateFunction& f) {
    BmIntervalSolution s;
    if (start) {
      const double x0 = std::get<Continuous>(*start).position(0);
      s = bm_interval_solve_from_point(lo, hi, sigma0, x0, T, on_position(f));
    } else {
      const double density = 1.0 / (hi - lo);
      s = bm_interval_solve(lo, hi, sigma0, [density](double) { return density; }, T, on_position(f));
    }
    return ReferenceValue{s.unconditioned, s.survival, s.conditional_expectation};
  };
  return entry;
}

ModelCatalogEntry model_ctmc_ring(std::size_t n, double hop_rate, const std::vector<double>& kill) {
  if (n < 2) throw InvalidModel("ctmc_ring requires n >= 2");
  if (!(hop_rate > 0.0)) throw InvalidModel("ctmc_ring requires hop_rate > 0");
  if (kill.size() != n) throw InvalidModel("ctmc_ring kill vector must have n entries");

  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    rates(i, (i + 1) % size) = hop_rate;
    rates(i, (i + size - 1) % size) = hop_rate;
  }
  const CtmcSpec spec = CtmcSpec::from_rates(rates, Eigen::Map<const Eigen::VectorXd>(kill.data(), size));

  ModelCatalogEntry entry;
  entry.name = "ctmc_ring";
  entry.spec = spec;
  entry.initial_sampler = [](Stream&) -> ParticleState { return Discrete{0}; };
  entry.known_solution = [spec](const std::optional<ParticleState>& start, double T, const StateFunction& f) {
    const auto n_states = static_cast<Eigen::Index>(spec.n_states());
    Eigen::VectorXd initial = Eigen::VectorXd::Zero(n_states);
    initial(start ? static_cast<Eigen::Index>(std::get<Discrete>(*start).index) : 0) = 1.0;
    Eigen::VectorXd fv(n_states);
    for (Eigen::Index k = 0; k < n_states; ++k) fv(k) = f(Discrete{static_cast<std::size_t>(k)});
    const Eigen::MatrixXd P = ctmc_transition(spec, T).matrix;
    const Eigen::RowVectorXd law = initial.transpose() * P;
    const double survival = law.sum();
    const double unconditioned = law.dot(fv);
    return ReferenceValue{unconditioned, survival, unconditioned / survival};
  };
  return entry;
}

ModelCatalogEntry model_env_ou(double ou_rate, double coupling) {
  if (!(ou_rate > 0.0)) throw InvalidModel("env_ou requires ou_rate > 0");
  if (!(std::abs(coupling) < 1.0)) throw InvalidModel("env_ou requires |coupling| < 1");

  DiffusionSpec spec;
  spec.dim_position = 1;
  spec.dim_env = 1;
  spec.drift = [](double, const Vec&, const Vec&) { return scalar_vec(0.0); };
  spec.diffusion = [coupling](double, const Vec& e, const Vec&) {
    return scalar_mat(std::clamp(1.0 + coupling * std::tanh(e(0)), 0.5, 2.0));
  };
  spec.env_drift = [ou_rate](double, const Vec& e, const Vec&) { return scalar_vec(-ou_rate * e(0)); };
  spec.env_diffusion = [](double, const Vec&, const Vec&) { return scalar_mat(1.0); };
  spec.domain = Domain::interval(0.0, 1.0);

  ModelCatalogEntry entry;
  entry.name = "env_ou";
  entry.spec = spec;
  entry.initial_sampler = [](Stream& rng) -> ParticleState {
    return Continuous{scalar_vec(rng.uniform()), scalar_vec(0.0)};
  };
  return entry;
}

ModelCatalogEntry model_bm_free(double sigma0, double x0) {
  if (!(sigma0 > 0.0)) throw InvalidModel("bm_free requires sigma0 > 0");

  DiffusionSpec spec;
  spec.dim_position = 1;
  spec.dim_env = 0;
  spec.drift = [](double, const Vec&, const Vec&) { return scalar_vec(0.0); };
  spec.diffusion = [sigma0](double, const Vec&, const Vec&) { return scalar_mat(sigma0); };
  spec.domain = Domain::whole(1);

  ModelCatalogEntry entry;
  entry.name = "bm_free";
  entry.spec = spec;
  entry.initial_sampler = [x0](Stream&) -> ParticleState { return Continuous{scalar_vec(x0), Vec(0)}; };
  entry.known_solution = [sigma0, x0](const std::optional<ParticleState>& start, double T, const StateFunction& f) {
    // Gaussian expectation by Simpson's rule over +-12 standard deviations.
    const double mean = start ? std::get<Continuous>(*start).position(0) : x0;
    const double sd = sigma0 * std::sqrt(T);
    const int n = 8000;
    const double a = mean - 12.0 * sd, h = 24.0 * sd / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double y = a + h * i;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double z = (y - mean) / sd;
      sum += w * f(Continuous{scalar_vec(y), Vec(0)}) * std::exp(-0.5 * z * z);
    }
    const double value = sum * h / 3.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
    return ReferenceValue{value, 1.0, value};
  };
  return entry;
}

void ModelCatalog::add(const std::string& name, Factory factory) {
  if (!factories_.emplace(name, std::move(factory)).second)
    throw InvalidModel("duplicate model name '" + name + "'");
}

ModelCatalogEntry ModelCatalog::make(const std::string& name, const ModelParams& params) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigError("unknown model '" + name + "'");
  ModelCatalogEntry entry = it->second(params);
  entry.name = name;
  return entry;
}

std::vector<std::string> ModelCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, factory] : factories_) out.push_back(name);
  return out;
}

const ModelCatalog& builtin_catalog() {
  static const ModelCatalog catalog = [] {
    ModelCatalog c;
    c.add("bm_interval", [](const ModelParams& p) {
      return model_bm_interval(param(p, "lo", 0.0), param(p, "hi", 1.0), param(p, "sigma", 1.0));
    });
    c.add("ctmc_ring", [](const ModelParams& p) {
      const double n = param(p, "n", 2.0);
      if (n < 2.0 || n != std::floor(n)) throw ConfigError("ctmc_ring parameter n must be an integer >= 2");
      const auto size = static_cast<std::size_t>(n);
      return model_ctmc_ring(size, param(p, "hop_rate", 1.0), vector_param(p, "kill", std::vector<double>(size, 0.0)));
    });
    c.add("env_ou", [](const ModelParams& p) {
      return model_env_ou(param(p, "ou_rate", 1.0), param(p, "coupling", 0.5));
    });
    c.add("bm_free", [](const ModelParams& p) { return model_bm_free(param(p, "sigma", 1.0), param(p, "x0", 0.0)); });
    return c;
  }();
  return catalog;
}

}  // namespace fvsim
