#include "fvsim/kernels.hpp"

#include "fvsim/errors.hpp"

namespace fvsim {

namespace {

std::size_t uniform_other(std::size_t n, std::size_t killed, Stream& rng) {
  if (n < 2) throw StructuralError("rebirth needs at least one survivor");
  std::size_t j = rng.below(n - 1);
  return j >= killed ? j + 1 : j;
}

CustomKernel same_for_both(std::string id, ConfigurationKernel kernel) {
  return CustomKernel{std::move(id), kernel, kernel};
}

// Point of the segment from the nearest boundary point along the inward normal.
Vec at_distance(const Domain& domain, const Vec& x, double distance) {
  const Vec normal = domain.inward_normal(x);
  const Vec foot = x - domain.distance_to_boundary(x) * normal;
  return foot + distance * normal;
}

}  // namespace

CustomKernel fleming_viot_as_custom() {
  return same_for_both("fleming_viot_custom", [](double, const std::vector<ParticleState>& config,
                                                 std::size_t killed, Stream& rng) {
    std::vector<ParticleState> out = config;
    out[killed] = config[uniform_other(config.size(), killed, rng)];
    return out;
  });
}

CustomKernel fixed_point_kernel(const Vec& x0) {
  return same_for_both("fixed_point", [x0](double, const std::vector<ParticleState>& config, std::size_t killed,
                                           Stream&) {
    std::vector<ParticleState> out = config;
    auto& c = std::get<Continuous>(out[killed]);
    c.position = x0;
    return out;
  });
}

CustomKernel boundary_hugging_kernel(const Domain& domain, double epsilon) {
  return same_for_both("boundary_hugging", [domain, epsilon](double, const std::vector<ParticleState>& config,
                                                             std::size_t killed, Stream&) {
    std::vector<ParticleState> out = config;
    auto& c = std::get<Continuous>(out[killed]);
    c.position = at_distance(domain, c.position, epsilon);
    return out;
  });
}

CustomKernel survivor_squeezing_kernel(const Domain& domain, double factor) {
  if (!(factor > 0.0 && factor < 1.0)) throw InvalidModel("squeezing factor must lie in (0, 1)");
  return same_for_both("survivor_squeezing", [domain, factor](double, const std::vector<ParticleState>& config,
                                                              std::size_t killed, Stream& rng) {
    std::vector<ParticleState> out = config;
    const std::size_t source = uniform_other(config.size(), killed, rng);
    out[killed] = config[source];
    auto& moved = std::get<Continuous>(out[source]);
    moved.position = at_distance(domain, moved.position, factor * domain.distance_to_boundary(moved.position));
    return out;
  });
}

}  // namespace fvsim
