#include <doctest.h>

#include <cmath>

#include "fvsim/errors.hpp"
#include "fvsim/models.hpp"
#include "fvsim/oracle.hpp"
#include "reference.hpp"

using namespace fvsim;
using ref::vec1;

namespace {

StateFunction indicator(std::size_t k) {
  return [k](const ParticleState& s) { return std::get<Discrete>(s).index == k ? 1.0 : 0.0; };
}

double sigma_of(const ModelCatalogEntry& m, double e) {
  return m.diffusion().diffusion(0.0, vec1(e), vec1(0.5))(0, 0);
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("interval Brownian motion") {
    const ModelCatalogEntry m = model_bm_interval(0.0, 1.0, 1.0);
    CHECK(m.diffusion().domain.distance_to_boundary(vec1(0.3)) == doctest::Approx(0.3));
    CHECK(m.diffusion().dim_env == 0);
    CHECK_FALSE(m.diffusion().has_soft_killing());
    const ReferenceValue r = m.known_solution(std::nullopt, 1.0, [](const ParticleState&) { return 1.0; });
    CHECK(r.survival == doctest::Approx(ref::bm_survival_uniform(1.0, 1.0, 1.0)).epsilon(1e-8));
    CHECK(r.conditional == doctest::Approx(1.0));
    CHECK_THROWS_AS(model_bm_interval(1.0, 0.0, 1.0), InvalidModel);
    CHECK_THROWS_AS(model_bm_interval(0.0, 1.0, 0.0), InvalidModel);
  }

  TEST_CASE("ring chain references") {
    SUBCASE("no killing") {
      const ModelCatalogEntry m = model_ctmc_ring(2, 1.0, {0.0, 0.0});
      const ReferenceValue r = m.known_solution(ParticleState{Discrete{0}}, 0.7, indicator(0));
      CHECK(r.conditional == doctest::Approx(r.unconditioned).epsilon(1e-13));
      CHECK(r.survival == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("uniform killing") {
      const ModelCatalogEntry m = model_ctmc_ring(2, 1.0, {1.0, 1.0});
      for (double T : {0.25, 1.0, 3.0}) {
        const ReferenceValue r = m.known_solution(ParticleState{Discrete{0}}, T, indicator(0));
        CHECK(r.conditional == doctest::Approx((1.0 + std::exp(-2.0 * T)) / 2.0).epsilon(1e-12));
        CHECK(r.survival == doctest::Approx(std::exp(-T)).epsilon(1e-12));
      }
    }
    SUBCASE("killing on one state lowers its conditioned mass") {
      const ModelCatalogEntry killed = model_ctmc_ring(3, 1.0, {0.0, 0.0, 5.0});
      const ModelCatalogEntry free = model_ctmc_ring(3, 1.0, {0.0, 0.0, 0.0});
      const double with = killed.known_solution(ParticleState{Discrete{0}}, 1.0, indicator(2)).conditional;
      const double without = free.known_solution(ParticleState{Discrete{0}}, 1.0, indicator(2)).unconditioned;
      CHECK(with < without);
    }
    SUBCASE("ring structure") {
      const CtmcSpec& spec = model_ctmc_ring(5, 2.0, std::vector<double>(5, 0.5)).ctmc();
      CHECK(spec.generator(0, 1) == 2.0);
      CHECK(spec.generator(0, 4) == 2.0);
      CHECK(spec.generator(0, 2) == 0.0);
      CHECK(spec.exit_rate(3) == doctest::Approx(4.5));
      CHECK(model_ctmc_ring(2, 1.0, {0.0, 0.0}).ctmc().exit_rate(0) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(model_ctmc_ring(1, 1.0, {0.0}), InvalidModel);
    CHECK_THROWS_AS(model_ctmc_ring(3, 1.0, {0.0, 0.0}), InvalidModel);
    CHECK_THROWS_AS(model_ctmc_ring(2, 1.0, {-1.0, 0.0}), InvalidModel);
  }

  TEST_CASE("environment-coupled model") {
    const ModelCatalogEntry m = model_env_ou(1.0, 0.5);
    CHECK(sigma_of(m, 0.0) == doctest::Approx(1.0));
    CHECK(sigma_of(m, 50.0) == doctest::Approx(1.5));
    CHECK(sigma_of(m, -50.0) == doctest::Approx(0.5));
    CHECK(m.diffusion().env_drift(0.0, vec1(2.0), vec1(0.5))(0) == doctest::Approx(-2.0));
    CHECK_FALSE(m.known_solution);
    CHECK_THROWS_AS(model_env_ou(1.0, 1.0), InvalidModel);
    CHECK_THROWS_AS(model_env_ou(1.0, -1.5), InvalidModel);
    CHECK_THROWS_AS(model_env_ou(0.0, 0.5), InvalidModel);
  }

  TEST_CASE("uncoupled environment model moves like interval Brownian motion") {
    const ModelCatalogEntry env = model_env_ou(2.0, 0.0);
    const ModelCatalogEntry bm = model_bm_interval(0.0, 1.0, 1.0);
    Stream a(stream_key(1, 0)), b(stream_key(1, 0));
    Continuous x = make_continuous({0.5}, {0.0}), y = make_continuous({0.5});
    for (int k = 0; k < 2000; ++k) {
      const double xi = a.normal(), beta = a.normal();
      (void)b;
      x = step_diffusion(x, env.diffusion(), k * 1e-4, 1e-4, ref::vec({xi, beta}));
      y = step_diffusion(y, bm.diffusion(), k * 1e-4, 1e-4, vec1(xi));
      REQUIRE(x.position(0) == y.position(0));
    }
  }

  TEST_CASE("free Brownian motion reference") {
    const ModelCatalogEntry m = model_bm_free(2.0, 1.0);
    const ReferenceValue r =
        m.known_solution(std::nullopt, 0.5, [](const ParticleState& s) {
          const double z = std::get<Continuous>(s).position(0);
          return z * z;
        });
    CHECK(r.unconditioned == doctest::Approx(1.0 + 4.0 * 0.5).epsilon(1e-9));
    CHECK(r.survival == 1.0);
    CHECK_FALSE(m.diffusion().domain.has_boundary());
  }

  TEST_CASE("catalog invariants on random evaluations") {
    const ModelCatalog& catalog = builtin_catalog();
    CHECK(catalog.names() == std::vector<std::string>{"bm_free", "bm_interval", "ctmc_ring", "env_ou"});
    Stream rng(21);
    for (const std::string& name : catalog.names()) {
      const ModelCatalogEntry m = catalog.make(name);
      CHECK(m.name == name);
      for (int k = 0; k < 10000; ++k) {
        const ParticleState s = m.initial_sampler(rng);
        REQUIRE(is_live(s, m.spec));
        if (m.discrete()) continue;
        const DiffusionSpec& d = m.diffusion();
        const Vec e = d.dim_env ? vec1(4.0 * rng.normal()) : Vec(0);
        const Vec z = d.domain.has_boundary() ? d.domain.sample_interior(rng) : vec1(10.0 * rng.normal());
        const double t = 10.0 * rng.uniform();
        REQUIRE(d.drift(t, e, z).allFinite());
        const Mat sigma = d.diffusion(t, e, z);
        REQUIRE(sigma.allFinite());
        REQUIRE(sigma(0, 0) >= 0.5);
        REQUIRE(sigma(0, 0) <= 2.0);
        if (d.dim_env) REQUIRE(d.env_drift(t, e, z).allFinite());
      }
      if (m.discrete()) CHECK_NOTHROW(m.ctmc().validate());
    }
    CHECK_THROWS_AS(catalog.make("no_such_model"), ConfigError);
    CHECK_THROWS_AS(catalog.make("bm_interval", {{"lo", {0.0, 1.0}}}), ConfigError);
    ModelCatalog copy;
    copy.add("x", [](const ModelParams&) { return model_bm_free(1.0); });
    CHECK_THROWS_AS(copy.add("x", [](const ModelParams&) { return model_bm_free(1.0); }), InvalidModel);
  }

  TEST_CASE("catalog parameters") {
    const ModelCatalogEntry ring = builtin_catalog().make("ctmc_ring", {{"n", {3}}, {"kill", {0, 1, 2}}});
    CHECK(ring.ctmc().n_states() == 3);
    CHECK(ring.ctmc().kill_rates(2) == 2.0);
    CHECK_THROWS_AS(builtin_catalog().make("ctmc_ring", {{"n", {2.5}}}), ConfigError);
  }
}
