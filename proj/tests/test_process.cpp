#include <doctest.h>

#include <cmath>
#include <limits>

#include "fvsim/errors.hpp"
#include "fvsim/process.hpp"
#include "reference.hpp"

using namespace fvsim;
using ref::vec;
using ref::vec1;

namespace {

DiffusionSpec constant_diffusion(double drift, double sigma, Domain domain = Domain::interval(0.0, 1.0)) {
  DiffusionSpec spec;
  spec.drift = [drift](double, const Vec&, const Vec&) { return vec1(drift); };
  spec.diffusion = [sigma](double, const Vec&, const Vec&) {
    Mat m(1, 1);
    m(0, 0) = sigma;
    return m;
  };
  spec.domain = domain;
  return spec;
}

Vec random_point(Stream& rng, int dim, double spread) {
  Vec x(dim);
  for (int k = 0; k < dim; ++k) x(k) = spread * (2.0 * rng.uniform() - 1.0);
  return x;
}

}  // namespace

TEST_SUITE("process") {
  TEST_CASE("interval distance is the distance to the nearer endpoint") {
    const Domain d = Domain::interval(0.0, 1.0);
    CHECK(d.distance_to_boundary(vec1(0.3)) == doctest::Approx(0.3));
    CHECK(d.distance_to_boundary(vec1(0.8)) == doctest::Approx(0.2));
    CHECK(d.distance_to_boundary(vec1(1.2)) == doctest::Approx(-0.2));
    CHECK_FALSE(d.contains(vec1(0.0)));
    CHECK_FALSE(d.contains(vec1(1.0)));
  }

  TEST_CASE("box, ball and half-space distances are exact") {
    const Domain box = Domain::box(vec({0.0, 0.0}), vec({2.0, 1.0}));
    CHECK(box.distance_to_boundary(vec({1.0, 0.25})) == doctest::Approx(0.25));
    CHECK(box.distance_to_boundary(vec({3.0, 2.0})) == doctest::Approx(-std::sqrt(2.0)));
    CHECK(box.distance_to_boundary(vec({2.5, 0.5})) == doctest::Approx(-0.5));

    const Domain ball = Domain::ball(vec({1.0, 1.0}), 2.0);
    CHECK(ball.distance_to_boundary(vec({1.0, 2.0})) == doctest::Approx(1.0));
    CHECK(ball.distance_to_boundary(vec({4.0, 1.0})) == doctest::Approx(-1.0));

    const Domain half = Domain::half_space(vec({0.0, 1.0}), 0.5);
    CHECK(half.distance_to_boundary(vec({7.0, 2.0})) == doctest::Approx(1.5));
    CHECK(half.distance_to_boundary(vec({7.0, 0.0})) == doctest::Approx(-0.5));

    const Domain whole = Domain::whole(2);
    CHECK(std::isinf(whole.distance_to_boundary(vec({3.0, 4.0}))));
    CHECK_FALSE(whole.has_boundary());
  }

  TEST_CASE("membership agrees with positive distance on random points") {
    Stream rng(11);
    const Domain domains[] = {Domain::interval(-1.0, 2.0), Domain::box(vec({0.0, -1.0}), vec({1.0, 1.0})),
                              Domain::ball(vec({0.5, 0.5, 0.0}), 1.0), Domain::half_space(vec({0.6, 0.8}), 0.1)};
    for (const Domain& d : domains) {
      for (int k = 0; k < 10000; ++k) {
        const Vec x = random_point(rng, d.dimension(), 3.0);
        REQUIRE(d.contains(x) == (d.distance_to_boundary(x) > 0.0));
      }
    }
  }

  TEST_CASE("ball distance matches radius minus distance to centre") {
    Stream rng(5);
    const Vec c = vec({0.5, -0.5, 1.0});
    const Domain ball = Domain::ball(c, 1.5);
    for (int k = 0; k < 1000; ++k) {
      const Vec x = random_point(rng, 3, 3.0);
      REQUIRE(ball.distance_to_boundary(x) == doctest::Approx(1.5 - (x - c).norm()).epsilon(1e-12));
    }
  }

  TEST_CASE("sampling respects the minimum distance") {
    Stream rng(8);
    const Domain box = Domain::box(vec({0.0, 0.0}), vec({1.0, 3.0}));
    for (int k = 0; k < 1000; ++k) {
      REQUIRE(box.distance_to_boundary(box.sample_interior(rng, 0.2)) >= 0.2 - 1e-12);
      REQUIRE(std::abs(box.distance_to_boundary(box.sample_boundary(rng))) < 1e-12);
    }
    CHECK_THROWS_AS(Domain::whole(1).sample_interior(rng), NotApplicable);
  }

  TEST_CASE("Euler-Maruyama examples") {
    const Continuous start = make_continuous({0.5});
    SUBCASE("zero coefficients leave the state unchanged") {
      const DiffusionSpec spec = constant_diffusion(0.0, 0.0);
      for (double dt : {1e-4, 0.1, 3.0}) {
        const Continuous next = step_diffusion(start, spec, 0.0, dt, vec1(0.7));
        CHECK(next.position(0) == 0.5);
      }
    }
    SUBCASE("unit diffusion with unit noise") {
      const Continuous next = step_diffusion(start, constant_diffusion(0.0, 1.0), 0.0, 0.01, vec1(1.0));
      CHECK(next.position(0) == doctest::Approx(0.6).epsilon(1e-14));
    }
    SUBCASE("deterministic Ornstein-Uhlenbeck step") {
      DiffusionSpec spec = constant_diffusion(0.0, 1.0, Domain::whole(1));
      spec.drift = [](double, const Vec&, const Vec& z) { return Vec(-z); };
      const Continuous next = step_diffusion(make_continuous({1.0}), spec, 0.0, 0.1, vec1(0.0));
      CHECK(next.position(0) == doctest::Approx(0.9).epsilon(1e-14));
    }
  }

  TEST_CASE("environment noise follows the position noise") {
    DiffusionSpec spec = constant_diffusion(0.0, 1.0);
    spec.dim_env = 1;
    spec.env_drift = [](double, const Vec& e, const Vec&) { return Vec(-e); };
    spec.env_diffusion = [](double, const Vec&, const Vec&) {
      Mat m(1, 1);
      m(0, 0) = 2.0;
      return m;
    };
    const Continuous next = step_diffusion(make_continuous({0.5}, {1.0}), spec, 0.0, 0.04, vec({0.5, -1.0}));
    CHECK(next.position(0) == doctest::Approx(0.6));
    CHECK(next.environment(0) == doctest::Approx(1.0 - 0.04 - 0.4));
  }

  TEST_CASE("non-finite coefficients raise CoefficientError") {
    DiffusionSpec spec = constant_diffusion(std::numeric_limits<double>::quiet_NaN(), 1.0);
    CHECK_THROWS_AS(step_diffusion(make_continuous({0.5}), spec, 0.0, 0.01, vec1(0.0)), CoefficientError);
    spec = constant_diffusion(0.0, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(step_diffusion(make_continuous({0.5}), spec, 0.0, 0.01, vec1(0.0)), CoefficientError);
  }

  TEST_CASE("zero-coefficient trajectories stay constant for all time") {
    const DiffusionSpec spec = constant_diffusion(0.0, 0.0);
    Stream rng(3);
    Continuous s = make_continuous({0.37});
    for (int k = 0; k < 10000; ++k) s = step_diffusion(s, spec, k * 0.01, 0.01, vec1(rng.normal()));
    CHECK(s.position(0) == 0.37);
  }

  TEST_CASE("hard kill examples") {
    const Domain d = Domain::interval(0.0, 1.0);
    const HardKillOptions naive;
    CHECK_FALSE(detect_hard_kill(vec1(0.5), vec1(0.7), d, 0.01, naive, 0.0).has_value());
    const auto sub = detect_hard_kill(vec1(0.5), vec1(1.1), d, 0.01, naive, 0.5);
    REQUIRE(sub.has_value());
    CHECK(*sub == doctest::Approx(0.01 * 0.5 / 0.6));
    const auto on_boundary = detect_hard_kill(vec1(0.5), vec1(1.0), d, 0.01, naive, 0.5);
    REQUIRE(on_boundary.has_value());
    CHECK(*on_boundary == doctest::Approx(0.01));
  }

  TEST_CASE("bridge crossing probability") {
    CHECK(bridge_crossing_probability(0.9, 0.95, 0.0, 1.0, 0.01, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    const Domain d = Domain::interval(0.0, 1.0);
    HardKillOptions bridge{true, 1.0};
    const double p = std::exp(-1.0);
    const auto killed = detect_hard_kill(vec1(0.9), vec1(0.95), d, 0.01, bridge, 0.5 * p);
    REQUIRE(killed.has_value());
    CHECK(*killed > 0.0);
    CHECK(*killed <= 0.01);
    CHECK_FALSE(detect_hard_kill(vec1(0.9), vec1(0.95), d, 0.01, bridge, p + 1e-9).has_value());
    CHECK_THROWS_AS(detect_hard_kill(vec({0.5, 0.5}), vec({0.5, 0.6}), Domain::box(vec({0, 0}), vec({1, 1})), 0.01,
                                     bridge, 0.5),
                    UnsupportedBridge);
  }

  TEST_CASE("bridge crossing probability matches a fine-grid bridge simulation") {
    // Brownian bridge from 0.9 to 0.95 over dt = 0.01, monitored on 10^4 sub-steps.
    const double a = 0.9, b = 0.95, dt = 0.01;
    const int steps = 10000, paths = 4000;
    const double h = dt / steps;
    Stream rng(2024);
    int exits = 0;
    for (int p = 0; p < paths; ++p) {
      double x = a, t = 0.0;
      for (int k = 0; k < steps - 1; ++k) {
        const double remaining = dt - t;
        const double mean = x + (b - x) * h / remaining;
        const double var = h * (remaining - h) / remaining;
        x = mean + std::sqrt(var) * rng.normal();
        t += h;
        if (x <= 0.0 || x >= 1.0) {
          ++exits;
          break;
        }
      }
    }
    const double mc = static_cast<double>(exits) / paths;
    const double exact = bridge_crossing_probability(a, b, 0.0, 1.0, dt, 1.0);
    // Discrete monitoring misses crossings, biasing mc down by about 0.007 here.
    CHECK(mc < exact + 0.025);
    CHECK(mc > exact - 0.03);
  }

  TEST_CASE("no kill without bridge when both endpoints are inside") {
    Stream rng(77);
    const Domain d = Domain::ball(vec({0.0, 0.0}), 1.0);
    for (int k = 0; k < 10000; ++k) {
      const Vec a = d.sample_interior(rng), b = d.sample_interior(rng);
      REQUIRE_FALSE(detect_hard_kill(a, b, d, 0.01, {}, rng.uniform()).has_value());
    }
  }

  TEST_CASE("soft kill examples") {
    const SoftKillStep s = sample_soft_kill(0.9, 2.0, 5.0, 0.1, 1.0);
    CHECK(s.accumulator == doctest::Approx(1.1));
    CHECK(s.killed);
    CHECK(s.fraction == doctest::Approx(0.5));

    double acc = 0.0;
    for (int k = 0; k < 100000; ++k) {
      const SoftKillStep z = sample_soft_kill(acc, 0.0, 1.0, 0.1, 1e-6);
      REQUIRE_FALSE(z.killed);
      acc = z.accumulator;
    }
    CHECK_THROWS_AS(sample_soft_kill(0.0, -0.1, 1.0, 0.1, 1.0), RateError);
    CHECK_THROWS_AS(sample_soft_kill(0.0, 1.5, 1.0, 0.1, 1.0), RateError);
  }

  TEST_CASE("soft kill accumulation is additive over split steps") {
    Stream rng(19);
    for (int k = 0; k < 10000; ++k) {
      const double acc = rng.uniform(), rate = 3.0 * rng.uniform(), dt = 0.5 * rng.uniform();
      const double threshold = acc + rng.exponential() * 0.2;
      const SoftKillStep whole = sample_soft_kill(acc, rate, 3.0, dt, threshold);
      const SoftKillStep first = sample_soft_kill(acc, rate, 3.0, dt / 2, threshold);
      const SoftKillStep second = sample_soft_kill(first.accumulator, rate, 3.0, dt / 2, threshold);
      REQUIRE(whole.killed == (first.killed || second.killed));
    }
  }

  TEST_CASE("constant unit hazard gives exponential kill times") {
    Stream rng(31);
    const double dt = 0.01;
    const int draws = 100000;
    std::vector<double> times;
    times.reserve(draws);
    for (int k = 0; k < draws; ++k) {
      const double threshold = rng.exponential();
      double acc = 0.0, t = 0.0;
      for (;;) {
        const SoftKillStep s = sample_soft_kill(acc, 1.0, 1.0, dt, threshold);
        if (s.killed) {
          times.push_back(t + s.fraction * dt);
          break;
        }
        acc = s.accumulator;
        t += dt;
      }
    }
    std::sort(times.begin(), times.end());
    double ks = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double cdf = 1.0 - std::exp(-times[k]);
      ks = std::max({ks, std::abs(cdf - static_cast<double>(k) / draws), std::abs(cdf - (k + 1.0) / draws)});
    }
    CHECK(ks < 0.01);
  }

  TEST_CASE("chain step examples") {
    Stream rng(12);
    SUBCASE("single state with unit kill rate") {
      Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(1, 1);
      const CtmcSpec spec = CtmcSpec::from_rates(rates, Eigen::VectorXd::Ones(1));
      double sum = 0.0;
      for (int k = 0; k < 100000; ++k) {
        const CtmcStep s = ctmc_step(0, spec, rng);
        REQUIRE(is_cemetery(s.next));
        sum += s.holding_time;
      }
      CHECK(std::abs(sum / 1e5 - 1.0) < 0.02);
    }
    SUBCASE("jump versus kill ratio") {
      Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(2, 2);
      rates(0, 1) = 2.0;
      Eigen::VectorXd kill(2);
      kill << 1.0, 0.0;
      const CtmcSpec spec = CtmcSpec::from_rates(rates, kill);
      CHECK(spec.exit_rate(0) == 3.0);
      int jumps = 0;
      for (int k = 0; k < 100000; ++k) jumps += std::holds_alternative<Discrete>(ctmc_step(0, spec, rng).next);
      CHECK(std::abs(jumps / 1e5 - 2.0 / 3.0) < 0.01);
      const CtmcStep absorbing = ctmc_step(1, spec, rng);
      CHECK(std::isinf(absorbing.holding_time));
      CHECK(absorbing.next == ParticleState{Discrete{1}});
    }
  }

  TEST_CASE("chain step frequencies pass a chi-square test") {
    Stream rng(99);
    Eigen::MatrixXd rates(3, 3);
    rates << 0, 1.0, 0.5, 2.0, 0, 1.5, 0.25, 0.25, 0;
    Eigen::VectorXd kill(3);
    kill << 0.5, 0.0, 3.0;
    const CtmcSpec spec = CtmcSpec::from_rates(rates, kill);
    // Targets of state 0: state 1 (1.0), state 2 (0.5), cemetery (0.5).
    std::array<int, 3> counts{};
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      const CtmcStep s = ctmc_step(0, spec, rng);
      if (is_cemetery(s.next))
        ++counts[2];
      else
        ++counts[std::get<Discrete>(s.next).index - 1];
    }
    const std::array<double, 3> p{0.5, 0.25, 0.25};
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) chi2 += std::pow(counts[k] - n * p[k], 2) / (n * p[k]);
    CHECK(chi2 < 13.82);  // chi-square(2) quantile at 1 - 1e-3
  }

  TEST_CASE("chain specs validate their invariants") {
    Eigen::MatrixXd bad(2, 2);
    bad << -1.0, 2.0, 1.0, -1.0;
    CHECK_THROWS_AS((CtmcSpec{bad, Eigen::VectorXd::Zero(2)}.validate()), InvalidModel);
    Eigen::MatrixXd negative(2, 2);
    negative << -1.0, -0.5, 1.0, -1.0;
    CHECK_THROWS_AS((CtmcSpec{negative, Eigen::VectorXd::Zero(2)}.validate()), InvalidModel);
    Stream rng(4);
    for (int k = 0; k < 100; ++k) CHECK_NOTHROW(ref::random_ctmc(rng, 1 + k % 6).validate());
  }

  TEST_CASE("kill rate evaluation enforces its declared bound") {
    DiffusionSpec spec = constant_diffusion(0.0, 1.0);
    spec.kill_rate = [](double, const Vec&, const Vec& z) { return 3.0 * z(0); };
    spec.kill_rate_max = 2.0;
    CHECK(spec.kill_rate_at(0.0, Vec(0), vec1(0.5)) == doctest::Approx(1.5));
    CHECK_THROWS_AS(spec.kill_rate_at(0.0, Vec(0), vec1(0.9)), RateError);
  }
}
