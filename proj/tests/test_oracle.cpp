#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fvsim/errors.hpp"
#include "fvsim/oracle.hpp"
#include "reference.hpp"

using namespace fvsim;

namespace {

CtmcSpec two_state(double hop, double kill0, double kill1) {
  Eigen::MatrixXd rates(2, 2);
  rates << 0.0, hop, hop, 0.0;
  Eigen::VectorXd kill(2);
  kill << kill0, kill1;
  return CtmcSpec::from_rates(rates, kill);
}

Eigen::VectorXd delta(int n, int k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(k) = 1.0;
  return v;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("transition at time zero is the identity") {
    Stream rng(1);
    const CtmcSpec spec = ref::random_ctmc(rng, 4);
    CHECK(ctmc_transition(spec, 0.0).matrix.isApprox(Eigen::MatrixXd::Identity(4, 4)));
  }

  TEST_CASE("single killed state decays exponentially") {
    const CtmcSpec spec = CtmcSpec::from_rates(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1));
    CHECK(ctmc_transition(spec, 1.0).matrix(0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-13));
  }

  TEST_CASE("uniformization agrees with two independent exponentials") {
    Stream rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 6;
      const CtmcSpec spec = ref::random_ctmc(rng, n);
      const double T = 0.1 + 3.0 * rng.uniform();
      const Eigen::MatrixXd P = ctmc_transition(spec, T).matrix;
      REQUIRE((P - ref::expm_taylor(spec.generator, T)).cwiseAbs().maxCoeff() < 1e-10);
      REQUIRE((P - ctmc_transition_eigen(spec, T)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("semigroup property and sub-Markov rows") {
    Stream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const CtmcSpec spec = ref::random_ctmc(rng, 1 + trial % 6);
      const double s = 2.0 * rng.uniform(), t = 2.0 * rng.uniform();
      const Eigen::MatrixXd Pst = ctmc_transition(spec, s + t).matrix;
      const Eigen::MatrixXd PsPt = ctmc_transition(spec, s).matrix * ctmc_transition(spec, t).matrix;
      REQUIRE((Pst - PsPt).cwiseAbs().rowwise().sum().maxCoeff() < 1e-10);
      REQUIRE(Pst.rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
      REQUIRE(Pst.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("long horizons with large rates") {
    const CtmcSpec spec = two_state(50.0, 1.0, 30.0);
    const Eigen::MatrixXd P = ctmc_transition(spec, 10.0).matrix;
    CHECK((P - ref::expm_taylor(spec.generator, 10.0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("conditional expectation examples") {
    const double T = 1.0;
    const Eigen::VectorXd f = delta(2, 0);
    SUBCASE("uniform killing cancels") {
      const CtmcSpec killed = two_state(1.0, 1.0, 1.0);
      CHECK(ctmc_conditional(killed, delta(2, 0), T, f) == doctest::Approx((1.0 + std::exp(-2.0)) / 2.0).epsilon(1e-12));
      const CtmcSpec free = two_state(1.0, 0.0, 0.0);
      CHECK(ctmc_conditional(killed, delta(2, 0), T, f) ==
            doctest::Approx(ctmc_conditional(free, delta(2, 0), T, f)).epsilon(1e-12));
      CHECK(ctmc_survival(killed, delta(2, 0), T) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    }
    SUBCASE("no killing: conditional equals unconditioned") {
      const CtmcSpec free = two_state(1.0, 0.0, 0.0);
      CHECK(ctmc_conditional(free, delta(2, 0), T, f) ==
            doctest::Approx(ctmc_unconditioned(free, delta(2, 0), T, f)).epsilon(1e-13));
    }
    SUBCASE("constant function conditions to one") {
      Stream rng(5);
      const CtmcSpec spec = ref::random_ctmc(rng, 5);
      CHECK(ctmc_conditional(spec, delta(5, 2), 2.0, Eigen::VectorXd::Ones(5)) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("uniform kill rate cancels on random chains") {
      Stream rng(6);
      for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 5;
        Eigen::MatrixXd rates(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) rates(i, j) = i == j ? 0.0 : rng.uniform();
        const double c = 3.0 * rng.uniform();
        const CtmcSpec with = CtmcSpec::from_rates(rates, Eigen::VectorXd::Constant(n, c));
        const CtmcSpec without = CtmcSpec::from_rates(rates, Eigen::VectorXd::Zero(n));
        Eigen::VectorXd g(n);
        for (int k = 0; k < n; ++k) g(k) = rng.uniform();
        REQUIRE(std::abs(ctmc_conditional(with, delta(n, 0), 1.5, g) - ctmc_conditional(without, delta(n, 0), 1.5, g)) <
                1e-12);
      }
    }
  }

  TEST_CASE("zero survival mass is degenerate") {
    const CtmcSpec spec = CtmcSpec::from_rates(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 800.0));
    CHECK_THROWS_AS(ctmc_conditional(spec, delta(1, 0), 1.0, Eigen::VectorXd::Ones(1)), DegenerateConditioning);
  }

  TEST_CASE("quasi-stationary distributions") {
    SUBCASE("symmetric chain") {
      const CtmcQsd q = ctmc_qsd(two_state(1.0, 0.7, 0.7));
      CHECK(q.distribution(0) == doctest::Approx(0.5).epsilon(1e-9));
      CHECK(q.decay_rate == doctest::Approx(0.7).epsilon(1e-9));
    }
    SUBCASE("kill on one side") {
      // Sub-generator [[-1, 1], [1, -3]]: principal eigenvalue -2 + sqrt 2 with left
      // eigenvector proportional to (1, sqrt 2 - 1).
      const CtmcQsd q = ctmc_qsd(two_state(1.0, 0.0, 2.0));
      CHECK(q.distribution(0) == doctest::Approx(0.70710678118654752).epsilon(1e-9));
      CHECK(q.distribution(1) == doctest::Approx(0.29289321881345248).epsilon(1e-9));
      CHECK(q.decay_rate == doctest::Approx(2.0 - std::numbers::sqrt2).epsilon(1e-9));
    }
    SUBCASE("eigen-equation residual on random chains") {
      Stream rng(8);
      for (int trial = 0; trial < 20; ++trial) {
        const CtmcSpec spec = ref::random_ctmc(rng, 2 + trial % 5);
        const CtmcQsd q = ctmc_qsd(spec);
        const Eigen::RowVectorXd v = q.distribution.transpose();
        REQUIRE(q.decay_rate > 0.0);
        REQUIRE((v * spec.generator + q.decay_rate * v).cwiseAbs().maxCoeff() < 1e-8);
        REQUIRE(q.distribution.sum() == doctest::Approx(1.0));
      }
    }
    SUBCASE("iteration budget") {
      Stream rng(9);
      CHECK_THROWS_AS(ctmc_qsd(ref::random_ctmc(rng, 4), 1e-10, 2), EigenError);
    }
  }

  TEST_CASE("killed Brownian motion on an interval") {
    const auto one = [](double) { return 1.0; };
    const auto uniform = [](double) { return 1.0; };
    SUBCASE("constant function and symmetry") {
      const BmIntervalSolution s = bm_interval_solve(0.0, 1.0, 1.0, uniform, 0.3, one);
      CHECK(s.conditional_expectation == doctest::Approx(1.0).epsilon(1e-12));
      const BmIntervalSolution m = bm_interval_solve(0.0, 1.0, 1.0, uniform, 0.3, [](double y) { return y; });
      CHECK(m.conditional_expectation == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("survival from a uniform start matches the odd-mode series") {
      for (double T : {0.01, 0.1, 1.0}) {
        const BmIntervalSolution s = bm_interval_solve(0.0, 1.0, 1.0, uniform, T, one);
        CHECK(s.survival == doctest::Approx(ref::bm_survival_uniform(1.0, 1.0, T)).epsilon(1e-8));
      }
      const BmIntervalSolution scaled = bm_interval_solve(-1.0, 2.0, 0.5, [](double) { return 1.0 / 3.0; }, 2.0, one);
      CHECK(scaled.survival == doctest::Approx(ref::bm_survival_uniform(3.0, 0.5, 2.0)).epsilon(1e-8));
    }
    SUBCASE("survival from a point matches the method of images") {
      for (double x : {0.1, 0.5, 0.93})
        for (double T : {0.005, 0.2, 1.0}) {
          const BmIntervalSolution s = bm_interval_solve_from_point(0.0, 1.0, 1.0, x, T, one);
          CHECK(s.survival == doctest::Approx(ref::bm_survival_from_point(x, 1.0, 1.0, T)).epsilon(1e-8));
        }
    }
    SUBCASE("survival decreases in time within (0, 1)") {
      double previous = 1.0;
      for (double T = 0.05; T < 3.0; T += 0.05) {
        const double s = bm_interval_solve(0.0, 1.0, 1.0, uniform, T, one).survival;
        REQUIRE(s > 0.0);
        REQUIRE(s < previous);
        previous = s;
      }
    }
    SUBCASE("long horizon density is the principal eigenfunction") {
      const double L = 2.0, sigma = 1.0, T = 5.0 * L * L / (sigma * sigma);
      const BmIntervalSolution s = bm_interval_solve(1.0, 3.0, sigma, [](double) { return 0.5; }, T, one);
      const int n = 2000;
      double l1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double y = 1.0 + L * (k + 0.5) / n;
        l1 += std::abs(s.conditional_density(y) - bm_interval_qsd_density(1.0, 3.0, y)) * L / n;
      }
      CHECK(l1 < 1e-6);
    }
    SUBCASE("quasi-stationary density") {
      CHECK(bm_interval_qsd_density(0.0, 1.0, 0.5) == doctest::Approx(std::numbers::pi / 2.0));
      CHECK(bm_interval_qsd_mass(0.0, 1.0, 0.0, 1.0) == doctest::Approx(1.0));
      CHECK(bm_interval_qsd_mass(0.0, 1.0, 0.0, 0.5) == doctest::Approx(0.5));
    }
  }
}
