#include <doctest.h>

#include <set>

#include "fvsim/engine.hpp"
#include "fvsim/random.hpp"

using namespace fvsim;

TEST_SUITE("random") {
  TEST_CASE("stream keys are pure functions of their coordinates") {
    CHECK(stream_key(1, 2, 3) == stream_key(1, 2, 3));
    std::set<std::uint64_t> keys;
    for (std::uint64_t seed = 0; seed < 4; ++seed)
      for (std::uint64_t s = 0; s < 64; ++s)
        for (std::uint64_t c = 0; c < 2; ++c) keys.insert(stream_key(seed, s, c));
    CHECK(keys.size() == 4 * 64 * 2);
  }

  TEST_CASE("uniform draws stay in the open unit interval") {
    Stream rng(stream_key(9, 0));
    double sum = 0.0;
    for (int k = 0; k < 100000; ++k) {
      const double u = rng.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(sum / 1e5 == doctest::Approx(0.5).epsilon(0.01));
  }

  TEST_CASE("below covers its range uniformly") {
    Stream rng(42);
    std::vector<int> counts(5, 0);
    for (int k = 0; k < 50000; ++k) ++counts[rng.below(5)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  }

  TEST_CASE("engine streams are distinct per particle and channel") {
    Stream a = particle_stream(3, 0), b = particle_stream(3, 1), e = environment_stream(3, 0), r = rebirth_stream(3);
    const auto x = a(), y = b(), z = e(), w = r();
    CHECK(x != y);
    CHECK(x != z);
    CHECK(x != w);
    CHECK(particle_stream(3, 0)() == x);
  }
}
