#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace fvsim {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key of the sub-stream `(stream, channel)` under `seed`.
///
/// Keys are a pure function of their three coordinates, so replications and
/// particles can be generated in any order (or concurrently) without
/// changing a single draw.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t channel = 0) {
  std::uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ULL);
  k = mix64(k ^ (stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
  return mix64(k ^ (channel * 0xa0761d6478bd642fULL + 0xe7037ed1a0b428dbULL));
}

/// One SplitMix64 random stream, usable as a UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() = default;
  explicit Stream(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double normal() { return normal_(*this); }

  /// Exponential(1).
  double exponential() { return -std::log(uniform()); }

  /// Uniform integer in [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

 private:
  std::uint64_t state_ = 0;
  std::normal_distribution<double> normal_;
};

}  // namespace fvsim
