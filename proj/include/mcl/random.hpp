#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mcl {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: the same
/// (counter, key) always yields the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                         std::array<std::uint32_t, 2> key);

/// Domains separate the purposes a stream can be drawn for, so that e.g. the
/// mini-batch sampler of worker 3 in round 7 never shares bits with its noise.
enum class StreamDomain : std::uint32_t {
  WorkerNoise = 1,
  MiniBatch = 2,
  MonteCarlo = 3,
  DataGeneration = 4,
  RoundSelection = 5,
  Test = 99,
};

/// Counter-based random stream keyed by (seed, domain, a, b). Streams with
/// distinct keys are independent and can be created in any order on any
/// thread, which is what makes parallel runs bit-reproducible.
///
/// Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, StreamDomain domain, std::uint32_t a = 0,
               std::uint32_t b = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  /// Uniform integer on [0, n). n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int next_word_ = 4;
};

}  // namespace mcl
