#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bandits {

// SplitMix64 finalizer. Used to decorrelate stream seeds derived from a
// single base seed; cheap and passes the usual avalanche checks.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Every random stream in a run is seeded as
//   splitmix64(splitmix64(base ^ splitmix64(kind)) + index)
// so streams are independent of each other and of the order in which they
// are created. The (kind, index) pairs are part of the reproducibility
// contract and are echoed into run metadata.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t kind,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(kind)) + index);
}

namespace stream {
inline constexpr std::uint64_t kEnvBuild = 0xE1;   // users, weights
inline constexpr std::uint64_t kLambdaX = 0xE2;    // spectrum estimate
inline constexpr std::uint64_t kRounds = 0xA1;     // user + item draws, per repetition
inline constexpr std::uint64_t kNoise = 0xA2;      // reward noise, per repetition
inline constexpr std::uint64_t kClubGraph = 0xC1;  // random graph init
}  // namespace stream

// mt19937_64 with hand-rolled output transforms. The standard distribution
// objects are implementation defined, so two builds of the same binary on
// different standard libraries would disagree; these transforms pin the
// exact draw sequence.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // [0, 1), 53 bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1], safe to pass to log.
  double uniform_open() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double a = 2.0 * M_PI * uniform01();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exp(1).
  double exponential() { return -std::log(uniform_open()); }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bandits
