#pragma once

#include <cstdint>

namespace mfmdp {

// Counter-based generator: a splitmix64 finalizer applied to an incrementing
// counter. Substreams are derived by hashing stream ids into the base seed, so
// the draws of one trial never depend on how many draws another trial
// consumed. Monte-Carlo code gives every trial its own substream, which makes
// results independent of scheduling and worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t s0) : state_(substream(seed, s0)) {}
  Rng(std::uint64_t seed, std::uint64_t s0, std::uint64_t s1)
      : state_(substream(substream(seed, s0), s1)) {}
  Rng(std::uint64_t seed, std::uint64_t s0, std::uint64_t s1, std::uint64_t s2)
      : state_(substream(substream(substream(seed, s0), s1), s2)) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in {0, ..., n-1} via the multiply-shift trick. The modulo bias is
  // below n / 2^64 and irrelevant at the sample counts used here.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t substream(std::uint64_t seed, std::uint64_t id) {
    return mix(seed + kGamma * (id + 1));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  std::uint64_t state_;
};

}  // namespace mfmdp
