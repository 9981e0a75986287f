#ifndef VOLMIX_RNG_HPP
#define VOLMIX_RNG_HPP

#include <cstdint>
#include <random>

namespace volmix {

// Seedable random stream, one instance per chain. A given (seed, stream_id)
// pair reproduces the same sequence on any platform: mt19937_64 output is
// fixed by the standard, and every variate transform in kernels.cpp is
// written against the raw 64-bit output rather than <random> distributions.
//
// A stream is exclusively owned by one chain. It may be created on one
// thread and moved to another, but must never be used concurrently.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint32_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), engine_(derive_state(seed, stream_id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1), 53-bit resolution. Never returns
  // exactly 0 or 1, so log(u) stays finite.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

private:
  // splitmix64 of (seed, stream) decorrelates nearby seeds and streams
  // before they reach the engine's seeding routine.
  static std::uint64_t derive_state(std::uint64_t seed, std::uint32_t stream_id) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream_id) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::mt19937_64 engine_;
};

} // namespace volmix

#endif
