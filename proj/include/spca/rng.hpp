#pragma once

#include <cmath>
#include <cstdint>

namespace spca {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based generator: draw i of stream (seed, stream) is a pure hash of
// (seed, stream, i), so results do not depend on evaluation order or thread
// count.  A stream must be consumed through a single draw kind (u01 XOR
// normal): normal(i) burns the u01 indices 2i and 2i+1.
struct counter_rng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::uint64_t bits(std::uint64_t i) const {
    std::uint64_t h = splitmix64(seed + 0x632be59bd9b4e019ull);
    h = splitmix64(h ^ stream);
    return splitmix64(h ^ i);
  }

  // uniform on [0, 1), 53-bit mantissa
  double u01(std::uint64_t i) const {
    return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t i, double lo, double hi) const {
    return lo + (hi - lo) * u01(i);
  }

  // standard normal via the Box-Muller cosine branch; u1 is shifted into
  // (0, 1] so the log never sees zero
  double normal(std::uint64_t i) const {
    const double u1 = 1.0 - u01(2 * i);
    const double u2 = u01(2 * i + 1);
    const double two_pi = 6.28318530717958647692528677;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }
};

// fixed stream ids; modules never share a (seed, stream) pair
enum : std::uint64_t {
  stream_signal_mask = 1,
  stream_signal_value = 2,
  stream_noise = 3,
  stream_amp_init = 4,
  stream_se_mc_signal_mask = 5,
  stream_se_mc_signal_value = 6,
  stream_se_mc_noise = 7,
};

}  // namespace spca
