#pragma once

#include "cpr/numerics.hpp"

#include <cstdint>

namespace cpr {

/// Counter-style SplitMix64 stream keyed by (master seed, stream id).
/// Streams with distinct ids never share state, so Monte Carlo trials can
/// run in parallel and still reproduce bit-for-bit.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : state_(mix(master_seed) ^ mix(stream_id + 0x632be59bd9b4e019ull)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller, with the sine spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = kTwoPi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  /// One CN(0, variance) draw: real and imaginary parts each variance/2.
  Complex cnormal(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = s * normal();
    const double im = s * normal();
    return {re, im};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. circularly-symmetric complex Gaussian column, CN(0, variance) per
/// entry.
inline CVector complex_gaussian(int n, double variance, RngStream& rng) {
  if (n < 1) {
    throw std::domain_error("complex_gaussian: n must be positive");
  }
  if (!(variance > 0.0)) {
    throw std::domain_error("complex_gaussian: variance must be positive");
  }
  CVector v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = rng.cnormal(variance);
  }
  return v;
}

}  // namespace cpr
