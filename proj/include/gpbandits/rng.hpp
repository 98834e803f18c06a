#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gpb {

// Deterministic seed expansion and noise streams. Everything an experiment
// draws is a pure function of (master seed, indices), so runs reproduce
// byte-identically regardless of scheduling, and the per-(action,time) noise
// field can be shared across policies within a replication.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Expand (master, a, b, c) into one well-mixed 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = master;
  std::uint64_t z = splitmix64(s);
  s = z ^ (a + 0x7f4a7c15ULL);
  z = splitmix64(s);
  s = z ^ (b + 0x1ce4e5b9ULL);
  z = splitmix64(s);
  s = z ^ (c + 0x133111ebULL);
  return splitmix64(s);
}

// Uniform on (0, 1]; never returns 0 so log() is safe.
inline double bits_to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Sequential N(0,1) stream over splitmix64 (Box-Muller, second deviate cached).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = bits_to_unit_open(splitmix64(state_));
    const double u2 = bits_to_unit_open(splitmix64(state_));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double uniform() { return bits_to_unit_open(splitmix64(state_)); }

  // Uniform index in [0, n).
  std::uint64_t index(std::uint64_t n) { return splitmix64(state_) % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Counter-based N(0,1): a pure function of (seed, k0, k1). Used for the
// per-(action, time) noise field so that identical choices see identical noise.
inline double gaussian_at(std::uint64_t seed, std::uint64_t k0, std::uint64_t k1) {
  std::uint64_t s = derive_seed(seed, k0, k1);
  const double u1 = bits_to_unit_open(splitmix64(s));
  const double u2 = bits_to_unit_open(splitmix64(s));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gpb
