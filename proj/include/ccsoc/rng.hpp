#pragma once

#include <cmath>
#include <cstdint>

namespace ccsoc {

// Counter-based splittable RNG. Every (master seed, stream index) pair gives
// an independent, reproducible stream regardless of call order, which keeps
// Monte Carlo reports identical between serial and parallel runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // burn-in decorrelates small seeds
    next_u64();
    next_u64();
  }

  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    Rng r(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    return r.next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on (0, 1); never returns exactly 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // polar Box-Muller
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * scale;
    have_cached_ = true;
    return u * scale;
  }

  double exponential(double rate = 1.0) { return -std::log(uniform01()) / rate; }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace ccsoc
