#pragma once

#include <cstdint>

namespace perca::rng {

/// SplitMix64 finalizer.  Used both as the core generator step and as the
/// stateless hash behind per-(trial, coordinate) uniforms.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Per-trial seed derivation: mix(master_seed, trial_index).  Fixed integer
/// mixing; results are independent of thread placement by construction.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ (0x9E3779B97F4A7C15ULL + index * 0xD1342543DE82EF95ULL));
}

inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Stateless uniform attached to one coordinate of one trial.  Coordinates are
/// keyed, not drawn in visit order, so the same (seed, key) pair always sees
/// the same uniform regardless of exploration order or of the parameter p.
/// This is what makes survival estimates monotone-coupled across p.
inline double keyed_unit(std::uint64_t seed, std::uint64_t key) {
  return to_unit(mix64(seed ^ mix64(key + 0x632BE59BD9B4E019ULL)));
}

/// Small sequential generator (SplitMix64 stream).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double next_unit() { return to_unit(next_u64()); }

  bool bernoulli(double p) { return next_unit() < p; }

  bool fair_bit() { return (next_u64() >> 63) != 0; }

  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace perca::rng
