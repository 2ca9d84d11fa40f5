#pragma once

#include <cmath>
#include <cstdint>

namespace perca::stats {

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr double kZ99 = 2.5758293035489004;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson(std::uint64_t successes, std::uint64_t trials, double z = kZ95) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = (z / denom) * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {center - half, center + half};
}

/// Standard error of a proportion estimate; 0.5 fallback keeps it conservative
/// for very small counts.
inline double proportion_se(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return 0.5;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  double v = phat * (1.0 - phat);
  if (v == 0.0) v = 1.0 / n;  // degenerate counts still get a nonzero band
  return std::sqrt(v / n);
}

/// Standard error under a known null proportion p0.
inline double null_se(double p0, std::uint64_t trials) {
  if (trials == 0) return 0.5;
  return std::sqrt(p0 * (1.0 - p0) / static_cast<double>(trials));
}

struct Estimate {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double value() const {
    return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  }
  Interval wilson95() const { return wilson(successes, trials, kZ95); }
  Interval wilson99() const { return wilson(successes, trials, kZ99); }
  double se() const { return proportion_se(successes, trials); }
};

}  // namespace perca::stats
