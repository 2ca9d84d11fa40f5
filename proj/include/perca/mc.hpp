#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace perca::mc {

/// Runs `trial(i)` for i in [0, trials) and counts successes.  Trials are
/// partitioned into contiguous index ranges, one per thread; every trial
/// derives its randomness from its own index, so the count (and hence any
/// artifact computed from it) is independent of the thread count.
inline std::uint64_t count_successes(std::uint64_t trials, unsigned threads,
                                     const std::function<bool(std::uint64_t)>& trial) {
  if (threads <= 1 || trials < 2 * threads) {
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < trials; ++i)
      if (trial(i)) ++hits;
    return hits;
  }
  std::vector<std::uint64_t> partial(threads, 0);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::uint64_t chunk = (trials + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t lo = t * chunk;
    const std::uint64_t hi = std::min(trials, lo + chunk);
    pool.emplace_back([&, lo, hi, t] {
      std::uint64_t hits = 0;
      for (std::uint64_t i = lo; i < hi; ++i)
        if (trial(i)) ++hits;
      partial[t] = hits;
    });
  }
  for (auto& th : pool) th.join();
  std::uint64_t total = 0;
  for (auto h : partial) total += h;  // fixed summation order
  return total;
}

/// Per-trial tallies into a fixed-size histogram, merged in range order.
/// Used by stability estimators that record first-disagreement times.
inline std::vector<std::uint64_t> tally(std::uint64_t trials, unsigned threads, std::size_t bins,
                                        const std::function<std::size_t(std::uint64_t)>& trial) {
  std::vector<std::uint64_t> total(bins, 0);
  if (threads <= 1 || trials < 2 * threads) {
    for (std::uint64_t i = 0; i < trials; ++i) total[trial(i)]++;
    return total;
  }
  std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(bins, 0));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::uint64_t chunk = (trials + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t lo = t * chunk;
    const std::uint64_t hi = std::min(trials, lo + chunk);
    pool.emplace_back([&, lo, hi, t] {
      for (std::uint64_t i = lo; i < hi; ++i) partial[t][trial(i)]++;
    });
  }
  for (auto& th : pool) th.join();
  for (unsigned t = 0; t < threads; ++t)
    for (std::size_t b = 0; b < bins; ++b) total[b] += partial[t][b];
  return total;
}

}  // namespace perca::mc
