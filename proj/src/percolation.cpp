#include "perca/percolation.hpp"

#include <algorithm>
#include <sstream>

#include "perca/errors.hpp"
#include "perca/mc.hpp"
#include "perca/rng.hpp"

namespace perca::perc {

namespace {

void require_region(const Region& region) {
  if (!region) throw input_error("percolation operation requires a region ball");
}

void require_radius(const Region& region, int R, const char* what) {
  require_region(region);
  if (R < 0) throw input_error("target radius must be >= 0");
  if (R > region->radius()) {
    std::ostringstream os;
    os << what << ": region radius " << region->radius() << " is smaller than target radius "
       << R;
    throw resource_error(os.str());
  }
}

void require_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw input_error("probability parameter must lie in [0, 1]");
}

}  // namespace

SiteConfig sample_sites(Region region, double p, std::uint64_t seed) {
  require_region(region);
  require_probability(p);
  SiteConfig x;
  x.open.resize(region->size());
  for (std::size_t i = 0; i < x.open.size(); ++i)
    x.open[i] = rng::keyed_unit(seed, i) < p ? 1 : 0;
  x.region = std::move(region);
  return x;
}

BondEnvironment sample_bonds(Region region, double p, std::uint64_t seed) {
  require_region(region);
  require_probability(p);
  BondEnvironment w;
  w.degree = region->generator_count();
  w.bits.resize(region->size() * w.degree);
  for (std::size_t k = 0; k < w.bits.size(); ++k)
    w.bits[k] = rng::keyed_unit(seed, k) < p ? 1 : 0;
  w.region = std::move(region);
  return w;
}

SiteConfig constant_sites(Region region, std::uint8_t value) {
  require_region(region);
  SiteConfig x;
  x.open.assign(region->size(), value);
  x.region = std::move(region);
  return x;
}

BondEnvironment constant_bonds(Region region, std::uint8_t value) {
  require_region(region);
  BondEnvironment w;
  w.degree = region->generator_count();
  w.bits.assign(region->size() * w.degree, value);
  w.region = std::move(region);
  return w;
}

std::string to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::Terminated: return "terminated";
    case TraceStatus::SurvivedToRadius: return "survived-to-radius";
    case TraceStatus::Truncated: return "truncated";
  }
  return "?";
}

std::vector<std::size_t> ProcessTrace::cumulative_upto(int n) const {
  std::vector<std::size_t> out;
  const int last = std::min<int>(n, static_cast<int>(levels.size()) - 1);
  for (int i = 0; i <= last; ++i) out.insert(out.end(), levels[i].begin(), levels[i].end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

/// Shared level-iteration scaffold for the two exploration processes.
/// `expand` receives the previous level and fills `touched` (deduplicated,
/// unsorted) with the next level's members.
template <typename Expand>
ProcessTrace run_levels(Region region, int R, Expand&& expand) {
  const groups::Ball& ball = *region;
  ProcessTrace trace;
  trace.horizon = ball.radius();
  trace.target_radius = R;
  trace.levels.assign(1, {0});
  trace.cumulative = {0};

  std::vector<std::uint8_t> in_cumulative(ball.size(), 0);
  in_cumulative[0] = 1;
  bool survived = R == 0;  // the radius-0 sphere is {e}
  std::vector<std::size_t> touched;

  for (int step = 1; step <= trace.horizon; ++step) {
    touched.clear();
    expand(trace.levels[static_cast<std::size_t>(step) - 1], touched);
    std::sort(touched.begin(), touched.end());
    bool grew = false;
    for (std::size_t t : touched) {
      if (!in_cumulative[t]) {
        in_cumulative[t] = 1;
        trace.cumulative.push_back(t);
        grew = true;
        if (ball.word_length_of(t) >= R) survived = true;
      }
    }
    if (!grew && trace.terminated_at < 0) trace.terminated_at = step - 1;
    trace.levels.push_back(touched);
  }

  std::sort(trace.cumulative.begin(), trace.cumulative.end());
  trace.status = survived             ? TraceStatus::SurvivedToRadius
                 : trace.terminated_at >= 0 ? TraceStatus::Terminated
                                            : TraceStatus::Truncated;
  trace.region = std::move(region);
  return trace;
}

}  // namespace

ProcessTrace cluster_explore(const SiteConfig& x, int R) {
  require_radius(x.region, R, "cluster exploration");
  const groups::Ball& ball = *x.region;
  const std::size_t deg = ball.generator_count();
  std::vector<std::uint8_t> in_level(ball.size(), 0);
  return run_levels(x.region, R,
                    [&](const std::vector<std::size_t>& prev, std::vector<std::size_t>& touched) {
                      for (std::size_t m : prev) {
                        for (std::size_t j = 0; j < deg; ++j) {
                          const std::int64_t t = ball.neighbor(m, j);
                          if (t < 0) continue;  // unreachable: levels stay inside the ball
                          const auto u = static_cast<std::size_t>(t);
                          if (x.open[u] && !in_level[u]) {
                            in_level[u] = 1;
                            touched.push_back(u);
                          }
                        }
                      }
                      for (std::size_t u : touched) in_level[u] = 0;
                    });
}

ProcessTrace dependence_process(const BondEnvironment& w, int R) {
  require_radius(w.region, R, "dependence process");
  const groups::Ball& ball = *w.region;
  const std::size_t deg = ball.generator_count();
  std::vector<std::uint8_t> parity(ball.size(), 0);
  std::vector<std::uint8_t> seen(ball.size(), 0);
  std::vector<std::size_t> candidates;
  return run_levels(w.region, R,
                    [&](const std::vector<std::size_t>& prev, std::vector<std::size_t>& touched) {
                      candidates.clear();
                      for (std::size_t m : prev) {
                        for (std::size_t j = 0; j < deg; ++j) {
                          const std::int64_t t = ball.neighbor(m, j);
                          if (t < 0) continue;
                          const auto u = static_cast<std::size_t>(t);
                          if (!seen[u]) {
                            seen[u] = 1;
                            candidates.push_back(u);
                          }
                          parity[u] ^= w.bit(m, j);
                        }
                      }
                      for (std::size_t u : candidates) {
                        if (parity[u]) touched.push_back(u);
                        parity[u] = 0;
                        seen[u] = 0;
                      }
                    });
}

int odd_path_parity(const BondEnvironment& w, const Element& g, int len, int budget) {
  require_region(w.region);
  if (len < 0) throw input_error("walk length must be >= 0");
  if (len > budget) {
    std::ostringstream os;
    os << "walk length " << len << " exceeds the enumeration budget " << budget;
    throw resource_error(os.str());
  }
  if (len > w.region->radius()) {
    std::ostringstream os;
    os << "odd path parity: region radius " << w.region->radius()
       << " cannot hold walks of length " << len;
    throw resource_error(os.str());
  }
  const auto target = w.region->index_of(g);
  if (!target) throw input_error("odd path parity: target site lies outside the region");

  const groups::Ball& ball = *w.region;
  const std::size_t deg = ball.generator_count();
  const int target_length = ball.word_length_of(*target);

  // Depth-first walk enumeration over open bonds, with the triangle-
  // inequality prune |g| <= |u| + remaining.
  auto rec = [&](auto&& self, std::size_t u, int remaining) -> int {
    if (remaining == 0) return u == *target ? 1 : 0;
    if (target_length > ball.word_length_of(u) + remaining) return 0;
    int acc = 0;
    for (std::size_t j = 0; j < deg; ++j) {
      if (!w.bit(u, j)) continue;
      const std::int64_t t = ball.neighbor(u, j);
      if (t < 0) continue;
      acc ^= self(self, static_cast<std::size_t>(t), remaining - 1);
    }
    return acc;
  };
  return rec(rec, 0, len);
}

CouplingSample coupling_sample(Region region, int R, std::uint64_t seed) {
  require_region(region);
  if (R < 0) throw input_error("coupling radius must be >= 0");
  if (region->radius() < R + 1) {
    std::ostringstream os;
    os << "coupling sample: region radius " << region->radius() << " is smaller than R + 1 = "
       << R + 1;
    throw resource_error(os.str());
  }
  const groups::Ball& ball = *region;
  const std::size_t n = ball.size();
  const std::size_t deg = ball.generator_count();
  rng::Stream rnd(seed);

  std::vector<std::int8_t> site(n, -1);
  std::vector<std::int8_t> bond(n * deg, -1);
  std::vector<std::uint8_t> parity(n, 0);

  // The origin's status is sampled first; both processes start at {e}
  // regardless of its value.
  site[0] = rnd.fair_bit() ? 1 : 0;

  std::vector<std::uint8_t> fresh(n, 0);
  std::vector<std::size_t> frontier{0};
  std::vector<std::size_t> touched;
  std::vector<std::size_t> next_frontier;
  for (int stage = 1; stage <= R && !frontier.empty(); ++stage) {
    touched.clear();
    // Sample the status of every bond from the newly open sites into
    // territory whose site status is still undeclared; each such target's
    // fresh-bond parity decides its status (fair by the parity lemma).
    for (std::size_t m : frontier) {
      for (std::size_t j = 0; j < deg; ++j) {
        const std::int64_t t = ball.neighbor(m, j);
        if (t < 0) continue;
        const auto u = static_cast<std::size_t>(t);
        if (site[u] != -1) continue;  // already declared: leave the bond unsampled
        const std::uint8_t b = rnd.fair_bit() ? 1 : 0;
        bond[m * deg + j] = static_cast<std::int8_t>(b);
        if (!fresh[u]) {
          fresh[u] = 1;
          touched.push_back(u);
        }
        parity[u] ^= b;
      }
    }
    std::sort(touched.begin(), touched.end());
    next_frontier.clear();
    for (std::size_t u : touched) {
      site[u] = static_cast<std::int8_t>(parity[u]);
      parity[u] = 0;
      fresh[u] = 0;
      if (site[u] == 1) next_frontier.push_back(u);
    }
    frontier.swap(next_frontier);
  }

  // Everything the construction never reached is filled independently at 1/2,
  // sites first, then bonds, each in ball order.
  for (std::size_t i = 0; i < n; ++i)
    if (site[i] == -1) site[i] = rnd.fair_bit() ? 1 : 0;
  for (std::size_t k = 0; k < n * deg; ++k)
    if (bond[k] == -1) bond[k] = rnd.fair_bit() ? 1 : 0;

  CouplingSample out;
  out.x.region = region;
  out.x.open.assign(site.begin(), site.end());
  out.w.region = region;
  out.w.degree = deg;
  out.w.bits.assign(bond.begin(), bond.end());
  out.cluster = cluster_explore(out.x, R);
  out.dependence = dependence_process(out.w, R);
  return out;
}

bool cumulative_identity(const ProcessTrace& a, const ProcessTrace& b, int n) {
  for (int k = 0; k <= n; ++k)
    if (a.cumulative_upto(k) != b.cumulative_upto(k)) return false;
  return true;
}

std::string to_string(SurvivalMode m) {
  return m == SurvivalMode::SiteCluster ? "site-cluster" : "bond-dependence";
}

SurvivalMode survival_mode_from_name(const std::string& name) {
  if (name == "site-cluster") return SurvivalMode::SiteCluster;
  if (name == "bond-dependence") return SurvivalMode::BondDependence;
  throw input_error("unknown survival mode \"" + name +
                    "\" (expected site-cluster or bond-dependence)");
}

namespace {

bool site_cluster_survives(const groups::Ball& ball, double p, int R, std::uint64_t trial_seed) {
  if (R == 0) return true;
  const std::size_t deg = ball.generator_count();
  std::vector<std::uint8_t> visited(ball.size(), 0);
  std::vector<std::size_t> stack{0};
  visited[0] = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < deg; ++j) {
      const std::int64_t t = ball.neighbor(u, j);
      if (t < 0) continue;
      const auto v = static_cast<std::size_t>(t);
      if (visited[v]) continue;
      visited[v] = 1;
      if (rng::keyed_unit(trial_seed, v) >= p) continue;  // closed site
      if (ball.word_length_of(v) >= R) return true;
      stack.push_back(v);
    }
  }
  return false;
}

bool dependence_survives(const groups::Ball& ball, double p, int R, std::uint64_t trial_seed) {
  if (R == 0) return true;
  const std::size_t deg = ball.generator_count();
  std::vector<std::uint8_t> parity(ball.size(), 0);
  std::vector<std::uint8_t> seen(ball.size(), 0);
  std::vector<std::size_t> level{0}, next, candidates;
  for (int step = 1; step <= ball.radius(); ++step) {
    candidates.clear();
    for (std::size_t m : level) {
      for (std::size_t j = 0; j < deg; ++j) {
        const std::int64_t t = ball.neighbor(m, j);
        if (t < 0) continue;
        const auto u = static_cast<std::size_t>(t);
        if (!seen[u]) {
          seen[u] = 1;
          candidates.push_back(u);
        }
        if (rng::keyed_unit(trial_seed, m * deg + j) < p) parity[u] ^= 1;
      }
    }
    next.clear();
    for (std::size_t u : candidates) {
      if (parity[u]) next.push_back(u);
      parity[u] = 0;
      seen[u] = 0;
    }
    for (std::size_t u : next)
      if (ball.word_length_of(u) >= R) return true;
    if (next.empty()) return false;
    level.swap(next);
  }
  return false;
}

}  // namespace

SurvivalEstimate survival_probability(Region region, SurvivalMode mode, double p, int R,
                                      std::uint64_t trials, std::uint64_t seed,
                                      unsigned threads) {
  require_radius(region, R, "survival probability");
  require_probability(p);
  if (trials == 0) throw input_error("survival probability requires trials >= 1");
  const groups::Ball& ball = *region;
  const auto trial = [&](std::uint64_t i) {
    const std::uint64_t trial_seed = rng::derive_seed(seed, i);
    return mode == SurvivalMode::SiteCluster ? site_cluster_survives(ball, p, R, trial_seed)
                                             : dependence_survives(ball, p, R, trial_seed);
  };
  SurvivalEstimate est;
  est.p = p;
  est.radius = R;
  est.trials = trials;
  est.successes = mc::count_successes(trials, threads, trial);
  est.estimate = static_cast<double>(est.successes) / static_cast<double>(trials);
  est.wilson95 = stats::wilson(est.successes, est.trials, stats::kZ95);
  est.seed = seed;
  return est;
}

ThresholdEstimate threshold_estimate(Region region, SurvivalMode mode, int R,
                                     std::uint64_t trials_per_probe, double tolerance,
                                     std::uint64_t seed, unsigned threads) {
  require_radius(region, R, "threshold estimate");
  if (!(tolerance > 0.0)) throw input_error("threshold tolerance must be > 0");
  ThresholdEstimate out;
  out.tolerance = tolerance;
  out.radius = R;
  out.seed = seed;

  double p = 0.5;
  double step = 0.25;
  while (step >= tolerance) {
    SurvivalEstimate est =
        survival_probability(region, mode, p, R, trials_per_probe, seed, threads);
    out.probes.push_back(est);
    if (est.wilson95.lo > 0.5)
      p -= step;  // survival clearly above 1/2: the root is below
    else if (est.wilson95.hi < 0.5)
      p += step;
    // Otherwise the probe's interval straddles 1/2: stay and narrow the step.
    step *= 0.5;
  }
  out.p_star = p;

  // Shared seeds make the empirical curve monotone in p by construction;
  // flag any inversion that exceeds the 95% intervals anyway.
  std::vector<const SurvivalEstimate*> by_p;
  for (const auto& e : out.probes) by_p.push_back(&e);
  std::sort(by_p.begin(), by_p.end(),
            [](const SurvivalEstimate* a, const SurvivalEstimate* b) { return a->p < b->p; });
  for (std::size_t i = 0; i + 1 < by_p.size(); ++i)
    if (by_p[i]->p < by_p[i + 1]->p && by_p[i]->wilson95.lo > by_p[i + 1]->wilson95.hi)
      out.monotone_warning = true;
  return out;
}

}  // namespace perca::perc
