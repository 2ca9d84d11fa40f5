#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "perca/groups.hpp"
#include "perca/stats.hpp"

namespace perca::perc {

using groups::Element;

/// All percolation structures live on a fixed finite region: a word-metric
/// ball whose neighbor table drives every exploration.
using Region = std::shared_ptr<const groups::Ball>;

/// Site configuration over a region; entries follow the ball's element order.
struct SiteConfig {
  Region region;
  std::vector<std::uint8_t> open;  // 1 = open
};

/// Directed bond environment: one bit per (site, generator) pair.  The bits
/// for (g, s) and (gs, s^{-1}) are independent coordinates.
struct BondEnvironment {
  Region region;
  std::size_t degree = 0;
  std::vector<std::uint8_t> bits;  // ordinal * degree + generator index

  std::uint8_t bit(std::size_t i, std::size_t j) const { return bits[i * degree + j]; }
};

/// Independent Bernoulli(p) samples, one per site / directed bond.  Each
/// coordinate draws its own keyed uniform, so the same seed yields a
/// pointwise-monotone family of configurations as p grows.
SiteConfig sample_sites(Region region, double p, std::uint64_t seed);
BondEnvironment sample_bonds(Region region, double p, std::uint64_t seed);

/// Constant configurations (handy for exact laws: all-open, all-closed).
SiteConfig constant_sites(Region region, std::uint8_t value);
BondEnvironment constant_bonds(Region region, std::uint8_t value);

enum class TraceStatus {
  Terminated,         // cumulative set stabilized: M_{<=k+1} = M_{<=k} at the recorded step
  SurvivedToRadius,   // cumulative set met the word-length-R sphere
  Truncated,          // level budget exhausted with neither witness
};

std::string to_string(TraceStatus s);

/// Level-by-level record of an exploration process on a region.  Levels are
/// computed exactly for every n up to `horizon` (the region radius): a
/// stabilization witness does NOT cut the run short, because for the
/// dependence process M_{<=k+1} = M_{<=k} at one step does not confine later
/// levels.  SurvivedToRadius takes precedence over Terminated when both occur.
struct ProcessTrace {
  Region region;
  int horizon = 0;        // levels[n] defined for n = 0..horizon
  int target_radius = 0;  // the R whose sphere decides survival
  std::vector<std::vector<std::size_t>> levels;  // sorted ball ordinals
  std::vector<std::size_t> cumulative;           // sorted union of all levels
  TraceStatus status = TraceStatus::Truncated;
  int terminated_at = -1;  // first k with M_{<=k+1} = M_{<=k}, or -1

  /// Sorted union of levels[0..n].
  std::vector<std::size_t> cumulative_upto(int n) const;
};

/// Cluster exploration: M'_0 = {e}; M'_n = open sites with a bond from
/// M'_{n-1}.  The origin is not required to be open.  Levels run to the
/// region radius; survival means the cluster met the radius-R sphere.
ProcessTrace cluster_explore(const SiteConfig& x, int R);

/// Dependence process of the percolated additive CA: M_0 = {e}; M_n = sites
/// with an odd number of open bonds from M_{n-1}.  Reads w only on bonds out
/// of M_{n-1}, honoring the measurability of the recursion.
ProcessTrace dependence_process(const BondEnvironment& w, int R);

/// Parity of the number of open walks e = g_0, g_1, ..., g_len = g with every
/// step along an open directed bond.  Computed by explicit walk enumeration
/// (independent of the dependence recursion, so the two can cross-check).
/// The walk length is capped by `budget` since enumeration grows as |S|^len.
int odd_path_parity(const BondEnvironment& w, const Element& g, int len, int budget = 12);

/// One draw of the exploration coupling: sites and bonds are revealed in
/// stages (origin first, then bonds from each newly open frontier into
/// undeclared territory, with fresh-bond parity deciding each new site), and
/// every coordinate never reached by the construction is filled at p = 1/2.
/// Both traces are then recomputed from the completed configurations by the
/// ordinary operations above.
struct CouplingSample {
  SiteConfig x;
  BondEnvironment w;
  ProcessTrace cluster;     // trace of x
  ProcessTrace dependence;  // trace of w
};

CouplingSample coupling_sample(Region region, int R, std::uint64_t seed);

/// True iff the two traces have equal cumulative sets at every step <= n.
bool cumulative_identity(const ProcessTrace& a, const ProcessTrace& b, int n);

enum class SurvivalMode { SiteCluster, BondDependence };

std::string to_string(SurvivalMode m);
SurvivalMode survival_mode_from_name(const std::string& name);

struct SurvivalEstimate {
  double p = 0.0;
  int radius = 0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double estimate = 0.0;
  stats::Interval wilson95;
  std::uint64_t seed = 0;
};

/// Fraction of trials whose exploration from the origin reaches the
/// radius-R sphere.  SiteCluster mode asks for plain open-cluster
/// connectivity within the region; BondDependence runs the dependence
/// process for up to region-radius steps.  Trial i draws all its randomness
/// from derive_seed(seed, i), so results do not depend on the thread count,
/// and site/bond uniforms are keyed per coordinate, making the survival
/// indicator pointwise nondecreasing in p on shared seeds.
SurvivalEstimate survival_probability(Region region, SurvivalMode mode, double p, int R,
                                      std::uint64_t trials, std::uint64_t seed,
                                      unsigned threads = 1);

struct ThresholdEstimate {
  double p_star = 0.0;
  double tolerance = 0.0;
  int radius = 0;
  std::vector<SurvivalEstimate> probes;  // in probe order
  bool monotone_warning = false;         // probe estimates inverted beyond 95% CIs
  std::uint64_t seed = 0;
};

/// Bisection for survival_probability(p) = 1/2 at radius R.  Every probe uses
/// the same master seed (shared uniforms keep the empirical curve monotone in
/// p); a probe whose Wilson interval contains 1/2 keeps the current p and
/// only halves the step.  Stops when the step drops below the tolerance.
ThresholdEstimate threshold_estimate(Region region, SurvivalMode mode, int R,
                                     std::uint64_t trials_per_probe, double tolerance,
                                     std::uint64_t seed, unsigned threads = 1);

}  // namespace perca::perc
