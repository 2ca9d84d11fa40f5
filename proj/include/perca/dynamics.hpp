#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perca/ca.hpp"
#include "perca/groups.hpp"
#include "perca/stats.hpp"

/// Monte Carlo estimators for finite-horizon stability sets: how likely is a
/// random perturbation of a base configuration to leave the observed orbit
/// unchanged?  The infinite-time sets are approximated by their horizon-T
/// truncations; every report carries the horizon, so "stable" always means
/// "stable for T steps" and never the untestable limit statement.
namespace perca::dyn {

using groups::Element;
using groups::Group;

/// One stability question.  `base` must cover the dependency cone of
/// (`window`, rule memory, `horizon`); perturbations keep `base` on `frozen`
/// (when present) and redraw every other cone coordinate independently from
/// `marginal`.
struct StabilityQuery {
  ca::LocalRule rule;
  ca::Pattern base;
  std::vector<Element> window;                 // finite, nonempty
  int horizon = 0;
  std::optional<std::vector<Element>> frozen;  // conditioning set, subset of the cone
  ca::ProductMarginal marginal;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// P[perturbation agrees with the base orbit on `window` for all t <= T].
/// The query must not carry a conditioning set.  Per-sample the agreement
/// indicator at horizon T+1 implies the one at T, so estimates sharing a seed
/// are exactly nonincreasing in the horizon.
stats::Estimate stability_prob(const Group& group, const StabilityQuery& q);

/// Same probability conditioned on the cylinder [base restricted to frozen]:
/// coordinates in `frozen` are kept, the rest are redrawn.  A frozen set
/// containing the whole cone yields exactly 1; an empty frozen set consumes
/// randomness identically to the unconditional estimator, so shared seeds
/// give bit-equal results.
stats::Estimate conditional_stability_prob(const Group& group, const StabilityQuery& q);

struct DensityPoint {
  int n = 0;                     // ball radius of the conditioning set
  std::size_t frozen_count = 0;  // |B_n  intersected with the cone|
  stats::Estimate estimate;
};

/// Conditional stability along the canonical chain J_n = B_n (intersected
/// with the dependency cone, whose complement cannot influence the orbit).
struct DensityCurve {
  std::vector<DensityPoint> points;
};

/// Evaluates q conditioned on J_n = B_n for n = 0..n_max; any frozen set on q
/// is ignored.  Point n uses seed derive_seed(q.seed, n).
DensityCurve density_curve(const Group& group, const StabilityQuery& q, int n_max);

/// Finite-scale summary of the sensitive/equicontinuous alternative over
/// random base configurations.  The verdict describes this data set only:
/// floors and ceilings below are fixed conventions, printed with every
/// report, not an asymptotic classification.
struct DichotomyReport {
  int horizon = 0;
  int n_max = 0;
  double sensitivity_floor = 0;        // 2 * 2^{-(T+1)}
  double equicontinuity_ceiling = 0;   // fixed at 0.9
  std::vector<stats::Estimate> stability;  // one per base sample
  std::vector<DensityCurve> curves;        // one per base sample
  double below_floor_fraction = 0;
  double above_ceiling_fraction = 0;
  std::string verdict;  // consistent-with-sensitive | consistent-with-equicontinuous |
                        // neither-at-this-scale
  std::uint64_t seed = 0;
};

/// Draws `samples` base configurations from the fair product marginal, runs
/// stability_prob and density_curve for each, and classifies: verdict is
/// "consistent-with-sensitive" when at least 95% of stability estimates fall
/// below the sensitivity floor, else "consistent-with-equicontinuous" when at
/// least 95% of curves reach the ceiling at n_max, else "neither-at-this-scale".
DichotomyReport dichotomy_report(const Group& group, const ca::LocalRule& rule,
                                 const std::vector<Element>& window, int horizon, int n_max,
                                 std::uint64_t samples, std::uint64_t trials,
                                 std::uint64_t seed, int threads = 1);

/// Comparison of a direct stability estimate against the product of per-coset
/// estimates, for rules whose memory lies in the horizontal axis subgroup
/// H = {(a, 0)} of the planar grid.  Orbit restrictions to distinct H-cosets
/// then depend on disjoint coordinate sets, so the direct probability
/// factorizes exactly; `difference` should vanish within a few `sigma`.
struct CosetFactorization {
  stats::Estimate direct;
  std::vector<stats::Estimate> factors;  // one per coset meeting the window
  double product = 1;
  double difference = 0;  // direct.value() - product
  double sigma = 0;       // combined standard error of the difference
};

/// Splits q.window by H-coset (second coordinate) and estimates both sides.
/// Requires the planar grid, rule memory inside H, and an unconditional query.
CosetFactorization coset_factorization_check(const Group& group, const StabilityQuery& q);

}  // namespace perca::dyn
