#include "perca/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "perca/errors.hpp"
#include "perca/mc.hpp"
#include "perca/rng.hpp"

namespace perca::dyn {

namespace {

constexpr double kVerdictFraction = 0.95;
constexpr double kEquicontinuityCeiling = 0.9;

/// Shared sampler: precomputes the base orbit's window frames, then per trial
/// redraws the non-frozen cone coordinates and aborts the probe run at the
/// first disagreeing frame.  Because the cone is stored level-major, the
/// coordinates of a shorter horizon are a prefix of a longer one, which makes
/// per-trial agreement indicators exactly monotone in the horizon under a
/// shared seed.
class StabilityEngine {
 public:
  StabilityEngine(const Group& group, const StabilityQuery& q)
      : q_(q), machine_(group, q.rule, q.window, q.horizon) {
    if (q.trials == 0) throw input_error("stability query needs at least one trial");
    base_ = ca::cone_values(group, machine_, q.base);
    resample_.assign(machine_.cone_size(), 1);
    if (q.frozen) {
      for (const Element& g : *q.frozen) {
        auto idx = machine_.cone_index(g);
        if (!idx)
          throw input_error(
              "conditioning set contains a site outside the dependency cone: " +
              group.to_string(g));
        resample_[*idx] = 0;
      }
    }
    base_frames_.assign(static_cast<std::size_t>(q.horizon) + 1, {});
    machine_.run(base_, [&](int t, const ca::Symbol* frame) {
      base_frames_[static_cast<std::size_t>(t)].assign(frame, frame + machine_.window_size());
      return true;
    });
  }

  bool trial(std::uint64_t i) const {
    rng::Stream rnd(rng::derive_seed(q_.seed, i));
    std::vector<ca::Symbol> y = base_;
    for (std::size_t c = 0; c < y.size(); ++c)
      if (resample_[c]) y[c] = q_.marginal.sample(q_.rule.alphabet, rnd);
    bool agree = true;
    machine_.run(y, [&](int t, const ca::Symbol* frame) {
      const auto& want = base_frames_[static_cast<std::size_t>(t)];
      for (std::size_t j = 0; j < want.size(); ++j)
        if (frame[j] != want[j]) {
          agree = false;
          return false;
        }
      return true;
    });
    return agree;
  }

  stats::Estimate estimate() const {
    const std::uint64_t successes = mc::count_successes(
        q_.trials, q_.threads, [&](std::uint64_t i) { return trial(i); });
    return stats::Estimate{successes, q_.trials};
  }

 private:
  const StabilityQuery& q_;
  ca::OrbitMachine machine_;
  std::vector<ca::Symbol> base_;
  std::vector<std::vector<ca::Symbol>> base_frames_;
  std::vector<std::uint8_t> resample_;
};

}  // namespace

stats::Estimate stability_prob(const Group& group, const StabilityQuery& q) {
  if (q.frozen)
    throw input_error("unconditional stability query must not carry a conditioning set");
  return StabilityEngine(group, q).estimate();
}

stats::Estimate conditional_stability_prob(const Group& group, const StabilityQuery& q) {
  if (!q.frozen) throw input_error("conditional stability query needs a conditioning set");
  return StabilityEngine(group, q).estimate();
}

DensityCurve density_curve(const Group& group, const StabilityQuery& q, int n_max) {
  if (n_max < 0) throw input_error("density curve needs n_max >= 0");
  const auto cone =
      ca::dependency_cone(group, q.window, q.rule.memory, q.horizon);
  std::vector<Element> sorted_cone(cone);
  std::sort(sorted_cone.begin(), sorted_cone.end());

  DensityCurve curve;
  for (int n = 0; n <= n_max; ++n) {
    StabilityQuery qn = q;
    qn.frozen.emplace();
    for (const Element& g : group.ball(n)->elements())
      if (std::binary_search(sorted_cone.begin(), sorted_cone.end(), g))
        qn.frozen->push_back(g);
    qn.seed = rng::derive_seed(q.seed, static_cast<std::uint64_t>(n));
    DensityPoint point;
    point.n = n;
    point.frozen_count = qn.frozen->size();
    point.estimate = conditional_stability_prob(group, qn);
    curve.points.push_back(point);
  }
  return curve;
}

DichotomyReport dichotomy_report(const Group& group, const ca::LocalRule& rule,
                                 const std::vector<Element>& window, int horizon, int n_max,
                                 std::uint64_t samples, std::uint64_t trials,
                                 std::uint64_t seed, int threads) {
  if (samples == 0) throw input_error("dichotomy report needs at least one base sample");

  DichotomyReport report;
  report.horizon = horizon;
  report.n_max = n_max;
  report.sensitivity_floor = 2.0 * std::ldexp(1.0, -(horizon + 1));
  report.equicontinuity_ceiling = kEquicontinuityCeiling;
  report.seed = seed;

  const auto marginal = ca::ProductMarginal::uniform(rule.alphabet);
  const auto cone = ca::dependency_cone(group, window, rule.memory, horizon);

  std::uint64_t below = 0;
  std::uint64_t above = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    rng::Stream base_rnd(rng::derive_seed(seed, 3 * s));
    ca::Pattern base(rule.alphabet);
    for (const Element& g : cone) base.set(g, marginal.sample(rule.alphabet, base_rnd));

    StabilityQuery q;
    q.rule = rule;
    q.base = base;
    q.window = window;
    q.horizon = horizon;
    q.marginal = marginal;
    q.trials = trials;
    q.threads = threads;

    q.seed = rng::derive_seed(seed, 3 * s + 1);
    report.stability.push_back(stability_prob(group, q));
    if (report.stability.back().value() < report.sensitivity_floor) ++below;

    q.seed = rng::derive_seed(seed, 3 * s + 2);
    report.curves.push_back(density_curve(group, q, n_max));
    if (report.curves.back().points.back().estimate.value() >= report.equicontinuity_ceiling)
      ++above;
  }

  report.below_floor_fraction = static_cast<double>(below) / static_cast<double>(samples);
  report.above_ceiling_fraction = static_cast<double>(above) / static_cast<double>(samples);
  if (report.below_floor_fraction >= kVerdictFraction)
    report.verdict = "consistent-with-sensitive";
  else if (report.above_ceiling_fraction >= kVerdictFraction)
    report.verdict = "consistent-with-equicontinuous";
  else
    report.verdict = "neither-at-this-scale";
  return report;
}

CosetFactorization coset_factorization_check(const Group& group, const StabilityQuery& q) {
  const auto& spec = group.spec();
  if (spec.kind != groups::Kind::IntGrid || spec.param != 2)
    throw input_error("coset factorization is defined over the planar grid");
  for (const Element& k : q.rule.memory)
    if (k[1] != 0)
      throw input_error("coset factorization needs the rule memory inside the axis subgroup " +
                        std::string("{(a, 0)}; offending element ") + group.to_string(k));
  if (q.frozen) throw input_error("coset factorization uses unconditional queries");

  CosetFactorization out;
  out.direct = stability_prob(group, q);

  std::map<std::int64_t, std::vector<Element>> cosets;
  for (const Element& g : q.window) cosets[g[1]].push_back(g);

  // Per-coset runs draw from seed streams disjoint from the direct run's
  // per-trial indices (those stay below the offset).
  constexpr std::uint64_t kCosetSeedOffset = 1u << 24;
  std::uint64_t idx = 0;
  for (const auto& [row, sub_window] : cosets) {
    StabilityQuery sub = q;
    sub.window = sub_window;
    sub.seed = rng::derive_seed(q.seed, kCosetSeedOffset + idx++);
    out.factors.push_back(stability_prob(group, sub));
  }

  out.product = 1;
  for (const auto& f : out.factors) out.product *= f.value();

  // Delta-method variance of the product plus the direct estimate's variance.
  double var = out.direct.se() * out.direct.se();
  for (std::size_t i = 0; i < out.factors.size(); ++i) {
    double rest = 1;
    for (std::size_t j = 0; j < out.factors.size(); ++j)
      if (j != i) rest *= out.factors[j].value();
    const double term = rest * out.factors[i].se();
    var += term * term;
  }
  out.sigma = std::sqrt(var);
  out.difference = out.direct.value() - out.product;
  return out;
}

}  // namespace perca::dyn
