#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "perca/ca.hpp"
#include "perca/errors.hpp"
#include "perca/groups.hpp"
#include "perca/percolation.hpp"
#include "perca/rng.hpp"
#include "perca/stats.hpp"

using namespace perca;
using namespace perca::perc;
using groups::Element;
using groups::Group;
using groups::GroupSpec;
using groups::Kind;

namespace {

Element el(std::initializer_list<std::int64_t> v) { return Element(v); }

std::set<Element> level_elements(const ProcessTrace& t, int n) {
  std::set<Element> out;
  for (std::size_t i : t.levels[static_cast<std::size_t>(n)])
    out.insert(t.region->element(i));
  return out;
}

// Independent level recursion using only group arithmetic and element sets.
std::vector<std::set<Element>> brute_cluster_levels(const Group& g,
                                                    const std::set<Element>& open_sites,
                                                    int n_max) {
  std::vector<std::set<Element>> levels{{g.identity()}};
  for (int n = 1; n <= n_max; ++n) {
    std::set<Element> next;
    for (const auto& u : levels.back())
      for (const auto& s : g.generators()) {
        Element v = g.multiply(u, s);
        if (open_sites.count(v)) next.insert(v);
      }
    levels.push_back(std::move(next));
  }
  return levels;
}

// C(n, k) odd iff adding k and n-k in binary carries nowhere (Lucas).
bool binomial_odd(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return false;
  return (k & (n - k)) == 0;
}

}  // namespace

TEST_CASE("site and bond sampling hit the degenerate and fair cases") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(500);

  auto closed = sample_sites(region, 0.0, 7);
  auto open = sample_sites(region, 1.0, 7);
  CHECK(std::count(closed.open.begin(), closed.open.end(), 1) == 0);
  CHECK(std::count(open.open.begin(), open.open.end(), 0) == 0);

  auto fair = sample_sites(region, 0.5, 7);
  const auto ones = static_cast<std::uint64_t>(
      std::count(fair.open.begin(), fair.open.end(), 1));
  CHECK(stats::wilson(ones, fair.open.size(), stats::kZ99).contains(0.5));

  auto wc = sample_bonds(region, 0.0, 7);
  auto wo = sample_bonds(region, 1.0, 7);
  CHECK(std::count(wc.bits.begin(), wc.bits.end(), 1) == 0);
  CHECK(std::count(wo.bits.begin(), wo.bits.end(), 0) == 0);
  CHECK(wo.degree == 2);

  CHECK_THROWS_AS(sample_sites(region, 1.5, 7), input_error);
}

TEST_CASE("shared seeds make site configurations pointwise monotone in p") {
  Group g({Kind::IntGrid, 2, 0});
  auto region = g.ball(6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto lo = sample_sites(region, 0.3, seed);
    auto hi = sample_sites(region, 0.7, seed);
    for (std::size_t i = 0; i < lo.open.size(); ++i) CHECK(lo.open[i] <= hi.open[i]);
  }
}

TEST_CASE("opposite directed bonds are sampled independently") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(2);
  REQUIRE(g.generators() == std::vector<Element>{el({1}), el({-1})});
  const std::size_t fwd = *region->index_of(el({0})) * 2 + 0;  // bond (0, +1)
  const std::size_t bwd = *region->index_of(el({1})) * 2 + 1;  // bond (1, -1)

  const int trials = 10000;
  double sx = 0, sy = 0, sxy = 0;
  for (int t = 0; t < trials; ++t) {
    auto w = sample_bonds(region, 0.5, static_cast<std::uint64_t>(t));
    const double x = w.bits[fwd], y = w.bits[bwd];
    sx += x;
    sy += y;
    sxy += x * y;
  }
  const double mx = sx / trials, my = sy / trials;
  const double cov = sxy / trials - mx * my;
  const double rho = cov / std::sqrt(mx * (1 - mx) * my * (1 - my));
  CHECK(std::abs(rho) < 3.0 / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("parity of independent fair bits is exactly fair (exhaustive) and empirically fair") {
  for (int n = 1; n <= 8; ++n) {
    std::uint64_t odd = 0;
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask)
      if (std::popcount(mask) % 2 == 1) ++odd;
    CHECK(odd == (1ull << (n - 1)));
  }
  rng::Stream rnd(11);
  for (int n : {17, 33, 64}) {
    const int trials = 100000;
    int odd = 0;
    for (int t = 0; t < trials; ++t) {
      int parity = 0;
      for (int b = 0; b < n; ++b) parity ^= rnd.fair_bit() ? 1 : 0;
      odd += parity;
    }
    const double freq = static_cast<double>(odd) / trials;
    CHECK(std::abs(freq - 0.5) < 3.0 * stats::null_se(0.5, trials));
  }
}

TEST_CASE("cluster exploration matches the brute element-set recursion") {
  Group g({Kind::IntGrid, 2, 0});
  auto region = g.ball(4);
  rng::Stream seeds(404);
  for (int rep = 0; rep < 25; ++rep) {
    auto x = sample_sites(region, 0.6, seeds.next_u64());
    auto trace = cluster_explore(x, 4);
    REQUIRE(trace.levels.size() == 5);

    std::set<Element> open_sites;
    for (std::size_t i = 0; i < x.open.size(); ++i)
      if (x.open[i]) open_sites.insert(region->element(i));
    auto brute = brute_cluster_levels(g, open_sites, 4);
    for (int n = 0; n <= 4; ++n) CHECK(level_elements(trace, n) == brute[static_cast<std::size_t>(n)]);
  }
}

TEST_CASE("cluster exploration statuses follow the termination and survival rules") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(5);

  // Open only at +1: one step of growth, then the cumulative set freezes.
  auto x = constant_sites(region, 0);
  x.open[*region->index_of(el({1}))] = 1;
  auto t = cluster_explore(x, 5);
  CHECK(t.levels[0] == std::vector<std::size_t>{0});
  CHECK(level_elements(t, 1) == std::set<Element>{el({1})});
  CHECK(t.levels[2].empty());
  CHECK(t.status == TraceStatus::Terminated);
  CHECK(t.terminated_at == 1);

  auto all = cluster_explore(constant_sites(region, 1), 5);
  CHECK(all.status == TraceStatus::SurvivedToRadius);
  CHECK(all.cumulative.size() == region->size());

  CHECK_THROWS_AS(cluster_explore(x, 9), resource_error);
}

TEST_CASE("dependence process: all-closed terminates at once, all-open is rule 90") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(16);

  auto closed = dependence_process(constant_bonds(region, 0), 16);
  CHECK(closed.levels[1].empty());
  CHECK(closed.status == TraceStatus::Terminated);
  CHECK(closed.terminated_at == 0);

  auto open = dependence_process(constant_bonds(region, 1), 16);
  CHECK(open.status == TraceStatus::SurvivedToRadius);
  for (int n = 0; n <= 16; ++n) {
    std::set<Element> expect;
    for (std::int64_t i = -n; i <= n; ++i)
      if ((i + n) % 2 == 0 && binomial_odd(n, (n + i) / 2)) expect.insert(el({i}));
    CHECK(level_elements(open, n) == expect);
  }
}

TEST_CASE("dependence process equals the additive CA's influence sets") {
  Group g({Kind::IntGrid, 2, 0});
  auto region = g.ball(4);
  auto rule = ca::make_percolated_additive(g);
  const ca::AdditiveLayout L{4};
  ca::OrbitMachine machine(g, rule, {g.identity()}, 4);

  rng::Stream seeds(99);
  for (int rep = 0; rep < 20; ++rep) {
    auto w = sample_bonds(region, 0.5, seeds.next_u64());
    auto trace = dependence_process(w, 4);

    // phi_w^n(delta_g)_e = 1 exactly when g belongs to M_n(w).
    for (int n = 1; n <= 4; ++n) {
      std::set<Element> influencers;
      for (std::size_t c = 0; c < machine.cone_size(); ++c) {
        const Element& gsite = machine.cone_elements()[c];
        std::vector<ca::Symbol> init(machine.cone_size());
        for (std::size_t i = 0; i < machine.cone_size(); ++i) {
          const auto ord = region->index_of(machine.cone_elements()[i]);
          REQUIRE(ord.has_value());
          ca::Symbol bonds = 0;
          for (std::size_t j = 0; j < 4; ++j)
            bonds = static_cast<ca::Symbol>((bonds << 1) | w.bit(*ord, j));
          init[i] = L.pack(i == c ? 1 : 0, bonds);
        }
        bool hit = false;
        machine.run(init, [&](int tt, const ca::Symbol* frame) {
          if (tt == n) hit = L.x(frame[0]) == 1;
          return tt < n;
        });
        if (hit) influencers.insert(gsite);
      }
      CHECK(level_elements(trace, n) == influencers);
    }
  }
}

TEST_CASE("odd path parity: hand counts, equivalence with the dependence levels") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(6);
  auto open = constant_bonds(region, 1);
  CHECK(odd_path_parity(open, el({0}), 0) == 1);
  CHECK(odd_path_parity(open, el({0}), 2) == 0);  // two walks cancel
  CHECK(odd_path_parity(open, el({2}), 2) == 1);  // the straight walk only
  CHECK(odd_path_parity(open, el({1}), 3) == 1);  // C(3,2) = 3 walks

  rng::Stream seeds(2024);
  for (int rep = 0; rep < 10; ++rep) {
    auto w = sample_bonds(region, 0.5, seeds.next_u64());
    auto trace = dependence_process(w, 6);
    for (int n = 0; n <= 6; ++n) {
      const auto members = level_elements(trace, n);
      for (std::size_t i = 0; i < region->prefix_size(n); ++i) {
        const Element& h = region->element(i);
        CHECK(odd_path_parity(w, h, n) == (members.count(h) ? 1 : 0));
      }
    }
  }

  CHECK_THROWS_AS(odd_path_parity(open, el({0}), 13), resource_error);
  CHECK_THROWS_AS(odd_path_parity(open, el({0}), 7), resource_error);  // region too small
  CHECK_THROWS_AS(odd_path_parity(open, el({99}), 2), input_error);
}

TEST_CASE("coupled samples keep the two cumulative processes identical on trees") {
  struct Case {
    GroupSpec spec;
    int radius;
    int R;
    int samples;
  };
  for (const Case& c : {Case{{Kind::FreeGroup, 2, 0}, 4, 3, 300},
                        Case{{Kind::IntLine, 0, 0}, 5, 4, 500}}) {
    Group g(c.spec);
    auto region = g.ball(c.radius);
    for (int rep = 0; rep < c.samples; ++rep) {
      auto sample = coupling_sample(region, c.R, rng::derive_seed(31337, rep));
      CHECK(sample.cluster.levels[0] == std::vector<std::size_t>{0});
      CHECK(sample.dependence.levels[0] == std::vector<std::size_t>{0});
      CHECK(cumulative_identity(sample.cluster, sample.dependence, c.R));
    }
  }
}

TEST_CASE("coupled samples have fair per-site marginals") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(3);
  const int samples = 2000;
  std::vector<std::uint64_t> open_count(region->size(), 0);
  for (int rep = 0; rep < samples; ++rep) {
    auto sample = coupling_sample(region, 2, rng::derive_seed(555, rep));
    for (std::size_t i = 0; i < region->size(); ++i) open_count[i] += sample.x.open[i];
  }
  for (std::size_t i = 0; i < region->size(); ++i)
    CHECK(stats::wilson(open_count[i], samples, stats::kZ99).contains(0.5));
}

TEST_CASE("coupling sample rejects regions that cannot hold the construction") {
  Group g({Kind::IntLine, 0, 0});
  CHECK_THROWS_AS(coupling_sample(g.ball(3), 3, 1), resource_error);
  CHECK_NOTHROW(coupling_sample(g.ball(4), 3, 1));
}

TEST_CASE("survival probability: degenerate p, the exact line formula, monotone trials") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(5);

  CHECK(survival_probability(region, SurvivalMode::SiteCluster, 0.0, 5, 100, 3).estimate == 0.0);
  CHECK(survival_probability(region, SurvivalMode::SiteCluster, 1.0, 5, 100, 3).estimate == 1.0);

  // Reaching distance 5 needs a one-sided run of 5 open sites.
  const double p = 0.8;
  const double exact = 2 * std::pow(p, 5) - std::pow(p, 10);
  auto est = survival_probability(region, SurvivalMode::SiteCluster, p, 5, 10000, 12345);
  CHECK(std::abs(est.estimate - exact) < 3 * stats::null_se(exact, est.trials));

  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::uint64_t prev = 0;
    for (double q : {0.2, 0.5, 0.8}) {
      auto one = survival_probability(region, SurvivalMode::SiteCluster, q, 5, 1, seed);
      CHECK(one.successes >= prev);
      prev = one.successes;
    }
  }
}

TEST_CASE("survival probability decays with radius on the line") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(64);
  double last = 1.0;
  for (int R : {8, 32, 64}) {
    const double exact = 2 * std::pow(0.9, R) - std::pow(0.9, 2 * R);
    auto est = survival_probability(region, SurvivalMode::SiteCluster, 0.9, R, 10000, 777);
    CHECK(std::abs(est.estimate - exact) < 3 * stats::null_se(exact, est.trials));
    CHECK(est.estimate < last);
    last = est.estimate;
  }
}

TEST_CASE("dependence-mode survival sees the full rule-90 cone at p = 1") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(12);
  CHECK(survival_probability(region, SurvivalMode::BondDependence, 1.0, 12, 50, 5).estimate ==
        1.0);
  CHECK(survival_probability(region, SurvivalMode::BondDependence, 0.0, 12, 50, 5).estimate ==
        0.0);
}

TEST_CASE("threshold estimate brackets the exact root on the line") {
  Group g({Kind::IntLine, 0, 0});
  auto region = g.ball(16);
  auto th = threshold_estimate(region, SurvivalMode::SiteCluster, 16, 4000, 0.002, 2718);

  // Solve 2 p^16 - p^32 = 1/2: p = (1 - 1/sqrt(2))^{1/16}.
  const double exact = std::pow(1.0 - 1.0 / std::sqrt(2.0), 1.0 / 16.0);
  CHECK(std::abs(th.p_star - exact) < 0.01);
  CHECK(th.p_star > 0.0);
  CHECK(th.p_star < 1.0);
  CHECK(!th.probes.empty());
  CHECK(!th.monotone_warning);

  auto again = threshold_estimate(region, SurvivalMode::SiteCluster, 16, 4000, 0.002, 2718, 4);
  CHECK(again.p_star == th.p_star);
  for (std::size_t i = 0; i < th.probes.size(); ++i)
    CHECK(again.probes[i].successes == th.probes[i].successes);

  CHECK_THROWS_AS(threshold_estimate(region, SurvivalMode::SiteCluster, 16, 100, 0.0, 1),
                  input_error);
}

TEST_CASE("trace bookkeeping: levels stay in their balls, prefix unions nest") {
  Group g({Kind::IntGrid, 2, 0});
  auto region = g.ball(5);
  auto w = sample_bonds(region, 0.7, 42);
  auto trace = dependence_process(w, 5);
  for (int n = 0; n < static_cast<int>(trace.levels.size()); ++n)
    for (std::size_t i : trace.levels[static_cast<std::size_t>(n)])
      CHECK(region->word_length_of(i) <= n);
  for (int n = 0; n + 1 < static_cast<int>(trace.levels.size()); ++n) {
    auto a = trace.cumulative_upto(n);
    auto b = trace.cumulative_upto(n + 1);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
  CHECK(trace.cumulative_upto(trace.horizon) == trace.cumulative);
}

TEST_CASE("status and mode names round-trip") {
  CHECK(to_string(TraceStatus::Terminated) == "terminated");
  CHECK(to_string(TraceStatus::SurvivedToRadius) == "survived-to-radius");
  CHECK(to_string(TraceStatus::Truncated) == "truncated");
  CHECK(survival_mode_from_name("site-cluster") == SurvivalMode::SiteCluster);
  CHECK(survival_mode_from_name("bond-dependence") == SurvivalMode::BondDependence);
  CHECK(survival_mode_from_name(to_string(SurvivalMode::SiteCluster)) ==
        SurvivalMode::SiteCluster);
  CHECK_THROWS_AS(survival_mode_from_name("bogus"), input_error);
}
