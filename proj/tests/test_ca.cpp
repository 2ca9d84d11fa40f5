#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "perca/ca.hpp"
#include "perca/errors.hpp"
#include "perca/groups.hpp"
#include "perca/rng.hpp"

using namespace perca;
using namespace perca::ca;

namespace {

Element el(std::initializer_list<std::int64_t> v) { return Element(v); }

std::set<Element> as_set(const std::vector<Element>& v) { return {v.begin(), v.end()}; }

// C(n, k) is odd iff adding k and n-k in binary has no carries (Lucas).
bool binomial_odd(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return false;
  return (k & (n - k)) == 0;
}

std::size_t column_of(const std::vector<Element>& window, const Element& g) {
  auto it = std::find(window.begin(), window.end(), g);
  REQUIRE(it != window.end());
  return static_cast<std::size_t>(it - window.begin());
}

std::size_t column(const Orbit& o, const Element& g) { return column_of(o.window, g); }

}  // namespace

TEST_CASE("mixed-radix alphabet packs and unpacks round-trip") {
  Alphabet a{{2, 3, 2}};
  CHECK(a.size() == 12);
  CHECK(a.components() == 3);
  for (Symbol s = 0; s < a.size(); ++s) {
    auto parts = a.unpack(s);
    REQUIRE(parts.size() == 3);
    CHECK(a.pack(parts) == s);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.component(s, i) == parts[i]);
  }
  // Component 0 is the most significant digit.
  CHECK(a.pack({1, 0, 0}) == 6);
  CHECK(a.pack({0, 2, 1}) == 5);
  CHECK_THROWS_AS(a.pack({0, 3, 0}), input_error);
  CHECK_THROWS_AS(a.pack({0, 0}), input_error);
}

TEST_CASE("patterns store symbols, expose sorted support, and translate") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  Pattern x(Alphabet{{4}});
  x.set(el({5}), 3);
  x.set(el({-2}), 1);
  x.set(el({0}), 2);
  x.set(el({0}), 0);  // overwrite
  CHECK(x.size() == 3);
  CHECK(x.get(el({0})) == Symbol{0});
  CHECK(x.get(el({-2})) == Symbol{1});
  CHECK(!x.get(el({7})).has_value());
  CHECK(x.support() == std::vector<Element>{el({-2}), el({0}), el({5})});
  CHECK_THROWS_AS(x.set(el({1}), 4), input_error);

  Pattern r = x.restrict({el({-2}), el({5}), el({9})});
  CHECK(r.size() == 2);
  CHECK(r.get(el({-2})) == Symbol{1});
  CHECK(!r.has(el({0})));

  // (g.x)(h) = x(g^{-1} h): support moves to g * support, values ride along.
  Pattern t = translate(g, el({3}), x);
  CHECK(t.support() == std::vector<Element>{el({1}), el({3}), el({8})});
  CHECK(t.get(el({8})) == Symbol{3});
  CHECK(t.get(el({3})) == Symbol{0});
}

TEST_CASE("dependency cone matches direct closure on the integer line") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  std::vector<Element> K{g.identity(), el({1}), el({-1})};

  auto cone2 = dependency_cone(g, {g.identity()}, K, 2);
  CHECK(as_set(cone2) == as_set({el({-2}), el({-1}), el({0}), el({1}), el({2})}));

  // Monotone in t, and one extra site on each side per step.
  for (int t = 0; t <= 5; ++t) {
    auto a = as_set(dependency_cone(g, {g.identity()}, K, t));
    auto b = as_set(dependency_cone(g, {g.identity()}, K, t + 1));
    CHECK(a.size() == 2 * static_cast<std::size_t>(t) + 1);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }

  // A one-sided memory set {h} gives the segment {e, h, ..., h^T}.
  auto shifted = dependency_cone(g, {g.identity()}, {el({1})}, 4);
  CHECK(as_set(shifted) == as_set({el({0}), el({1}), el({2}), el({3}), el({4})}));

  CHECK_THROWS_AS(dependency_cone(g, {}, K, 1), input_error);
  CHECK_THROWS_AS(dependency_cone(g, {g.identity()}, K, -1), input_error);
}

TEST_CASE("dependency cone agrees with metric balls on the free group") {
  Group g(groups::GroupSpec{groups::Kind::FreeGroup, 2, 0});
  std::vector<Element> K{g.identity()};
  for (const auto& s : g.generators()) K.push_back(s);
  for (int t = 0; t <= 3; ++t) {
    auto cone = dependency_cone(g, {g.identity()}, K, t);
    CHECK(as_set(cone) == as_set(g.ball(t)->elements()));
  }
  // 1 + 4 + 12 elements at t = 2.
  CHECK(dependency_cone(g, {g.identity()}, K, 2).size() == 17);
}

TEST_CASE("orbit machine levels shrink by one cone layer per step") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_percolated_additive(g);
  OrbitMachine m(g, rule, {g.identity()}, 3);
  CHECK(m.window_size() == 1);
  CHECK(m.cone_size() == 7);
  for (int lvl = 0; lvl <= 3; ++lvl)
    CHECK(m.level_size(lvl) == 2 * static_cast<std::size_t>(lvl) + 1);
  // Level-major storage: the first level_size(k) elements are cone(F, K, k).
  for (int lvl = 0; lvl <= 3; ++lvl) {
    std::set<Element> seen(m.cone_elements().begin(),
                           m.cone_elements().begin() + static_cast<long>(m.level_size(lvl)));
    CHECK(seen == as_set(dependency_cone(g, {g.identity()}, rule.memory, lvl)));
  }
  CHECK(m.cone_index(el({3})).has_value());
  CHECK(!m.cone_index(el({4})).has_value());
}

TEST_CASE("fully open additive dynamics reproduces the mod-2 Pascal triangle") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_percolated_additive(g);
  const AdditiveLayout L{2};
  const int n = 9;

  std::vector<Element> window;
  for (std::int64_t i = -n; i <= n; ++i) window.push_back(el({i}));
  OrbitMachine m(g, rule, window, n);

  std::vector<Symbol> init(m.cone_size(), L.pack(0, 3));  // all bonds open
  init[*m.cone_index(g.identity())] = L.pack(1, 3);
  Orbit o = m.run_record(init);

  for (int t = 0; t <= n; ++t) {
    for (std::int64_t i = -n; i <= n; ++i) {
      const Symbol v = o.frames[static_cast<std::size_t>(t)][column(o, el({i}))];
      // After t steps a site holds 1 iff C(t, (t+i)/2) is odd.
      const bool expect =
          (i + t) % 2 == 0 && std::llabs(i) <= t && binomial_odd(t, (t + i) / 2);
      CHECK(L.x(v) == (expect ? 1u : 0u));
      CHECK(L.bonds(v) == 3u);  // the bond field is carried along unchanged
    }
  }
}

TEST_CASE("closing a bond removes exactly that term from the parity sum") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_percolated_additive(g);
  const AdditiveLayout L{2};
  // generators() order is {+1, -1}: bond index 0 looks right, 1 looks left.
  REQUIRE(g.generators() == std::vector<Element>{el({1}), el({-1})});

  OrbitMachine m(g, rule, {g.identity()}, 1);
  auto at = [&](const Element& h) { return *m.cone_index(h); };
  std::vector<Symbol> init(m.cone_size(), 0);
  init[at(el({-1}))] = L.pack(1, 3);
  init[at(el({1}))] = L.pack(1, 3);

  init[at(el({0}))] = L.pack(0, 3);  // both neighbors seen: 1 xor 1 = 0
  CHECK(L.x(m.run_record(init).frames[1][0]) == 0);
  init[at(el({0}))] = L.pack(0, 1);  // only the left bond open: sum = x(-1)
  CHECK(L.x(m.run_record(init).frames[1][0]) == 1);
  init[at(el({0}))] = L.pack(0, 2);  // only the right bond open: sum = x(+1)
  CHECK(L.x(m.run_record(init).frames[1][0]) == 1);
  init[at(el({0}))] = L.pack(0, 0);  // isolated site: empty sum
  CHECK(L.x(m.run_record(init).frames[1][0]) == 0);
}

TEST_CASE("additive dynamics is linear in the site layer for fixed bonds") {
  Group g(groups::GroupSpec{groups::Kind::FreeGroup, 2, 0});
  auto rule = make_percolated_additive(g);
  const AdditiveLayout L{4};
  std::vector<Element> window{g.identity()};
  OrbitMachine m(g, rule, window, 3);

  rng::Stream rnd(20260814);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Symbol> w(m.cone_size()), a(m.cone_size()), b(m.cone_size()),
        c(m.cone_size());
    for (std::size_t i = 0; i < m.cone_size(); ++i) {
      w[i] = static_cast<Symbol>(rnd.below(16));
      const Symbol xa = rnd.fair_bit(), xb = rnd.fair_bit();
      a[i] = L.pack(xa, w[i]);
      b[i] = L.pack(xb, w[i]);
      c[i] = L.pack(xa ^ xb, w[i]);
    }
    Orbit oa = m.run_record(a), ob = m.run_record(b), oc = m.run_record(c);
    for (int t = 0; t <= 3; ++t)
      CHECK(L.x(oc.frames[t][0]) == (L.x(oa.frames[t][0]) ^ L.x(ob.frames[t][0])));
  }
}

TEST_CASE("additive dynamics commutes with translation on the plane") {
  Group g(groups::GroupSpec{groups::Kind::IntGrid, 2, 0});
  auto rule = make_percolated_additive(g);

  std::vector<Element> F = g.ball(1)->elements();
  auto cone = dependency_cone(g, F, rule.memory, 2);

  rng::Stream rnd(7);
  Pattern x(rule.alphabet);
  for (const auto& h : cone) x.set(h, static_cast<Symbol>(rnd.below(rule.alphabet.size())));

  const Element shift = el({3, -1});
  Pattern gx = translate(g, shift, x);
  std::vector<Element> gF;
  for (const auto& f : F) gF.push_back(g.multiply(shift, f));

  Orbit o1 = evolve(g, rule, x, F, 2);
  Orbit o2 = evolve(g, rule, gx, gF, 2);
  for (int t = 0; t <= 2; ++t)
    for (const auto& f : F)
      CHECK(o2.frames[t][column(o2, g.multiply(shift, f))] == o1.frames[t][column(o1, f)]);
}

TEST_CASE("evolve rejects patterns that do not cover the dependency cone") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_pine(g);
  Pattern x(rule.alphabet);
  for (std::int64_t i = 0; i <= 3; ++i) x.set(el({i}), 1);
  // F = {0}, horizon 2 needs {0..4}; site 4 is missing and must be named.
  try {
    evolve(g, rule, x, {g.identity()}, 2);
    FAIL("expected input_error");
  } catch (const input_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("missing") != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
  x.set(el({4}), 1);
  CHECK_NOTHROW(evolve(g, rule, x, {g.identity()}, 2));
}

TEST_CASE("pine rule: a site turns on iff both right neighbors are on") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_pine(g);

  Pattern x(rule.alphabet);
  for (std::int64_t i = 0; i <= 4; ++i) x.set(el({i}), (i == 1 || i == 2) ? 1 : 0);
  std::vector<Element> F{el({0}), el({1}), el({2})};
  Orbit o = evolve(g, rule, x, F, 1);
  CHECK(o.frames[1][column(o, el({0}))] == 1);
  CHECK(o.frames[1][column(o, el({1}))] == 0);
  CHECK(o.frames[1][column(o, el({2}))] == 0);

  // The all-ones configuration is a fixed point.
  Pattern ones(rule.alphabet);
  for (std::int64_t i = -2; i <= 10; ++i) ones.set(el({i}), 1);
  Orbit fixed = evolve(g, rule, ones, {el({0}), el({1})}, 4);
  for (int t = 0; t <= 4; ++t)
    for (Symbol v : fixed.frames[t]) CHECK(v == 1);

  Group plane(groups::GroupSpec{groups::Kind::IntGrid, 2, 0});
  CHECK_THROWS_AS(make_pine(plane), input_error);
}

TEST_CASE("site-percolated rule: closed sites absorb and count as zero") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_site_percolated(g);

  Pattern x(rule.alphabet);
  x.set(el({-2}), 0);
  x.set(el({-1}), 1);
  x.set(el({0}), kStar);
  x.set(el({1}), 1);
  x.set(el({2}), 1);
  std::vector<Element> F{el({-1}), el({0}), el({1})};
  Orbit o = evolve(g, rule, x, F, 1);
  CHECK(o.frames[1][column(o, el({0}))] == kStar);  // closed stays closed
  // Site -1 reads x(0) = * (counts 0) and x(-2) = 0, site +1 reads
  // x(2) = 1 and x(0) = * -- the closed site never contributes parity.
  CHECK(o.frames[1][column(o, el({-1}))] == 0);
  CHECK(o.frames[1][column(o, el({1}))] == 1);
}

TEST_CASE("shift rule moves content one step per tick") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_shift(g, el({1}));
  CHECK(rule.memory == std::vector<Element>{el({1})});
  CHECK_THROWS_AS(make_shift(g, g.identity()), input_error);

  OrbitMachine m(g, rule, {g.identity()}, 5);
  REQUIRE(m.cone_size() == 6);
  std::vector<Symbol> a(6, 0), b(6, 0);
  b[*m.cone_index(el({3}))] = 1;
  // The window sees x(t) after t steps, so the lone 1 surfaces at t = 3.
  CHECK(m.first_disagreement(a, b) == 3);

  std::vector<Symbol> c = a;
  c[*m.cone_index(el({0}))] = 1;
  CHECK(m.first_disagreement(a, c) == 0);
  CHECK(m.first_disagreement(a, a) == 6);  // horizon + 1 signals agreement
}

TEST_CASE("frame callback can abort a run early") {
  Group g(groups::GroupSpec{groups::Kind::IntLine, 0, 0});
  auto rule = make_shift(g, el({1}));
  OrbitMachine m(g, rule, {g.identity()}, 10);
  std::vector<Symbol> init(m.cone_size(), 0);
  int frames_seen = 0;
  m.run(init, [&](int t, const Symbol*) {
    ++frames_seen;
    return t < 2;
  });
  CHECK(frames_seen == 3);
}

TEST_CASE("reversible pair dynamics composes to the identity both ways") {
  for (auto kind : {groups::Kind::IntLine, groups::Kind::FreeGroup}) {
    Group g(groups::GroupSpec{kind, kind == groups::Kind::FreeGroup ? 2 : 0, 0});
    auto [fwd, inv] = make_reversible(g);
    REQUIRE(fwd.alphabet.size() == inv.alphabet.size());

    std::vector<Element> W1 = dependency_cone(g, {g.identity()}, fwd.memory, 1);
    OrbitMachine forward(g, fwd, W1, 1);   // one step on B(1), needs B(2)
    OrbitMachine backward(g, inv, W1, 1);  // inverse step on the same window
    OrbitMachine probe_fwd(g, fwd, {g.identity()}, 1);
    OrbitMachine probe_inv(g, inv, {g.identity()}, 1);

    rng::Stream rnd(99);
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<Symbol> x(forward.cone_size());
      for (auto& v : x) v = static_cast<Symbol>(rnd.below(fwd.alphabet.size()));

      // Apply a forward step on all of B(1), then an inverse step at e.
      const std::vector<Symbol> y = forward.run_record(x).frames[1];
      std::vector<Symbol> y_cone(probe_inv.cone_size());
      for (std::size_t i = 0; i < probe_inv.cone_size(); ++i)
        y_cone[i] = y[column_of(forward.window(), probe_inv.cone_elements()[i])];
      const Symbol back = probe_inv.run_record(y_cone).frames[1][0];
      CHECK(back == x[*forward.cone_index(g.identity())]);

      // And the other composition: inverse first, then forward.
      const std::vector<Symbol> z = backward.run_record(x).frames[1];
      std::vector<Symbol> z_cone(probe_fwd.cone_size());
      for (std::size_t i = 0; i < probe_fwd.cone_size(); ++i)
        z_cone[i] = z[column_of(backward.window(), probe_fwd.cone_elements()[i])];
      const Symbol forth = probe_fwd.run_record(z_cone).frames[1][0];
      CHECK(forth == x[*backward.cone_index(g.identity())]);
    }
  }
}

TEST_CASE("product marginals respect component ranges and degenerate limits") {
  Alphabet pair{{2, 2, 2}};
  rng::Stream rnd(5);

  auto zeros = ProductMarginal::bernoulli(pair, 0.0);
  auto ones = ProductMarginal::bernoulli(pair, 1.0);
  for (int i = 0; i < 20; ++i) {
    CHECK(zeros.sample(pair, rnd) == 0);
    CHECK(ones.sample(pair, rnd) == pair.size() - 1);
  }

  Alphabet trit{{3}};
  CHECK_THROWS_AS(ProductMarginal::bernoulli(trit, 0.5), input_error);

  auto u = ProductMarginal::uniform(trit);
  std::vector<int> seen(3, 0);
  for (int i = 0; i < 3000; ++i) {
    Symbol s = u.sample(trit, rnd);
    REQUIRE(s < 3);
    ++seen[s];
  }
  for (int c = 0; c < 3; ++c) CHECK(seen[c] > 800);  // ~1000 each
}
