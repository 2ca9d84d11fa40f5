#include "perca/ca.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "perca/errors.hpp"

namespace perca::ca {

Symbol Alphabet::pack(const std::vector<Symbol>& parts) const {
  if (parts.size() != component_sizes.size())
    throw input_error("pack: wrong component count");
  Symbol v = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i] >= component_sizes[i]) throw input_error("pack: component value out of range");
    v = v * component_sizes[i] + parts[i];
  }
  return v;
}

std::vector<Symbol> Alphabet::unpack(Symbol s) const {
  std::vector<Symbol> parts(component_sizes.size());
  for (std::size_t i = component_sizes.size(); i-- > 0;) {
    parts[i] = s % component_sizes[i];
    s /= component_sizes[i];
  }
  return parts;
}

Symbol Alphabet::component(Symbol s, std::size_t i) const {
  for (std::size_t j = component_sizes.size(); j-- > i + 1;) s /= component_sizes[j];
  return s % component_sizes[i];
}

void Pattern::set(const Element& g, Symbol v) {
  if (v >= alphabet_.size()) throw input_error("pattern symbol out of alphabet range");
  values_[g] = v;
}

std::optional<Symbol> Pattern::get(const Element& g) const {
  auto it = values_.find(g);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::vector<Element> Pattern::support() const {
  std::vector<Element> sup;
  sup.reserve(values_.size());
  for (const auto& [g, v] : values_) sup.push_back(g);
  std::sort(sup.begin(), sup.end());
  return sup;
}

Pattern Pattern::restrict(const std::vector<Element>& sub) const {
  Pattern out(alphabet_);
  for (const auto& g : sub) {
    auto it = values_.find(g);
    if (it != values_.end()) out.set(g, it->second);
  }
  return out;
}

Pattern translate(const Group& group, const Element& g, const Pattern& x) {
  Pattern out(x.alphabet());
  for (const auto& [h, v] : x.raw()) out.set(group.multiply(g, h), v);
  return out;
}

namespace {

struct ConeBuild {
  std::vector<Element> elements;
  std::vector<std::size_t> offsets;
  groups::ElementSet index;
};

ConeBuild build_cone(const Group& group, const std::vector<Element>& F,
                     const std::vector<Element>& K, int t) {
  if (t < 0) throw input_error("dependency cone horizon must be >= 0");
  if (F.empty()) throw input_error("window F must be nonempty");
  ConeBuild cone;
  {
    std::set<Element> base(F.begin(), F.end());
    for (const auto& g : base) {
      group.validate(g);
      cone.index.emplace(g, cone.elements.size());
      cone.elements.push_back(g);
    }
  }
  cone.offsets.push_back(cone.elements.size());
  // cone(m) = cone(m-1) u cone(m-1)K.  Products from elements older than the
  // previous level were already inserted when their own level was fresh, so
  // each round only expands the most recent level.
  std::size_t level_begin = 0, level_end = cone.elements.size();
  for (int m = 1; m <= t; ++m) {
    std::set<Element> fresh;
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (const auto& k : K) {
        Element h = group.multiply(cone.elements[i], k);
        if (!cone.index.count(h)) fresh.insert(std::move(h));
      }
    }
    for (const auto& h : fresh) {
      cone.index.emplace(h, cone.elements.size());
      cone.elements.push_back(h);
    }
    if (fresh.empty()) {
      // Saturated: all further levels coincide.
      for (int r = m; r <= t; ++r) cone.offsets.push_back(cone.elements.size());
      break;
    }
    cone.offsets.push_back(cone.elements.size());
    level_begin = level_end;
    level_end = cone.elements.size();
  }
  return cone;
}

}  // namespace

std::vector<Element> dependency_cone(const Group& group, const std::vector<Element>& F,
                                     const std::vector<Element>& K, int t) {
  for (const auto& k : K) group.validate(k);
  return build_cone(group, F, K, t).elements;
}

OrbitMachine::OrbitMachine(const Group& group, LocalRule rule, std::vector<Element> window,
                           int horizon)
    : group_(group), rule_(std::move(rule)), horizon_(horizon) {
  if (horizon < 0) throw input_error("horizon must be >= 0");
  if (rule_.memory.empty()) throw input_error("local rule memory set is empty");
  std::set<Element> w(window.begin(), window.end());
  window_.assign(w.begin(), w.end());
  auto cone = build_cone(group, window_, rule_.memory, horizon);
  elements_ = std::move(cone.elements);
  offsets_ = std::move(cone.offsets);
  index_ = std::move(cone.index);

  const std::size_t m = rule_.memory.size();
  nbr_.assign(elements_.size() * m, -1);
  // Neighbor rows are only ever read for elements strictly inside the last
  // level, where the product stays inside the cone by construction.
  const std::size_t need = horizon_ > 0 ? level_size(horizon_ - 1) : 0;
  for (std::size_t i = 0; i < need; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      Element h = group.multiply(elements_[i], rule_.memory[j]);
      auto it = index_.find(h);
      if (it == index_.end())
        throw assertion_error("cone construction missed a dependency");
      nbr_[i * m + j] = static_cast<std::int64_t>(it->second);
    }
  }
}

std::optional<std::size_t> OrbitMachine::cone_index(const Element& g) const {
  auto it = index_.find(g);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void OrbitMachine::run(const std::vector<Symbol>& values,
                       const std::function<bool(int, const Symbol*)>& on_frame) const {
  if (values.size() != elements_.size())
    throw input_error("orbit machine expects one symbol per cone element");
  if (!on_frame(0, values.data()) || horizon_ == 0) return;
  std::vector<Symbol> cur = values;
  std::vector<Symbol> next(values.size());
  const std::size_t m = rule_.memory.size();
  std::vector<Symbol> local(m);
  for (int t = 1; t <= horizon_; ++t) {
    const std::size_t active = level_size(horizon_ - t);
    for (std::size_t i = 0; i < active; ++i) {
      const std::int64_t* row = &nbr_[i * m];
      for (std::size_t j = 0; j < m; ++j) local[j] = cur[static_cast<std::size_t>(row[j])];
      next[i] = rule_.apply(local.data());
    }
    std::swap(cur, next);
    if (!on_frame(t, cur.data())) return;
  }
}

Orbit OrbitMachine::run_record(const std::vector<Symbol>& values) const {
  Orbit orbit;
  orbit.window = window_;
  orbit.frames.assign(static_cast<std::size_t>(horizon_) + 1, {});
  run(values, [&](int t, const Symbol* frame) {
    orbit.frames[static_cast<std::size_t>(t)].assign(frame, frame + window_.size());
    return true;
  });
  return orbit;
}

int OrbitMachine::first_disagreement(const std::vector<Symbol>& a,
                                     const std::vector<Symbol>& b) const {
  std::vector<std::vector<Symbol>> fa(static_cast<std::size_t>(horizon_) + 1);
  run(a, [&](int t, const Symbol* frame) {
    fa[static_cast<std::size_t>(t)].assign(frame, frame + window_.size());
    return true;
  });
  int first = horizon_ + 1;
  run(b, [&](int t, const Symbol* frame) {
    if (std::equal(frame, frame + window_.size(), fa[static_cast<std::size_t>(t)].begin()))
      return true;
    first = t;
    return false;
  });
  return first;
}

std::vector<Symbol> cone_values(const Group& group, const OrbitMachine& machine,
                                const Pattern& x) {
  std::vector<Symbol> values(machine.cone_size());
  std::vector<Element> missing;
  for (std::size_t i = 0; i < machine.cone_size(); ++i) {
    auto v = x.get(machine.cone_elements()[i]);
    if (!v) {
      if (missing.size() < 8) missing.push_back(machine.cone_elements()[i]);
      continue;
    }
    if (*v >= machine.rule().alphabet.size())
      throw input_error("pattern symbol outside rule alphabet");
    values[i] = *v;
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "pattern support does not cover the dependency cone; missing";
    for (const auto& g : missing) os << " " << group.to_string(g);
    if (missing.size() == 8) os << " ...";
    throw input_error(os.str());
  }
  return values;
}

Orbit evolve(const Group& group, const LocalRule& rule, const Pattern& x,
             const std::vector<Element>& F, int horizon) {
  OrbitMachine machine(group, rule, F, horizon);
  return machine.run_record(cone_values(group, machine, x));
}

// -- Rule factories ---------------------------------------------------------

LocalRule make_percolated_additive(const Group& group) {
  const std::size_t m = group.generators().size();
  LocalRule rule;
  rule.name = "percolated-additive";
  rule.alphabet.component_sizes.assign(m + 1, 2);
  rule.memory.push_back(group.identity());
  for (const auto& s : group.generators()) rule.memory.push_back(s);
  const AdditiveLayout L{m};
  rule.apply = [m, L](const Symbol* v) -> Symbol {
    const Symbol self = v[0];
    Symbol acc = 0;
    for (std::size_t j = 0; j < m; ++j) acc ^= L.bond(self, j) & L.x(v[1 + j]);
    return L.pack(acc, L.bonds(self));
  };
  return rule;
}

LocalRule make_site_percolated(const Group& group) {
  const std::size_t m = group.generators().size();
  LocalRule rule;
  rule.name = "site-percolated-additive";
  rule.alphabet.component_sizes = {3};
  rule.memory.push_back(group.identity());
  for (const auto& s : group.generators()) rule.memory.push_back(s);
  rule.apply = [m](const Symbol* v) -> Symbol {
    if (v[0] == kStar) return kStar;
    Symbol acc = 0;
    for (std::size_t j = 0; j < m; ++j) acc ^= (v[1 + j] == 1) ? 1u : 0u;
    return acc;
  };
  return rule;
}

LocalRule make_pine(const Group& group) {
  if (group.spec().kind != groups::Kind::IntLine || group.spec().ball_power != 0)
    throw input_error("pine rule is defined on IntLine with the standard generators");
  LocalRule rule;
  rule.name = "pine";
  rule.alphabet.component_sizes = {2};
  rule.memory = {{1}, {2}};
  rule.apply = [](const Symbol* v) -> Symbol { return (v[0] == 1 && v[1] == 1) ? 1 : 0; };
  return rule;
}

LocalRule make_shift(const Group& group, const Element& h) {
  group.validate(h);
  if (h == group.identity())
    throw input_error("shift step must differ from the identity");
  LocalRule rule;
  rule.name = "shift(" + group.to_string(h) + ")";
  rule.alphabet.component_sizes = {2};
  rule.memory = {h};
  rule.apply = [](const Symbol* v) -> Symbol { return v[0]; };
  return rule;
}

std::pair<LocalRule, LocalRule> make_reversible(const Group& group) {
  const std::size_t m = group.generators().size();
  Alphabet alpha;
  alpha.component_sizes.assign(m + 2, 2);
  std::vector<Element> memory;
  memory.push_back(group.identity());
  for (const auto& s : group.generators()) memory.push_back(s);

  // Layout: bit (m+1) = x, bit m = y, bits m-1..0 = bond row w.
  const Symbol wmask = (Symbol{1} << m) - 1;
  auto xbit = [m](Symbol s) { return (s >> (m + 1)) & 1; };
  auto ybit = [m](Symbol s) { return (s >> m) & 1; };
  auto wrow = [wmask](Symbol s) { return s & wmask; };
  auto wbit = [m](Symbol s, std::size_t j) { return (s >> (m - 1 - j)) & 1; };

  LocalRule fwd;
  fwd.name = "reversible-percolated";
  fwd.alphabet = alpha;
  fwd.memory = memory;
  fwd.apply = [=](const Symbol* v) -> Symbol {
    const Symbol self = v[0];
    Symbol acc = xbit(self);
    for (std::size_t j = 0; j < m; ++j) acc ^= wbit(self, j) & ybit(v[1 + j]);
    // new x = old y, new y = old x + sum of open-bond y-neighbors
    return (ybit(self) << (m + 1)) | (acc << m) | wrow(self);
  };

  LocalRule inv;
  inv.name = "reversible-percolated-inverse";
  inv.alphabet = alpha;
  inv.memory = memory;
  inv.apply = [=](const Symbol* v) -> Symbol {
    const Symbol self = v[0];
    Symbol acc = ybit(self);
    for (std::size_t j = 0; j < m; ++j) acc ^= wbit(self, j) & xbit(v[1 + j]);
    // new x = old y + sum of open-bond x-neighbors, new y = old x
    return (acc << (m + 1)) | (xbit(self) << m) | wrow(self);
  };
  return {fwd, inv};
}

ProductMarginal ProductMarginal::uniform(const Alphabet& a) {
  ProductMarginal pm;
  for (auto c : a.component_sizes)
    pm.probs.emplace_back(c, 1.0 / static_cast<double>(c));
  return pm;
}

ProductMarginal ProductMarginal::bernoulli(const Alphabet& a, double p) {
  ProductMarginal pm;
  for (auto c : a.component_sizes) {
    if (c != 2) throw input_error("bernoulli marginal requires binary components");
    pm.probs.push_back({1.0 - p, p});
  }
  return pm;
}

Symbol ProductMarginal::sample(const Alphabet& a, rng::Stream& rnd) const {
  if (probs.size() != a.components())
    throw input_error("marginal component count does not match alphabet");
  std::vector<Symbol> parts(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    double u = rnd.next_unit();
    Symbol v = 0;
    for (; v + 1 < probs[c].size(); ++v) {
      if (u < probs[c][v]) break;
      u -= probs[c][v];
    }
    parts[c] = v;
  }
  return a.pack(parts);
}

}  // namespace perca::ca
