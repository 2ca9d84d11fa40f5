#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perca/groups.hpp"
#include "perca/rng.hpp"

namespace perca::ca {

using groups::Element;
using groups::ElementHash;
using groups::Group;

using Symbol = std::uint32_t;

/// Finite alphabet with product structure.  Component 0 is the most
/// significant digit of the mixed-radix symbol encoding, so for the pair
/// alphabet {0,1} x {0,1}^S the leading component is the site value x.
struct Alphabet {
  std::vector<Symbol> component_sizes;

  Symbol size() const {
    Symbol n = 1;
    for (auto c : component_sizes) n *= c;
    return n;
  }
  std::size_t components() const { return component_sizes.size(); }

  Symbol pack(const std::vector<Symbol>& parts) const;
  std::vector<Symbol> unpack(Symbol s) const;
  Symbol component(Symbol s, std::size_t i) const;
};

/// Finite partial configuration: symbols on a finite support.
class Pattern {
 public:
  Pattern() = default;
  explicit Pattern(Alphabet a) : alphabet_(std::move(a)) {}

  const Alphabet& alphabet() const { return alphabet_; }
  void set(const Element& g, Symbol v);
  std::optional<Symbol> get(const Element& g) const;
  bool has(const Element& g) const { return values_.count(g) != 0; }
  std::size_t size() const { return values_.size(); }

  /// Support in lexicographic encoding order (canonical serialization order).
  std::vector<Element> support() const;

  /// Restriction to the given elements; missing elements are simply absent.
  Pattern restrict(const std::vector<Element>& sub) const;

  const std::unordered_map<Element, Symbol, ElementHash>& raw() const { return values_; }

 private:
  Alphabet alphabet_;
  std::unordered_map<Element, Symbol, ElementHash> values_;
};

/// Translate by g: (g.x)(h) = x(g^{-1} h), i.e. support moves to g * support.
Pattern translate(const Group& group, const Element& g, const Pattern& x);

/// Local rule with an explicitly ordered memory set K.  `apply` reads one
/// symbol per memory element, in memory order, from the updated site's
/// translated neighborhood: entry j holds the current symbol at g * K[j].
struct LocalRule {
  std::string name;
  Alphabet alphabet;
  std::vector<Element> memory;
  std::function<Symbol(const Symbol*)> apply;
};

/// Exact dependency cone: all sites whose initial symbol can influence the
/// window F within t steps, i.e. F * (K u {e})^t.  Monotone in t.
std::vector<Element> dependency_cone(const Group& group, const std::vector<Element>& F,
                                     const std::vector<Element>& K, int t);

/// Time-indexed frames over a fixed finite window.
struct Orbit {
  std::vector<Element> window;              // sorted, = frame column order
  std::vector<std::vector<Symbol>> frames;  // frames[t][i], t = 0..horizon
  int horizon() const { return static_cast<int>(frames.size()) - 1; }
};

/// Precomputed evolution stencil for one (rule, window, horizon) triple.
/// Cone elements are stored level-major (window first), so the values for
/// cone(F, K, m) are exactly the first level_size(m) entries.  Evolution
/// shrinks the active prefix by one level per step; every value the window
/// sees is therefore computed from fully supplied data, never from a guessed
/// boundary.
class OrbitMachine {
 public:
  OrbitMachine(const Group& group, LocalRule rule, std::vector<Element> window, int horizon);

  const LocalRule& rule() const { return rule_; }
  int horizon() const { return horizon_; }
  const std::vector<Element>& window() const { return window_; }
  std::size_t window_size() const { return window_.size(); }
  const std::vector<Element>& cone_elements() const { return elements_; }
  std::size_t cone_size() const { return elements_.size(); }
  std::size_t level_size(int m) const { return offsets_[static_cast<std::size_t>(m)]; }
  std::optional<std::size_t> cone_index(const Element& g) const;

  /// Runs from `values` (cone order, cone_size() entries).  `on_frame(t,
  /// window_values)` fires for every t in 0..horizon; returning false aborts
  /// the run early.
  void run(const std::vector<Symbol>& values,
           const std::function<bool(int, const Symbol*)>& on_frame) const;

  Orbit run_record(const std::vector<Symbol>& values) const;

  /// Convenience: runs two initial conditions in lockstep and returns the
  /// first time t at which the window frames differ (horizon+1 if none).
  int first_disagreement(const std::vector<Symbol>& a, const std::vector<Symbol>& b) const;

 private:
  const Group& group_;
  LocalRule rule_;
  std::vector<Element> window_;
  int horizon_;
  std::vector<Element> elements_;
  std::vector<std::size_t> offsets_;  // offsets_[m] = |cone(F, K, m)|
  groups::ElementSet index_;
  std::vector<std::int64_t> nbr_;  // cone ordinal x memory index -> cone ordinal
};

/// Reads one symbol per cone element from x, in cone order.  Throws an
/// input_error naming (up to eight) missing elements if the support of x does
/// not cover the machine's cone, or if a stored symbol is out of range.
std::vector<Symbol> cone_values(const Group& group, const OrbitMachine& machine,
                                const Pattern& x);

/// Evolves x exactly on F for `horizon` steps.  The support of x must contain
/// the dependency cone; otherwise an input_error names missing elements.
Orbit evolve(const Group& group, const LocalRule& rule, const Pattern& x,
             const std::vector<Element>& F, int horizon);

// -- Rule factories ---------------------------------------------------------

/// Symbol layout helpers for the percolated-additive family: leading bit(s)
/// carry the site value(s), trailing |S| bits carry the outgoing bond row.
struct AdditiveLayout {
  std::size_t bond_count = 0;

  Symbol pack(Symbol x, Symbol bonds) const {
    return (x << bond_count) | bonds;
  }
  Symbol x(Symbol s) const { return s >> bond_count; }
  Symbol bonds(Symbol s) const { return s & ((Symbol{1} << bond_count) - 1); }
  Symbol bond(Symbol s, std::size_t j) const { return (s >> (bond_count - 1 - j)) & 1; }
};

/// phi(x, w)_g = (sum_s w_g(s) x_{gs} mod 2, w_g) over {0,1} x {0,1}^S.
LocalRule make_percolated_additive(const Group& group);

/// Site-percolated variant over {0, 1, *}: * is absorbing, open sites update
/// to the mod-2 sum of pi(neighbors) with pi(*) = pi(0) = 0.
LocalRule make_site_percolated(const Group& group);
inline constexpr Symbol kStar = 2;

/// Pine processionary rule on IntLine: x'_n = [x_{n+1} = x_{n+2} = 1].
LocalRule make_pine(const Group& group);

/// Shift by a fixed non-identity element h: phi(x)_g = x(gh).
LocalRule make_shift(const Group& group, const Element& h);

/// Reversible percolated pair dynamics on {0,1}^2 x {0,1}^S; returns the
/// forward rule and its exact inverse.
std::pair<LocalRule, LocalRule> make_reversible(const Group& group);

/// Independent per-component product measure used by samplers: probs[c] is a
/// distribution over the values of component c.
struct ProductMarginal {
  std::vector<std::vector<double>> probs;

  static ProductMarginal uniform(const Alphabet& a);
  /// All binary components Bernoulli(p) (requires every component size 2).
  static ProductMarginal bernoulli(const Alphabet& a, double p);

  Symbol sample(const Alphabet& a, rng::Stream& rnd) const;
};

}  // namespace perca::ca
