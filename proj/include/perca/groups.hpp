#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perca/errors.hpp"

namespace perca::groups {

enum class Kind { IntLine, IntGrid, FreeGroup, Lamplighter, Heisenberg, VirtuallyZ, FiniteCyclic };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& s);

/// Finitely generated group from the fixed catalog, plus a choice of
/// generating set: the standard one, or BallPower(r) = B_r \ {e} computed
/// with the standard set.
struct GroupSpec {
  Kind kind = Kind::IntLine;
  int param = 0;      // d (IntGrid), k (FreeGroup), m (VirtuallyZ), n (FiniteCyclic); unused otherwise
  int ball_power = 0;  // 0 = standard generating set; r >= 1 = B_r \ {e}

  bool operator==(const GroupSpec&) const = default;
};

/// Canonical element encoding: a flat vector of 64-bit integers whose layout
/// depends on the group kind.
///   IntLine        [n]
///   IntGrid(d)     [x_1, ..., x_d]
///   FreeGroup(k)   freely reduced word; letter i in 1..k, inverse -i
///   Lamplighter    [head, lamp_1 < lamp_2 < ...]  (lamps: finite subset of Z)
///   Heisenberg     [a, b, c]
///   VirtuallyZ(m)  [n, r] with 0 <= r < m
///   FiniteCyclic(n)[r] with 0 <= r < n
/// Equality of encodings is equality of elements; lexicographic comparison of
/// encodings is the tie-break order used everywhere.
using Element = std::vector<std::int64_t>;

struct ElementHash {
  std::size_t operator()(const Element& e) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ (e.size() * 0xD1342543DE82EF95ULL);
    for (auto v : e) {
      h ^= static_cast<std::uint64_t>(v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      h *= 0xBF58476D1CE4E5B9ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

using ElementSet = std::unordered_map<Element, std::size_t, ElementHash>;

class Group;

/// Word-metric ball B_n around the identity, enumerated in BFS order with a
/// lexicographic tie-break on the canonical encoding inside each sphere.
/// The radius-m prefix of the element list is exactly B_m for every m <= n.
class Ball {
 public:
  int radius() const { return radius_; }
  std::size_t size() const { return elements_.size(); }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(std::size_t i) const { return elements_[i]; }

  /// Ordinal of g in the ball, or nullopt when |g| > radius.
  std::optional<std::size_t> index_of(const Element& g) const {
    auto it = index_.find(g);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// |B_m| for m <= radius.
  std::size_t prefix_size(int m) const { return offsets_[static_cast<std::size_t>(m) + 1]; }

  /// Word length of the i-th element (position of its sphere).
  int word_length_of(std::size_t i) const;

  std::size_t generator_count() const { return gen_count_; }

  /// Ordinal of element(i) * s_j, or -1 when the product leaves the ball.
  std::int64_t neighbor(std::size_t i, std::size_t j) const {
    return neighbors_[i * gen_count_ + j];
  }

 private:
  friend class Group;
  int radius_ = 0;
  std::size_t gen_count_ = 0;
  std::vector<Element> elements_;
  ElementSet index_;
  std::vector<std::size_t> offsets_;  // offsets_[m] = first ordinal of sphere m
  std::vector<std::int64_t> neighbors_;
};

inline constexpr std::size_t kDefaultBallBudget = 4'000'000;

class Group {
 public:
  explicit Group(GroupSpec spec, std::size_t ball_budget = kDefaultBallBudget);

  const GroupSpec& spec() const { return spec_; }
  std::string name() const;

  Element identity() const;
  Element multiply(const Element& a, const Element& b) const;
  Element inverse(const Element& a) const;

  /// Throws encoding_error when the vector is not a canonical encoding.
  void validate(const Element& a) const;

  /// The symmetric generating set S, in the fixed label order.  Never
  /// contains the identity; inverse-closed by construction.
  const std::vector<Element>& generators() const { return generators_; }
  const std::vector<std::string>& generator_names() const { return generator_names_; }

  /// Index j such that generators()[j] == generators()[i]^{-1}.
  std::size_t generator_inverse(std::size_t i) const { return gen_inverse_[i]; }

  /// One entry per s in S, in label order: (label index, g*s).
  std::vector<std::pair<std::size_t, Element>> cayley_neighbors(const Element& g) const;

  /// BFS distance from the identity in the Cayley graph of S.  Closed forms
  /// are used where the standard generating set admits them; otherwise the
  /// cached-ball BFS runs until g is found or the budget is exceeded.
  int word_length(const Element& g) const;

  /// Cached ball of the given radius (shared; balls are immutable).
  std::shared_ptr<const Ball> ball(int radius) const;

  std::string to_string(const Element& g) const;

 private:
  Element multiply_std(const Element& a, const Element& b) const;
  void build_generators();
  std::shared_ptr<Ball> build_ball(int radius) const;

  GroupSpec spec_;
  std::size_t ball_budget_;
  std::vector<Element> generators_;
  std::vector<std::string> generator_names_;
  std::vector<std::size_t> gen_inverse_;
  mutable std::mutex cache_mutex_;
  mutable std::vector<std::shared_ptr<const Ball>> ball_cache_;
};

}  // namespace perca::groups
