#include "perca/groups.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace perca::groups {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::IntLine: return "IntLine";
    case Kind::IntGrid: return "IntGrid";
    case Kind::FreeGroup: return "FreeGroup";
    case Kind::Lamplighter: return "Lamplighter";
    case Kind::Heisenberg: return "Heisenberg";
    case Kind::VirtuallyZ: return "VirtuallyZ";
    case Kind::FiniteCyclic: return "FiniteCyclic";
  }
  throw input_error("unknown group kind enum value");
}

Kind kind_from_name(const std::string& s) {
  if (s == "IntLine") return Kind::IntLine;
  if (s == "IntGrid") return Kind::IntGrid;
  if (s == "FreeGroup") return Kind::FreeGroup;
  if (s == "Lamplighter") return Kind::Lamplighter;
  if (s == "Heisenberg") return Kind::Heisenberg;
  if (s == "VirtuallyZ") return Kind::VirtuallyZ;
  if (s == "FiniteCyclic") return Kind::FiniteCyclic;
  throw input_error("unknown group kind: " + s);
}

namespace {

std::int64_t pos_mod(std::int64_t a, std::int64_t m) {
  std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

void check_param(const GroupSpec& spec) {
  switch (spec.kind) {
    case Kind::IntLine:
    case Kind::Lamplighter:
    case Kind::Heisenberg:
      break;
    case Kind::IntGrid:
      if (spec.param < 1 || spec.param > 4) throw input_error("IntGrid dimension d must be in 1..4");
      break;
    case Kind::FreeGroup:
      if (spec.param < 1 || spec.param > 3) throw input_error("FreeGroup rank k must be in 1..3");
      break;
    case Kind::VirtuallyZ:
      if (spec.param < 1) throw input_error("VirtuallyZ order m must be >= 1");
      break;
    case Kind::FiniteCyclic:
      if (spec.param < 2) throw input_error("FiniteCyclic order n must be >= 2");
      break;
  }
  if (spec.ball_power < 0) throw input_error("ball_power radius must be >= 1 when present");
}

}  // namespace

Group::Group(GroupSpec spec, std::size_t ball_budget) : spec_(spec), ball_budget_(ball_budget) {
  check_param(spec_);
  build_generators();
}

std::string Group::name() const {
  std::string n = kind_name(spec_.kind);
  switch (spec_.kind) {
    case Kind::IntGrid:
    case Kind::FreeGroup:
    case Kind::VirtuallyZ:
    case Kind::FiniteCyclic:
      n += "(" + std::to_string(spec_.param) + ")";
      break;
    default:
      break;
  }
  if (spec_.ball_power >= 1) n += "/BallPower(" + std::to_string(spec_.ball_power) + ")";
  return n;
}

Element Group::identity() const {
  switch (spec_.kind) {
    case Kind::IntLine: return {0};
    case Kind::IntGrid: return Element(static_cast<std::size_t>(spec_.param), 0);
    case Kind::FreeGroup: return {};
    case Kind::Lamplighter: return {0};
    case Kind::Heisenberg: return {0, 0, 0};
    case Kind::VirtuallyZ: return {0, 0};
    case Kind::FiniteCyclic: return {0};
  }
  throw input_error("unreachable");
}

void Group::validate(const Element& a) const {
  auto fail = [&](const char* what) {
    throw encoding_error(std::string("invalid ") + kind_name(spec_.kind) + " element encoding: " + what);
  };
  switch (spec_.kind) {
    case Kind::IntLine:
      if (a.size() != 1) fail("expected one coordinate");
      break;
    case Kind::IntGrid:
      if (a.size() != static_cast<std::size_t>(spec_.param)) fail("wrong coordinate count");
      break;
    case Kind::FreeGroup: {
      const std::int64_t k = spec_.param;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0 || std::abs(a[i]) > k) fail("letter out of range");
        if (i + 1 < a.size() && a[i] == -a[i + 1]) fail("word not freely reduced");
      }
      break;
    }
    case Kind::Lamplighter:
      if (a.empty()) fail("missing head position");
      for (std::size_t i = 2; i < a.size(); ++i)
        if (a[i - 1] >= a[i]) fail("lamp positions not strictly increasing");
      break;
    case Kind::Heisenberg:
      if (a.size() != 3) fail("expected three coordinates");
      break;
    case Kind::VirtuallyZ:
      if (a.size() != 2) fail("expected (n, r) pair");
      if (a[1] < 0 || a[1] >= spec_.param) fail("residue out of range");
      break;
    case Kind::FiniteCyclic:
      if (a.size() != 1) fail("expected one residue");
      if (a[0] < 0 || a[0] >= spec_.param) fail("residue out of range");
      break;
  }
}

Element Group::multiply_std(const Element& a, const Element& b) const {
  switch (spec_.kind) {
    case Kind::IntLine:
      return {a[0] + b[0]};
    case Kind::IntGrid: {
      Element r(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
      return r;
    }
    case Kind::FreeGroup: {
      Element r = a;
      for (auto letter : b) {
        if (!r.empty() && r.back() == -letter)
          r.pop_back();
        else
          r.push_back(letter);
      }
      return r;
    }
    case Kind::Lamplighter: {
      // (A, t)(B, u) = (A xor (t + B), t + u)
      const std::int64_t t = a[0];
      std::set<std::int64_t> lamps(a.begin() + 1, a.end());
      for (std::size_t i = 1; i < b.size(); ++i) {
        const std::int64_t p = t + b[i];
        auto it = lamps.find(p);
        if (it == lamps.end())
          lamps.insert(p);
        else
          lamps.erase(it);
      }
      Element r;
      r.reserve(lamps.size() + 1);
      r.push_back(t + b[0]);
      r.insert(r.end(), lamps.begin(), lamps.end());
      return r;
    }
    case Kind::Heisenberg:
      return {a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]};
    case Kind::VirtuallyZ:
      return {a[0] + b[0], pos_mod(a[1] + b[1], spec_.param)};
    case Kind::FiniteCyclic:
      return {pos_mod(a[0] + b[0], spec_.param)};
  }
  throw input_error("unreachable");
}

Element Group::multiply(const Element& a, const Element& b) const {
  validate(a);
  validate(b);
  return multiply_std(a, b);
}

Element Group::inverse(const Element& a) const {
  validate(a);
  switch (spec_.kind) {
    case Kind::IntLine:
      return {-a[0]};
    case Kind::IntGrid: {
      Element r(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
      return r;
    }
    case Kind::FreeGroup: {
      Element r(a.rbegin(), a.rend());
      for (auto& letter : r) letter = -letter;
      return r;
    }
    case Kind::Lamplighter: {
      // (A, t)^{-1} = (-t + A, -t)
      const std::int64_t t = a[0];
      Element r;
      r.reserve(a.size());
      r.push_back(-t);
      for (std::size_t i = 1; i < a.size(); ++i) r.push_back(a[i] - t);
      std::sort(r.begin() + 1, r.end());
      return r;
    }
    case Kind::Heisenberg:
      return {-a[0], -a[1], -a[2] + a[0] * a[1]};
    case Kind::VirtuallyZ:
      return {-a[0], pos_mod(-a[1], spec_.param)};
    case Kind::FiniteCyclic:
      return {pos_mod(-a[0], spec_.param)};
  }
  throw input_error("unreachable");
}

void Group::build_generators() {
  std::vector<Element> gens;
  std::vector<std::string> names;

  if (spec_.ball_power >= 1) {
    // B_r \ {e} with respect to the standard generating set, in ball order.
    GroupSpec std_spec = spec_;
    std_spec.ball_power = 0;
    Group std_group(std_spec, ball_budget_);
    auto b = std_group.ball(spec_.ball_power);
    for (std::size_t i = 1; i < b->size(); ++i) {
      gens.push_back(b->element(i));
      names.push_back(std_group.to_string(b->element(i)));
    }
  } else {
    auto push = [&](Element g, std::string name) {
      for (const auto& existing : gens)
        if (existing == g) return;  // deduplicate coinciding generators
      if (g == identity()) return;
      gens.push_back(std::move(g));
      names.push_back(std::move(name));
    };
    switch (spec_.kind) {
      case Kind::IntLine:
        push({1}, "+1");
        push({-1}, "-1");
        break;
      case Kind::IntGrid: {
        static const char* axis[] = {"x", "y", "z", "w"};
        for (int i = 0; i < spec_.param; ++i) {
          Element plus(static_cast<std::size_t>(spec_.param), 0), minus = plus;
          plus[static_cast<std::size_t>(i)] = 1;
          minus[static_cast<std::size_t>(i)] = -1;
          push(plus, std::string("+") + axis[i]);
          push(minus, std::string("-") + axis[i]);
        }
        break;
      }
      case Kind::FreeGroup:
        for (std::int64_t i = 1; i <= spec_.param; ++i) {
          push({i}, std::string(1, static_cast<char>('a' + i - 1)));
          push({-i}, std::string(1, static_cast<char>('A' + i - 1)));
        }
        break;
      case Kind::Lamplighter:
        // Symmetrized standard set: both shifts plus the (involutive) lamp toggle.
        push({1}, "t");
        push({-1}, "T");
        push({0, 0}, "a");
        break;
      case Kind::Heisenberg:
        push({1, 0, 0}, "x");
        push({-1, 0, 0}, "X");
        push({0, 1, 0}, "y");
        push({0, -1, 0}, "Y");
        break;
      case Kind::VirtuallyZ:
        push({1, 0}, "+1");
        push({-1, 0}, "-1");
        if (spec_.param >= 2) {
          push({0, 1}, "u");
          push({0, pos_mod(-1, spec_.param)}, "U");
        }
        break;
      case Kind::FiniteCyclic:
        push({1}, "+1");
        push({pos_mod(-1, spec_.param)}, "-1");
        break;
    }
  }

  generators_ = std::move(gens);
  generator_names_ = std::move(names);
  gen_inverse_.resize(generators_.size());
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    const Element inv = inverse(generators_[i]);
    bool found = false;
    for (std::size_t j = 0; j < generators_.size(); ++j) {
      if (generators_[j] == inv) {
        gen_inverse_[i] = j;
        found = true;
        break;
      }
    }
    if (!found) throw assertion_error("generating set is not symmetric");
  }
}

std::vector<std::pair<std::size_t, Element>> Group::cayley_neighbors(const Element& g) const {
  validate(g);
  std::vector<std::pair<std::size_t, Element>> out;
  out.reserve(generators_.size());
  for (std::size_t j = 0; j < generators_.size(); ++j)
    out.emplace_back(j, multiply_std(g, generators_[j]));
  return out;
}

int Ball::word_length_of(std::size_t i) const {
  // offsets_ is increasing; find the sphere containing ordinal i.
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
  return static_cast<int>(it - offsets_.begin()) - 1;
}

std::shared_ptr<Ball> Group::build_ball(int radius) const {
  auto ball = std::make_shared<Ball>();
  ball->radius_ = radius;
  ball->gen_count_ = generators_.size();
  ball->elements_.push_back(identity());
  ball->index_.emplace(identity(), 0);
  ball->offsets_ = {0, 1};

  std::size_t frontier_begin = 0;
  for (int r = 1; r <= radius; ++r) {
    const std::size_t frontier_end = ball->elements_.size();
    std::set<Element> fresh;  // lexicographic tie-break inside the sphere
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      for (const auto& s : generators_) {
        Element h = multiply_std(ball->elements_[i], s);
        if (!ball->index_.count(h)) fresh.insert(std::move(h));
      }
    }
    for (const auto& h : fresh) {
      ball->index_.emplace(h, ball->elements_.size());
      ball->elements_.push_back(h);
    }
    if (ball->elements_.size() > ball_budget_)
      throw resource_error("ball budget of " + std::to_string(ball_budget_) +
                           " elements exceeded at radius " + std::to_string(r));
    ball->offsets_.push_back(ball->elements_.size());
    frontier_begin = frontier_end;
  }

  const std::size_t n = ball->elements_.size();
  const std::size_t gc = ball->gen_count_;
  ball->neighbors_.assign(n * gc, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < gc; ++j) {
      Element h = multiply_std(ball->elements_[i], generators_[j]);
      auto it = ball->index_.find(h);
      if (it != ball->index_.end())
        ball->neighbors_[i * gc + j] = static_cast<std::int64_t>(it->second);
    }
  }
  return ball;
}

std::shared_ptr<const Ball> Group::ball(int radius) const {
  if (radius < 0) throw input_error("ball radius must be >= 0");
  std::lock_guard<std::mutex> lock(cache_mutex_);
  const auto idx = static_cast<std::size_t>(radius);
  if (ball_cache_.size() <= idx) ball_cache_.resize(idx + 1);
  if (!ball_cache_[idx]) ball_cache_[idx] = build_ball(radius);
  return ball_cache_[idx];
}

int Group::word_length(const Element& g) const {
  validate(g);
  if (spec_.ball_power == 0) {
    switch (spec_.kind) {
      case Kind::IntLine:
        return static_cast<int>(std::abs(g[0]));
      case Kind::IntGrid: {
        std::int64_t sum = 0;
        for (auto v : g) sum += std::abs(v);
        return static_cast<int>(sum);
      }
      case Kind::FreeGroup:
        return static_cast<int>(g.size());
      case Kind::VirtuallyZ:
        return static_cast<int>(std::abs(g[0]) + std::min(g[1], spec_.param - g[1]));
      case Kind::FiniteCyclic:
        return static_cast<int>(std::min(g[0], spec_.param - g[0]));
      default:
        break;  // Lamplighter, Heisenberg: no closed form, fall through to BFS
    }
  }
  if (g == identity()) return 0;
  for (int radius = 1;; radius *= 2) {
    auto b = ball(radius);
    if (auto idx = b->index_of(g)) return b->word_length_of(*idx);
    if (b->size() > ball_budget_ / 2)
      throw resource_error("word_length BFS exceeded the ball budget");
  }
}

std::string Group::to_string(const Element& g) const {
  std::ostringstream os;
  switch (spec_.kind) {
    case Kind::IntLine:
    case Kind::FiniteCyclic:
      os << g[0];
      break;
    case Kind::IntGrid:
    case Kind::Heisenberg:
    case Kind::VirtuallyZ: {
      os << "(";
      for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << g[i];
      os << ")";
      break;
    }
    case Kind::FreeGroup: {
      if (g.empty()) {
        os << "e";
      } else {
        for (auto letter : g)
          os << static_cast<char>((letter > 0 ? 'a' + letter : 'A' - letter) - 1);
      }
      break;
    }
    case Kind::Lamplighter: {
      os << "{";
      for (std::size_t i = 1; i < g.size(); ++i) os << (i > 1 ? "," : "") << g[i];
      os << "};" << g[0];
      break;
    }
  }
  return os.str();
}

}  // namespace perca::groups
