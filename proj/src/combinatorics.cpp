#include "perca/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_set>

#include "perca/errors.hpp"

namespace perca::comb {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

int word_dist(const Group& group, const Element& u, const Element& v) {
  return group.word_length(group.multiply(group.inverse(u), v));
}

Rational rational_pow(Rational base, unsigned long e) {
  Rational out;
  mpz_pow_ui(out.get_num_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(out.get_den_mpz_t(), base.get_den_mpz_t(), e);
  out.canonicalize();
  return out;
}

/// Max-flow with exact rational capacities (shortest augmenting paths).
struct FlowNet {
  struct Edge {
    std::size_t to;
    Rational cap;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> adj;

  explicit FlowNet(std::size_t n) : adj(n) {}

  void add(std::size_t u, std::size_t v, Rational cap) {
    adj[u].push_back(Edge{v, std::move(cap), adj[v].size()});
    adj[v].push_back(Edge{u, Rational(0), adj[u].size() - 1});
  }

  Rational max_flow(std::size_t s, std::size_t t) {
    Rational total = 0;
    for (;;) {
      std::vector<std::pair<std::size_t, std::size_t>> parent(adj.size(), {npos, npos});
      std::deque<std::size_t> queue{s};
      parent[s] = {s, 0};
      while (!queue.empty() && parent[t].first == npos) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t i = 0; i < adj[u].size(); ++i) {
          const Edge& e = adj[u][i];
          if (e.cap > 0 && parent[e.to].first == npos) {
            parent[e.to] = {u, i};
            queue.push_back(e.to);
          }
        }
      }
      if (parent[t].first == npos) break;
      Rational bottleneck(-1);
      for (std::size_t v = t; v != s; v = parent[v].first) {
        const Edge& e = adj[parent[v].first][parent[v].second];
        if (bottleneck < 0 || e.cap < bottleneck) bottleneck = e.cap;
      }
      for (std::size_t v = t; v != s; v = parent[v].first) {
        Edge& e = adj[parent[v].first][parent[v].second];
        e.cap -= bottleneck;
        adj[e.to][e.rev].cap += bottleneck;
      }
      total += bottleneck;
    }
    return total;
  }

  std::vector<char> residual_reachable(std::size_t s) const {
    std::vector<char> seen(adj.size(), 0);
    std::deque<std::size_t> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (const Edge& e : adj[u])
        if (e.cap > 0 && !seen[e.to]) {
          seen[e.to] = 1;
          queue.push_back(e.to);
        }
    }
    return seen;
  }
};

}  // namespace

MatchingResult hall_matching(const BipartiteGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.left);
  for (const auto& [u, v] : g.edges) {
    if (u >= g.left || v >= g.right)
      throw input_error("bipartite edge references a vertex outside the declared sides");
    adj[u].push_back(v);
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }

  std::vector<std::size_t> match_left(g.left, npos), match_right(g.right, npos);
  std::vector<char> seen(g.right, 0);
  std::function<bool(std::size_t)> augment = [&](std::size_t u) -> bool {
    for (std::size_t v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (match_right[v] == npos || augment(match_right[v])) {
        match_right[v] = u;
        match_left[u] = v;
        return true;
      }
    }
    return false;
  };

  MatchingResult result;
  for (std::size_t u = 0; u < g.left; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    if (augment(u)) continue;

    // No augmenting path from u: left vertices reachable by alternating
    // paths overfill their joint neighborhood by exactly one.
    std::vector<char> in_a(g.left, 0), in_b(g.right, 0);
    std::vector<std::size_t> stack{u};
    in_a[u] = 1;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[a]) {
        if (in_b[v]) continue;
        in_b[v] = 1;
        const std::size_t w = match_right[v];
        if (w == npos) throw assertion_error("matching search missed an augmenting path");
        if (!in_a[w]) {
          in_a[w] = 1;
          stack.push_back(w);
        }
      }
    }
    for (std::size_t a = 0; a < g.left; ++a)
      if (in_a[a]) result.witness.push_back(a);

    // Verify the witness from scratch before returning it.
    std::vector<char> nbhd(g.right, 0);
    std::size_t nbhd_size = 0;
    for (std::size_t a : result.witness)
      for (std::size_t v : adj[a])
        if (!nbhd[v]) {
          nbhd[v] = 1;
          ++nbhd_size;
        }
    if (nbhd_size >= result.witness.size())
      throw assertion_error("matching witness fails the neighborhood count");
    return result;
  }

  // Verify the matching from scratch before returning it.
  std::vector<char> used(g.right, 0);
  for (std::size_t u = 0; u < g.left; ++u) {
    const std::size_t v = match_left[u];
    if (v == npos || v >= g.right || used[v] ||
        !std::binary_search(adj[u].begin(), adj[u].end(), v))
      throw assertion_error("matching verification failed");
    used[v] = 1;
  }
  result.perfect = true;
  result.match = std::move(match_left);
  return result;
}

StrassenResult strassen_coupling(
    const std::vector<Rational>& p, const std::vector<Rational>& q,
    const std::vector<std::pair<std::size_t, std::size_t>>& relation) {
  if (p.empty() || q.empty()) throw input_error("coupling marginals must be nonempty");
  Rational sum_p = 0, sum_q = 0;
  for (const auto& w : p) {
    if (w < 0) throw input_error("row marginal has a negative mass");
    sum_p += w;
  }
  for (const auto& w : q) {
    if (w < 0) throw input_error("column marginal has a negative mass");
    sum_q += w;
  }
  if (sum_p != 1 || sum_q != 1)
    throw input_error("coupling marginals must each sum to exactly 1");

  std::vector<std::vector<std::size_t>> nbr(p.size());
  for (const auto& [u, v] : relation) {
    if (u >= p.size() || v >= q.size())
      throw input_error("relation references a vertex outside the marginals");
    nbr[u].push_back(v);
  }
  for (auto& row : nbr) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }

  // source = 0, rows = 1..|p|, columns after them, sink last.  Relation
  // edges get capacity 2 > 1, which no minimum cut can afford to cross.
  const std::size_t source = 0, sink = p.size() + q.size() + 1;
  FlowNet net(sink + 1);
  for (std::size_t u = 0; u < p.size(); ++u) net.add(source, 1 + u, p[u]);
  for (std::size_t u = 0; u < p.size(); ++u)
    for (std::size_t v : nbr[u]) net.add(1 + u, 1 + p.size() + v, Rational(2));
  for (std::size_t v = 0; v < q.size(); ++v) net.add(1 + p.size() + v, sink, q[v]);

  StrassenResult result;
  const Rational total = net.max_flow(source, sink);
  if (total == 1) {
    result.feasible = true;
    result.coupling.p = p;
    result.coupling.q = q;
    result.coupling.r.assign(p.size(), std::vector<Rational>(q.size(), Rational(0)));
    for (std::size_t u = 0; u < p.size(); ++u)
      for (const auto& e : net.adj[1 + u])
        if (e.to >= 1 + p.size() && e.to < 1 + p.size() + q.size()) {
          // Flow pushed along u -> v accumulated on the reverse edge.
          result.coupling.r[u][e.to - 1 - p.size()] = net.adj[e.to][e.rev].cap;
        }
    // Exact verification of the coupling contract.
    for (std::size_t u = 0; u < p.size(); ++u) {
      Rational row = 0;
      for (std::size_t v = 0; v < q.size(); ++v) {
        const Rational& w = result.coupling.r[u][v];
        if (w < 0) throw assertion_error("coupling weight is negative");
        if (w > 0 && !std::binary_search(nbr[u].begin(), nbr[u].end(), v))
          throw assertion_error("coupling weight escapes the relation");
        row += w;
      }
      if (row != p[u]) throw assertion_error("coupling row marginal is off");
    }
    for (std::size_t v = 0; v < q.size(); ++v) {
      Rational col = 0;
      for (std::size_t u = 0; u < p.size(); ++u) col += result.coupling.r[u][v];
      if (col != q[v]) throw assertion_error("coupling column marginal is off");
    }
    return result;
  }

  const auto reach = net.residual_reachable(source);
  for (std::size_t u = 0; u < p.size(); ++u)
    if (reach[1 + u]) result.witness.push_back(u);
  Rational mass_a = 0, mass_n = 0;
  std::vector<char> in_n(q.size(), 0);
  for (std::size_t u : result.witness) {
    mass_a += p[u];
    for (std::size_t v : nbr[u])
      if (!in_n[v]) {
        in_n[v] = 1;
        mass_n += q[v];
      }
  }
  if (result.witness.empty() || mass_a <= mass_n)
    throw assertion_error("coupling witness fails the majorization check");
  return result;
}

namespace {

std::int64_t floor_multiple(std::int64_t value, std::int64_t l) {
  std::int64_t d = value / l;
  if (value % l != 0 && value < 0) --d;
  return d * l;
}

Element anchor_of(const Element& cell, int l) {
  Element a(cell.size());
  for (std::size_t i = 0; i < cell.size(); ++i) a[i] = floor_multiple(cell[i], l);
  return a;
}

}  // namespace

Tiling box_tiling(int d, int L, const std::vector<Element>& region) {
  if (d < 1) throw input_error("box tiling needs dimension >= 1");
  if (L < 1) throw input_error("box tiling needs side >= 1");

  std::unordered_set<Element, groups::ElementHash> cells;
  for (const Element& c : region) {
    if (static_cast<int>(c.size()) != d)
      throw input_error("region cell has the wrong dimension");
    if (!cells.insert(c).second) throw input_error("region lists a cell twice");
  }

  std::size_t full = 1;
  for (int i = 0; i < d; ++i) full *= static_cast<std::size_t>(L);

  std::map<Element, std::size_t> counts;
  for (const Element& c : region) ++counts[anchor_of(c, L)];

  Tiling t;
  t.dim = d;
  t.side = L;
  Element cursor(static_cast<std::size_t>(d), 0);
  for (;;) {  // odometer over [0, L)^d in lexicographic order
    t.tile.push_back(cursor);
    int i = d - 1;
    while (i >= 0 && cursor[static_cast<std::size_t>(i)] == L - 1)
      cursor[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++cursor[static_cast<std::size_t>(i)];
  }

  std::unordered_set<Element, groups::ElementHash> complete;
  for (const auto& [a, n] : counts)
    if (n == full) {
      t.anchors.push_back(a);
      complete.insert(a);
    }
  for (const Element& c : region)
    if (!complete.count(anchor_of(c, L))) t.incomplete.push_back(c);
  std::sort(t.incomplete.begin(), t.incomplete.end());
  return t;
}

std::size_t outer_boundary_size(const Group& group, const std::vector<Element>& F,
                                const std::vector<Element>& K) {
  std::unordered_set<Element, groups::ElementHash> in_f(F.begin(), F.end());
  std::unordered_set<Element, groups::ElementHash> fringe;
  for (const Element& g : F)
    for (const Element& k : K) {
      Element gk = group.multiply(g, k);
      if (!in_f.count(gk)) fringe.insert(std::move(gk));
    }
  return fringe.size();
}

std::size_t inner_boundary_size(const Group& group, const std::vector<Element>& F,
                                const std::vector<Element>& K) {
  std::unordered_set<Element, groups::ElementHash> in_f(F.begin(), F.end());
  std::size_t boundary = 0;
  for (const Element& g : F)
    for (const Element& k : K)
      if (!in_f.count(group.multiply(g, k))) {
        ++boundary;
        break;
      }
  return boundary;
}

TileCouplingRecord tile_coupling_condition(const Group& group, double alpha, double beta,
                                           const std::vector<Element>& tile) {
  if (!(0 < alpha && alpha < beta && beta < 1))
    throw input_error("tile coupling condition needs 0 < alpha < beta < 1");
  if (tile.empty()) throw input_error("tile must be nonempty");

  TileCouplingRecord rec;
  rec.tile_size = tile.size();
  rec.boundary_size = inner_boundary_size(group, tile, group.generators());
  rec.delta_bound = std::log(1.0 - alpha) / std::log(1.0 - beta);

  // Doubles convert to exact dyadic rationals, so the inequality between the
  // two survival weights is decided exactly.
  const Rational keep_beta =
      rational_pow(Rational(1) - Rational(beta), static_cast<unsigned long>(rec.boundary_size));
  const Rational keep_alpha =
      rational_pow(Rational(1) - Rational(alpha), static_cast<unsigned long>(rec.tile_size));
  rec.satisfied = keep_beta >= keep_alpha;
  if (rec.satisfied) {
    // Two-class quotient: class 0 = "vanishes on the boundary" (rows) or
    // "vanishes on the tile" (columns); class 0 rows relate to everything,
    // class 1 rows only to class 1 columns.
    rec.coupling = strassen_coupling({keep_beta, Rational(1) - keep_beta},
                                     {keep_alpha, Rational(1) - keep_alpha},
                                     {{0, 0}, {0, 1}, {1, 1}});
    if (!rec.coupling.feasible)
      throw assertion_error("tile coupling infeasible despite the boundary inequality");
  }
  return rec;
}

std::vector<Element> separated_covering_set(const Group& group, perc::Region region, int r) {
  if (r < 1) throw input_error("separation radius must be >= 1");
  std::vector<Element> out;
  for (std::size_t i = 0; i < region->size(); ++i) {
    const Element& g = region->element(i);
    bool clear = true;
    for (const Element& taken : out)
      if (word_dist(group, taken, g) < r) {
        clear = false;
        break;
      }
    if (clear) out.push_back(g);
  }
  return out;
}

namespace {

perc::SiteConfig coarse_block_map(const Group& group, const perc::SiteConfig& x,
                                  perc::Region coarse, const std::vector<Element>& phi,
                                  const std::vector<Element>& block, const char* what) {
  if (phi.size() != coarse->size())
    throw input_error(std::string(what) + ": assignment must map every coarse site");
  perc::SiteConfig out = perc::constant_sites(std::move(coarse), 0);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    std::uint8_t open = 0;
    for (const Element& b : block) {
      auto idx = x.region->index_of(group.multiply(phi[i], b));
      if (!idx)
        throw resource_error(std::string(what) + ": block at coarse site " +
                             group.to_string(out.region->element(i)) +
                             " leaves the fine region");
      open |= x.open[*idx];
    }
    out.open[i] = open;
  }
  return out;
}

}  // namespace

perc::SiteConfig zeta_map(const Group& group, const perc::SiteConfig& x, perc::Region coarse,
                          const std::vector<Element>& phi, int ell) {
  if (ell < 0) throw input_error("zeta: block radius must be >= 0");
  return coarse_block_map(group, x, std::move(coarse), phi, group.ball(ell)->elements(),
                          "zeta");
}

perc::SiteConfig eta_map(const Group& group, const perc::SiteConfig& y, perc::Region coarse,
                         const std::vector<Element>& phi, const std::vector<Element>& tile) {
  if (tile.empty()) throw input_error("eta: tile must be nonempty");
  return coarse_block_map(group, y, std::move(coarse), phi, tile, "eta");
}

PathLift lift_open_path(const Group& group, const perc::SiteConfig& x, perc::Region coarse,
                        const std::vector<Element>& phi, int ell,
                        const std::vector<Element>& coarse_path) {
  if (ell < 0) throw input_error("zeta: block radius must be >= 0");
  if (phi.size() != coarse->size())
    throw input_error("zeta: assignment must map every coarse site");
  if (coarse_path.empty()) throw input_error("coarse path must be nonempty");
  const auto& block = group.ball(ell)->elements();

  PathLift out;
  for (std::size_t i = 0; i < phi.size(); ++i)
    out.displacement = std::max(out.displacement, word_dist(group, coarse->element(i), phi[i]));
  out.step_bound = 2 * (ell + out.displacement) + 1;

  for (std::size_t k = 0; k < coarse_path.size(); ++k) {
    const Element& g = coarse_path[k];
    auto ci = coarse->index_of(g);
    if (!ci) throw input_error("coarse path leaves the coarse region");
    if (k > 0 && word_dist(group, coarse_path[k - 1], g) != 1)
      throw input_error("coarse path steps must be Cayley edges");
    bool found = false;
    for (const Element& b : block) {
      Element h = group.multiply(phi[*ci], b);
      auto idx = x.region->index_of(h);
      if (!idx) throw resource_error("zeta: block leaves the fine region");
      if (x.open[*idx]) {
        out.fine.push_back(std::move(h));
        found = true;
        break;
      }
    }
    if (!found) throw input_error("coarse path runs through a closed coarse site");
  }

  out.fine_open = true;
  for (const Element& h : out.fine) {
    auto idx = x.region->index_of(h);
    if (!idx || !x.open[*idx]) out.fine_open = false;
  }
  std::unordered_set<Element, groups::ElementHash> distinct(out.fine.begin(), out.fine.end());
  out.self_avoiding = distinct.size() == out.fine.size();
  out.steps_within_bound = true;
  for (std::size_t k = 0; k + 1 < out.fine.size(); ++k)
    if (word_dist(group, out.fine[k], out.fine[k + 1]) > out.step_bound)
      out.steps_within_bound = false;
  return out;
}

EtaProjection project_fine_path(const Group& group, const Tiling& tiling,
                                const perc::SiteConfig& y,
                                const std::vector<Element>& fine_path) {
  if (fine_path.empty()) throw input_error("fine path must be nonempty");
  std::unordered_set<Element, groups::ElementHash> complete(tiling.anchors.begin(),
                                                            tiling.anchors.end());

  EtaProjection out;
  for (std::size_t k = 0; k < fine_path.size(); ++k) {
    const Element& c = fine_path[k];
    if (static_cast<int>(c.size()) != tiling.dim)
      throw input_error("fine path cell has the wrong dimension");
    auto idx = y.region->index_of(c);
    if (!idx) throw input_error("fine path leaves the region");
    if (!y.open[*idx]) throw input_error("fine path visits a closed cell");
    if (k > 0 && word_dist(group, fine_path[k - 1], c) != 1)
      throw input_error("fine path steps must be Cayley edges");
    Element a = anchor_of(c, tiling.side);
    if (!complete.count(a)) throw input_error("fine path leaves the tiled interior");
    if (out.anchors.empty() || out.anchors.back() != a) out.anchors.push_back(std::move(a));
  }

  for (std::size_t k = 0; k + 1 < out.anchors.size(); ++k)
    for (std::size_t i = 0; i < out.anchors[k].size(); ++i)
      out.max_step =
          std::max(out.max_step, std::abs(out.anchors[k + 1][i] - out.anchors[k][i]));
  out.steps_within_side = out.max_step <= tiling.side;

  out.coarse_open = true;
  for (const Element& a : out.anchors) {
    bool open = false;
    for (const Element& b : tiling.tile) {
      auto idx = y.region->index_of(group.multiply(a, b));
      if (!idx) throw input_error("tiling does not match the configuration region");
      open = open || y.open[*idx] != 0;
    }
    if (!open) out.coarse_open = false;
  }
  return out;
}

}  // namespace perca::comb
