#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "perca/groups.hpp"
#include "perca/percolation.hpp"

/// Finite-instance matching, coupling, tiling, and renormalization machinery:
/// exact combinatorial certificates (matchings, couplings, tilings, lifted
/// paths) on finite regions of a group, each verified before it is returned.
namespace perca::comb {

using groups::Element;
using groups::Group;

/// Exact rational scalar used wherever equality is part of the contract.
using Rational = mpq_class;

// -- bipartite matching -------------------------------------------------------

struct BipartiteGraph {
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Either a matching saturating every left vertex (a bijection onto its
/// image; onto all of V when the sides have equal size), or a witness set
/// A of left vertices with |N(A)| < |A|.  Exactly one of the two is populated.
struct MatchingResult {
  bool perfect = false;
  std::vector<std::size_t> match;    // left index -> right index, when perfect
  std::vector<std::size_t> witness;  // sorted left set A with |N(A)| < |A|
};

/// Augmenting-path matching with a verified result: returned matchings are
/// re-checked edge by edge and for injectivity; returned witnesses are
/// re-counted against the neighborhood before the function returns.
MatchingResult hall_matching(const BipartiteGraph& g);

// -- majorization couplings ---------------------------------------------------

/// Joint distribution with prescribed marginals and support in a relation.
struct FiniteCoupling {
  std::vector<Rational> p;                // row marginal
  std::vector<Rational> q;                // column marginal
  std::vector<std::vector<Rational>> r;   // joint weights, r[u][v]
};

struct StrassenResult {
  bool feasible = false;
  FiniteCoupling coupling;           // populated when feasible
  std::vector<std::size_t> witness;  // sorted row set A with p(A) > q(N(A))
};

/// Decides, by exact rational max-flow, whether a coupling of p and q
/// supported on `relation` exists.  On success the coupling's marginals are
/// exact; on failure the witness satisfies p(A) > q(N(A)) exactly.  Marginals
/// must each sum to exactly 1 and be nonnegative.
StrassenResult strassen_coupling(const std::vector<Rational>& p,
                                 const std::vector<Rational>& q,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& relation);

// -- tilings and boundaries ---------------------------------------------------

/// Partition of a finite grid region into translates of one box tile.
/// Cells whose box pokes outside the region are collected in `incomplete`
/// rather than silently assigned to a cut tile.
struct Tiling {
  int dim = 0;
  int side = 0;
  std::vector<Element> tile;        // [0, side)^dim, contains the origin
  std::vector<Element> anchors;     // sorted anchors (in side * Z^dim) of complete tiles
  std::vector<Element> incomplete;  // sorted region cells not covered by a complete tile
};

/// Tiles `region` (distinct cells of Z^d) by boxes anchored on L * Z^d.
Tiling box_tiling(int d, int L, const std::vector<Element>& region);

/// |FK \ F|: the outer K-fringe of F, by direct counting.
std::size_t outer_boundary_size(const Group& group, const std::vector<Element>& F,
                                const std::vector<Element>& K);

/// |F \ Interior_K(F)| where Interior_K(F) = {g in F : gK subset of F}.
std::size_t inner_boundary_size(const Group& group, const std::vector<Element>& F,
                                const std::vector<Element>& K);

// -- per-tile coupling condition ----------------------------------------------

/// Outcome of the density-versus-boundary inequality
/// (1-beta)^{|boundary|} >= (1-alpha)^{|tile|}, decided in exact arithmetic,
/// together with the induced two-class coupling when it holds.  The full
/// configuration-space relation ("a vanishes on the boundary, or b is not
/// identically zero on the tile") factors through the two indicator classes,
/// so the quotient instance below is feasible exactly when the full one is.
struct TileCouplingRecord {
  double delta_bound = 0;  // log(1-alpha) / log(1-beta)
  std::size_t tile_size = 0;
  std::size_t boundary_size = 0;  // inner S-boundary of the tile
  bool satisfied = false;
  StrassenResult coupling;  // populated (and necessarily feasible) when satisfied
};

/// Requires 0 < alpha < beta < 1 and a nonempty tile.
TileCouplingRecord tile_coupling_condition(const Group& group, double alpha, double beta,
                                           const std::vector<Element>& tile);

// -- separated / covering sets ------------------------------------------------

/// Greedy maximal r-separated subset of the region, scanned in region order.
/// Pairwise word distances are >= r; by maximality every region element lies
/// within distance r-1 of the result (covering is claimed for the region
/// only, not for the group outside it).
std::vector<Element> separated_covering_set(const Group& group, perc::Region region, int r);

// -- renormalization maps -----------------------------------------------------

/// Coarse-grains x through the assignment phi: coarse ordinal -> fine element.
/// The coarse site i is open iff x is open somewhere on phi[i] * B_ell.
/// Every such block must lie inside x's region (resource_error otherwise);
/// phi must have one image per coarse element.
perc::SiteConfig zeta_map(const Group& group, const perc::SiteConfig& x, perc::Region coarse,
                          const std::vector<Element>& phi, int ell);

/// Tile-based variant: coarse site i is open iff y is open somewhere on
/// phi[i] + tile (phi typically lists tiling anchors).
perc::SiteConfig eta_map(const Group& group, const perc::SiteConfig& y, perc::Region coarse,
                         const std::vector<Element>& phi, const std::vector<Element>& tile);

/// A fine open path built from a coarse open path: one open fine site from
/// each block phi[g] * B_ell.  `displacement` is m = max word distance between
/// a coarse element and its image over the whole assignment; fine steps are
/// guaranteed (and re-checked) to lie in the ball of radius 2(ell + m) + 1.
struct PathLift {
  std::vector<Element> fine;
  int displacement = 0;
  int step_bound = 0;  // 2 (ell + displacement) + 1
  bool fine_open = false;
  bool self_avoiding = false;
  bool steps_within_bound = false;
  bool valid() const { return fine_open && self_avoiding && steps_within_bound; }
};

/// `coarse_path` must step through Cayley-adjacent coarse sites that are all
/// open under zeta_map(x, coarse, phi, ell); otherwise input_error.
PathLift lift_open_path(const Group& group, const perc::SiteConfig& x, perc::Region coarse,
                        const std::vector<Element>& phi, int ell,
                        const std::vector<Element>& coarse_path);

/// The coarse shadow of a fine open path under a box tiling: the sequence of
/// anchors of the tiles the path visits (consecutive duplicates removed).
/// Anchor increments never exceed the tile side in any coordinate, which is
/// the finite fragment of "fine percolation implies coarse percolation".
struct EtaProjection {
  std::vector<Element> anchors;
  std::int64_t max_step = 0;  // largest |anchor increment| in any coordinate
  bool steps_within_side = false;
  bool coarse_open = false;  // every visited tile holds an open fine site
  bool valid() const { return steps_within_side && coarse_open; }
};

/// `fine_path` must step through Cayley-adjacent open cells of y lying in
/// complete tiles of the tiling; otherwise input_error.
EtaProjection project_fine_path(const Group& group, const Tiling& tiling,
                                const perc::SiteConfig& y,
                                const std::vector<Element>& fine_path);

}  // namespace perca::comb
