#include "perca/experiment.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "perca/ca.hpp"
#include "perca/combinatorics.hpp"
#include "perca/dynamics.hpp"
#include "perca/errors.hpp"
#include "perca/groups.hpp"
#include "perca/percolation.hpp"
#include "perca/rng.hpp"
#include "perca/stats.hpp"

namespace perca::exp {

namespace {

using groups::Element;
using groups::Group;
using ser::Json;

// ---------------------------------------------------------------------------
// Strict field access: every getter records the key, finish() rejects the
// rest by name, so configs cannot smuggle typos past validation.
// ---------------------------------------------------------------------------

class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw input_error(path_ + " must be an object");
  }

  const std::string& path() const { return path_; }

  bool present(const std::string& key) {
    return j_.contains(key);
  }

  const Json& req(const std::string& key) {
    mark(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw input_error(path_ + "." + key + " is required");
    return *it;
  }

  const Json* opt(const std::string& key) {
    mark(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::uint64_t req_u64(const std::string& key) { return as_u64(req(key), key); }
  std::uint64_t opt_u64(const std::string& key, std::uint64_t fallback) {
    const Json* v = opt(key);
    return v ? as_u64(*v, key) : fallback;
  }

  int req_int(const std::string& key) { return as_int(req(key), key); }
  int opt_int(const std::string& key, int fallback) {
    const Json* v = opt(key);
    return v ? as_int(*v, key) : fallback;
  }

  double req_double(const std::string& key) { return as_double(req(key), key); }

  bool req_bool(const std::string& key) {
    const Json& v = req(key);
    if (!v.is_boolean()) throw input_error(path_ + "." + key + " must be a boolean");
    return v.get<bool>();
  }
  bool opt_bool(const std::string& key, bool fallback) {
    const Json* v = opt(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw input_error(path_ + "." + key + " must be a boolean");
    return v->get<bool>();
  }

  std::string req_str(const std::string& key) {
    const Json& v = req(key);
    if (!v.is_string()) throw input_error(path_ + "." + key + " must be a string");
    return v.get<std::string>();
  }
  std::string opt_str(const std::string& key, const std::string& fallback) {
    const Json* v = opt(key);
    if (!v) return fallback;
    if (!v->is_string()) throw input_error(path_ + "." + key + " must be a string");
    return v->get<std::string>();
  }

  std::vector<double> req_doubles(const std::string& key) {
    const Json& v = req(key);
    if (!v.is_array() || v.empty())
      throw input_error(path_ + "." + key + " must be a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_double(x, key));
    return out;
  }

  std::vector<int> req_ints(const std::string& key) {
    const Json& v = req(key);
    if (!v.is_array() || v.empty())
      throw input_error(path_ + "." + key + " must be a nonempty array of integers");
    std::vector<int> out;
    for (const auto& x : v) out.push_back(as_int(x, key));
    return out;
  }

  void finish() {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw input_error("unknown field \"" + key + "\" in " + path_);
    }
  }

 private:
  void mark(const std::string& key) {
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) seen_.push_back(key);
  }

  std::uint64_t as_u64(const Json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw input_error(path_ + "." + key + " must be a nonnegative integer");
  }
  int as_int(const Json& v, const std::string& key) const {
    if (!v.is_number_integer())
      throw input_error(path_ + "." + key + " must be an integer");
    return v.get<int>();
  }
  double as_double(const Json& v, const std::string& key) const {
    if (!v.is_number()) throw input_error(path_ + "." + key + " must be a number");
    return v.get<double>();
  }

  const Json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

int positive(int v, const std::string& what) {
  if (v <= 0) throw input_error(what + " must be positive");
  return v;
}

std::uint64_t positive_u64(std::uint64_t v, const std::string& what) {
  if (v == 0) throw input_error(what + " must be positive");
  return v;
}

// ---------------------------------------------------------------------------
// Rule specifications: {"name": ..., "shift": [..]} with shift only for the
// shift rule.
// ---------------------------------------------------------------------------

const std::vector<std::string> kRuleNames = {"identity", "shift", "pine", "percolated-additive",
                                             "site-percolated"};

Json normalize_rule(const Json& j, const std::string& path) {
  Fields f(j, path);
  const std::string name = f.req_str("name");
  if (std::find(kRuleNames.begin(), kRuleNames.end(), name) == kRuleNames.end())
    throw input_error(path + ".name: unknown rule \"" + name + "\"");
  Json out;
  out["name"] = name;
  if (name == "shift") {
    out["shift"] = ser::element_from_json(f.req("shift"));
  } else if (f.present("shift")) {
    throw input_error(path + ".shift is only meaningful for the shift rule");
  }
  f.finish();
  return out;
}

ca::LocalRule build_rule(const Group& g, const Json& rule_json) {
  const std::string name = rule_json.at("name").get<std::string>();
  if (name == "identity") {
    ca::LocalRule r;
    r.name = "identity";
    r.alphabet.component_sizes = {2};
    r.memory = {g.identity()};
    r.apply = [](const ca::Symbol* v) { return v[0]; };
    return r;
  }
  if (name == "shift") return ca::make_shift(g, ser::element_from_json(rule_json.at("shift")));
  if (name == "pine") return ca::make_pine(g);
  if (name == "percolated-additive") return ca::make_percolated_additive(g);
  if (name == "site-percolated") return ca::make_site_percolated(g);
  throw input_error("unknown rule \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// Shared experiment helpers.
// ---------------------------------------------------------------------------

struct Check {
  std::string label;
  bool pass = false;
  std::string detail;
};

struct KindOutcome {
  Json summary;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name -> bytes
  std::vector<Check> checks;
};

std::string sigma_detail(double value, double target, double sigma) {
  std::ostringstream os;
  const double z = sigma > 0 ? std::abs(value - target) / sigma : 0.0;
  os << ser::format_double(value) << " vs " << ser::format_double(target) << " ("
     << ser::format_double(z) << " sigma)";
  return os.str();
}

Group make_group(const groups::GroupSpec& spec) { return Group(spec); }

ca::Pattern uniform_pattern(const ca::LocalRule& rule, const std::vector<Element>& support,
                            rng::Stream& rnd) {
  const auto marginal = ca::ProductMarginal::uniform(rule.alphabet);
  ca::Pattern p(rule.alphabet);
  for (const auto& h : support) p.set(h, marginal.sample(rule.alphabet, rnd));
  return p;
}

ca::Pattern zero_pattern(const ca::LocalRule& rule, const std::vector<Element>& support) {
  ca::Pattern p(rule.alphabet);
  for (const auto& h : support) p.set(h, 0);
  return p;
}

// Packs sites + bonds into the pair-alphabet pattern the percolated-additive
// rule reads.
ca::Pattern pair_pattern(const ca::LocalRule& rule, const perc::SiteConfig& x,
                         const perc::BondEnvironment& w) {
  const ca::AdditiveLayout layout{w.degree};
  ca::Pattern p(rule.alphabet);
  for (std::size_t i = 0; i < x.region->size(); ++i) {
    ca::Symbol bonds = 0;
    for (std::size_t j = 0; j < w.degree; ++j)
      bonds = static_cast<ca::Symbol>((bonds << 1) | w.bit(i, j));
    p.set(x.region->element(i), layout.pack(x.open[i], bonds));
  }
  return p;
}

// First level of the trace that leaves B_n; -1 when none does.
int escape_time(const perc::ProcessTrace& trace, int n) {
  for (std::size_t t = 0; t < trace.levels.size(); ++t)
    for (std::size_t i : trace.levels[t])
      if (trace.region->word_length_of(i) > n) return static_cast<int>(t);
  return -1;
}

// Longest BFS path from the first open site of a ball-based configuration.
std::vector<Element> open_bfs_path(const perc::SiteConfig& cfg) {
  const auto& region = *cfg.region;
  const std::size_t n = region.size();
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i)
    if (cfg.open[i]) {
      start = i;
      break;
    }
  if (start == n) return {};
  std::vector<std::int64_t> parent(n, -2);
  std::vector<int> depth(n, 0);
  std::deque<std::size_t> queue{start};
  parent[start] = -1;
  std::size_t far = start;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (depth[u] > depth[far]) far = u;
    for (std::size_t j = 0; j < region.generator_count(); ++j) {
      const std::int64_t v = region.neighbor(u, j);
      if (v < 0) continue;
      const auto vi = static_cast<std::size_t>(v);
      if (parent[vi] != -2 || !cfg.open[vi]) continue;
      parent[vi] = static_cast<std::int64_t>(u);
      depth[vi] = depth[u] + 1;
      queue.push_back(vi);
    }
  }
  std::vector<Element> path;
  for (std::int64_t v = static_cast<std::int64_t>(far); v >= 0;
       v = parent[static_cast<std::size_t>(v)])
    path.push_back(region.element(static_cast<std::size_t>(v)));
  std::reverse(path.begin(), path.end());
  return path;
}

// ---------------------------------------------------------------------------
// percolate: survival curves and the coarse-graining push-forward.
// ---------------------------------------------------------------------------

Json normalize_percolate(const Json& params) {
  Fields f(params, "params");
  const std::string mode = f.opt_str("mode", "survival");
  Json out;
  out["mode"] = mode;
  if (mode == "survival") {
    const std::string process = f.req_str("process");
    perc::survival_mode_from_name(process);  // validates the name
    out["process"] = process;
    out["radius"] = positive(f.req_int("radius"), "params.radius");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
    Json ps = Json::array();
    for (double p : f.req_doubles("p_values")) {
      if (p < 0.0 || p > 1.0) throw input_error("params.p_values entries must lie in [0, 1]");
      ps.push_back(p);
    }
    out["p_values"] = std::move(ps);
  } else if (mode == "renormalize") {
    const double alpha = f.req_double("alpha");
    if (alpha <= 0.0 || alpha >= 1.0) throw input_error("params.alpha must lie in (0, 1)");
    out["alpha"] = alpha;
    const int ell = f.req_int("ell");
    if (ell < 0) throw input_error("params.ell must be nonnegative");
    out["ell"] = ell;
    const int spacing = positive(f.req_int("spacing"), "params.spacing");
    if (spacing < 2 * ell + 1)
      throw input_error("params.spacing must be at least 2*ell+1 so blocks stay disjoint");
    out["spacing"] = spacing;
    out["coarse_radius"] = positive(f.req_int("coarse_radius"), "params.coarse_radius");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
    out["path_samples"] = positive_u64(f.req_u64("path_samples"), "params.path_samples");
  } else {
    throw input_error("params.mode: unknown percolate mode \"" + mode + "\"");
  }
  f.finish();
  return out;
}

KindOutcome run_percolate(const groups::GroupSpec& gs, std::uint64_t seed, int threads,
                          const Json& params) {
  Group g = make_group(gs);
  KindOutcome out;
  const std::string mode = params.at("mode").get<std::string>();

  if (mode == "survival") {
    const auto process = perc::survival_mode_from_name(params.at("process").get<std::string>());
    const int radius = params.at("radius").get<int>();
    const auto trials = params.at("trials").get<std::uint64_t>();
    auto region = g.ball(radius + 1);
    std::vector<perc::SurvivalEstimate> rows;
    for (const auto& pj : params.at("p_values"))
      rows.push_back(perc::survival_probability(region, process, pj.get<double>(), radius,
                                                trials, seed, static_cast<unsigned>(threads)));
    out.artifacts.emplace_back("survival.csv", ser::survival_csv(rows));
    out.summary["rows"] = rows.size();
    out.summary["radius"] = radius;
    return out;
  }

  // renormalize: coarse-grain a fine line configuration through radius-ell
  // blocks anchored at an arithmetic progression and compare against the
  // exact inflated density, then lift sampled open coarse paths back down.
  if (gs.kind != groups::Kind::IntLine)
    throw input_error("params.mode renormalize needs the int-line group");
  const double alpha = params.at("alpha").get<double>();
  const int ell = params.at("ell").get<int>();
  const int spacing = params.at("spacing").get<int>();
  const int coarse_radius = params.at("coarse_radius").get<int>();
  const auto trials = params.at("trials").get<std::uint64_t>();
  const auto path_samples = params.at("path_samples").get<std::uint64_t>();

  auto fine_region = g.ball(spacing * coarse_radius + ell);
  auto coarse_region = g.ball(coarse_radius);
  const std::size_t sites = coarse_region->size();
  std::vector<Element> phi(sites);
  for (std::size_t i = 0; i < sites; ++i)
    phi[i] = Element{spacing * coarse_region->element(i)[0]};

  const double block = static_cast<double>(g.ball(ell)->size());
  const double beta_prime = 1.0 - std::pow(1.0 - alpha, block);

  std::vector<std::uint64_t> open_count(sites, 0);
  std::uint64_t pooled = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    auto x = perc::sample_sites(fine_region, alpha, rng::derive_seed(seed, t));
    auto z = comb::zeta_map(g, x, coarse_region, phi, ell);
    for (std::size_t i = 0; i < sites; ++i) {
      open_count[i] += z.open[i];
      pooled += z.open[i];
    }
  }
  const double pooled_est = static_cast<double>(pooled) / (static_cast<double>(trials) * sites);
  const double pooled_sigma = stats::null_se(beta_prime, trials * sites);

  std::uint64_t paths_found = 0, lifts_valid = 0;
  for (std::uint64_t s = 0; s < path_samples; ++s) {
    auto x = perc::sample_sites(fine_region, alpha, rng::derive_seed(seed, trials + s));
    auto z = comb::zeta_map(g, x, coarse_region, phi, ell);
    auto path = open_bfs_path(z);
    if (path.size() < 2) continue;
    ++paths_found;
    auto lift = comb::lift_open_path(g, x, coarse_region, phi, ell, path);
    if (lift.valid()) ++lifts_valid;
  }

  std::string csv =
      ser::csv_line({"site", "coarse", "successes", "trials", "estimate"});
  for (std::size_t i = 0; i < sites; ++i)
    csv += ser::csv_line({std::to_string(i), std::to_string(coarse_region->element(i)[0]),
                          std::to_string(open_count[i]), std::to_string(trials),
                          ser::format_double(static_cast<double>(open_count[i]) /
                                             static_cast<double>(trials))});
  out.artifacts.emplace_back("renorm.csv", csv);

  Json rj;
  rj["beta_prime"] = beta_prime;
  rj["block_size"] = block;
  rj["pooled_estimate"] = pooled_est;
  rj["pooled_trials"] = trials * sites;
  rj["sites"] = sites;
  rj["paths_sampled"] = path_samples;
  rj["paths_found"] = paths_found;
  rj["lifts_valid"] = lifts_valid;
  out.artifacts.emplace_back("renorm.json", rj.dump(2) + "\n");
  out.summary = rj;

  out.checks.push_back({"coarse-marginal",
                        std::abs(pooled_est - beta_prime) < 3.0 * pooled_sigma,
                        sigma_detail(pooled_est, beta_prime, pooled_sigma)});
  out.checks.push_back({"path-implication", paths_found > 0 && lifts_valid == paths_found,
                        std::to_string(lifts_valid) + "/" + std::to_string(paths_found) +
                            " sampled coarse paths lift to valid fine paths"});
  return out;
}

// ---------------------------------------------------------------------------
// threshold: bisection for the finite-size crossing point.
// ---------------------------------------------------------------------------

Json normalize_threshold(const Json& params) {
  Fields f(params, "params");
  Json out;
  const std::string process = f.req_str("process");
  perc::survival_mode_from_name(process);
  out["process"] = process;
  out["radius"] = positive(f.req_int("radius"), "params.radius");
  out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
  const double tolerance = f.req_double("tolerance");
  if (tolerance <= 0.0) throw input_error("params.tolerance must be positive");
  out["tolerance"] = tolerance;
  if (const Json* e = f.opt("expect")) {
    Fields ef(*e, "params.expect");
    Json expect;
    if (ef.present("target")) {
      expect["target"] = ef.req_double("target");
      const double within = ef.req_double("within");
      if (within <= 0.0) throw input_error("params.expect.within must be positive");
      expect["within"] = within;
    } else {
      expect["lo"] = ef.req_double("lo");
      expect["hi"] = ef.req_double("hi");
      if (expect["lo"].get<double>() >= expect["hi"].get<double>())
        throw input_error("params.expect.lo must be below params.expect.hi");
    }
    ef.finish();
    out["expect"] = std::move(expect);
  }
  f.finish();
  return out;
}

KindOutcome run_threshold(const groups::GroupSpec& gs, std::uint64_t seed, int threads,
                          const Json& params) {
  Group g = make_group(gs);
  const auto process = perc::survival_mode_from_name(params.at("process").get<std::string>());
  const int radius = params.at("radius").get<int>();
  const auto trials = params.at("trials").get<std::uint64_t>();
  const double tolerance = params.at("tolerance").get<double>();

  const auto est = perc::threshold_estimate(g.ball(radius + 1), process, radius, trials,
                                            tolerance, seed, static_cast<unsigned>(threads));

  KindOutcome out;
  out.artifacts.emplace_back("probes.csv", ser::survival_csv(est.probes));
  out.artifacts.emplace_back("threshold.json", ser::threshold_json(est).dump(2) + "\n");
  out.summary = ser::threshold_json(est);

  if (params.contains("expect")) {
    const Json& e = params.at("expect");
    if (e.contains("target")) {
      const double target = e.at("target").get<double>();
      const double within = e.at("within").get<double>();
      out.checks.push_back({"threshold-target", std::abs(est.p_star - target) <= within,
                            "p* = " + ser::format_double(est.p_star) + " vs " +
                                ser::format_double(target) + " (tolerance " +
                                ser::format_double(within) + ")"});
    } else {
      const double lo = e.at("lo").get<double>(), hi = e.at("hi").get<double>();
      out.checks.push_back({"threshold-range", est.p_star >= lo && est.p_star <= hi,
                            "p* = " + ser::format_double(est.p_star) + " in [" +
                                ser::format_double(lo) + ", " + ser::format_double(hi) + "]"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ca-run: orbits plus the measure-law experiments that live on top of the
// evolution engine.
// ---------------------------------------------------------------------------

Json normalize_ca_run(const Json& params) {
  Fields f(params, "params");
  const std::string mode = f.req_str("mode");
  Json out;
  out["mode"] = mode;
  if (mode == "orbit") {
    out["rule"] = normalize_rule(f.req("rule"), "params.rule");
    const int wr = f.req_int("window_radius");
    if (wr < 0) throw input_error("params.window_radius must be nonnegative");
    out["window_radius"] = wr;
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
  } else if (mode == "pine-law") {
    Json qs = Json::array();
    for (double q : f.req_doubles("q_values")) {
      if (q <= 0.0 || q >= 1.0) throw input_error("params.q_values entries must lie in (0, 1)");
      qs.push_back(q);
    }
    out["q_values"] = std::move(qs);
    out["n_max"] = positive(f.req_int("n_max"), "params.n_max");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
  } else if (mode == "fixed-point-stability") {
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
  } else if (mode == "equicontinuity") {
    out["window_radius"] = positive(f.req_int("window_radius"), "params.window_radius");
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
    out["envs"] = positive_u64(f.req_u64("envs"), "params.envs");
    out["perturbations"] = positive_u64(f.req_u64("perturbations"), "params.perturbations");
  } else if (mode == "reversible-roundtrip") {
    out["windows"] = positive_u64(f.req_u64("windows"), "params.windows");
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
  } else {
    throw input_error("params.mode: unknown ca-run mode \"" + mode + "\"");
  }
  f.finish();
  return out;
}

KindOutcome run_ca_orbit(const Group& g, std::uint64_t seed, const Json& params) {
  const auto rule = build_rule(g, params.at("rule"));
  const int wr = params.at("window_radius").get<int>();
  const int horizon = params.at("horizon").get<int>();
  ca::OrbitMachine machine(g, rule, g.ball(wr)->elements(), horizon);

  rng::Stream rnd(seed);
  std::vector<ca::Symbol> values(machine.cone_size());
  const auto marginal = ca::ProductMarginal::uniform(rule.alphabet);
  for (auto& v : values) v = marginal.sample(rule.alphabet, rnd);
  const ca::Orbit orbit = machine.run_record(values);

  std::vector<std::string> header{"t"};
  for (const auto& el : orbit.window) {
    std::string s = "site";
    for (auto coord : el) s += "_" + std::to_string(coord);
    header.push_back(s);
  }
  std::string csv = ser::csv_line(header);
  for (std::size_t t = 0; t < orbit.frames.size(); ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (ca::Symbol v : orbit.frames[t]) row.push_back(std::to_string(v));
    csv += ser::csv_line(row);
  }

  KindOutcome out;
  out.artifacts.emplace_back("orbit.csv", csv);
  Json oj;
  oj["rule"] = rule.name;
  oj["window"] = orbit.window.size();
  oj["horizon"] = horizon;
  out.artifacts.emplace_back("orbit.json", oj.dump(2) + "\n");
  out.summary = oj;
  return out;
}

// P[a procession of length n is present] = q^n: the n-step survival cylinder
// of the caterpillar rule evaluated by running the CA, not the closed form.
KindOutcome run_pine_law(const Group& g, std::uint64_t seed, const Json& params) {
  if (g.spec().kind != groups::Kind::IntLine)
    throw input_error("params.mode pine-law needs the int-line group");
  const auto rule = ca::make_pine(g);
  const int n_max = params.at("n_max").get<int>();
  const auto trials = params.at("trials").get<std::uint64_t>();

  std::string csv =
      ser::csv_line({"q", "n", "trials", "successes", "estimate", "target", "z"});
  double worst_z = 0.0;
  std::string worst_at = "-";
  std::uint64_t counter = 0;
  for (const auto& qj : params.at("q_values")) {
    const double q = qj.get<double>();
    for (int n = 1; n <= n_max; ++n) {
      ca::OrbitMachine machine(g, rule, {g.identity()}, n - 1);
      std::vector<ca::Symbol> values(machine.cone_size());
      std::uint64_t successes = 0;
      for (std::uint64_t t = 0; t < trials; ++t) {
        rng::Stream rnd(rng::derive_seed(seed, counter++));
        for (auto& v : values) v = rnd.bernoulli(q) ? 1 : 0;
        bool alive = false;
        machine.run(values, [&](int step, const ca::Symbol* frame) {
          if (step == n - 1) {
            alive = frame[0] == 1;
            return false;
          }
          return true;
        });
        successes += alive ? 1 : 0;
      }
      const double est = static_cast<double>(successes) / static_cast<double>(trials);
      const double target = std::pow(q, n);
      const double sigma = stats::null_se(target, trials);
      const double z = std::abs(est - target) / sigma;
      if (z > worst_z) {
        worst_z = z;
        worst_at = "q=" + ser::format_double(q) + ",n=" + std::to_string(n);
      }
      csv += ser::csv_line({ser::format_double(q), std::to_string(n), std::to_string(trials),
                            std::to_string(successes), ser::format_double(est),
                            ser::format_double(target), ser::format_double(z)});
    }
  }

  KindOutcome out;
  out.artifacts.emplace_back("law.csv", csv);
  Json pj;
  pj["n_max"] = n_max;
  pj["trials"] = trials;
  pj["worst_z"] = worst_z;
  pj["worst_at"] = worst_at;
  out.artifacts.emplace_back("pinelaw.json", pj.dump(2) + "\n");
  out.summary = pj;
  out.checks.push_back({"pine-law", worst_z < 3.0,
                        "max deviation " + ser::format_double(worst_z) + " sigma at " +
                            worst_at});
  return out;
}

KindOutcome run_fixed_point_stability(const Group& g, std::uint64_t seed, int threads,
                                      const Json& params) {
  const auto rule = ca::make_percolated_additive(g);
  const int horizon = params.at("horizon").get<int>();
  const auto trials = params.at("trials").get<std::uint64_t>();

  // Exactness first: the all-zero pair configuration must reproduce itself.
  ca::OrbitMachine probe(g, rule, g.ball(2)->elements(), 5);
  std::vector<ca::Symbol> zeros(probe.cone_size(), 0);
  bool fixed = true;
  probe.run(zeros, [&](int, const ca::Symbol* frame) {
    for (std::size_t i = 0; i < probe.window_size(); ++i)
      if (frame[i] != 0) fixed = false;
    return fixed;
  });

  dyn::StabilityQuery q;
  q.rule = rule;
  q.window = {g.identity()};
  q.horizon = horizon;
  q.base = zero_pattern(rule, ca::dependency_cone(g, q.window, rule.memory, horizon));
  q.marginal = ca::ProductMarginal::uniform(rule.alphabet);
  q.trials = trials;
  q.seed = rng::derive_seed(seed, 1);
  q.threads = threads;
  const auto est = dyn::stability_prob(g, q);

  // Freezing the full symbol on every memory site certainly preserves the
  // one-site orbit, so stability is at least 2^-(|K| * component count).
  const double exponent = static_cast<double>(rule.memory.size()) *
                          static_cast<double>(rule.alphabet.components());
  const double bound = std::pow(2.0, -exponent);
  const bool above = est.value() >= bound - 3.0 * est.se();

  KindOutcome out;
  Json fj;
  fj["fixed_point_exact"] = fixed;
  fj["horizon"] = horizon;
  fj["estimate"] = ser::estimate_json(est);
  fj["cylinder_bound"] = bound;
  out.artifacts.emplace_back("fixedpoint.json", fj.dump(2) + "\n");
  out.summary = fj;
  out.checks.push_back({"fixed-point", fixed, "all-zero configuration reproduces itself"});
  out.checks.push_back({"stability-bound", above,
                        "estimate " + ser::format_double(est.value()) + " >= bound " +
                            ser::format_double(bound) + " - 3 se"});
  return out;
}

KindOutcome run_equicontinuity(const Group& g, std::uint64_t seed, const Json& params) {
  const auto rule = ca::make_percolated_additive(g);
  const ca::AdditiveLayout layout{g.generators().size()};
  const int wr = params.at("window_radius").get<int>();
  const int horizon = params.at("horizon").get<int>();
  const auto envs = params.at("envs").get<std::uint64_t>();
  const auto perturbations = params.at("perturbations").get<std::uint64_t>();

  const auto F = g.ball(wr)->elements();
  ca::OrbitMachine machine(g, rule, F, horizon);
  const auto& cone = machine.cone_elements();

  // E = F.S: the sites whose symbols a perturbation must keep.  With every
  // bond outside F closed, the window can read initial data only there.
  std::unordered_set<Element, groups::ElementHash> protected_sites;
  for (const auto& f : F)
    for (const auto& s : g.generators()) protected_sites.insert(g.multiply(f, s));
  std::unordered_set<Element, groups::ElementHash> window_sites(F.begin(), F.end());

  std::vector<char> in_e(cone.size(), 0), in_f(cone.size(), 0);
  for (std::size_t i = 0; i < cone.size(); ++i) {
    in_e[i] = protected_sites.count(cone[i]) ? 1 : 0;
    in_f[i] = window_sites.count(cone[i]) ? 1 : 0;
  }

  const auto alphabet_size = rule.alphabet.size();
  std::uint64_t mismatches = 0, compared = 0;
  for (std::uint64_t e = 0; e < envs; ++e) {
    rng::Stream rnd(rng::derive_seed(seed, e));
    std::vector<ca::Symbol> base(cone.size());
    for (std::size_t i = 0; i < cone.size(); ++i) {
      const ca::Symbol site = rnd.fair_bit() ? 1 : 0;
      const auto bonds = static_cast<ca::Symbol>(rnd.below(1u << layout.bond_count));
      base[i] = layout.pack(site, in_f[i] ? bonds : 0);  // bonds zeroed outside F
    }
    for (std::uint64_t k = 0; k < perturbations; ++k) {
      rng::Stream prnd(rng::derive_seed(seed, (e + 1) * 100000 + k));
      std::vector<ca::Symbol> pert = base;
      for (std::size_t i = 0; i < cone.size(); ++i)
        if (!in_e[i]) pert[i] = static_cast<ca::Symbol>(prnd.below(alphabet_size));
      ++compared;
      if (machine.first_disagreement(base, pert) <= horizon) ++mismatches;
    }
  }

  KindOutcome out;
  Json ej;
  ej["envs"] = envs;
  ej["perturbations"] = perturbations;
  ej["orbit_pairs"] = compared;
  ej["mismatches"] = mismatches;
  ej["window"] = F.size();
  ej["protected"] = protected_sites.size();
  out.artifacts.emplace_back("equicontinuity.json", ej.dump(2) + "\n");
  out.summary = ej;
  out.checks.push_back({"equicontinuity", mismatches == 0,
                        std::to_string(compared) + " perturbed orbits identical on the window"});
  return out;
}

KindOutcome run_reversible_roundtrip(const Group& g, std::uint64_t seed, const Json& params) {
  const auto [fwd, inv] = ca::make_reversible(g);
  const auto windows = params.at("windows").get<std::uint64_t>();
  const int horizon = params.at("horizon").get<int>();

  // The mid-time frame must cover what either direction's probe at the
  // identity reads, so the window is the union of the two cones.
  auto mid = ca::dependency_cone(g, {g.identity()}, inv.memory, horizon);
  for (const auto& h : ca::dependency_cone(g, {g.identity()}, fwd.memory, horizon))
    if (std::find(mid.begin(), mid.end(), h) == mid.end()) mid.push_back(h);
  ca::OrbitMachine forward(g, fwd, mid, horizon);
  ca::OrbitMachine backward(g, inv, mid, horizon);
  ca::OrbitMachine probe_fwd(g, fwd, {g.identity()}, horizon);
  ca::OrbitMachine probe_inv(g, inv, {g.identity()}, horizon);

  auto column = [](const std::vector<Element>& window, const Element& h) {
    return static_cast<std::size_t>(
        std::find(window.begin(), window.end(), h) - window.begin());
  };

  std::uint64_t forward_failures = 0, backward_failures = 0;
  for (std::uint64_t rep = 0; rep < windows; ++rep) {
    rng::Stream rnd(rng::derive_seed(seed, rep));
    std::vector<ca::Symbol> x(forward.cone_size());
    for (auto& v : x) v = static_cast<ca::Symbol>(rnd.below(fwd.alphabet.size()));

    const std::vector<ca::Symbol> y = forward.run_record(x).frames[static_cast<std::size_t>(horizon)];
    std::vector<ca::Symbol> y_cone(probe_inv.cone_size());
    for (std::size_t i = 0; i < probe_inv.cone_size(); ++i)
      y_cone[i] = y[column(forward.window(), probe_inv.cone_elements()[i])];
    const ca::Symbol back =
        probe_inv.run_record(y_cone).frames[static_cast<std::size_t>(horizon)][0];
    if (back != x[*forward.cone_index(g.identity())]) ++forward_failures;

    const std::vector<ca::Symbol> z =
        backward.run_record(x).frames[static_cast<std::size_t>(horizon)];
    std::vector<ca::Symbol> z_cone(probe_fwd.cone_size());
    for (std::size_t i = 0; i < probe_fwd.cone_size(); ++i)
      z_cone[i] = z[column(backward.window(), probe_fwd.cone_elements()[i])];
    const ca::Symbol forth =
        probe_fwd.run_record(z_cone).frames[static_cast<std::size_t>(horizon)][0];
    if (forth != x[*backward.cone_index(g.identity())]) ++backward_failures;
  }

  KindOutcome out;
  Json rj;
  rj["windows"] = windows;
  rj["horizon"] = horizon;
  rj["forward_then_inverse_failures"] = forward_failures;
  rj["inverse_then_forward_failures"] = backward_failures;
  out.artifacts.emplace_back("roundtrip.json", rj.dump(2) + "\n");
  out.summary = rj;
  out.checks.push_back({"reversible-roundtrip", forward_failures == 0 && backward_failures == 0,
                        std::to_string(windows) + " windows recovered exactly both ways"});
  return out;
}

KindOutcome run_ca_run(const groups::GroupSpec& gs, std::uint64_t seed, int threads,
                       const Json& params) {
  Group g = make_group(gs);
  const std::string mode = params.at("mode").get<std::string>();
  if (mode == "orbit") return run_ca_orbit(g, seed, params);
  if (mode == "pine-law") return run_pine_law(g, seed, params);
  if (mode == "fixed-point-stability")
    return run_fixed_point_stability(g, seed, threads, params);
  if (mode == "equicontinuity") return run_equicontinuity(g, seed, params);
  if (mode == "reversible-roundtrip") return run_reversible_roundtrip(g, seed, params);
  throw input_error("params.mode: unknown ca-run mode \"" + mode + "\"");
}

// ---------------------------------------------------------------------------
// dependence: the influence-set process against independent oracles.
// ---------------------------------------------------------------------------

Json normalize_dependence(const Json& params) {
  Fields f(params, "params");
  const std::string mode = f.req_str("mode");
  Json out;
  out["mode"] = mode;
  if (mode == "ca-oracle") {
    const int n_max = positive(f.req_int("n_max"), "params.n_max");
    out["n_max"] = n_max;
    const int radius = positive(f.req_int("radius"), "params.radius");
    if (radius < n_max + 1)
      throw input_error("params.radius must be at least n_max + 1");
    out["radius"] = radius;
    out["envs"] = positive_u64(f.req_u64("envs"), "params.envs");
  } else if (mode == "lucas") {
    out["n_max"] = positive(f.req_int("n_max"), "params.n_max");
  } else {
    throw input_error("params.mode: unknown dependence mode \"" + mode + "\"");
  }
  f.finish();
  return out;
}

KindOutcome run_dependence(const groups::GroupSpec& gs, std::uint64_t seed, const Json& params) {
  Group g = make_group(gs);
  const std::string mode = params.at("mode").get<std::string>();
  KindOutcome out;

  if (mode == "ca-oracle") {
    const int n_max = params.at("n_max").get<int>();
    const int radius = params.at("radius").get<int>();
    const auto envs = params.at("envs").get<std::uint64_t>();
    auto region = g.ball(radius);

    const auto rule = ca::make_percolated_additive(g);
    const ca::AdditiveLayout layout{g.generators().size()};
    ca::OrbitMachine machine(g, rule, {g.identity()}, n_max);
    const auto& cone = machine.cone_elements();
    std::vector<std::size_t> region_of(cone.size());
    for (std::size_t i = 0; i < cone.size(); ++i) region_of[i] = *region->index_of(cone[i]);

    std::uint64_t mismatches = 0;
    const std::size_t probes = region->prefix_size(n_max);
    std::vector<char> member(probes * static_cast<std::size_t>(n_max + 1), 0);
    for (std::uint64_t e = 0; e < envs; ++e) {
      const auto w = perc::sample_bonds(region, 0.5, rng::derive_seed(seed, e));
      const auto trace = perc::dependence_process(w, n_max);

      std::fill(member.begin(), member.end(), 0);
      for (int n = 0; n <= n_max && n < static_cast<int>(trace.levels.size()); ++n)
        for (std::size_t ri : trace.levels[static_cast<std::size_t>(n)])
          if (ri < probes) member[ri * (n_max + 1) + n] = 1;

      std::vector<ca::Symbol> bonds(cone.size());
      for (std::size_t i = 0; i < cone.size(); ++i) {
        ca::Symbol b = 0;
        for (std::size_t j = 0; j < w.degree; ++j)
          b = static_cast<ca::Symbol>((b << 1) | w.bit(region_of[i], j));
        bonds[i] = b;
      }

      std::vector<ca::Symbol> values(cone.size());
      for (std::size_t p = 0; p < probes; ++p) {
        const Element& probe = region->element(p);
        for (std::size_t i = 0; i < cone.size(); ++i)
          values[i] = layout.pack(cone[i] == probe ? 1 : 0, bonds[i]);
        machine.run(values, [&](int t, const ca::Symbol* frame) {
          const bool in_level = member[p * (n_max + 1) + t] != 0;
          if ((layout.x(frame[0]) == 1) != in_level) ++mismatches;
          return true;
        });
      }
    }

    Json oj;
    oj["envs"] = envs;
    oj["n_max"] = n_max;
    oj["probes"] = probes;
    oj["mismatches"] = mismatches;
    out.artifacts.emplace_back("oracle.json", oj.dump(2) + "\n");
    out.summary = oj;
    out.checks.push_back({"dependence-oracle", mismatches == 0,
                          "influence sets match evolved point masses exactly"});
    return out;
  }

  // mode == "lucas": all-open environments reduce to the XOR automaton whose
  // influence sets are the odd binomial coefficients.
  if (gs.kind != groups::Kind::IntLine)
    throw input_error("params.mode lucas needs the int-line group");
  const int n_max = params.at("n_max").get<int>();
  auto region = g.ball(n_max + 1);
  const auto w = perc::constant_bonds(region, 1);
  const auto trace = perc::dependence_process(w, n_max);

  std::uint64_t mismatches = 0;
  for (int n = 0; n <= n_max; ++n) {
    std::set<std::int64_t> level;
    if (n < static_cast<int>(trace.levels.size()))
      for (std::size_t ri : trace.levels[static_cast<std::size_t>(n)])
        level.insert(region->element(ri)[0]);
    std::set<std::int64_t> odd;
    for (std::int64_t v = -n; v <= n; v += 2) {
      const std::int64_t k = (n + v) / 2;
      if ((static_cast<std::uint64_t>(k) & static_cast<std::uint64_t>(n - k)) == 0)
        odd.insert(v);
    }
    if (level != odd) ++mismatches;
  }

  Json lj;
  lj["n_max"] = n_max;
  lj["mismatches"] = mismatches;
  out.artifacts.emplace_back("lucas.json", lj.dump(2) + "\n");
  out.summary = lj;
  out.checks.push_back({"rule90-lucas", mismatches == 0,
                        "influence sets equal the odd-binomial rows for n <= " +
                            std::to_string(n_max)});
  return out;
}

// ---------------------------------------------------------------------------
// coupling-check: the joint construction of cluster and dependence processes.
// ---------------------------------------------------------------------------

Json normalize_coupling_check(const Json& params) {
  Fields f(params, "params");
  Json out;
  const int radius = positive(f.req_int("radius"), "params.radius");
  out["radius"] = radius;
  const int target = positive(f.req_int("target_radius"), "params.target_radius");
  if (target + 1 > radius)
    throw input_error("params.target_radius must leave one spare layer inside params.radius");
  out["target_radius"] = target;
  out["samples"] = positive_u64(f.req_u64("samples"), "params.samples");
  const int identity_n = f.opt_int("identity_n_max", 0);
  if (identity_n < 0) throw input_error("params.identity_n_max must be nonnegative");
  if (identity_n > target)
    throw input_error("params.identity_n_max cannot exceed params.target_radius");
  out["identity_n_max"] = identity_n;
  const int parity_n = f.opt_int("parity_n_max", 0);
  if (parity_n < 0 || parity_n > 20)
    throw input_error("params.parity_n_max must lie in [0, 20]");
  out["parity_n_max"] = parity_n;
  out["marginal_check"] = f.opt_bool("marginal_check", false);
  f.finish();
  return out;
}

KindOutcome run_coupling_check(const groups::GroupSpec& gs, std::uint64_t seed,
                               const Json& params) {
  Group g = make_group(gs);
  const int radius = params.at("radius").get<int>();
  const int target = params.at("target_radius").get<int>();
  const auto samples = params.at("samples").get<std::uint64_t>();
  const int identity_n = params.at("identity_n_max").get<int>();
  const int parity_n = params.at("parity_n_max").get<int>();
  const bool marginal_check = params.at("marginal_check").get<bool>();

  auto region = g.ball(radius);
  std::uint64_t identity_failures = 0;
  std::vector<std::uint64_t> site_ones(marginal_check ? region->size() : 0, 0);

  for (std::uint64_t s = 0; s < samples; ++s) {
    const auto cs = perc::coupling_sample(region, target, rng::derive_seed(seed, s));
    if (identity_n > 0 && !perc::cumulative_identity(cs.cluster, cs.dependence, identity_n))
      ++identity_failures;
    if (marginal_check)
      for (std::size_t i = 0; i < region->size(); ++i) site_ones[i] += cs.x.open[i];
  }

  KindOutcome out;
  Json cj;
  cj["samples"] = samples;
  cj["radius"] = radius;
  cj["target_radius"] = target;

  if (identity_n > 0) {
    cj["identity_n_max"] = identity_n;
    cj["identity_failures"] = identity_failures;
    out.checks.push_back({"coupling-identity", identity_failures == 0,
                          "cluster and dependence processes agree up to n = " +
                              std::to_string(identity_n) + " in every sample"});
  }

  if (parity_n > 0) {
    bool balanced = true;
    for (int n = 1; n <= parity_n; ++n) {
      std::uint64_t odd = 0;
      for (std::uint64_t v = 0; v < (1ULL << n); ++v)
        odd += static_cast<std::uint64_t>(std::popcount(v)) & 1ULL;
      if (odd * 2 != (1ULL << n)) balanced = false;
    }
    cj["parity_n_max"] = parity_n;
    cj["parity_balanced"] = balanced;
    out.checks.push_back({"parity-exhaustive", balanced,
                          "XOR of 1..=" + std::to_string(parity_n) +
                              " fair bits is exactly balanced"});
  }

  if (marginal_check) {
    Json marginals = Json::array();
    bool all_cover = true;
    for (std::size_t i = 0; i < region->size(); ++i) {
      const auto iv = stats::wilson(site_ones[i], samples, stats::kZ99);
      const bool covers = iv.lo <= 0.5 && 0.5 <= iv.hi;
      all_cover = all_cover && covers;
      Json m;
      m["site"] = ser::element_json(region->element(i));
      m["successes"] = site_ones[i];
      m["trials"] = samples;
      m["lo99"] = iv.lo;
      m["hi99"] = iv.hi;
      marginals.push_back(std::move(m));
    }
    cj["marginals"] = std::move(marginals);
    out.checks.push_back({"coupled-marginals", all_cover,
                          "every site's Wilson 99% interval covers 1/2"});
  }

  out.artifacts.emplace_back("coupling.json", cj.dump(2) + "\n");
  out.summary["samples"] = samples;
  out.summary["identity_failures"] = identity_failures;
  return out;
}

// ---------------------------------------------------------------------------
// dichotomy: stability-law sweeps, conditional half-bound runs, coset
// factorization, and the generic verdict report.
// ---------------------------------------------------------------------------

Json normalize_dichotomy(const Json& params) {
  Fields f(params, "params");
  const std::string mode = f.req_str("mode");
  Json out;
  out["mode"] = mode;
  if (mode == "report") {
    out["rule"] = normalize_rule(f.req("rule"), "params.rule");
    const int wr = f.req_int("window_radius");
    if (wr < 0) throw input_error("params.window_radius must be nonnegative");
    out["window_radius"] = wr;
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
    const int n_max = f.req_int("n_max");
    if (n_max < 0) throw input_error("params.n_max must be nonnegative");
    out["n_max"] = n_max;
    out["samples"] = positive_u64(f.req_u64("samples"), "params.samples");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
  } else if (mode == "shift-law") {
    out["horizon_max"] = positive(f.req_int("horizon_max"), "params.horizon_max");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
    out["report_samples"] = positive_u64(f.req_u64("report_samples"), "params.report_samples");
    out["report_trials"] = positive_u64(f.req_u64("report_trials"), "params.report_trials");
    out["report_n_max"] = positive(f.req_int("report_n_max"), "params.report_n_max");
  } else if (mode == "half-bound") {
    const int rr = positive(f.req_int("region_radius"), "params.region_radius");
    out["region_radius"] = rr;
    Json ns = Json::array();
    for (int n : f.req_ints("n_values")) {
      if (n < 1 || n > rr - 3)
        throw input_error("params.n_values entries must lie in [1, region_radius - 3]");
      ns.push_back(n);
    }
    out["n_values"] = std::move(ns);
    out["envs_per_n"] = positive_u64(f.req_u64("envs_per_n"), "params.envs_per_n");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
    out["scan_budget"] = positive_u64(f.req_u64("scan_budget"), "params.scan_budget");
    out["calibration_samples"] =
        positive_u64(f.req_u64("calibration_samples"), "params.calibration_samples");
    const int cr = positive(f.req_int("calibration_radius"), "params.calibration_radius");
    out["calibration_radius"] = cr;
    const int ch = positive(f.req_int("calibration_horizon"), "params.calibration_horizon");
    if (ch >= rr)
      throw input_error("params.calibration_horizon must stay below params.region_radius");
    out["calibration_horizon"] = ch;
    const double expected = f.req_double("expected_escape_fraction");
    if (expected < 0.0 || expected > 1.0)
      throw input_error("params.expected_escape_fraction must lie in [0, 1]");
    out["expected_escape_fraction"] = expected;
    const double floor = f.req_double("min_escape_fraction");
    if (floor <= 0.0 || floor >= 1.0)
      throw input_error("params.min_escape_fraction must lie in (0, 1)");
    out["min_escape_fraction"] = floor;
  } else if (mode == "coset") {
    out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
    out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
    const int rows = positive(f.req_int("rows"), "params.rows");
    if (rows > 8) throw input_error("params.rows must stay small (at most 8)");
    out["rows"] = rows;
    out["shift"] = ser::element_from_json(f.req("shift"));
  } else {
    throw input_error("params.mode: unknown dichotomy mode \"" + mode + "\"");
  }
  f.finish();
  return out;
}

Json dichotomy_query_json(const std::string& rule, int window_radius, int horizon, int n_max,
                          std::uint64_t samples, std::uint64_t trials) {
  Json q;
  q["rule"] = rule;
  q["window_radius"] = window_radius;
  q["horizon"] = horizon;
  q["n_max"] = n_max;
  q["samples"] = samples;
  q["trials"] = trials;
  return q;
}

std::string dichotomy_curves_csv(const dyn::DichotomyReport& report) {
  std::string csv =
      ser::csv_line({"sample", "n", "frozen", "successes", "trials", "estimate", "lo95",
                     "hi95"});
  for (std::size_t s = 0; s < report.curves.size(); ++s)
    for (const auto& pt : report.curves[s].points) {
      const auto iv = pt.estimate.wilson95();
      csv += ser::csv_line({std::to_string(s), std::to_string(pt.n),
                            std::to_string(pt.frozen_count),
                            std::to_string(pt.estimate.successes),
                            std::to_string(pt.estimate.trials),
                            ser::format_double(pt.estimate.value()),
                            ser::format_double(iv.lo), ser::format_double(iv.hi)});
    }
  return csv;
}

KindOutcome run_dichotomy(const groups::GroupSpec& gs, std::uint64_t seed, int threads,
                          const Json& params) {
  Group g = make_group(gs);
  const std::string mode = params.at("mode").get<std::string>();
  KindOutcome out;

  if (mode == "report") {
    const Json& rule_json = params.at("rule");
    const auto rule = build_rule(g, rule_json);
    const int wr = params.at("window_radius").get<int>();
    const int horizon = params.at("horizon").get<int>();
    const int n_max = params.at("n_max").get<int>();
    const auto samples = params.at("samples").get<std::uint64_t>();
    const auto trials = params.at("trials").get<std::uint64_t>();

    const auto report = dyn::dichotomy_report(g, rule, g.ball(wr)->elements(), horizon, n_max,
                                              samples, trials, seed, threads);
    const Json query = dichotomy_query_json(rule.name, wr, horizon, n_max, samples, trials);
    out.artifacts.emplace_back("report.json",
                               ser::dichotomy_json(report, query).dump(2) + "\n");
    out.artifacts.emplace_back("curves.csv", dichotomy_curves_csv(report));
    out.summary["verdict"] = report.verdict;
    out.summary["below_floor_fraction"] = report.below_floor_fraction;
    out.summary["above_ceiling_fraction"] = report.above_ceiling_fraction;
    return out;
  }

  if (mode == "shift-law") {
    if (gs.kind != groups::Kind::IntLine)
      throw input_error("params.mode shift-law needs the int-line group");
    const auto rule = ca::make_shift(g, Element{1});
    const int horizon_max = params.at("horizon_max").get<int>();
    const auto trials = params.at("trials").get<std::uint64_t>();

    std::string csv = ser::csv_line(
        {"T", "trials", "successes", "estimate", "target", "z", "floor", "below_floor"});
    double worst_z = 0.0;
    bool all_below = true;
    for (int T = 0; T <= horizon_max; ++T) {
      dyn::StabilityQuery q;
      q.rule = rule;
      q.window = {g.identity()};
      q.horizon = T;
      rng::Stream rnd(rng::derive_seed(seed, 100 + static_cast<std::uint64_t>(T)));
      q.base = uniform_pattern(rule, ca::dependency_cone(g, q.window, rule.memory, T), rnd);
      q.marginal = ca::ProductMarginal::uniform(rule.alphabet);
      q.trials = trials;
      q.seed = rng::derive_seed(seed, static_cast<std::uint64_t>(T));
      q.threads = threads;
      const auto est = dyn::stability_prob(g, q);

      const double target = std::ldexp(1.0, -(T + 1));
      const double floor = 2.0 * target;
      const double sigma = stats::null_se(target, trials);
      const double z = std::abs(est.value() - target) / sigma;
      worst_z = std::max(worst_z, z);
      const bool below = est.value() < floor;
      all_below = all_below && below;
      csv += ser::csv_line({std::to_string(T), std::to_string(trials),
                            std::to_string(est.successes), ser::format_double(est.value()),
                            ser::format_double(target), ser::format_double(z),
                            ser::format_double(floor), below ? "1" : "0"});
    }
    out.artifacts.emplace_back("law.csv", csv);

    const auto report_samples = params.at("report_samples").get<std::uint64_t>();
    const auto report_trials = params.at("report_trials").get<std::uint64_t>();
    const int report_n_max = params.at("report_n_max").get<int>();
    const auto report =
        dyn::dichotomy_report(g, rule, {g.identity()}, horizon_max, report_n_max,
                              report_samples, report_trials, rng::derive_seed(seed, 777),
                              threads);
    const Json query = dichotomy_query_json(rule.name, 0, horizon_max, report_n_max,
                                            report_samples, report_trials);
    out.artifacts.emplace_back("report.json",
                               ser::dichotomy_json(report, query).dump(2) + "\n");

    out.summary["worst_z"] = worst_z;
    out.summary["verdict"] = report.verdict;
    out.checks.push_back({"shift-law", worst_z < 3.0,
                          "max deviation from 2^-(T+1): " + ser::format_double(worst_z) +
                              " sigma"});
    out.checks.push_back(
        {"below-floor", all_below, "every estimate sits below the printed sensitivity floor"});
    out.checks.push_back(
        {"verdict-sensitive",
         report.verdict == "consistent-with-sensitive" && report.below_floor_fraction == 1.0,
         "verdict: " + report.verdict + ", below-floor fraction " +
             ser::format_double(report.below_floor_fraction)});
    return out;
  }

  if (mode == "half-bound") {
    const auto rule = ca::make_percolated_additive(g);
    const int region_radius = params.at("region_radius").get<int>();
    const auto envs_per_n = params.at("envs_per_n").get<std::uint64_t>();
    const auto trials = params.at("trials").get<std::uint64_t>();
    const auto scan_budget = params.at("scan_budget").get<std::uint64_t>();
    auto region = g.ball(region_radius);

    Json records = Json::array();
    bool all_bounded = true;
    bool filled = true;
    std::uint64_t run_index = 0;
    for (const auto& nj : params.at("n_values")) {
      const int n = nj.get<int>();
      std::uint64_t found = 0;
      for (std::uint64_t k = 0; k < scan_budget && found < envs_per_n; ++k) {
        const auto env_seed = rng::derive_seed(seed, 0xE0000 + k);
        const auto w = perc::sample_bonds(region, 0.5, env_seed);
        const auto trace = perc::dependence_process(w, region_radius - 1);
        const int t_star = escape_time(trace, n);
        if (t_star < 0 || t_star + 2 > region_radius) continue;
        ++found;
        const int horizon = t_star + 2;

        const auto x = perc::sample_sites(region, 0.5,
                                          rng::derive_seed(seed, 0xA0000 + k));
        dyn::StabilityQuery q;
        q.rule = rule;
        q.window = {g.identity()};
        q.horizon = horizon;
        q.base = pair_pattern(rule, x, w);
        q.frozen = g.ball(n)->elements();
        q.marginal = ca::ProductMarginal::uniform(rule.alphabet);
        q.trials = trials;
        q.seed = rng::derive_seed(seed, 0xC0000 + run_index++);
        q.threads = threads;
        const auto est = dyn::conditional_stability_prob(g, q);

        const double sigma = stats::null_se(0.5, trials);
        const bool bounded = est.value() <= 0.5 + 3.0 * sigma;
        all_bounded = all_bounded && bounded;

        Json r;
        r["n"] = n;
        r["env_index"] = k;
        r["escape_time"] = t_star;
        r["horizon"] = horizon;
        r["estimate"] = ser::estimate_json(est);
        r["bounded"] = bounded;
        records.push_back(std::move(r));
      }
      if (found < envs_per_n) filled = false;
    }

    // Escape-rate calibration: fraction of fair environments whose
    // dependence leaves the calibration ball within the horizon.
    const auto cal_samples = params.at("calibration_samples").get<std::uint64_t>();
    const int cal_radius = params.at("calibration_radius").get<int>();
    const int cal_horizon = params.at("calibration_horizon").get<int>();
    const double expected = params.at("expected_escape_fraction").get<double>();
    const double floor = params.at("min_escape_fraction").get<double>();
    std::uint64_t escapes = 0;
    for (std::uint64_t i = 0; i < cal_samples; ++i) {
      const auto w = perc::sample_bonds(region, 0.5, rng::derive_seed(seed, 0xF0000 + i));
      const auto trace = perc::dependence_process(w, cal_horizon);
      if (escape_time(trace, cal_radius) >= 0) ++escapes;
    }
    const double fraction = static_cast<double>(escapes) / static_cast<double>(cal_samples);

    Json hj;
    hj["records"] = std::move(records);
    hj["trials"] = trials;
    hj["calibration"] = Json{{"samples", cal_samples},
                             {"radius", cal_radius},
                             {"horizon", cal_horizon},
                             {"escapes", escapes},
                             {"fraction", fraction},
                             {"expected", expected},
                             {"floor", floor}};
    out.artifacts.emplace_back("halfbound.json", hj.dump(2) + "\n");
    out.summary["escape_fraction"] = fraction;

    out.checks.push_back({"env-supply", filled,
                          "enough escaping environments found within the scan budget"});
    out.checks.push_back({"half-bound", all_bounded,
                          "every conditional estimate stays within 3 sigma of 1/2 or below"});
    out.checks.push_back({"escape-fraction", fraction >= floor && fraction == expected,
                          "escape fraction " + ser::format_double(fraction) + " (expected " +
                              ser::format_double(expected) + ", floor " +
                              ser::format_double(floor) + ")"});
    return out;
  }

  if (mode == "coset") {
    const int horizon = params.at("horizon").get<int>();
    const auto trials = params.at("trials").get<std::uint64_t>();
    const int rows = params.at("rows").get<int>();
    const Element shift = ser::element_from_json(params.at("shift"));
    const auto rule = ca::make_shift(g, shift);

    dyn::StabilityQuery q;
    q.rule = rule;
    q.window.clear();
    for (int j = 0; j < rows; ++j) q.window.push_back(Element{0, j});
    q.horizon = horizon;
    rng::Stream rnd(rng::derive_seed(seed, 5));
    q.base = uniform_pattern(rule, ca::dependency_cone(g, q.window, rule.memory, horizon), rnd);
    q.marginal = ca::ProductMarginal::uniform(rule.alphabet);
    q.trials = trials;
    q.seed = seed;
    q.threads = threads;
    const auto fact = dyn::coset_factorization_check(g, q);

    const double target = std::ldexp(1.0, -rows * (horizon + 1));
    const double target_sigma = stats::null_se(target, trials);

    Json cj;
    cj["direct"] = ser::estimate_json(fact.direct);
    Json factors = Json::array();
    for (const auto& e : fact.factors) factors.push_back(ser::estimate_json(e));
    cj["factors"] = std::move(factors);
    cj["product"] = fact.product;
    cj["difference"] = fact.difference;
    cj["sigma"] = fact.sigma;
    cj["target"] = target;
    out.artifacts.emplace_back("coset.json", cj.dump(2) + "\n");
    out.summary = cj;

    out.checks.push_back({"product-law",
                          std::abs(fact.direct.value() - target) < 3.0 * target_sigma,
                          sigma_detail(fact.direct.value(), target, target_sigma)});
    out.checks.push_back({"factorization",
                          std::abs(fact.difference) < 3.0 * fact.sigma + 1e-9,
                          "direct - product = " + ser::format_double(fact.difference) +
                              " (sigma " + ser::format_double(fact.sigma) + ")"});
    return out;
  }

  throw input_error("params.mode: unknown dichotomy mode \"" + mode + "\"");
}

// ---------------------------------------------------------------------------
// density-curve: conditional stability along the canonical ball chain.
// ---------------------------------------------------------------------------

Json normalize_density_curve(const Json& params) {
  Fields f(params, "params");
  Json out;
  out["rule"] = normalize_rule(f.req("rule"), "params.rule");
  const int wr = f.req_int("window_radius");
  if (wr < 0) throw input_error("params.window_radius must be nonnegative");
  out["window_radius"] = wr;
  out["horizon"] = positive(f.req_int("horizon"), "params.horizon");
  const int n_max = f.req_int("n_max");
  if (n_max < 0) throw input_error("params.n_max must be nonnegative");
  out["n_max"] = n_max;
  out["trials"] = positive_u64(f.req_u64("trials"), "params.trials");
  const std::string base = f.opt_str("base", "random");
  if (base != "random" && base != "zero")
    throw input_error("params.base must be \"random\" or \"zero\"");
  out["base"] = base;
  f.finish();
  return out;
}

KindOutcome run_density_curve(const groups::GroupSpec& gs, std::uint64_t seed, int threads,
                              const Json& params) {
  Group g = make_group(gs);
  const auto rule = build_rule(g, params.at("rule"));
  const int wr = params.at("window_radius").get<int>();
  const int horizon = params.at("horizon").get<int>();
  const int n_max = params.at("n_max").get<int>();
  const auto trials = params.at("trials").get<std::uint64_t>();

  dyn::StabilityQuery q;
  q.rule = rule;
  q.window = g.ball(wr)->elements();
  q.horizon = horizon;
  const auto cone = ca::dependency_cone(g, q.window, rule.memory, horizon);
  if (params.at("base").get<std::string>() == "zero") {
    q.base = zero_pattern(rule, cone);
  } else {
    rng::Stream rnd(rng::derive_seed(seed, 99));
    q.base = uniform_pattern(rule, cone, rnd);
  }
  q.marginal = ca::ProductMarginal::uniform(rule.alphabet);
  q.trials = trials;
  q.seed = seed;
  q.threads = threads;

  const auto curve = dyn::density_curve(g, q, n_max);

  KindOutcome out;
  out.artifacts.emplace_back("curve.csv", ser::curve_csv(curve));
  out.artifacts.emplace_back("curve.json", ser::curve_json(curve).dump(2) + "\n");
  out.summary["points"] = curve.points.size();
  return out;
}

// ---------------------------------------------------------------------------
// odd-percolation: membership in the influence set versus walk parity.
// ---------------------------------------------------------------------------

Json normalize_odd_percolation(const Json& params) {
  Fields f(params, "params");
  Json out;
  const int n_max = positive(f.req_int("n_max"), "params.n_max");
  if (n_max > 10) throw input_error("params.n_max must stay at most 10 (walk enumeration)");
  out["n_max"] = n_max;
  const int radius = positive(f.req_int("radius"), "params.radius");
  if (radius < n_max + 1) throw input_error("params.radius must be at least n_max + 1");
  out["radius"] = radius;
  out["envs"] = positive_u64(f.req_u64("envs"), "params.envs");
  f.finish();
  return out;
}

KindOutcome run_odd_percolation(const groups::GroupSpec& gs, std::uint64_t seed,
                                const Json& params) {
  Group g = make_group(gs);
  const int n_max = params.at("n_max").get<int>();
  const int radius = params.at("radius").get<int>();
  const auto envs = params.at("envs").get<std::uint64_t>();
  auto region = g.ball(radius);

  std::uint64_t mismatches = 0, comparisons = 0;
  for (std::uint64_t e = 0; e < envs; ++e) {
    const auto w = perc::sample_bonds(region, 0.5, rng::derive_seed(seed, e));
    const auto trace = perc::dependence_process(w, n_max);
    for (int n = 1; n <= n_max; ++n) {
      std::unordered_set<std::size_t> level;
      if (n < static_cast<int>(trace.levels.size()))
        level.insert(trace.levels[static_cast<std::size_t>(n)].begin(),
                     trace.levels[static_cast<std::size_t>(n)].end());
      for (std::size_t i = 0; i < region->prefix_size(n); ++i) {
        const bool parity = perc::odd_path_parity(w, region->element(i), n);
        ++comparisons;
        if (parity != (level.count(i) != 0)) ++mismatches;
      }
    }
  }

  KindOutcome out;
  Json pj;
  pj["envs"] = envs;
  pj["n_max"] = n_max;
  pj["comparisons"] = comparisons;
  pj["mismatches"] = mismatches;
  out.artifacts.emplace_back("parity.json", pj.dump(2) + "\n");
  out.summary = pj;
  out.checks.push_back({"odd-path-parity", mismatches == 0,
                        "membership equals odd walk parity on " +
                            std::to_string(comparisons) + " comparisons"});
  return out;
}

// ---------------------------------------------------------------------------
// combinatorics-suite: library verdicts against exhaustive oracles.
// ---------------------------------------------------------------------------

Json normalize_combinatorics(const Json& params) {
  Fields f(params, "params");
  Json out;
  out["instances"] = positive_u64(f.req_u64("instances"), "params.instances");
  const int hall = positive(f.req_int("hall_size"), "params.hall_size");
  if (hall > 8) throw input_error("params.hall_size must stay at most 8 (exhaustive oracle)");
  out["hall_size"] = hall;
  const int str = positive(f.req_int("strassen_size"), "params.strassen_size");
  if (str > 6)
    throw input_error("params.strassen_size must stay at most 6 (exhaustive oracle)");
  out["strassen_size"] = str;
  f.finish();
  return out;
}

bool suite_matching_exists(const comb::BipartiteGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.left);
  for (const auto& [u, v] : g.edges) adj[u].push_back(v);
  std::vector<char> used(g.right, 0);
  std::function<bool(std::size_t)> place = [&](std::size_t u) -> bool {
    if (u == g.left) return true;
    for (std::size_t v : adj[u]) {
      if (used[v]) continue;
      used[v] = 1;
      if (place(u + 1)) return true;
      used[v] = 0;
    }
    return false;
  };
  return place(0);
}

bool suite_strassen_oracle(const std::vector<comb::Rational>& p,
                           const std::vector<comb::Rational>& q,
                           const std::vector<std::pair<std::size_t, std::size_t>>& rel) {
  for (std::uint32_t mask = 1; mask < (1u << p.size()); ++mask) {
    comb::Rational mass_a = 0, mass_n = 0;
    std::vector<char> in_n(q.size(), 0);
    for (std::size_t u = 0; u < p.size(); ++u)
      if (mask & (1u << u)) mass_a += p[u];
    for (const auto& [u, v] : rel)
      if ((mask & (1u << u)) && !in_n[v]) {
        in_n[v] = 1;
        mass_n += q[v];
      }
    if (mass_a > mass_n) return false;
  }
  return true;
}

KindOutcome run_combinatorics(std::uint64_t seed, const Json& params) {
  const auto instances = params.at("instances").get<std::uint64_t>();
  const auto hall_size = static_cast<std::size_t>(params.at("hall_size").get<int>());
  const auto str_size = static_cast<std::size_t>(params.at("strassen_size").get<int>());

  rng::Stream rnd(seed);
  std::uint64_t hall_disagreements = 0;
  for (std::uint64_t rep = 0; rep < instances; ++rep) {
    comb::BipartiteGraph bg{hall_size, (rep % 3 == 0) ? hall_size - 1 : hall_size, {}};
    for (std::size_t u = 0; u < bg.left; ++u)
      for (std::size_t v = 0; v < bg.right; ++v)
        if (rnd.below(100) < 30) bg.edges.push_back({u, v});
    if (comb::hall_matching(bg).perfect != suite_matching_exists(bg)) ++hall_disagreements;
  }

  std::uint64_t strassen_disagreements = 0;
  for (std::uint64_t rep = 0; rep < instances; ++rep) {
    auto draw = [&](std::size_t n) {
      std::vector<long> nums(n);
      long total = 0;
      for (auto& x : nums) {
        x = static_cast<long>(rnd.below(10));
        total += x;
      }
      if (total == 0) {
        nums[0] = 1;
        total = 1;
      }
      std::vector<comb::Rational> w(n);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = comb::Rational(nums[i], total);
        w[i].canonicalize();
      }
      return w;
    };
    const auto p = draw(str_size), q = draw(str_size);
    std::vector<std::pair<std::size_t, std::size_t>> rel;
    for (std::size_t u = 0; u < str_size; ++u)
      for (std::size_t v = 0; v < str_size; ++v)
        if (rnd.fair_bit()) rel.push_back({u, v});
    if (comb::strassen_coupling(p, q, rel).feasible != suite_strassen_oracle(p, q, rel))
      ++strassen_disagreements;
  }

  // Deterministic structural extras: closed-form boundary counts, the tiling
  // partition property, the tile-coupling threshold sweep, and greedy
  // separated covering sets.
  bool extras = true;
  {
    for (int d = 1; d <= 3 && extras; ++d) {
      Group gd({groups::Kind::IntGrid, d, 0});
      const auto S = gd.generators();
      for (int L : {2, 3, 8}) {
        std::vector<Element> box;
        Element cursor(static_cast<std::size_t>(d), 0);
        for (;;) {
          box.push_back(cursor);
          int i = d - 1;
          while (i >= 0 && cursor[static_cast<std::size_t>(i)] == L - 1)
            cursor[static_cast<std::size_t>(i--)] = 0;
          if (i < 0) break;
          ++cursor[static_cast<std::size_t>(i)];
        }
        std::size_t volume = 1, interior = 1;
        for (int i = 0; i < d; ++i) volume *= static_cast<std::size_t>(L);
        for (int i = 0; i < d; ++i) interior *= static_cast<std::size_t>(std::max(L - 2, 0));
        if (comb::inner_boundary_size(gd, box, S) != volume - interior) extras = false;
        if (comb::outer_boundary_size(gd, box, S) !=
            2 * static_cast<std::size_t>(d) * (volume / static_cast<std::size_t>(L)))
          extras = false;
      }
    }

    Group plane({groups::Kind::IntGrid, 2, 0});
    const auto region = plane.ball(5)->elements();
    const auto tiling = comb::box_tiling(2, 2, region);
    std::set<Element> covered;
    for (const auto& a : tiling.anchors)
      for (const auto& b : tiling.tile)
        if (!covered.insert(plane.multiply(a, b)).second) extras = false;
    if (covered.size() + tiling.incomplete.size() != region.size()) extras = false;

    Group line({groups::Kind::IntLine, 0, 0});
    for (int L = 2; L <= 12; ++L) {
      std::vector<Element> tile;
      for (int i = 0; i < L; ++i) tile.push_back(Element{i});
      const auto rec = comb::tile_coupling_condition(line, 0.4, 0.6, tile);
      if (rec.satisfied != (L >= 4)) extras = false;
      if (rec.satisfied && !rec.coupling.feasible) extras = false;
    }

    const auto delta = comb::separated_covering_set(line, line.ball(6), 3);
    const std::set<Element> want{Element{0}, Element{3}, Element{-3}, Element{6}, Element{-6}};
    if (std::set<Element>(delta.begin(), delta.end()) != want) extras = false;

    Group free2({groups::Kind::FreeGroup, 2, 0});
    auto ball3 = free2.ball(3);
    const auto sep = comb::separated_covering_set(free2, ball3, 2);
    for (std::size_t i = 0; i < ball3->size() && extras; ++i) {
      int best = 1 << 20;
      for (const auto& d : sep)
        best = std::min(best, free2.word_length(free2.multiply(free2.inverse(d),
                                                               ball3->element(i))));
      if (best > 1) extras = false;
    }
  }

  KindOutcome out;
  Json sj;
  sj["instances"] = instances;
  sj["hall_disagreements"] = hall_disagreements;
  sj["strassen_disagreements"] = strassen_disagreements;
  sj["structure_extras"] = extras;
  out.artifacts.emplace_back("suite.json", sj.dump(2) + "\n");
  out.summary = sj;
  out.checks.push_back({"hall-oracle", hall_disagreements == 0,
                        std::to_string(instances) + " matching instances agree with the oracle"});
  out.checks.push_back({"strassen-oracle", strassen_disagreements == 0,
                        std::to_string(instances) + " coupling instances agree with the oracle"});
  out.checks.push_back({"structure-extras", extras,
                        "boundary counts, tilings, tile couplings, and separated sets hold"});
  return out;
}

// ---------------------------------------------------------------------------
// Top-level dispatch.
// ---------------------------------------------------------------------------

const std::vector<std::string> kKinds = {
    "percolate",      "threshold", "ca-run",        "dependence",         "coupling-check",
    "dichotomy",      "density-curve", "odd-percolation", "combinatorics-suite"};

Json normalize_params(const std::string& kind, const Json& params) {
  if (kind == "percolate") return normalize_percolate(params);
  if (kind == "threshold") return normalize_threshold(params);
  if (kind == "ca-run") return normalize_ca_run(params);
  if (kind == "dependence") return normalize_dependence(params);
  if (kind == "coupling-check") return normalize_coupling_check(params);
  if (kind == "dichotomy") return normalize_dichotomy(params);
  if (kind == "density-curve") return normalize_density_curve(params);
  if (kind == "odd-percolation") return normalize_odd_percolation(params);
  if (kind == "combinatorics-suite") return normalize_combinatorics(params);
  throw input_error("config.kind: unknown kind \"" + kind + "\"");
}

KindOutcome dispatch(const std::string& kind, const groups::GroupSpec& gs, std::uint64_t seed,
                     int threads, const Json& params) {
  if (kind == "percolate") return run_percolate(gs, seed, threads, params);
  if (kind == "threshold") return run_threshold(gs, seed, threads, params);
  if (kind == "ca-run") return run_ca_run(gs, seed, threads, params);
  if (kind == "dependence") return run_dependence(gs, seed, params);
  if (kind == "coupling-check") return run_coupling_check(gs, seed, params);
  if (kind == "dichotomy") return run_dichotomy(gs, seed, threads, params);
  if (kind == "density-curve") return run_density_curve(gs, seed, threads, params);
  if (kind == "odd-percolation") return run_odd_percolation(gs, seed, params);
  if (kind == "combinatorics-suite") return run_combinatorics(seed, params);
  throw input_error("config.kind: unknown kind \"" + kind + "\"");
}

}  // namespace

Json parse_config(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw input_error("config is not valid JSON");
  return j;
}

Json validate_config(const Json& raw) {
  Fields f(raw, "config");
  const std::string kind = f.req_str("kind");
  if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end())
    throw input_error("config.kind: unknown kind \"" + kind + "\"");
  const std::uint64_t seed = f.req_u64("seed");

  Json group;
  if (kind == "combinatorics-suite") {
    if (f.present("group"))
      throw input_error("config.group is not used by combinatorics-suite");
    f.opt("group");  // mark as consumed either way
  } else {
    const Json* gj = f.opt("group");
    if (!gj) throw input_error("config.group is required for kind " + kind);
    const auto spec = ser::group_from_json(*gj);
    Group probe(spec);  // constructing validates parameter ranges and the generating set
    group = ser::group_json(spec);
  }

  const int threads = f.opt_int("threads", 1);
  if (threads < 1 || threads > 256)
    throw input_error("config.threads must lie in [1, 256]");
  const std::string out_dir = f.opt_str("out_dir", "");
  const std::string preset = f.opt_str("preset", "");
  const int criterion = f.opt_int("criterion", 0);
  if (criterion < 0 || criterion > 15)
    throw input_error("config.criterion must lie in [0, 15]");

  const Json& params = f.req("params");
  Json normalized_params = normalize_params(kind, params);
  f.finish();

  Json out;
  out["kind"] = kind;
  out["seed"] = seed;
  if (!group.is_null()) out["group"] = group;
  out["threads"] = threads;
  if (!out_dir.empty()) out["out_dir"] = out_dir;
  if (!preset.empty()) out["preset"] = preset;
  if (criterion != 0) out["criterion"] = criterion;
  out["params"] = std::move(normalized_params);
  return out;
}

Json canonical_config(const Json& normalized) {
  Json c = normalized;
  c.erase("threads");
  c.erase("out_dir");
  return c;
}

RunResult run_config(const Json& normalized, const std::filesystem::path& out_dir,
                     int threads_override) {
  const auto start = std::chrono::steady_clock::now();

  const std::string kind = normalized.at("kind").get<std::string>();
  const auto seed = normalized.at("seed").get<std::uint64_t>();
  const int threads =
      threads_override > 0 ? threads_override : normalized.at("threads").get<int>();
  groups::GroupSpec gs;
  if (normalized.contains("group")) gs = ser::group_from_json(normalized.at("group"));

  KindOutcome outcome = dispatch(kind, gs, seed, threads, normalized.at("params"));

  const Json canonical = canonical_config(normalized);
  const std::string canonical_bytes = canonical.dump();

  Json checks = Json::array();
  bool all = true;
  for (const auto& c : outcome.checks) {
    Json cj;
    cj["label"] = c.label;
    cj["pass"] = c.pass;
    cj["detail"] = c.detail;
    checks.push_back(std::move(cj));
    all = all && c.pass;
  }

  Json criteria = Json::array();
  const int criterion_id =
      normalized.contains("criterion") ? normalized.at("criterion").get<int>() : 0;
  if (!outcome.checks.empty()) {
    std::string detail;
    for (const auto& c : outcome.checks) {
      if (!detail.empty()) detail += "; ";
      detail += c.label + (c.pass ? " ok" : " FAILED");
    }
    Json entry;
    entry["id"] = criterion_id;
    entry["pass"] = all;
    entry["detail"] = detail;
    criteria.push_back(std::move(entry));
  }

  std::vector<std::string> names;
  for (const auto& [name, bytes] : outcome.artifacts) {
    (void)bytes;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());

  Json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["kind"] = kind;
  if (normalized.contains("preset")) manifest["preset"] = normalized.at("preset");
  if (criterion_id != 0) manifest["criterion"] = criterion_id;
  manifest["config_hash"] = ser::fnv1a_hex(canonical_bytes);
  manifest["config"] = canonical;
  manifest["summary"] = outcome.summary;
  manifest["checks"] = std::move(checks);
  manifest["criteria"] = std::move(criteria);
  manifest["artifacts"] = names;

  for (const auto& [name, bytes] : outcome.artifacts) ser::write_file(out_dir / name, bytes);
  ser::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  const auto elapsed =
      std::chrono::duration_cast<std::chrono::duration<double>>(
          std::chrono::steady_clock::now() - start)
          .count();
  // Timing is real but non-deterministic, so it lives outside the artifact
  // set the manifest declares.
  ser::write_file(out_dir / "timing.log",
                  "wall_seconds " + ser::format_double(elapsed) + "\n");

  RunResult result;
  result.out_dir = out_dir;
  result.manifest = std::move(manifest);
  result.artifact_names = names;
  result.artifact_names.push_back("manifest.json");
  std::sort(result.artifact_names.begin(), result.artifact_names.end());
  result.all_passed = all;
  return result;
}

// ---------------------------------------------------------------------------
// Preset registry: one preset per acceptance criterion (two where a
// criterion spans two experiments).
// ---------------------------------------------------------------------------

namespace {

struct PresetDef {
  const char* name;
  int criterion;
  Json (*build)();
};

Json base_config(const char* kind, std::uint64_t seed) {
  Json cfg;
  cfg["kind"] = kind;
  cfg["seed"] = seed;
  return cfg;
}

Json grouped_config(const char* kind, std::uint64_t seed, groups::Kind gk, int param = 0) {
  Json cfg = base_config(kind, seed);
  cfg["group"] = ser::group_json({gk, param, 0});
  return cfg;
}

Json preset_coupling_f2() {
  Json cfg = grouped_config("coupling-check", 101, groups::Kind::FreeGroup, 2);
  cfg["params"] = Json{{"radius", 7},         {"target_radius", 6}, {"samples", 10000},
                       {"identity_n_max", 6}, {"parity_n_max", 0},  {"marginal_check", false}};
  return cfg;
}

Json preset_parity_bernoulli() {
  Json cfg = grouped_config("coupling-check", 102, groups::Kind::IntLine);
  cfg["params"] = Json{{"radius", 3},         {"target_radius", 2}, {"samples", 10000},
                       {"identity_n_max", 0}, {"parity_n_max", 8},  {"marginal_check", true}};
  return cfg;
}

Json preset_dependence_oracle_z2() {
  Json cfg = grouped_config("dependence", 103, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"mode", "ca-oracle"}, {"n_max", 4}, {"radius", 6}, {"envs", 200}};
  return cfg;
}

Json preset_odd_path_parity() {
  Json cfg = grouped_config("odd-percolation", 104, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"n_max", 6}, {"radius", 7}, {"envs", 200}};
  return cfg;
}

Json preset_rule90_pascal() {
  Json cfg = grouped_config("dependence", 105, groups::Kind::IntLine);
  cfg["params"] = Json{{"mode", "lucas"}, {"n_max", 64}};
  return cfg;
}

Json preset_pine_law() {
  Json cfg = grouped_config("ca-run", 106, groups::Kind::IntLine);
  cfg["params"] = Json{{"mode", "pine-law"},
                       {"q_values", Json::array({0.3, 0.5, 0.7})},
                       {"n_max", 8},
                       {"trials", 100000}};
  return cfg;
}

Json preset_shift_z() {
  Json cfg = grouped_config("dichotomy", 107, groups::Kind::IntLine);
  cfg["params"] = Json{{"mode", "shift-law"},     {"horizon_max", 6},
                       {"trials", 100000},        {"report_samples", 30},
                       {"report_trials", 2000},   {"report_n_max", 3}};
  return cfg;
}

// expected_escape_fraction is the deterministic value of this preset's own
// calibration pass (seed 108, 200 environments): measured once before the
// suite was frozen and pinned here.
Json preset_halfbound_z2() {
  Json cfg = grouped_config("dichotomy", 108, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"mode", "half-bound"},
                       {"region_radius", 10},
                       {"n_values", Json::array({2, 3, 4, 5})},
                       {"envs_per_n", 5},
                       {"trials", 4000},
                       {"scan_budget", 80},
                       {"calibration_samples", 200},
                       {"calibration_radius", 5},
                       {"calibration_horizon", 9},
                       {"expected_escape_fraction", 0.79},
                       {"min_escape_fraction", 0.3}};
  return cfg;
}

Json preset_allzero_z2() {
  Json cfg = grouped_config("ca-run", 109, groups::Kind::IntGrid, 2);
  cfg["params"] =
      Json{{"mode", "fixed-point-stability"}, {"horizon", 20}, {"trials", 100000}};
  return cfg;
}

Json preset_threshold_line() {
  Json cfg = grouped_config("threshold", 110, groups::Kind::IntLine);
  // Exact finite-size crossing: survival(p) = 2 p^R - p^{2R} = 1/2 at R = 64,
  // i.e. p* = (1 - 1/sqrt(2))^{1/64}.
  const double target = std::pow(1.0 - 1.0 / std::sqrt(2.0), 1.0 / 64.0);
  cfg["params"] = Json{{"process", "site-cluster"},
                       {"radius", 64},
                       {"trials", 10000},
                       {"tolerance", 0.0005},
                       {"expect", Json{{"target", target}, {"within", 0.002}}}};
  return cfg;
}

Json preset_threshold_plane() {
  Json cfg = grouped_config("threshold", 111, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"process", "site-cluster"},
                       {"radius", 64},
                       {"trials", 10000},
                       {"tolerance", 0.005},
                       {"expect", Json{{"lo", 0.55}, {"hi", 0.65}}}};
  return cfg;
}

Json preset_coupling_oracles() {
  Json cfg = base_config("combinatorics-suite", 112);
  cfg["params"] = Json{{"instances", 500}, {"hall_size", 6}, {"strassen_size", 5}};
  return cfg;
}

Json preset_equicontinuity_z2() {
  Json cfg = grouped_config("ca-run", 113, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"mode", "equicontinuity"},
                       {"window_radius", 2},
                       {"horizon", 20},
                       {"envs", 100},
                       {"perturbations", 20}};
  return cfg;
}

Json preset_reversible_z2() {
  Json cfg = grouped_config("ca-run", 114, groups::Kind::IntGrid, 2);
  cfg["params"] =
      Json{{"mode", "reversible-roundtrip"}, {"windows", 1000}, {"horizon", 3}};
  return cfg;
}

Json preset_coset_z2() {
  Json cfg = grouped_config("dichotomy", 115, groups::Kind::IntGrid, 2);
  cfg["params"] = Json{{"mode", "coset"},
                       {"horizon", 4},
                       {"trials", 100000},
                       {"rows", 2},
                       {"shift", Json::array({1, 0})}};
  return cfg;
}

Json preset_renorm_line() {
  Json cfg = grouped_config("percolate", 116, groups::Kind::IntLine);
  cfg["params"] = Json{{"mode", "renormalize"}, {"alpha", 0.1},
                       {"ell", 3},              {"spacing", 7},
                       {"coarse_radius", 5},    {"trials", 100000},
                       {"path_samples", 50}};
  return cfg;
}

const std::vector<PresetDef> kPresets = {
    {"coupling-f2", 1, preset_coupling_f2},
    {"parity-bernoulli", 2, preset_parity_bernoulli},
    {"dependence-oracle-z2", 3, preset_dependence_oracle_z2},
    {"odd-path-parity", 3, preset_odd_path_parity},
    {"rule90-pascal", 4, preset_rule90_pascal},
    {"pine-law", 5, preset_pine_law},
    {"shift-Z", 6, preset_shift_z},
    {"halfbound-z2", 7, preset_halfbound_z2},
    {"allzero-z2", 8, preset_allzero_z2},
    {"threshold-line", 9, preset_threshold_line},
    {"threshold-plane", 9, preset_threshold_plane},
    {"coupling-oracles", 10, preset_coupling_oracles},
    {"equicontinuity-z2", 11, preset_equicontinuity_z2},
    {"reversible-z2", 12, preset_reversible_z2},
    {"coset-z2", 13, preset_coset_z2},
    {"renorm-line", 14, preset_renorm_line},
};

const PresetDef& find_preset(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.name) return p;
  throw input_error("unknown preset \"" + name + "\"");
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.push_back(p.name);
  return out;
}

bool is_preset(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.name) return true;
  return false;
}

Json preset_config(const std::string& name) {
  const auto& def = find_preset(name);
  Json cfg = def.build();
  cfg["preset"] = def.name;
  cfg["criterion"] = def.criterion;
  return validate_config(cfg);
}

int preset_criterion(const std::string& name) { return find_preset(name).criterion; }

RunResult run_preset(const std::string& name, const std::filesystem::path& out_dir,
                     int threads_override) {
  return run_config(preset_config(name), out_dir, threads_override);
}

}  // namespace perca::exp
