#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "perca/errors.hpp"
#include "perca/experiment.hpp"
#include "perca/serialize.hpp"

using perca::ser::Json;
namespace pexp = perca::exp;
namespace ser = perca::ser;
namespace fs = std::filesystem;

namespace {

Json tiny_survival_config() {
  Json cfg;
  cfg["kind"] = "percolate";
  cfg["seed"] = 7;
  cfg["group"] = Json{{"kind", "IntLine"}, {"params", Json::object()}, {"generators", "standard"}};
  cfg["params"] = Json{{"mode", "survival"},
                       {"process", "site-cluster"},
                       {"radius", 4},
                       {"trials", 200},
                       {"p_values", Json::array({0.3, 0.9})}};
  return cfg;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "perca_exp_tests" / leaf;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("serializer formats doubles with shortest round-trip decimals") {
  CHECK(ser::format_double(0.5) == "0.5");
  CHECK(ser::format_double(0.1) == "0.1");
  CHECK(ser::format_double(1.0) == "1");
  for (double v : {1.0 / 3.0, 0.9809962180281013, 2.9802322387695312e-08, -17.25})
    CHECK(std::stod(ser::format_double(v)) == v);
}

TEST_CASE("serializer hashes with FNV-1a and refuses unquotable CSV fields") {
  CHECK(ser::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(ser::fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(ser::csv_line({"a", "b", "1.5"}) == "a,b,1.5\n");
  CHECK_THROWS_AS((void)ser::csv_line({"a,b"}), perca::input_error);
  CHECK_THROWS_AS((void)ser::csv_line({"a\"b"}), perca::input_error);
}

TEST_CASE("group specs round-trip through their JSON form") {
  using perca::groups::GroupSpec;
  using perca::groups::Kind;
  for (GroupSpec spec : {GroupSpec{Kind::IntLine, 0, 0}, GroupSpec{Kind::IntGrid, 2, 0},
                         GroupSpec{Kind::FreeGroup, 2, 0}, GroupSpec{Kind::IntLine, 0, 2},
                         GroupSpec{Kind::FiniteCyclic, 12, 0}}) {
    CHECK(ser::group_from_json(ser::group_json(spec)) == spec);
  }

  const Json grid = ser::group_json({Kind::IntGrid, 3, 0});
  CHECK(grid.at("kind") == "IntGrid");
  CHECK(grid.at("params").at("d") == 3);
  CHECK(grid.at("generators") == "standard");
  const Json powered = ser::group_json({Kind::IntLine, 0, 2});
  CHECK(powered.at("generators").at("ball_power") == 2);

  CHECK_THROWS_WITH_AS((void)ser::group_from_json(Json{{"kind", "IntGrid"}}),
                       doctest::Contains("group.params.d is required"), perca::input_error);
  CHECK_THROWS_WITH_AS(
      (void)ser::group_from_json(Json{{"kind", "IntLine"}, {"params", Json{{"d", 1}}}}),
      doctest::Contains("unknown field \"d\" in group.params"), perca::input_error);
  CHECK_THROWS_WITH_AS(
      (void)ser::group_from_json(Json{{"kind", "IntLine"}, {"generators", "fancy"}}),
      doctest::Contains("generators"), perca::input_error);

  const auto el = ser::element_from_json(ser::element_json({3, -5}));
  CHECK(el == perca::groups::Element{3, -5});
  CHECK_THROWS_AS((void)ser::element_from_json(Json("x")), perca::input_error);
}

TEST_CASE("config validation rejects bad fields by name") {
  CHECK_THROWS_WITH_AS((void)pexp::parse_config("{not json"),
                       doctest::Contains("not valid JSON"), perca::input_error);

  Json cfg = tiny_survival_config();
  cfg["params"]["trails"] = 3;
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg),
                       doctest::Contains("unknown field \"trails\" in params"),
                       perca::input_error);

  cfg = tiny_survival_config();
  cfg["params"]["trials"] = -5;
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg),
                       doctest::Contains("params.trials"), perca::input_error);

  cfg = tiny_survival_config();
  cfg["params"]["trials"] = 0;
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg),
                       doctest::Contains("params.trials must be positive"), perca::input_error);

  cfg = tiny_survival_config();
  cfg["params"]["p_values"] = Json::array({0.5, 1.5});
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg), doctest::Contains("p_values"),
                       perca::input_error);

  cfg = tiny_survival_config();
  cfg.erase("group");
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg),
                       doctest::Contains("config.group is required"), perca::input_error);

  cfg = tiny_survival_config();
  cfg.erase("seed");
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg), doctest::Contains("config.seed"),
                       perca::input_error);

  cfg = tiny_survival_config();
  cfg["kind"] = "frobnicate";
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(cfg),
                       doctest::Contains("unknown kind \"frobnicate\""), perca::input_error);

  Json suite;
  suite["kind"] = "combinatorics-suite";
  suite["seed"] = 1;
  suite["group"] = Json{{"kind", "IntLine"}, {"params", Json::object()}};
  suite["params"] = Json{{"instances", 5}, {"hall_size", 3}, {"strassen_size", 3}};
  CHECK_THROWS_WITH_AS((void)pexp::validate_config(suite),
                       doctest::Contains("not used by combinatorics-suite"), perca::input_error);
  suite.erase("group");
  CHECK_NOTHROW((void)pexp::validate_config(suite));
}

TEST_CASE("validation normalizes and canonicalization strips execution fields") {
  Json cfg = tiny_survival_config();
  cfg["threads"] = 2;
  cfg["out_dir"] = "/tmp/somewhere";
  const Json normalized = pexp::validate_config(cfg);

  std::vector<std::string> keys;
  for (const auto& [k, v] : normalized.items()) {
    (void)v;
    keys.push_back(k);
  }
  CHECK(keys == std::vector<std::string>{"kind", "seed", "group", "threads", "out_dir",
                                         "params"});
  CHECK(normalized.at("threads") == 2);

  const Json canonical = pexp::canonical_config(normalized);
  CHECK_FALSE(canonical.contains("threads"));
  CHECK_FALSE(canonical.contains("out_dir"));
  CHECK(canonical.at("seed") == 7);

  // Different thread counts hash identically; different seeds do not.
  Json other = tiny_survival_config();
  other["threads"] = 64;
  CHECK(pexp::canonical_config(pexp::validate_config(other)).dump() == canonical.dump());
  other["seed"] = 8;
  CHECK(pexp::canonical_config(pexp::validate_config(other)).dump() != canonical.dump());
}

TEST_CASE("preset registry entries validate and map to criteria") {
  const auto names = pexp::preset_names();
  CHECK(names.size() == 16);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());

  std::set<int> criteria;
  for (const auto& name : names) {
    CAPTURE(name);
    CHECK(pexp::is_preset(name));
    const Json cfg = pexp::preset_config(name);  // full strict validation
    CHECK(cfg.at("preset") == name);
    CHECK(cfg.at("criterion") == pexp::preset_criterion(name));
    const int criterion = cfg.at("criterion").get<int>();
    CHECK(criterion >= 1);
    CHECK(criterion <= 14);
    criteria.insert(criterion);
  }
  for (int c = 1; c <= 14; ++c) CHECK(criteria.count(c) == 1);

  CHECK_FALSE(pexp::is_preset("no-such-preset"));
  CHECK_THROWS_WITH_AS((void)pexp::preset_config("no-such-preset"),
                       doctest::Contains("unknown preset"), perca::input_error);
}

TEST_CASE("runs emit manifests and artifacts deterministically across threads") {
  const Json normalized = pexp::validate_config(tiny_survival_config());
  const fs::path dir1 = fresh_dir("one");
  const fs::path dir2 = fresh_dir("two");

  const auto r1 = pexp::run_config(normalized, dir1);
  const auto r2 = pexp::run_config(normalized, dir2, /*threads_override=*/2);

  CHECK(r1.artifact_names == std::vector<std::string>{"manifest.json", "survival.csv"});
  CHECK(r1.artifact_names == r2.artifact_names);
  CHECK(r1.all_passed);
  for (const auto& name : r1.artifact_names) {
    CAPTURE(name);
    CHECK(fs::exists(dir1 / name));
    CHECK(ser::read_file(dir1 / name) == ser::read_file(dir2 / name));
  }
  CHECK(fs::exists(dir1 / "timing.log"));  // present but not an artifact

  const Json manifest = Json::parse(ser::read_file(dir1 / "manifest.json"));
  CHECK(manifest.at("tool_version") == pexp::kToolVersion);
  CHECK(manifest.at("kind") == "percolate");
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
  CHECK(manifest.at("config") == pexp::canonical_config(normalized));
  CHECK(manifest.at("artifacts") == Json::array({"survival.csv"}));
  CHECK(manifest.at("checks").empty());
  CHECK(manifest.at("criteria").empty());
  CHECK(manifest == r1.manifest);

  const std::string csv = ser::read_file(dir1 / "survival.csv");
  CHECK(csv.substr(0, csv.find('\n')) ==
        "p,radius,trials,successes,estimate,lo95,hi95,seed");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + one row per p
}

TEST_CASE("dichotomy artifacts keep the fixed six-key layout") {
  perca::dyn::DichotomyReport report;
  report.horizon = 3;
  report.n_max = 2;
  report.sensitivity_floor = 0.125;
  report.equicontinuity_ceiling = 0.9;
  report.below_floor_fraction = 1.0;
  report.above_ceiling_fraction = 0.0;
  report.verdict = "consistent-with-sensitive";
  report.seed = 42;

  const Json j = ser::dichotomy_json(report, Json{{"rule", "shift"}});
  CHECK(j.size() == 6);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) {
    (void)v;
    keys.push_back(k);
  }
  CHECK(keys == std::vector<std::string>{"query", "estimates", "curve", "verdict", "seed",
                                         "thresholds"});
  CHECK(j.at("thresholds").at("sensitivity_floor") == 0.125);
}
