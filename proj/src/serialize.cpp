#include "perca/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "perca/errors.hpp"

namespace perca::ser {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw assertion_error("double formatting failed");
  return std::string(buf, ptr);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].find_first_of(",\"\n\r") != std::string::npos)
      throw input_error("csv field needs quoting, which artifacts never do: " + fields[i]);
    if (i) out += ',';
    out += fields[i];
  }
  out += '\n';
  return out;
}

std::string group_to_name(const groups::GroupSpec& spec) {
  groups::Group g(spec);
  return g.name();
}

namespace {

// JSON key of the kind's single integer parameter; nullptr when the kind
// takes none.
const char* param_key(groups::Kind k) {
  switch (k) {
    case groups::Kind::IntGrid: return "d";
    case groups::Kind::FreeGroup: return "k";
    case groups::Kind::VirtuallyZ: return "m";
    case groups::Kind::FiniteCyclic: return "n";
    default: return nullptr;
  }
}

}  // namespace

Json group_json(const groups::GroupSpec& spec) {
  Json j;
  j["kind"] = groups::kind_name(spec.kind);
  Json params = Json::object();
  if (const char* key = param_key(spec.kind)) params[key] = spec.param;
  j["params"] = std::move(params);
  if (spec.ball_power > 0) {
    Json gen;
    gen["ball_power"] = spec.ball_power;
    j["generators"] = std::move(gen);
  } else {
    j["generators"] = "standard";
  }
  return j;
}

groups::GroupSpec group_from_json(const Json& j) {
  if (!j.is_object()) throw input_error("group must be an object");
  groups::GroupSpec spec;
  bool saw_kind = false, saw_params = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      if (!value.is_string()) throw input_error("group.kind must be a string");
      spec.kind = groups::kind_from_name(value.get<std::string>());
      saw_kind = true;
    } else if (key == "params") {
      saw_params = true;  // contents checked below, once the kind is known
    } else if (key == "generators") {
      if (value.is_string()) {
        if (value.get<std::string>() != "standard")
          throw input_error("group.generators must be \"standard\" or {\"ball_power\": r}");
      } else if (value.is_object()) {
        bool saw_power = false;
        for (const auto& [gk, gv] : value.items()) {
          if (gk != "ball_power")
            throw input_error("unknown field \"" + gk + "\" in group.generators");
          if (!gv.is_number_integer() || gv.get<int>() < 1)
            throw input_error("group.generators.ball_power must be a positive integer");
          spec.ball_power = gv.get<int>();
          saw_power = true;
        }
        if (!saw_power) throw input_error("group.generators.ball_power is required");
      } else {
        throw input_error("group.generators must be \"standard\" or {\"ball_power\": r}");
      }
    } else {
      throw input_error("unknown field \"" + key + "\" in group");
    }
  }
  if (!saw_kind) throw input_error("group.kind is required");

  const char* key = param_key(spec.kind);
  if (saw_params) {
    const Json& params = j.at("params");
    if (!params.is_object()) throw input_error("group.params must be an object");
    for (const auto& [pk, pv] : params.items()) {
      if (key != nullptr && pk == key) {
        if (!pv.is_number_integer())
          throw input_error(std::string("group.params.") + key + " must be an integer");
        spec.param = pv.get<int>();
      } else {
        throw input_error("unknown field \"" + pk + "\" in group.params");
      }
    }
  }
  if (key != nullptr && (!saw_params || !j.at("params").contains(key)))
    throw input_error(std::string("group.params.") + key + " is required for " +
                      groups::kind_name(spec.kind));
  return spec;
}

Json element_json(const groups::Element& g) {
  Json j = Json::array();
  for (auto v : g) j.push_back(v);
  return j;
}

groups::Element element_from_json(const Json& j) {
  if (!j.is_array()) throw input_error("element must be an array of integers");
  groups::Element e;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw input_error("element must be an array of integers");
    e.push_back(v.get<std::int64_t>());
  }
  return e;
}

Json interval_json(const stats::Interval& iv) {
  Json j;
  j["lo"] = iv.lo;
  j["hi"] = iv.hi;
  return j;
}

Json estimate_json(const stats::Estimate& e) {
  Json j;
  j["successes"] = e.successes;
  j["trials"] = e.trials;
  j["estimate"] = e.value();
  j["wilson95"] = interval_json(e.wilson95());
  return j;
}

Json trace_json(const perc::ProcessTrace& t) {
  Json levels = Json::array();
  for (const auto& level : t.levels) {
    Json one = Json::array();
    for (std::size_t i : level) one.push_back(element_json(t.region->element(i)));
    levels.push_back(std::move(one));
  }
  Json j;
  j["levels"] = std::move(levels);
  j["status"] = perc::to_string(t.status);
  j["terminated_at"] = t.terminated_at;
  j["horizon"] = t.horizon;
  j["target_radius"] = t.target_radius;
  return j;
}

std::string survival_csv(const std::vector<perc::SurvivalEstimate>& rows) {
  std::string out =
      csv_line({"p", "radius", "trials", "successes", "estimate", "lo95", "hi95", "seed"});
  for (const auto& r : rows)
    out += csv_line({format_double(r.p), std::to_string(r.radius), std::to_string(r.trials),
                     std::to_string(r.successes), format_double(r.estimate),
                     format_double(r.wilson95.lo), format_double(r.wilson95.hi),
                     std::to_string(r.seed)});
  return out;
}

Json threshold_json(const perc::ThresholdEstimate& t) {
  Json j;
  j["p_star"] = t.p_star;
  j["tolerance"] = t.tolerance;
  j["radius"] = t.radius;
  j["probes"] = t.probes.size();
  j["monotone_warning"] = t.monotone_warning;
  j["seed"] = t.seed;
  return j;
}

std::string curve_csv(const dyn::DensityCurve& curve) {
  std::string out =
      csv_line({"n", "frozen", "successes", "trials", "estimate", "lo95", "hi95"});
  for (const auto& pt : curve.points) {
    const auto iv = pt.estimate.wilson95();
    out += csv_line({std::to_string(pt.n), std::to_string(pt.frozen_count),
                     std::to_string(pt.estimate.successes), std::to_string(pt.estimate.trials),
                     format_double(pt.estimate.value()), format_double(iv.lo),
                     format_double(iv.hi)});
  }
  return out;
}

Json curve_json(const dyn::DensityCurve& curve) {
  Json pts = Json::array();
  for (const auto& pt : curve.points) {
    Json one;
    one["n"] = pt.n;
    one["frozen"] = pt.frozen_count;
    one["estimate"] = estimate_json(pt.estimate);
    pts.push_back(std::move(one));
  }
  Json j;
  j["points"] = std::move(pts);
  return j;
}

Json dichotomy_json(const dyn::DichotomyReport& r, const Json& query) {
  Json estimates = Json::array();
  for (const auto& e : r.stability) estimates.push_back(estimate_json(e));
  Json curves = Json::array();
  for (const auto& c : r.curves) curves.push_back(curve_json(c));

  Json thresholds;
  thresholds["sensitivity_floor"] = r.sensitivity_floor;
  thresholds["equicontinuity_ceiling"] = r.equicontinuity_ceiling;
  thresholds["below_floor_fraction"] = r.below_floor_fraction;
  thresholds["above_ceiling_fraction"] = r.above_ceiling_fraction;

  Json j;
  j["query"] = query;
  j["estimates"] = std::move(estimates);
  j["curve"] = std::move(curves);
  j["verdict"] = r.verdict;
  j["seed"] = r.seed;
  j["thresholds"] = std::move(thresholds);
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw resource_error("cannot create directory " + path.parent_path().string() + ": " +
                           ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw resource_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw resource_error("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw resource_error("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw resource_error("read failed for " + path.string());
  return buf.str();
}

}  // namespace perca::ser
