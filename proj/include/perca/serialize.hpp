#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "perca/dynamics.hpp"
#include "perca/groups.hpp"
#include "perca/percolation.hpp"
#include "perca/stats.hpp"

/// Deterministic artifact encoding.  Every run artifact is produced through
/// the helpers here so that identical inputs yield identical bytes: floats
/// use the shortest round-trip decimal, JSON objects keep a fixed key order,
/// and files are written in one shot.
namespace perca::ser {

/// Key order follows insertion order, which the emitters keep fixed.
using Json = nlohmann::ordered_json;

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// One CSV record: fields joined with commas plus a trailing newline.
/// Fields must not contain commas, quotes, or newlines (artifact fields
/// never do); violations throw input_error rather than emit broken CSV.
std::string csv_line(const std::vector<std::string>& fields);

std::string group_to_name(const groups::GroupSpec& spec);

Json group_json(const groups::GroupSpec& spec);
groups::GroupSpec group_from_json(const Json& j);

Json element_json(const groups::Element& g);
groups::Element element_from_json(const Json& j);

Json interval_json(const stats::Interval& iv);
Json estimate_json(const stats::Estimate& e);

/// {"levels": [[elements...]...], "status": ..., "terminated_at": ...}
Json trace_json(const perc::ProcessTrace& t);

/// Header p,radius,trials,successes,estimate,lo95,hi95,seed; one row per probe.
std::string survival_csv(const std::vector<perc::SurvivalEstimate>& rows);

Json threshold_json(const perc::ThresholdEstimate& t);

/// Header n,frozen,successes,trials,estimate,lo95,hi95; one row per point.
std::string curve_csv(const dyn::DensityCurve& curve);

Json curve_json(const dyn::DensityCurve& curve);

/// Fixed six-key layout: query, estimates, curve, verdict, seed, thresholds.
Json dichotomy_json(const dyn::DichotomyReport& r, const Json& query);

/// Writes the whole file, creating parent directories; throws resource_error
/// on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Reads the whole file; throws resource_error when unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace perca::ser
