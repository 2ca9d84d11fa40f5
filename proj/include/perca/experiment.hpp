#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "perca/serialize.hpp"

/// Reproducible experiment runner.  A run is described by a single JSON
/// config (kind + group + seed + kind-specific params), validated strictly
/// before any computation, and produces a directory of artifacts plus a
/// manifest.  Identical configs and seeds yield byte-identical artifacts
/// regardless of thread count; wall-clock timing goes to a separate log that
/// is not part of the artifact set.
namespace perca::exp {

inline constexpr const char* kToolVersion = "perca 1.0.0";

/// Process exit codes used by the CLI and reported by run helpers.
enum class ExitCode : int {
  Ok = 0,
  InputError = 1,     // bad config, unknown preset, malformed JSON
  ResourceError = 2,  // exceeded budgets, unwritable outputs
  AssertionError = 3  // a built-in cross-check failed
};

struct CriterionResult {
  int id = 0;  // acceptance criterion the run reproduces; 0 = none
  bool pass = false;
  std::string detail;
};

struct RunResult {
  std::filesystem::path out_dir;
  ser::Json manifest;
  std::vector<std::string> artifact_names;  // sorted, manifest.json included
  bool all_passed = true;                   // conjunction over criteria (empty = true)
};

/// Parses config text; throws input_error on malformed JSON.
ser::Json parse_config(const std::string& text);

/// Strict validation: every field checked by name and type, unknown fields
/// rejected with their path.  Returns the normalized config (fixed key
/// order, defaults filled in).
ser::Json validate_config(const ser::Json& raw);

/// The normalized config minus execution-environment fields (threads,
/// out_dir): what the config hash and the manifest record.
ser::Json canonical_config(const ser::Json& normalized);

/// Runs a validated config.  `threads_override` > 0 replaces the config's
/// thread count; the override never changes results, only wall time.
RunResult run_config(const ser::Json& normalized, const std::filesystem::path& out_dir,
                     int threads_override = 0);

/// Preset registry: each preset reproduces one acceptance criterion.
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
ser::Json preset_config(const std::string& name);  // throws input_error on unknown name
int preset_criterion(const std::string& name);

/// Convenience: validate + run a preset into out_dir.
RunResult run_preset(const std::string& name, const std::filesystem::path& out_dir,
                     int threads_override = 0);

}  // namespace perca::exp
