// Acceptance gate: runs every registry preset twice (1 and 8 worker threads),
// evaluates one line per criterion from the run manifests, and exits 0 only
// when all fifteen criteria hold.  All tolerances live in the preset configs
// and runner checks; the only constants added here are the two wall-clock
// budgets.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perca/experiment.hpp"
#include "perca/serialize.hpp"

namespace fs = std::filesystem;
namespace pexp = perca::exp;

namespace {

constexpr double kCouplingBudgetSeconds = 60.0;  // criterion 1, single-threaded
constexpr double kLucasBudgetSeconds = 5.0;      // criterion 4

struct PresetRun {
  pexp::RunResult single;
  pexp::RunResult threaded;
  double single_seconds = 0.0;
};

std::string manifest_detail(const pexp::RunResult& r) {
  const auto& criteria = r.manifest.at("criteria");
  if (criteria.empty()) return "no checks";
  return criteria.at(0).at("detail").get<std::string>();
}

std::string format_seconds(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << s << " s";
  return os.str();
}

}  // namespace

int main() {
  const fs::path base = fs::current_path() / "acceptance_runs";
  fs::remove_all(base);

  std::map<std::string, PresetRun> runs;
  for (const auto& name : pexp::preset_names()) {
    PresetRun pr;
    const auto t0 = std::chrono::steady_clock::now();
    pr.single = pexp::run_preset(name, base / "threads1" / name, 1);
    pr.single_seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(
            std::chrono::steady_clock::now() - t0)
            .count();
    pr.threaded = pexp::run_preset(name, base / "threads8" / name, 8);
    runs.emplace(name, std::move(pr));
  }

  // Criteria 1..14 are the conjunction of their presets' built-in checks,
  // plus the two wall-clock budgets.
  std::map<int, std::vector<std::string>> by_criterion;
  for (const auto& name : pexp::preset_names())
    by_criterion[pexp::preset_criterion(name)].push_back(name);

  bool all_pass = true;
  for (int criterion = 1; criterion <= 14; ++criterion) {
    bool pass = true;
    std::string detail;
    for (const auto& name : by_criterion.at(criterion)) {
      const PresetRun& pr = runs.at(name);
      pass = pass && pr.single.all_passed;
      if (!detail.empty()) detail += " | ";
      detail += name + ": " + manifest_detail(pr.single);
    }
    if (criterion == 1) {
      const double s = runs.at("coupling-f2").single_seconds;
      pass = pass && s < kCouplingBudgetSeconds;
      detail += " | single-threaded in " + format_seconds(s) + " (budget " +
                format_seconds(kCouplingBudgetSeconds) + ")";
    }
    if (criterion == 4) {
      const double s = runs.at("rule90-pascal").single_seconds;
      pass = pass && s < kLucasBudgetSeconds;
      detail += " | completed in " + format_seconds(s) + " (budget " +
                format_seconds(kLucasBudgetSeconds) + ")";
    }
    all_pass = all_pass && pass;
    std::cout << "criterion " << std::setw(2) << criterion << ": "
              << (pass ? "PASS" : "FAIL") << " — " << detail << "\n";
  }

  // Criterion 15: byte-identical artifacts between the two thread counts.
  bool identical = true;
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& [name, pr] : runs) {
    if (pr.single.artifact_names != pr.threaded.artifact_names) {
      identical = false;
      mismatch = name + ": artifact lists differ";
      break;
    }
    for (const auto& artifact : pr.single.artifact_names) {
      ++files;
      if (perca::ser::read_file(pr.single.out_dir / artifact) !=
          perca::ser::read_file(pr.threaded.out_dir / artifact)) {
        identical = false;
        if (mismatch.empty()) mismatch = name + "/" + artifact + " differs";
      }
    }
  }
  all_pass = all_pass && identical;
  std::cout << "criterion 15: " << (identical ? "PASS" : "FAIL") << " — "
            << (identical ? std::to_string(files) + " artifact files byte-identical under 1 and 8 threads"
                          : mismatch)
            << "\n";

  std::cout << (all_pass ? "acceptance: all 15 criteria pass" : "acceptance: FAILURES above")
            << "\n";
  return all_pass ? 0 : 1;
}
