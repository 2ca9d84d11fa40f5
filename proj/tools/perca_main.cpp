#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "perca/errors.hpp"
#include "perca/experiment.hpp"
#include "perca/serialize.hpp"

namespace {

using perca::ser::Json;

// Output directory resolution: flag > environment > config > default.
std::string resolve_out_dir(const std::string& flag, const Json& cfg,
                            const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("PERCA_OUT_DIR"))
    if (*env != '\0') return env;
  if (cfg.contains("out_dir")) return cfg.at("out_dir").get<std::string>();
  return fallback;
}

// Thread-count resolution: flag > environment > config (0 = keep config).
int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("PERCA_THREADS")) {
    if (*env != '\0') {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == nullptr || *end != '\0' || v < 1 || v > 256)
        throw perca::input_error("PERCA_THREADS must be an integer in [1, 256]");
      return static_cast<int>(v);
    }
  }
  return 0;
}

Json load_config(const std::string& path) {
  return perca::exp::validate_config(perca::exp::parse_config(perca::ser::read_file(path)));
}

int execute(const Json& normalized, const std::string& out_flag, int threads_flag,
            const std::string& default_dir) {
  const std::filesystem::path out_dir = resolve_out_dir(out_flag, normalized, default_dir);
  const auto result = perca::exp::run_config(normalized, out_dir, resolve_threads(threads_flag));
  for (const auto& check : result.manifest.at("checks"))
    std::cout << (check.at("pass").get<bool>() ? "ok   " : "FAIL ")
              << check.at("label").get<std::string>() << ": "
              << check.at("detail").get<std::string>() << "\n";
  std::cout << "wrote " << (out_dir / "manifest.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percolated cellular automata experiment runner"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_flag;
  int threads_flag = 0;
  bool preset_run = false;

  auto* run = app.add_subcommand("run", "validate and run a JSON experiment config");
  run->add_option("config", config_path, "path to the config file")->required();
  run->add_option("--out-dir", out_flag, "artifact directory (overrides env and config)");
  run->add_option("--threads", threads_flag, "worker threads (overrides env and config)")
      ->check(CLI::Range(1, 256));

  auto* preset = app.add_subcommand("preset", "print (or run) a registry preset");
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_flag("--run", preset_run, "run the preset instead of only printing it");
  preset->add_option("--out-dir", out_flag, "artifact directory (overrides env and config)");
  preset->add_option("--threads", threads_flag, "worker threads (overrides env and config)")
      ->check(CLI::Range(1, 256));

  auto* list = app.add_subcommand("list-presets", "list registry presets");

  auto* validate = app.add_subcommand("validate", "validate a config and print it normalized");
  validate->add_option("config", config_path, "path to the config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (list->parsed()) {
      for (const auto& name : perca::exp::preset_names()) {
        const Json cfg = perca::exp::preset_config(name);
        std::cout << name << "  kind=" << cfg.at("kind").get<std::string>()
                  << "  criterion=" << perca::exp::preset_criterion(name) << "\n";
      }
      return 0;
    }
    if (validate->parsed()) {
      std::cout << load_config(config_path).dump(2) << "\n";
      return 0;
    }
    if (run->parsed()) return execute(load_config(config_path), out_flag, threads_flag, "out");
    if (preset->parsed()) {
      const Json cfg = perca::exp::preset_config(preset_name);
      if (!preset_run) {
        std::cout << cfg.dump(2) << "\n";
        return 0;
      }
      return execute(cfg, out_flag, threads_flag, "out/" + preset_name);
    }
    return 0;
  } catch (const perca::resource_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(perca::exp::ExitCode::ResourceError);
  } catch (const perca::assertion_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(perca::exp::ExitCode::AssertionError);
  } catch (const std::exception& e) {  // input, encoding, JSON: all input errors
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(perca::exp::ExitCode::InputError);
  }
}
