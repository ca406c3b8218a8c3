// higgsbal <subcommand> --config <path> --out <dir> [--seed <int>] [--threads <int>]
//
// Thread count: --threads, else HIGGSBAL_THREADS, else the hardware concurrency.
// Artifacts do not depend on the thread count.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "higgsbal/experiments.hpp"
#include "higgsbal/parallel.hpp"

using namespace higgsbal;

namespace {

int default_threads() {
  if (const char* env = std::getenv("HIGGSBAL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1 && n <= 4096) return static_cast<int>(n);
    throw ConfigError("HIGGSBAL_THREADS: expected a positive integer, got '" + std::string(env) + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced metrics for twisted Higgs bundles on the Riemann sphere"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Config file (key = value lines); defaults apply when omitted");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Seed overriding the config seed");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 4096));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    set_thread_count(threads ? *threads : default_threads());
    const ConfigDocument doc = config_path.empty() ? ConfigDocument{} : ConfigDocument::load(config_path);
    const ExperimentConfig cfg = resolve_config(command, doc, seed);
    return run_experiment(cfg, out_dir, std::cerr);
  } catch (const ConfigError& e) {
    std::cout << error_json("config", e.what()) << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cout << error_json("domain", e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cout << error_json("runtime", e.what()) << "\n";
    return kExitFailure;
  }
}
