#pragma once

// Configuration-driven experiments. A config is a plain-text document of
// `key = value` lines ('#' starts a comment); see README.md for the schema.
// Every run writes a JSON report (schema version, tool version, resolved
// config, results) and CSV tables with headers into the output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "higgsbal/higgs.hpp"
#include "higgsbal/stability.hpp"

namespace higgsbal {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,   // check failed or runtime error
  kExitDiverged = 2,  // expected for unstable inputs
  kExitMaxIter = 3,
  kExitConfig = 4,
};

/// Raised for malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raw key/value document. Duplicate keys and malformed lines are errors.
struct ConfigDocument {
  std::map<std::string, std::string> values;

  static ConfigDocument parse(std::istream& in);
  static ConfigDocument parse_string(const std::string& text);
  static ConfigDocument load(const std::filesystem::path& path);
};

const std::vector<std::string>& subcommands();

/// Fully resolved, validated experiment settings.
struct ExperimentConfig {
  std::string command;
  HiggsSpec phi;
  int k = 4;
  std::vector<int> k_list;
  int n_t = 24;
  int n_theta = 24;
  int flow_n_t = 12;
  int flow_n_theta = 12;
  double tau = 1.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::uint64_t seed = 0;

  int balance_max_iter = 500;
  double balance_tol = 1e-10;
  double balance_damping = 1.0;
  bool balance_random_start = false;
  double balance_degeneration_floor = 1e-10;

  double flow_dt = 2e-3;
  int flow_max_steps = 20000;
  double flow_tol = 1e-8;
  double flow_min_dt = 1e-9;
  double flow_max_condition = 1e12;
  std::string flow_start = "reference";  // reference | radial
  double flow_perturbation = 0.3;

  std::string bergman_metric = "reference";  // reference | perturbed
  double bergman_perturbation = 0.3;

  SubbundleSpec subbundle;
  bool weight_alpha_beta_inside = true;
  double weight_t_max = 8.0;
  double weight_t_step = 0.25;
  std::string weight_base = "auto";  // auto | balanced | reference

  int gram_oracle_k_max = 10;
  double gram_oracle_tol = 1e-12;

  /// Canonical key -> value strings for every setting, defaults included.
  std::map<std::string, std::string> resolved;

  QuantizationParams params(int level) const;
};

/// Validates keys, types and module preconditions. `seed` overrides the
/// config's seed when given. Throws ConfigError.
ExperimentConfig resolve_config(const std::string& command, const ConfigDocument& doc,
                                std::optional<std::uint64_t> seed = std::nullopt);

/// Runs one subcommand, writing artifacts into out_dir; returns an ExitCode.
/// Progress lines go to log.
int run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// One JSON line {"error": kind, "message": ...} for machine consumption.
std::string error_json(const std::string& kind, const std::string& message);

/// Writes data to path through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& data);

struct RiemannRochRow {
  int k = 0;
  int dimension = 0;
  int formula = 0;
};
/// basis_dimension against rk k + deg E + rk for every k.
std::vector<RiemannRochRow> riemann_roch_check(const BundleSpec& spec, const std::vector<int>& k_list);

} // namespace higgsbal
