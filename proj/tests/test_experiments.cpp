#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "higgsbal/experiments.hpp"
#include "higgsbal/parallel.hpp"

using namespace higgsbal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "higgsbal_test_experiments" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

ExperimentConfig config(const std::string& command, const std::string& text) {
  return resolve_config(command, ConfigDocument::parse_string(text));
}

int run(const ExperimentConfig& cfg, const fs::path& dir) {
  std::ostringstream log;
  return run_experiment(cfg, dir, log);
}

// First non-comment line.
std::string csv_header(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return "";
}

const char* kCoHiggs = "degrees = 1, -1\ntwist = 2\nphi.1.0 = 1\n";

} // namespace

TEST_CASE("config documents parse key = value lines") {
  const auto doc = ConfigDocument::parse_string("# comment\n  k = 5  \n\ndegrees = 1, -1 # trailing\n");
  CHECK(doc.values.size() == 2);
  CHECK(doc.values.at("k") == "5");
  CHECK(doc.values.at("degrees") == "1, -1");
  CHECK_THROWS_AS(ConfigDocument::parse_string("k = 1\nk = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse_string("just words\n"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse_string(" = 3\n"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::load("/nonexistent/higgsbal.cfg"), ConfigError);
}

TEST_CASE("resolved config carries every setting") {
  const ExperimentConfig c = config("balance", kCoHiggs);
  CHECK(c.phi.rank() == 2);
  CHECK(c.phi.bundle.twist_m == 2);
  CHECK(c.phi.entries[1][0] == Polynomial{1.0});
  CHECK(c.k == 4);
  CHECK(c.resolved.at("phi.1.0") == "1");
  CHECK(c.resolved.at("tau") == "1");
  CHECK(c.resolved.at("flow.perturbation") == "0.3");
  CHECK(c.resolved.at("alpha") == "auto");
  for (const char* key : {"degrees", "twist", "k", "k_list", "n_t", "n_theta", "balance.tol", "flow.dt",
                          "bergman.metric", "weight.base", "gram_oracle.k_max", "seed"})
    CHECK(c.resolved.count(key) == 1);

  const QuantizationParams p = c.params(8);
  CHECK(p.alpha == doctest::Approx(0.25));
  CHECK(p.beta == doctest::Approx(0.5));
  const ExperimentConfig d = config("balance", std::string(kCoHiggs) + "alpha = 0.1\nbeta = auto\n");
  CHECK(d.params(8).alpha == 0.1);
  CHECK(d.params(8).beta == doctest::Approx(0.5));
}

TEST_CASE("complex coefficients and seed override") {
  const ExperimentConfig c =
      resolve_config("balance", ConfigDocument::parse_string("phi.1.0 = 1:-2\nseed = 9\n"), std::uint64_t{42});
  CHECK(c.phi.entries[1][0][0] == cplx(1.0, -2.0));
  CHECK(c.resolved.at("phi.1.0") == "1:-2");
  CHECK(c.seed == 42);
  CHECK(config("balance", "seed = 9\n").seed == 9);
}

TEST_CASE("config validation rejects bad input before computing") {
  auto bad = [](const std::string& command, const std::string& text) {
    CHECK_THROWS_AS(config(command, text), ConfigError);
  };
  bad("balance", "bogus = 1\n");
  bad("balance", "k = four\n");
  bad("balance", "k = 4.5\n");
  bad("balance", "degrees = -1, 1\n");
  bad("balance", "degrees = 3\n");
  bad("balance", "phi.1.0 = 1, 1, 1, 1\n");  // bound a_2 + m - a_1 = 0
  bad("balance", "phi.2.0 = 1\n");
  bad("balance", "phi.1 = 1\n");
  bad("balance", "degrees = 0, -3\nk = 2\n");
  bad("balance", "k_list = 4, 4\n");
  bad("balance", "n_t = 1\n");
  bad("balance", "tau = -1\n");
  bad("balance", "balance.damping = 0\n");
  bad("balance", "balance.random_start = maybe\n");
  bad("flow", "flow.dt = 0\n");
  bad("flow", "flow.start = random\n");
  bad("bergman", "bergman.metric = flat\n");
  bad("weight", "subbundle.degree = 2\n");
  bad("weight", "subbundle.degree = -1\nsubbundle.p.0 = 1\n");
  bad("weight", "weight.t_step = 0\n");
  bad("stability", "degrees = 1, 0, -1\n");
  bad("launch", "");
  CHECK_NOTHROW(config("balance", "phi.0.1 = 1, 0, 0, 0, 1\n"));
}

TEST_CASE("riemann-roch dimension count") {
  for (const auto& [degrees, slope, offset] :
       std::vector<std::tuple<std::vector<int>, int, int>>{{{1, -1}, 2, 2}, {{0, 0}, 2, 2}, {{2, 0, -1}, 3, 4}}) {
    const BundleSpec spec{degrees, -2};
    const auto rows = riemann_roch_check(spec, {spec.min_level() < 1 ? 1 : spec.min_level(), 5, 9, 20});
    for (const auto& r : rows) {
      CHECK(r.dimension == r.formula);
      CHECK(r.dimension == slope * r.k + offset);
    }
  }
  CHECK_THROWS_AS(riemann_roch_check(BundleSpec{{0, -3}, -2}, {2}), DomainError);
}

TEST_CASE("gram-oracle passes on the trivial bundle") {
  const fs::path dir = scratch("gram_oracle");
  const ExperimentConfig c = config("gram-oracle", "degrees = 0, 0\n");
  CHECK(run(c, dir) == kExitOk);
  const auto j = load_json(dir / "gram_oracle.json");
  CHECK(j["results"]["pass"] == true);
  CHECK(j["results"]["max_rel_error"].get<double>() <= 1e-12);
  CHECK(j["results"]["entries"].size() == 10);
  CHECK(csv_header(dir / "gram_oracle.csv") == "k,N,max_rel_error");

  // An under-integrating grid is caught.
  const fs::path coarse = scratch("gram_oracle_coarse");
  CHECK(run(config("gram-oracle", "degrees = 0, 0\nn_t = 3\n"), coarse) == kExitFailure);
}

TEST_CASE("exit codes distinguish outcomes") {
  const fs::path a = scratch("unstable");
  CHECK(run(config("balance", "degrees = 1, -1\ntwist = 2\nk = 3\n"), a) == kExitDiverged);
  const auto j = load_json(a / "balance.json");
  CHECK(j["results"]["status"] == "diverged");
  CHECK(j["exit_code"] == kExitDiverged);
  CHECK(csv_header(a / "balance_history.csv") == "iter,residual,min_eig");

  const fs::path b = scratch("max_iter");
  CHECK(run(config("balance", std::string(kCoHiggs) + "balance.max_iter = 3\n"), b) == kExitMaxIter);

  const fs::path c = scratch("converged");
  CHECK(run(config("balance", std::string(kCoHiggs) + "n_t = 12\nn_theta = 12\n"), c) == kExitOk);
  const auto r = load_json(c / "balance.json")["results"];
  CHECK(r["t_step_residual"].get<double>() < 1e-8);
  CHECK(r["moment_map_residual"].get<double>() < 1e-8);
  CHECK(r["bergman_defect"].get<double>() < 1e-8);
  CHECK(r["hitchin_residual"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(fs::exists(c / "metric.csv"));
}

TEST_CASE("artifacts embed tool version and resolved config") {
  const fs::path dir = scratch("embed");
  const ExperimentConfig c = config("stability", "degrees = 1, -1\ntwist = 2\n");
  CHECK(run(c, dir) == kExitOk);
  const auto j = load_json(dir / "stability.json");
  CHECK(j["schema_version"] == 1);
  CHECK(j["tool_version"] == kToolVersion);
  CHECK(j["command"] == "stability");
  CHECK(j["config"]["degrees"] == "1, -1");
  CHECK(j["results"]["verdict"] == "unstable");
  CHECK(j["config"].size() == c.resolved.size());
  const std::string csv = slurp(dir / "stability.csv");
  CHECK(csv.rfind(std::string("# higgsbal ") + kToolVersion, 0) == 0);
  CHECK(csv.find("# degrees = 1, -1\n") != std::string::npos);
  for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
  const std::string text = std::string(kCoHiggs) +
                           "n_t = 10\nn_theta = 10\nk_list = 4, 8\nflow.n_t = 8\nflow.n_theta = 8\n"
                           "balance.random_start = true\nbergman.metric = perturbed\nseed = 5\n";
  for (const std::string command : {"balance", "sweep", "bergman", "weight"}) {
    const ExperimentConfig c = config(command, text + (command == "weight" ? "subbundle.degree = -1\nsubbundle.p.1 = 1\n" : ""));
    const fs::path a = scratch(command + "_a");
    const fs::path b = scratch(command + "_b");
    set_thread_count(1);
    const int ca = run(c, a);
    set_thread_count(3);
    const int cb = run(c, b);
    set_thread_count(1);
    CHECK(ca == cb);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      CHECK_MESSAGE(slurp(entry.path()) == slurp(b / entry.path().filename()), entry.path().string());
    }
    CHECK(files >= 2);
  }
  // A different seed changes the random start.
  const fs::path a = scratch("seed_a");
  const fs::path b = scratch("seed_b");
  run(resolve_config("balance", ConfigDocument::parse_string(text), std::uint64_t{1}), a);
  run(resolve_config("balance", ConfigDocument::parse_string(text), std::uint64_t{2}), b);
  CHECK(slurp(a / "balance_history.csv") != slurp(b / "balance_history.csv"));
}

TEST_CASE("weight falls back to the reference metric when balance diverges") {
  const fs::path dir = scratch("weight_fallback");
  const ExperimentConfig c = config("weight", "degrees = 1, -1\ntwist = 2\nk = 3\n");
  CHECK(run(c, dir) == kExitOk);
  const auto r = load_json(dir / "weight.json")["results"];
  CHECK(r["balance"]["status"] == "diverged");
  CHECK(r["base"] == "reference");
  CHECK(r["closed_form_total"].get<double>() == doctest::Approx(-4.0 * kPi / 3.0).epsilon(1e-6));
  CHECK(csv_header(dir / "weight_curve.csv") == "t,value");

  const fs::path strict = scratch("weight_strict");
  CHECK(run(config("weight", "degrees = 1, -1\ntwist = 2\nk = 3\nweight.base = balanced\n"), strict) ==
        kExitDiverged);
}

TEST_CASE("error records are single-line JSON") {
  const std::string e = error_json("config", "bad \"value\"\nline two");
  CHECK(e.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(e);
  CHECK(j["error"] == "config");
  CHECK(j["message"] == "bad \"value\"\nline two");
}
