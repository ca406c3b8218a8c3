#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "higgsbal/balanced.hpp"
#include "higgsbal/experiments.hpp"
#include "higgsbal/flow.hpp"

namespace higgsbal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// Shortest of %.15g..%.17g that reads back exactly.
std::string fmt_real(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string fmt_cplx(cplx c) {
  if (c.imag() == 0.0) return fmt_real(c.real());
  return fmt_real(c.real()) + ":" + fmt_real(c.imag());
}

std::string fmt_poly(const Polynomial& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) out += (i ? ", " : "") + fmt_cplx(p[i]);
  return out;
}

std::string fmt_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key + ": expected a real number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < -1000000 || v > 1000000) throw ConfigError(key + ": integer out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_int(key, item));
  return out;
}

// Coefficients in ascending order; "re" or "re:im".
Polynomial parse_poly(const std::string& key, const std::string& text) {
  Polynomial out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.emplace_back(parse_real(key, item), 0.0);
    } else {
      out.emplace_back(parse_real(key, item.substr(0, colon)), parse_real(key, item.substr(colon + 1)));
    }
  }
  return out;
}

// Tracks which keys were consumed so leftovers can be reported.
class Reader {
public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto it = doc_.values.find(key);
    if (it == doc_.values.end()) return std::nullopt;
    return it->second;
  }
  int get_int(const std::string& key, int def) {
    const auto v = raw(key);
    return v ? parse_int(key, *v) : def;
  }
  double get_real(const std::string& key, double def) {
    const auto v = raw(key);
    return v ? parse_real(key, *v) : def;
  }
  bool get_bool(const std::string& key, bool def) {
    const auto v = raw(key);
    return v ? parse_bool(key, *v) : def;
  }
  std::string get_choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    const auto v = raw(key);
    const std::string s = v ? trim(*v) : def;
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(key + ": expected one of {" + list + "}, got '" + s + "'");
    }
    return s;
  }
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& def) {
    const auto v = raw(key);
    return v ? parse_int_list(key, *v) : def;
  }
  /// Keys "prefix<i>.<j>" or "prefix<i>" for dynamic entries.
  std::vector<std::string> with_prefix(const std::string& prefix) {
    std::vector<std::string> out;
    for (const auto& [k, v] : doc_.values)
      if (k.rfind(prefix, 0) == 0) {
        out.push_back(k);
        used_.insert(k);
      }
    return out;
  }
  void reject_unknown() const {
    for (const auto& [k, v] : doc_.values)
      if (!used_.count(k)) throw ConfigError("unknown key '" + k + "'");
  }

private:
  const ConfigDocument& doc_;
  std::set<std::string> used_;
};

std::vector<int> index_path(const std::string& key, const std::string& prefix, std::size_t parts) {
  const auto fields = split(key.substr(prefix.size()), '.');
  if (fields.size() != parts) throw ConfigError(key + ": malformed index");
  std::vector<int> out;
  for (const auto& f : fields) out.push_back(parse_int(key, f));
  return out;
}

} // namespace

ConfigDocument ConfigDocument::parse(std::istream& in) {
  ConfigDocument doc;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    if (doc.values.count(key)) throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "'");
    doc.values[key] = trim(line.substr(eq + 1));
  }
  return doc;
}

ConfigDocument ConfigDocument::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  return parse(in);
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"balance", "flow",        "sweep",      "bergman",
                                                 "weight",  "stability",   "gram-oracle", "riemann-roch"};
  return names;
}

QuantizationParams ExperimentConfig::params(int level) const {
  QuantizationParams p = QuantizationParams::defaults(phi.rank(), level, tau);
  if (alpha) p.alpha = *alpha;
  if (beta) p.beta = *beta;
  return p;
}

ExperimentConfig resolve_config(const std::string& command, const ConfigDocument& doc,
                                std::optional<std::uint64_t> seed) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), command) == names.end())
    throw ConfigError("unknown subcommand '" + command + "'");
  ExperimentConfig c;
  c.command = command;
  Reader rd(doc);
  auto& out = c.resolved;

  BundleSpec spec;
  spec.degrees = rd.get_ints("degrees", {1, -1});
  spec.twist_m = rd.get_int("twist", 2);
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("degrees: ") + e.what());
  }
  out["degrees"] = fmt_ints(spec.degrees);
  out["twist"] = std::to_string(spec.twist_m);
  const int r = spec.rank();

  c.phi = zero_higgs(spec);
  for (const auto& key : rd.with_prefix("phi.")) {
    const auto idx = index_path(key, "phi.", 2);
    if (idx[0] < 0 || idx[0] >= r || idx[1] < 0 || idx[1] >= r) throw ConfigError(key + ": index out of range");
    c.phi.entries[idx[0]][idx[1]] = parse_poly(key, *rd.raw(key));
  }
  try {
    c.phi.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("phi: ") + e.what());
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (!c.phi.entries[i][j].empty())
        out["phi." + std::to_string(i) + "." + std::to_string(j)] = fmt_poly(c.phi.entries[i][j]);

  c.k = rd.get_int("k", 4);
  c.k_list = rd.get_ints("k_list", {4, 6, 8, 12, 16});
  c.n_t = rd.get_int("n_t", 24);
  c.n_theta = rd.get_int("n_theta", 24);
  c.flow_n_t = rd.get_int("flow.n_t", 12);
  c.flow_n_theta = rd.get_int("flow.n_theta", 12);
  c.tau = rd.get_real("tau", 1.0);
  if (const auto a = rd.raw("alpha"); a && trim(*a) != "auto") c.alpha = parse_real("alpha", *a);
  if (const auto b = rd.raw("beta"); b && trim(*b) != "auto") c.beta = parse_real("beta", *b);
  long long seed_cfg = 0;
  if (const auto s = rd.raw("seed")) seed_cfg = parse_integer("seed", *s);
  if (seed_cfg < 0) throw ConfigError("seed: must be nonnegative");
  c.seed = seed ? *seed : static_cast<std::uint64_t>(seed_cfg);

  out["k"] = std::to_string(c.k);
  out["k_list"] = fmt_ints(c.k_list);
  out["n_t"] = std::to_string(c.n_t);
  out["n_theta"] = std::to_string(c.n_theta);
  out["flow.n_t"] = std::to_string(c.flow_n_t);
  out["flow.n_theta"] = std::to_string(c.flow_n_theta);
  out["tau"] = fmt_real(c.tau);
  out["alpha"] = c.alpha ? fmt_real(*c.alpha) : "auto";
  out["beta"] = c.beta ? fmt_real(*c.beta) : "auto";
  out["seed"] = std::to_string(c.seed);

  c.balance_max_iter = rd.get_int("balance.max_iter", 500);
  c.balance_tol = rd.get_real("balance.tol", 1e-10);
  c.balance_damping = rd.get_real("balance.damping", 1.0);
  c.balance_random_start = rd.get_bool("balance.random_start", false);
  c.balance_degeneration_floor = rd.get_real("balance.degeneration_floor", 1e-10);
  out["balance.max_iter"] = std::to_string(c.balance_max_iter);
  out["balance.tol"] = fmt_real(c.balance_tol);
  out["balance.damping"] = fmt_real(c.balance_damping);
  out["balance.random_start"] = c.balance_random_start ? "true" : "false";
  out["balance.degeneration_floor"] = fmt_real(c.balance_degeneration_floor);

  c.flow_dt = rd.get_real("flow.dt", 2e-3);
  c.flow_max_steps = rd.get_int("flow.max_steps", 20000);
  c.flow_tol = rd.get_real("flow.tol", 1e-8);
  c.flow_min_dt = rd.get_real("flow.min_dt", 1e-9);
  c.flow_max_condition = rd.get_real("flow.max_condition", 1e12);
  c.flow_start = rd.get_choice("flow.start", "reference", {"reference", "radial"});
  c.flow_perturbation = rd.get_real("flow.perturbation", 0.3);
  out["flow.dt"] = fmt_real(c.flow_dt);
  out["flow.max_steps"] = std::to_string(c.flow_max_steps);
  out["flow.tol"] = fmt_real(c.flow_tol);
  out["flow.min_dt"] = fmt_real(c.flow_min_dt);
  out["flow.max_condition"] = fmt_real(c.flow_max_condition);
  out["flow.start"] = c.flow_start;
  out["flow.perturbation"] = fmt_real(c.flow_perturbation);

  c.bergman_metric = rd.get_choice("bergman.metric", "reference", {"reference", "perturbed"});
  c.bergman_perturbation = rd.get_real("bergman.perturbation", 0.3);
  out["bergman.metric"] = c.bergman_metric;
  out["bergman.perturbation"] = fmt_real(c.bergman_perturbation);

  c.subbundle.degree = rd.get_int("subbundle.degree", spec.degrees.front());
  c.subbundle.embedding.assign(r, Polynomial{});
  const auto sub_keys = rd.with_prefix("subbundle.p.");
  if (sub_keys.empty()) c.subbundle.embedding[0] = {1.0};
  for (const auto& key : sub_keys) {
    const auto idx = index_path(key, "subbundle.p.", 1);
    if (idx[0] < 0 || idx[0] >= r) throw ConfigError(key + ": index out of range");
    c.subbundle.embedding[idx[0]] = parse_poly(key, *rd.raw(key));
  }
  out["subbundle.degree"] = std::to_string(c.subbundle.degree);
  for (int i = 0; i < r; ++i)
    if (!c.subbundle.embedding[i].empty()) out["subbundle.p." + std::to_string(i)] = fmt_poly(c.subbundle.embedding[i]);
  c.weight_alpha_beta_inside = rd.get_bool("weight.alpha_beta_inside", true);
  c.weight_t_max = rd.get_real("weight.t_max", 8.0);
  c.weight_t_step = rd.get_real("weight.t_step", 0.25);
  c.weight_base = rd.get_choice("weight.base", "auto", {"auto", "balanced", "reference"});
  out["weight.alpha_beta_inside"] = c.weight_alpha_beta_inside ? "true" : "false";
  out["weight.t_max"] = fmt_real(c.weight_t_max);
  out["weight.t_step"] = fmt_real(c.weight_t_step);
  out["weight.base"] = c.weight_base;

  c.gram_oracle_k_max = rd.get_int("gram_oracle.k_max", 10);
  c.gram_oracle_tol = rd.get_real("gram_oracle.tol", 1e-12);
  out["gram_oracle.k_max"] = std::to_string(c.gram_oracle_k_max);
  out["gram_oracle.tol"] = fmt_real(c.gram_oracle_tol);

  rd.reject_unknown();

  // Module preconditions.
  auto check = [](const std::string& what, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      throw ConfigError(what + ": " + e.what());
    }
  };
  auto admissible = [&](const std::string& key, int k) {
    if (k < 1 || k < spec.min_level())
      throw ConfigError(key + ": level " + std::to_string(k) + " is below the minimum " +
                        std::to_string(std::max(1, spec.min_level())));
    check(key, [&] { c.params(k).validate(r); });
  };
  if (c.n_t < 2 || c.n_theta < 2) throw ConfigError("n_t, n_theta: grid sizes must be at least 2");
  if (c.flow_n_t < 2 || c.flow_n_theta < 2) throw ConfigError("flow.n_t, flow.n_theta: grid sizes must be at least 2");
  if (!(c.tau > 0.0)) throw ConfigError("tau: must be positive");
  admissible("k", c.k);
  if (c.k_list.empty()) throw ConfigError("k_list: must not be empty");
  for (int k : c.k_list) admissible("k_list", k);
  {
    std::vector<int> sorted = c.k_list;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("k_list: repeated level");
  }
  BalanceOptions bo;
  bo.max_iter = c.balance_max_iter;
  bo.tol = c.balance_tol;
  bo.damping = c.balance_damping;
  bo.degeneration_floor = c.balance_degeneration_floor;
  check("balance", [&] { bo.validate(); });
  FlowOptions fo;
  fo.dt = c.flow_dt;
  fo.max_steps = c.flow_max_steps;
  fo.tol = c.flow_tol;
  fo.tau = c.tau;
  fo.min_dt = c.flow_min_dt;
  fo.max_condition = c.flow_max_condition;
  check("flow", [&] { fo.validate(); });
  if (!(c.flow_perturbation >= 0.0)) throw ConfigError("flow.perturbation: must be nonnegative");
  if (!(c.bergman_perturbation >= 0.0)) throw ConfigError("bergman.perturbation: must be nonnegative");
  if (command == "weight") {
    check("subbundle", [&] { c.subbundle.validate(spec); });
    const int hf = c.subbundle.sections(c.k);
    if (hf <= 0 || hf >= basis_dimension(spec, c.k))
      throw ConfigError("subbundle: h0(F (x) L^k) must lie strictly between 0 and N");
  }
  if (!(c.weight_t_max > 0.0) || !(c.weight_t_step > 0.0) || c.weight_t_max / c.weight_t_step > 100000.0)
    throw ConfigError("weight.t_max, weight.t_step: must be positive with at most 1e5 samples");
  if (c.gram_oracle_k_max < std::max(1, spec.min_level()))
    throw ConfigError("gram_oracle.k_max: below the minimum level");
  if (!(c.gram_oracle_tol > 0.0)) throw ConfigError("gram_oracle.tol: must be positive");
  if (command == "stability" && r != 2) throw ConfigError("stability: automated search supports rank 2 only");
  return c;
}

std::string error_json(const std::string& kind, const std::string& message) {
  std::string esc;
  for (char ch : message) {
    if (ch == '"' || ch == '\\') esc += '\\';
    if (ch == '\n') {
      esc += "\\n";
      continue;
    }
    esc += ch;
  }
  return "{\"error\": \"" + kind + "\", \"message\": \"" + esc + "\"}";
}

} // namespace higgsbal
