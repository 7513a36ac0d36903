#pragma once

// key = value run configuration: defaults <- file (global keys, then [subcommand] section) <- command line

#include "qdlab/core.hpp"
#include "qdlab/schrodinger.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qdcli {

using qdlab::config_error;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"selfenergy", "boltzmann",   "ladder",        "combinatorics",
                                          "surgery",    "schrodinger", "all-acceptance"};
  return s;
}

// every key with its default; "" means unset (derived from the scaling relations)
inline const std::map<std::string, std::string>& default_config() {
  static const std::map<std::string, std::string> m{
      // model
      {"d", "3"},
      {"lambda", "0.05"},
      {"kappa", "0.05"},
      {"delta", "0.01"},
      {"T", "1"},
      {"eta", ""},
      {"epsilon", ""},
      {"t", ""},
      {"profile", "gaussian"},
      {"amplitude", "1"},
      // budgets
      {"seed", "1"},
      {"budget", "1"},
      {"samples", "100000"},
      {"tol", "1e-6"},
      {"out", "qdlab_out"},
      // selfenergy
      {"alphas", "0.1,0.25,0.5,1,2"},
      // boltzmann
      {"e", "0.5"},
      {"check_analytic", "false"},
      // ladder
      {"k", "1"},
      {"init_rho", "1"},
      {"init_width", "0.25"},
      {"heat", "false"},
      {"heat_T", "10"},
      {"heat_lambdas", "0.3,0.2,0.1"},
      // combinatorics
      {"exhaustive_M", "2"},
      {"exhaustive_len", "8"},
      {"exhaustive_K", "2"},
      {"moebius_k", "5"},
      {"moebius_M", "6"},
      {"duhamel_dim", "12"},
      {"duhamel_N", "4"},
      // schrodinger
      {"grid", "64"},
      {"L", "8"},
      {"dt", "0.02"},
      {"lambdas", "0.5,0.35,0.25"},
      {"T_kin", "1"},
      {"n_real", "8"},
      {"wigner", "false"},
      // all-acceptance
      {"only", ""},
  };
  return m;
}

// per-subcommand defaults layered over default_config()
inline const std::map<std::string, std::map<std::string, std::string>>& subcommand_defaults() {
  static const std::map<std::string, std::map<std::string, std::string>> m{
      {"ladder", {{"amplitude", "0.3"}, {"T", "0.5"}}},
      {"schrodinger", {{"amplitude", "0.3"}}},
      {"all-acceptance", {{"seed", "20240601"}}},
  };
  return m;
}

struct Diagnostic {
  std::string level;  // error | warning
  std::string key;
  int line = 0;       // 0: not from a file line
  std::string message;
  std::string str() const {
    std::ostringstream os;
    os << level;
    if (line > 0) os << " (line " << line << ")";
    if (!key.empty()) os << " [" << key << "]";
    os << ": " << message;
    return os.str();
  }
};

struct RunConfig {
  std::string subcommand;
  std::map<std::string, std::string> values = default_config();
  std::map<std::string, int> line_of;  // file line that set the key
  std::vector<Diagnostic> parse_notes;

  bool has(const std::string& k) const {
    auto it = values.find(k);
    return it != values.end() && !it->second.empty();
  }
  const std::string& str(const std::string& k) const {
    auto it = values.find(k);
    if (it == values.end()) throw config_error("unknown key " + k);
    return it->second;
  }
  double num(const std::string& k) const {
    const auto& s = str(k);
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw config_error(where(k) + k + " = '" + s + "' is not a number");
    return v;
  }
  long integer(const std::string& k) const {
    double v = num(k);
    if (v != std::floor(v)) throw config_error(where(k) + k + " = '" + str(k) + "' is not an integer");
    return static_cast<long>(v);
  }
  bool flag(const std::string& k) const {
    const auto& s = str(k);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off" || s.empty()) return false;
    throw config_error(where(k) + k + " = '" + s + "' is not a boolean");
  }
  std::vector<double> list(const std::string& k) const {
    std::vector<double> out;
    std::stringstream ss(str(k));
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
      if (a == std::string::npos) continue;
      item = item.substr(a, b - a + 1);
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(item, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != item.size()) throw config_error(where(k) + k + ": '" + item + "' is not a number");
      out.push_back(v);
    }
    return out;
  }
  std::string where(const std::string& k) const {
    auto it = line_of.find(k);
    return it == line_of.end() ? "" : "line " + std::to_string(it->second) + ": ";
  }
  static RunConfig for_subcommand(const std::string& sub) {
    RunConfig c;
    c.subcommand = sub;
    auto it = subcommand_defaults().find(sub);
    if (it != subcommand_defaults().end())
      for (auto& [k, v] : it->second) c.values[k] = v;
    return c;
  }
  void set(const std::string& k, const std::string& v, int line = 0) {
    values[k] = v;
    if (line > 0)
      line_of[k] = line;
    else
      line_of.erase(k);
  }
};

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// '#' or ';' comments; [section] headers name a subcommand whose keys apply only to that subcommand
inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  std::set<std::string> sub(subcommands().begin(), subcommands().end());
  std::vector<std::pair<std::string, std::pair<std::string, int>>> scoped;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find_first_of("#;");
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw config_error("line " + std::to_string(line) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!sub.count(section)) throw config_error("line " + std::to_string(line) + ": unknown section [" + section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw config_error("line " + std::to_string(line) + ": expected key = value");
    std::string k = trim(s.substr(0, eq)), v = trim(s.substr(eq + 1));
    if (k.empty()) throw config_error("line " + std::to_string(line) + ": empty key");
    if (!default_config().count(k)) {
      cfg.parse_notes.push_back({"warning", k, line, "unknown key ignored"});
      continue;
    }
    if (section.empty())
      cfg.set(k, v, line);
    else if (section == cfg.subcommand)
      scoped.push_back({k, {v, line}});
  }
  for (auto& [k, vl] : scoped) cfg.set(k, vl.first, vl.second);
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    apply_config_text(cfg, ss.str());
  } catch (const config_error& e) {
    throw config_error(path + ":" + std::string(e.what()).substr(5));  // "line N: ..." -> "path:N: ..."
  }
}

// ModelParams from the resolved keys; explicit eta / epsilon / t override the derived values
inline qdlab::ModelParams model_params(const RunConfig& c) {
  auto P = qdlab::ModelParams::scaled(static_cast<int>(c.integer("d")), c.num("lambda"), c.num("kappa"), c.num("delta"),
                                      c.num("T"));
  if (c.has("eta")) P.eta = c.num("eta");
  if (c.has("epsilon")) P.epsilon = c.num("epsilon");
  if (c.has("t")) P.t = c.num("t");
  return P;
}

inline qdlab::PotentialProfile profile(const RunConfig& c) {
  const auto& p = c.str("profile");
  double a = c.num("amplitude");
  if (p == "gaussian") return qdlab::PotentialProfile::gaussian(a);
  if (p == "flat") return qdlab::PotentialProfile::flat(a);
  if (p == "zero") return qdlab::PotentialProfile::zero();
  throw config_error(c.where("profile") + "profile must be gaussian, flat or zero, got '" + p + "'");
}

// checks the model relations and budget sanity without running anything
inline std::vector<Diagnostic> validate(const RunConfig& c) {
  std::vector<Diagnostic> out = c.parse_notes;
  auto err = [&](const std::string& k, const std::string& m) {
    int line = c.line_of.count(k) ? c.line_of.at(k) : 0;
    out.push_back({"error", k, line, m});
  };
  auto guard = [&](auto&& f) {
    try {
      f();
    } catch (const config_error& e) {
      out.push_back({"error", "", 0, e.what()});
    }
  };
  guard([&] {
    for (const auto& k : {"d", "lambda", "kappa", "delta", "T", "amplitude", "budget", "samples", "tol", "seed"}) c.num(k);
    profile(c);
    auto P = model_params(c);
    for (auto& m : P.diagnostics()) {
      std::string key = m.rfind("eta", 0) == 0 ? "eta"
                        : m.rfind("epsilon", 0) == 0 ? "epsilon"
                        : m.rfind("t ", 0) == 0 ? "t"
                        : m.rfind("d ", 0) == 0 ? "d"
                        : m.rfind("lambda", 0) == 0 ? "lambda"
                        : m.rfind("kappa", 0) == 0 ? "kappa"
                        : m.rfind("delta", 0) == 0 ? "delta"
                                                   : "";
      err(key, m);
    }
    if (!(c.num("budget") > 0)) err("budget", "budget must be > 0");
    if (c.num("samples") < 2) err("samples", "samples must be >= 2");
    if (!(c.num("tol") > 0 && c.num("tol") < 0.1)) err("tol", "tol must lie in (0, 0.1)");
    if (c.num("seed") < 0) err("seed", "seed must be >= 0");
  });
  if (c.subcommand == "schrodinger")
    guard([&] {
      qdlab::BoxConfig b;
      b.grid = static_cast<int>(c.integer("grid"));
      b.L = c.num("L");
      b.dt = c.num("dt");
      auto lams = c.list("lambdas");
      if (lams.size() < 2) err("lambdas", "need at least two lambdas");
      for (double lam : lams) {
        if (!(lam > 0)) err("lambdas", "lambdas must be > 0");
        for (auto& m : b.diagnostics(lam, c.num("delta"))) err("grid", m);
      }
      if (c.integer("n_real") < 1) err("n_real", "n_real must be >= 1");
    });
  if (c.subcommand == "ladder")
    guard([&] {
      long k = c.integer("k");
      if (k < 1 || k > 2) err("k", "the resolvent route covers k = 1, 2");
      if (c.flag("heat") && c.list("heat_lambdas").size() < 2) err("heat_lambdas", "need at least two lambdas");
    });
  if (c.subcommand == "combinatorics")
    guard([&] {
      long M = c.integer("exhaustive_M"), len = c.integer("exhaustive_len"), K = c.integer("exhaustive_K");
      if (M < 1 || M > 3) err("exhaustive_M", "alphabet size must lie in 1..3 for exhaustive enumeration");
      if (len < 1 || len > 10) err("exhaustive_len", "word length must lie in 1..10 for exhaustive enumeration");
      if (K < 1 || K > 2) err("exhaustive_K", "K must lie in 1..2");
      if (c.integer("moebius_k") > 5 || c.integer("moebius_M") > 6) err("moebius_k", "Moebius check covers k <= 5, M <= 6");
      if (c.integer("duhamel_N") < 1 || c.integer("duhamel_dim") < 2) err("duhamel_N", "duhamel_N >= 1, duhamel_dim >= 2");
    });
  if (c.subcommand == "boltzmann")
    guard([&] {
      if (!(c.num("e") > 0)) err("e", "e must be > 0");
    });
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  for (auto& d : ds)
    if (d.level == "error") return true;
  return false;
}

}  // namespace qdcli
