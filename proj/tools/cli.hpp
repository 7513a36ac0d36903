#pragma once

#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace qdcli {

enum Exit { exit_pass = 0, exit_check_failed = 1, exit_config = 2 };

struct CliArgs {
  std::string config_file;
  std::vector<std::string> sets;  // key=value overrides
  std::map<std::string, std::string> named;
  bool validate_only = false;
};

inline void add_named(CLI::App* app, CliArgs& a, const std::string& flag, const std::string& key,
                      const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&a, key](const std::string& v) { a.named[key] = v; }, help);
}

inline void add_switch(CLI::App* app, CliArgs& a, const std::string& flag, const std::string& key,
                       const std::string& help) {
  app->add_flag_callback(flag, [&a, key] { a.named[key] = "true"; }, help);
}

inline RunConfig resolve(const std::string& sub, const CliArgs& a) {
  auto cfg = RunConfig::for_subcommand(sub);
  if (!a.config_file.empty()) apply_config_file(cfg, a.config_file);
  for (auto& s : a.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw config_error("--set expects key=value, got '" + s + "'");
    std::string k = trim(s.substr(0, eq));
    if (!default_config().count(k)) throw config_error("--set: unknown key '" + k + "'");
    cfg.set(k, trim(s.substr(eq + 1)));
  }
  for (auto& [k, v] : a.named) cfg.set(k, v);
  return cfg;
}

inline std::vector<Diagnostic> validate_for_run(const RunConfig& c) {
  auto ds = validate(c);
  if (c.subcommand == "schrodinger") {
    try {
      if (c.flag("wigner")) {
        double entries = std::pow(2.0 * static_cast<double>(c.integer("grid")), 2.0 * static_cast<double>(c.integer("d")));
        if (entries > static_cast<double>(wigner_max_entries))
          ds.push_back({"error", "wigner", 0,
                        "full Wigner grid needs " + num_str(entries) + " entries, cap " +
                            std::to_string(wigner_max_entries) + "; use a grid of at most 8 per axis"});
      }
    } catch (const config_error& e) {
      ds.push_back({"error", "wigner", 0, e.what()});
    }
  }
  return ds;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"qdlab: random Schrodinger evolution, kinetic limits and graph bounds"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  CliArgs a;
  app.add_option("--config", a.config_file, "key = value config file with optional [subcommand] sections");
  app.add_option("--set", a.sets, "override a config key, key=value (repeatable)");
  add_named(&app, a, "--seed", "seed", "random seed");
  add_named(&app, a, "--out", "out", "output directory");
  add_named(&app, a, "--budget", "budget", "scales Monte Carlo sizes");
  app.add_flag("--validate", a.validate_only, "print the resolved config and diagnostics, run nothing");

  std::map<std::string, CLI::App*> subs;
  for (auto& s : subcommands()) subs[s] = app.add_subcommand(s);
  subs["selfenergy"]->description("self-energy table and the jump-rate identity");
  add_named(subs["selfenergy"], a, "--profile", "profile", "gaussian | flat | zero");
  add_named(subs["selfenergy"], a, "--alphas", "alphas", "comma separated energies");
  subs["boltzmann"]->description("diffusion constant of the jump process");
  add_named(subs["boltzmann"], a, "--e", "e", "energy shell");
  add_named(subs["boltzmann"], a, "--profile", "profile", "gaussian | flat | zero");
  add_switch(subs["boltzmann"], a, "--check-analytic", "check_analytic", "compare with the closed form at 2%");
  subs["ladder"]->description("ladder terms by resolvent and semigroup routes");
  add_named(subs["ladder"], a, "--k", "k", "ladder order (1 or 2)");
  add_named(subs["ladder"], a, "--lambda", "lambda", "coupling");
  add_switch(subs["ladder"], a, "--heat", "heat", "also run the heat-limit trend");
  subs["combinatorics"]->description("stopping rule, Moebius identity and Duhamel surrogates");
  subs["combinatorics"]
      ->add_option_function<std::vector<std::string>>(
          "--exhaustive",
          [&a](const std::vector<std::string>& kv) {
            static const std::map<std::string, std::string> keys{
                {"M", "exhaustive_M"}, {"len", "exhaustive_len"}, {"K", "exhaustive_K"}};
            for (auto& s : kv) {
              auto eq = s.find('=');
              auto it = eq == std::string::npos ? keys.end() : keys.find(s.substr(0, eq));
              if (it == keys.end()) throw CLI::ValidationError("--exhaustive", "expected M=, len= or K=, got '" + s + "'");
              a.named[it->second] = s.substr(eq + 1);
            }
          },
          "stopping-rule census, e.g. M=2 len=8 K=2")
      ->expected(0, 3);
  subs["surgery"]->description("exponent catalog and kappa feasibility");
  add_named(subs["surgery"], a, "--d", "d", "dimension");
  subs["schrodinger"]->description("direct simulation against the kinetic limit");
  add_named(subs["schrodinger"], a, "--grid", "grid", "points per axis");
  add_named(subs["schrodinger"], a, "--L", "L", "box side");
  add_named(subs["schrodinger"], a, "--lambdas", "lambdas", "comma separated couplings");
  add_named(subs["schrodinger"], a, "--n-real", "n_real", "disorder realizations");
  add_switch(subs["schrodinger"], a, "--wigner", "wigner", "write the full Wigner grid of one realization");
  subs["all-acceptance"]->description("run the acceptance criteria");
  add_named(subs["all-acceptance"], a, "--only", "only", "comma separated criterion ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_config;
  }
  std::string sub;
  for (auto& [name, s] : subs)
    if (s->parsed()) sub = name;
  std::vector<std::string> args(argv, argv + argc);

  RunConfig cfg;
  std::string out_dir = a.named.count("out") ? a.named["out"] : default_config().at("out");
  try {
    cfg = resolve(sub, a);
    out_dir = cfg.str("out");
  } catch (const config_error& e) {
    err << "config error: " << e.what() << "\n";
    if (!a.validate_only) RunOutput(out_dir, sub, args).finish(nullptr, exit_config, "config_error", {{"error", "", 0, e.what()}});
    return exit_config;
  }
  auto diags = validate_for_run(cfg);
  for (auto& d : diags) err << d.str() << "\n";
  if (a.validate_only) {
    out << "[" << sub << "]\n";
    for (auto& [k, v] : cfg.values) out << k << " = " << v << "\n";
    return has_errors(diags) ? exit_config : exit_pass;
  }
  RunOutput ro(out_dir, sub, args);
  if (has_errors(diags)) {
    ro.finish(&cfg, exit_config, "config_error", diags);
    return exit_config;
  }
  int code = exit_check_failed;
  std::string status;
  try {
    if (sub == "selfenergy") code = cmd_selfenergy(cfg, ro);
    else if (sub == "boltzmann") code = cmd_boltzmann(cfg, ro);
    else if (sub == "ladder") code = cmd_ladder(cfg, ro);
    else if (sub == "combinatorics") code = cmd_combinatorics(cfg, ro);
    else if (sub == "surgery") code = cmd_surgery(cfg, ro);
    else if (sub == "schrodinger") code = cmd_schrodinger(cfg, ro);
    else code = cmd_all_acceptance(cfg, ro, out);
    status = code == exit_pass ? "pass" : "check_failed";
  } catch (const config_error& e) {
    diags.push_back({"error", "", 0, e.what()});
    err << "config error: " << e.what() << "\n";
    code = exit_config;
    status = "config_error";
  } catch (const qdlab::domain_error& e) {
    diags.push_back({"error", "", 0, e.what()});
    err << "invalid input: " << e.what() << "\n";
    code = exit_config;
    status = "config_error";
  } catch (const std::exception& e) {
    diags.push_back({"error", "", 0, e.what()});
    err << "check failed: " << e.what() << "\n";
    code = exit_check_failed;
    status = "check_failed";
  }
  ro.finish(&cfg, code, status, diags);
  out << sub << ": " << status << " (exit " << code << "), output in " << ro.dir().string() << "\n";
  return code;
}

}  // namespace qdcli
