#pragma once

// subcommand bodies: each writes its data files and returns 0 (checks hold) or 1

#include "io.hpp"
#include "qdlab/acceptance.hpp"
#include "qdlab/evalue.hpp"

namespace qdcli {

using namespace qdlab;

inline long budgeted(const RunConfig& c, const std::string& key, long floor_ = 2) {
  return std::max(floor_, static_cast<long>(std::llround(c.num(key) * c.num("budget"))));
}

inline std::uint64_t seed_of(const RunConfig& c) { return static_cast<std::uint64_t>(c.integer("seed")); }

inline json summary_json(bool ok, json checks) { return {{"ok", ok}, {"checks", std::move(checks)}}; }

// self-energy table: extrapolated and principal-value routes, and total jump rate = 2 I
inline int cmd_selfenergy(const RunConfig& c, RunOutput& out) {
  auto prof = profile(c);
  int d = static_cast<int>(c.integer("d"));
  Csv t;
  t.header = {"alpha", "re", "im", "re_pv", "im_direct", "quadrature_error", "jump_rate_over_2I"};
  double worst = 0.0, spread = 0.0;
  for (double a : c.list("alphas")) {
    if (!(a > 0)) throw config_error(c.where("alphas") + "alphas must be > 0");
    auto s = self_energy(a, prof, {1e-2, 1e-3, 1e-4}, d);
    auto pv = self_energy_pv(a, prof, d, c.num("tol"));
    double im = self_energy_imag(a, prof, d, c.num("tol"));
    double ratio = 1.0;
    if (im > 0 && d == 3) {
      Vec v = Vec::Zero(3);
      v(2) = std::sqrt(2 * a);
      ratio = total_jump_rate(v, prof) / (2 * im);
      worst = std::max(worst, std::abs(ratio - 1));
    }
    spread = std::max(spread, std::abs(s.re_part - pv.re_part) / std::max(1.0, std::abs(pv.re_part)));
    t.add(a, s.re_part, s.im_part, pv.re_part, im, s.quadrature_error, ratio);
  }
  bool ok = worst <= 1e-4;
  out.write_csv("selfenergy.csv", t);
  out.write_json("summary.json", summary_json(ok, {{"jump_rate_max_rel", worst}, {"tol", 1e-4},
                                                    {"extrapolated_vs_pv_max_rel", spread}}));
  return ok ? 0 : 1;
}

// diffusion constant by both routes; --check-analytic compares with the closed form at 2%
inline int cmd_boltzmann(const RunConfig& c, RunOutput& out) {
  auto prof = profile(c);
  double e = c.num("e");
  BoltzmannBudget B;
  B.n_traj = budgeted(c, "samples", 100);
  auto rep = diffusion_coefficient(e, prof, B, seed_of(c), static_cast<int>(c.integer("d")));
  Csv t;
  t.header = {"method", "e", "D", "stderr", "n_samples", "closed_form", "rel"};
  for (auto* est : {&rep.green_kubo, &rep.msd})
    t.add(est->method, e, est->D, est->stderr_, static_cast<long>(est->n_samples), rep.closed_form,
          est->D / rep.closed_form - 1);
  bool ok = rep.routes_agree;
  json checks = {{"routes_agree", rep.routes_agree}, {"relaxation_rate", rep.relaxation_rate},
                 {"isotropy_max_z", rep.isotropy_max_z}};
  if (c.flag("check_analytic")) {
    double g = rep.green_kubo.D / rep.closed_form - 1, m = rep.msd.D / rep.closed_form - 1;
    bool an = std::abs(g) < 0.02 && std::abs(m) < 0.02;
    checks["analytic"] = {{"closed_form", rep.closed_form}, {"gk_rel", g}, {"msd_rel", m}, {"tol", 0.02}, {"ok", an}};
    ok = ok && an;
  }
  out.write_csv("diffusion.csv", t);
  out.write_json("summary.json", summary_json(ok, checks));
  return ok ? 0 : 1;
}

// k-th ladder term by the resolvent and semigroup routes (5%), optionally the heat-limit trend
inline int cmd_ladder(const RunConfig& c, RunOutput& out) {
  auto prof = profile(c);
  auto P = model_params(c);
  auto init = InitialState::shell(c.num("init_rho"), c.num("init_width"), P.d);
  int k = static_cast<int>(c.integer("k"));
  auto theta = theta_fn(theta_table(prof, P.d));
  auto res = ladder_term_resolvent(P.t, k, P, Observable::one(), init, prof, theta, c.num("tol"));
  auto sg = ladder_term_semigroup(P.t, k, P, Observable::one(), init, prof, seed_of(c), budgeted(c, "samples"));
  double rel = res.value.real() / sg.value.real() - 1.0;
  bool ok = std::abs(rel) < 0.05;
  Csv t;
  t.header = {"k", "route", "value_re", "value_im", "stderr"};
  for (auto* r : {&res, &sg}) t.add(k, r->route, r->value.real(), r->value.imag(), r->stderr_);
  out.write_csv("ladder.csv", t);
  json checks = {{"lambda", P.lambda}, {"t", P.t}, {"rel", rel}, {"tol", 0.05}, {"routes_agree", ok}};
  if (c.flag("heat")) {
    ModelParams tmpl;
    tmpl.kappa = P.kappa;
    tmpl.delta = P.delta;
    auto obs = Observable::gaussian(0.75, [](double) { return 1.0; }, P.d);
    long n = budgeted(c, "samples") / 5 + 2;
    auto rep = heat_limit_residual(c.num("heat_T"), obs, init, c.list("heat_lambdas"), tmpl, prof, seed_of(c) + 1, n,
                                   boltzmann_diffusion(prof, P.d));
    Csv h;
    h.header = {"lambda", "tau", "K", "semigroup_sum", "stderr", "target", "gap"};
    for (auto& r : rep.rows) h.add(r.lambda, r.tau, r.K, r.semigroup_sum, r.stderr_, r.target, r.gap);
    out.write_csv("heat.csv", h);
    checks["heat_monotone"] = rep.monotone;
    checks["heat_warning"] = rep.warning;
    ok = ok && rep.monotone;
  }
  out.write_json("summary.json", summary_json(ok, checks));
  return ok ? 0 : 1;
}

// stopping-rule census, Moebius identity, Duhamel surrogates
inline int cmd_combinatorics(const RunConfig& c, RunOutput& out) {
  bool ok = true;
  auto ex = stopping_exhaustiveness_check(static_cast<int>(c.integer("exhaustive_M")),
                                          static_cast<int>(c.integer("exhaustive_len")),
                                          static_cast<int>(c.integer("exhaustive_K")));
  ok = ok && ex.violations == 0 && ex.prefix_stability_violations == 0;
  Csv st;
  st.header = {"class", "count"};
  for (auto& [tag, n] : ex.tally) st.add(tag, n);
  out.write_csv("stopping_tally.csv", st);

  Csv mo;
  mo.header = {"k", "M", "lhs", "rhs", "identity_ok", "partitions", "bound_checked", "bound_violations"};
  for (int k = 1; k <= c.integer("moebius_k"); ++k)
    for (int M = 1; M <= c.integer("moebius_M"); ++M) {
      auto r = moebius_identity_check(k, M, seed_of(c) + 10 * k + M, 6);
      ok = ok && r.identity_ok && r.bound_violations == 0;
      mo.add(k, M, static_cast<long>(r.lhs), static_cast<long>(r.rhs), r.identity_ok, r.partitions, r.bound_checked,
             r.bound_violations);
    }
  out.write_csv("moebius.csv", mo);

  Csv du;
  du.header = {"dim", "N", "residual", "regroup_gap", "regroup_vs_direct", "tree_nodes", "ok"};
  std::vector<int> dims{4, 8};
  if (c.integer("duhamel_dim") > 8) dims.push_back(static_cast<int>(c.integer("duhamel_dim")));
  for (int dim : dims)
    for (int N = 1; N <= c.integer("duhamel_N"); ++N) {
      auto r = duhamel_matrix_check(dim, N, 2.0, seed_of(c) + 100 * dim + N);
      ok = ok && r.ok();
      du.add(dim, N, r.residual, r.regroup_gap, r.regroup_vs_direct, r.tree_nodes, r.ok());
    }
  out.write_csv("duhamel.csv", du);
  out.write_json("summary.json",
                 summary_json(ok, {{"words", ex.words},
                                   {"violations", ex.violations},
                                   {"prefix_stability_violations", ex.prefix_stability_violations},
                                   {"examples", ex.examples}}));
  return ok ? 0 : 1;
}

// exponent catalog and kappa feasibility; mismatched or relaxed cases fail
inline int cmd_surgery(const RunConfig& c, RunOutput& out) {
  int d = static_cast<int>(c.integer("d"));
  auto cat = surgery_catalog();
  json cases = json::array();
  bool ok = true;
  Csv t;
  t.header = {"name", "kind", "claimed", "computed", "match", "threshold"};
  auto emit = [&](const CaseResult& r, const char* kind) {
    bool hit = r.match == MatchKind::exact || r.match == MatchKind::delta_K;
    ok = ok && hit;
    cases.push_back({{"name", r.name},
                     {"kind", kind},
                     {"claimed", r.claimed.str()},
                     {"computed", r.computed.str()},
                     {"logs", r.logs},
                     {"match", match_name(r.match)},
                     {"matches_claim", hit},
                     {"threshold", r.threshold},
                     {"trace", r.trace}});
    t.add(r.name, kind, r.claimed.str(), r.computed.str(), match_name(r.match), r.threshold);
  };
  for (auto& r : cat.cases) emit(r, "case");
  for (auto& r : cat.aggregates) emit(r, "aggregate");
  auto f = kappa_feasibility(d);
  auto sys = [](const FeasibilitySystem& s) {
    return json{{"name", s.name},         {"best_kappa", rat_str(s.best_kappa)}, {"best_q", s.best_q},
                {"q_lo", s.q_lo_at_target}, {"q_hi", s.q_hi_at_target},        {"target_feasible", s.target_feasible}};
  };
  json feas = {{"d", d},
               {"global", rat_str(f.global)},
               {"target", rat_str(f.target)},
               {"systems", {sys(f.sys1), sys(f.sys2)}},
               {"target_feasible", f.target_feasible()}};
  ok = ok && f.target_feasible();
  out.write_csv("surgery.csv", t);
  out.write_json("surgery.json", {{"cases", cases}, {"feasibility", feas}, {"ok", ok}});
  return ok ? 0 : 1;
}

// disorder-averaged simulation against the jump process; optional full Wigner grid on small boxes
inline int cmd_schrodinger(const RunConfig& c, RunOutput& out) {
  DisorderRun run;
  run.box.grid = static_cast<int>(c.integer("grid"));
  run.box.L = c.num("L");
  run.box.dt = c.num("dt");
  run.box.d = static_cast<int>(c.integer("d"));
  run.prof = profile(c);
  run.seed = seed_of(c);
  Vec vbar = Vec::Zero(run.box.d);
  vbar(run.box.d - 1) = 1.0;
  run.init = InitialState::packet(vbar, 0.3);
  auto lams = c.list("lambdas");
  double Tk = c.num("T_kin");
  KineticSettings S;
  S.n_real = budgeted(c, "n_real", 1);
  S.n_traj = budgeted(c, "samples", 1000);
  int last = run.box.d - 1;
  auto rep = kinetic_compare(lams, Tk, Observable::velocity([last](const Vec& v) { return v(last); }), run, S);
  Csv t;
  t.header = {"lambda", "t", "sim", "sim_stderr", "kinetic", "gap", "gap_stderr", "leakage", "boundary_contaminated"};
  for (auto& r : rep.rows)
    t.add(r.lambda, r.t, r.sim, r.sim_stderr, rep.kinetic, r.gap, r.gap_stderr, r.leakage, r.boundary_contaminated);
  out.write_csv("kinetic.csv", t);
  bool ok = rep.gap_decreasing;
  json checks = {{"gap_decreasing", rep.gap_decreasing}, {"leakage_decreasing", rep.leakage_decreasing},
                 {"kinetic", rep.kinetic}, {"kinetic_stderr", rep.kinetic_stderr}, {"e0", rep.e0}};

  if (c.flag("wigner")) {
    double lam = lams.front(), tt = Tk / (lam * lam);
    double eps = c.has("epsilon") ? c.num("epsilon") : std::pow(lam, 2 + c.num("kappa") / 2);
    auto rng = stream(run.seed, 0);
    auto R = sample_potential(run.box, run.prof, rng);
    auto w = evolve(make_wave(run.box, run.init), R.V, lam, tt);
    auto W = wigner_rescaled(w, eps);
    out.write_binary("wigner.f64", W.values);
    out.write_json("wigner.json", {{"file", "wigner.f64"},
                                   {"dtype", "float64 little-endian"},
                                   {"layout", "[x][v], each flattened with the last axis fastest"},
                                   {"d", W.d},
                                   {"points_per_axis", W.n2},
                                   {"dX", W.dX},
                                   {"dV", W.dV},
                                   {"epsilon", W.epsilon},
                                   {"lambda", lam},
                                   {"t", tt},
                                   {"seed", run.seed},
                                   {"realization", 0},
                                   {"mass", W.mass()}});
    checks["wigner_mass"] = W.mass();
  }
  out.write_json("summary.json", summary_json(ok, checks));
  return ok ? 0 : 1;
}

inline int cmd_all_acceptance(const RunConfig& c, RunOutput& out, std::ostream& log) {
  AcceptanceOptions o;
  o.seed = seed_of(c);
  o.budget = c.num("budget");
  std::vector<int> ids;
  for (double x : c.list("only")) {
    if (x != std::floor(x) || x < 1 || x > static_cast<double>(criteria().size()))
      throw config_error(c.where("only") + "only: criterion ids are 1.." + std::to_string(criteria().size()));
    ids.push_back(static_cast<int>(x));
  }
  if (ids.empty())
    for (std::size_t i = 1; i <= criteria().size(); ++i) ids.push_back(static_cast<int>(i));
  Csv t;
  t.header = {"id", "name", "ok", "detail"};
  json arr = json::array();
  bool all = true;
  for (int id : ids) {
    auto r = criteria()[id - 1](o);
    log << pass_line(r) << std::endl;
    all = all && r.pass();
    t.add(r.id, r.name, r.ok, r.detail);
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"pass", r.pass()},
                   {"ok", r.ok},
                   {"seconds", r.seconds},
                   {"time_limit", r.time_limit},
                   {"detail", r.detail},
                   {"metrics", r.metrics}});
  }
  out.write_csv("acceptance.csv", t);
  out.write_json("acceptance.json", {{"criteria", arr}, {"all_pass", all}});
  return all ? 0 : 1;
}

}  // namespace qdcli
