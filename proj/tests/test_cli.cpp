#include "cli.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace qdcli;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qdlab");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qdlab_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json manifest_of(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

fs::path write_file(const std::string& name, const std::string& text) {
  auto p = fs::temp_directory_path() / ("qdlab_cli_test_" + name + ".cfg");
  std::ofstream(p) << text;
  return p;
}

RunConfig parsed(const std::string& sub, const std::string& text) {
  auto c = RunConfig::for_subcommand(sub);
  apply_config_text(c, text);
  return c;
}

const Diagnostic* find_key(const std::vector<Diagnostic>& ds, const std::string& key) {
  for (auto& d : ds)
    if (d.key == key) return &d;
  return nullptr;
}

}  // namespace

TEST(Config, ParseErrorsCarryLineNumbers) {
  try {
    parsed("ladder", "# comment\nlambda = 0.1\nthis has no equals\n");
    FAIL();
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parsed("ladder", "[nosuch]\n"), config_error);
  EXPECT_THROW(parsed("ladder", "[ladder\n"), config_error);
  EXPECT_THROW(parsed("ladder", " = 3\n"), config_error);

  auto p = write_file("bad", "lambda = 0.1\n\n[ladder]\nk\n");
  RunConfig c;
  try {
    apply_config_file(c, p.string());
    FAIL();
  } catch (const config_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind(p.string() + ":4:", 0), 0u) << e.what();
  }
}

TEST(Config, SectionsScopeToTheirSubcommand) {
  std::string text = "lambda = 0.1\n[ladder]\nk = 2\nlambda = 0.2\n[boltzmann]\ne = 0.7\n";
  auto l = parsed("ladder", text);
  EXPECT_EQ(l.str("k"), "2");
  EXPECT_EQ(l.num("lambda"), 0.2);
  EXPECT_EQ(l.str("e"), "0.5");
  auto b = parsed("boltzmann", text);
  EXPECT_EQ(b.str("k"), "1");
  EXPECT_EQ(b.num("lambda"), 0.1);
  EXPECT_EQ(b.num("e"), 0.7);
  EXPECT_EQ(b.line_of.at("e"), 6);
}

TEST(Config, UnknownKeyIsAWarningWithItsLine) {
  auto c = parsed("surgery", "\nfoo = 1 ; trailing\n");
  auto ds = validate(c);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].level, "warning");
  EXPECT_EQ(ds[0].line, 2);
  EXPECT_FALSE(has_errors(ds));
}

TEST(Config, TypedAccessorsReject) {
  auto c = parsed("ladder", "lambda = abc\nk = 1.5\nheat = maybe\nlambdas = 0.1, x\n");
  EXPECT_THROW(c.num("lambda"), config_error);
  EXPECT_THROW(c.integer("k"), config_error);
  EXPECT_THROW(c.flag("heat"), config_error);
  EXPECT_THROW(c.list("lambdas"), config_error);
  try {
    c.num("lambda");
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  auto ok = parsed("ladder", "lambdas = 0.5 , 0.25,\n");
  EXPECT_EQ(ok.list("lambdas"), (std::vector<double>{0.5, 0.25}));
}

TEST(Validate, EmptyConfigIsClean) {
  for (auto& s : subcommands()) {
    auto ds = validate(parsed(s, ""));
    EXPECT_FALSE(has_errors(ds)) << s << ": " << (ds.empty() ? "" : ds[0].str());
  }
}

TEST(Validate, EtaOutsideWindowNamesThePropagatorEstimates) {
  auto c = parsed("ladder", "lambda = 0.05\n\neta = 1e-9\n");
  auto ds = validate(c);
  auto d = find_key(ds, "eta");
  ASSERT_NE(d, nullptr);
  EXPECT_EQ(d->level, "error");
  EXPECT_EQ(d->line, 3);
  EXPECT_NE(d->message.find("propagator estimates"), std::string::npos) << d->message;
  // the upper end of the window is accepted
  c.set("eta", num_str(std::pow(0.05, 2.05)));
  EXPECT_EQ(find_key(validate(c), "eta"), nullptr);
}

TEST(Validate, EpsilonOffTheScalingIsReported) {
  auto ds = validate(parsed("ladder", "epsilon = 0.5\n"));
  auto d = find_key(ds, "epsilon");
  ASSERT_NE(d, nullptr);
  EXPECT_NE(d->message.find("space scaling"), std::string::npos) << d->message;
  EXPECT_EQ(d->line, 1);
  auto t = find_key(validate(parsed("ladder", "t = 3\n")), "t");
  ASSERT_NE(t, nullptr);
  EXPECT_NE(t->message.find("time scaling"), std::string::npos);
}

TEST(Validate, ModelAndBudgetRanges) {
  EXPECT_NE(find_key(validate(parsed("surgery", "d = 2\n")), "d"), nullptr);
  EXPECT_NE(find_key(validate(parsed("surgery", "budget = 0\n")), "budget"), nullptr);
  EXPECT_NE(find_key(validate(parsed("surgery", "tol = 0\n")), "tol"), nullptr);
  EXPECT_NE(find_key(validate(parsed("ladder", "k = 3\n")), "k"), nullptr);
  EXPECT_NE(find_key(validate(parsed("boltzmann", "e = -1\n")), "e"), nullptr);
  EXPECT_NE(find_key(validate(parsed("schrodinger", "lambdas = 0.5\n")), "lambdas"), nullptr);
  EXPECT_NE(find_key(validate(parsed("schrodinger", "grid = 16\n")), "grid"), nullptr);
  EXPECT_TRUE(has_errors(validate(parsed("selfenergy", "profile = lorentz\n"))));
}

TEST(Cli, ValidateEchoesResolvedDefaults) {
  auto r = cli({"--validate", "ladder"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("[ladder]"), std::string::npos);
  EXPECT_NE(r.out.find("lambda = 0.05"), std::string::npos);
  EXPECT_NE(r.out.find("amplitude = 0.3"), std::string::npos);
  EXPECT_NE(r.out.find("eta = \n"), std::string::npos);
  auto bad = cli({"--validate", "--set", "eta=1e-9", "ladder"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("propagator estimates"), std::string::npos);
}

TEST(Cli, PrecedenceFileThenSetThenFlags) {
  auto p = write_file("prec", "seed = 5\nlambda = 0.1\n[ladder]\nk = 2\n");
  auto r = cli({"--config", p.string(), "--set", "lambda=0.2", "--validate", "ladder", "--lambda", "0.3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("seed = 5\n"), std::string::npos);
  EXPECT_NE(r.out.find("k = 2\n"), std::string::npos);
  EXPECT_NE(r.out.find("lambda = 0.3\n"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"ladder", "--no-such-flag"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, BadConfigExitsTwoWithManifest) {
  auto dir = scratch("badcfg");
  auto p = write_file("badcfg", "lambda = 0.05\nkappa = nope\n");
  auto r = cli({"--out", dir.string(), "--config", p.string(), "surgery"});
  EXPECT_EQ(r.code, 2);
  auto m = manifest_of(dir);
  EXPECT_EQ(m["status"], "config_error");
  EXPECT_EQ(m["exit_code"], 2);
  EXPECT_FALSE(m["diagnostics"].empty());

  auto dir2 = scratch("missing");
  EXPECT_EQ(cli({"--out", dir2.string(), "--config", "/nonexistent/x.cfg", "surgery"}).code, 2);
  EXPECT_EQ(manifest_of(dir2)["status"], "config_error");

  auto dir3 = scratch("unknownset");
  EXPECT_EQ(cli({"--out", dir3.string(), "--set", "nosuch=1", "surgery"}).code, 2);
}

TEST(Cli, WignerGridOverTheCapIsAConfigError) {
  auto dir = scratch("wcap");
  auto r = cli({"--out", dir.string(), "schrodinger", "--wigner"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cap"), std::string::npos);
}

TEST(Cli, CombinatoricsPassesAndManifestListsEveryFile) {
  auto dir = scratch("comb");
  auto r = cli({"--out", dir.string(), "--seed", "3", "combinatorics"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = manifest_of(dir);
  EXPECT_EQ(m["status"], "pass");
  EXPECT_EQ(m["seed"], "3");
  EXPECT_EQ(m["subcommand"], "combinatorics");
  for (auto k : {"qdlab", "compiler", "eigen", "boost", "fftw", "nlohmann_json"}) EXPECT_TRUE(m["versions"].contains(k));
  EXPECT_TRUE(m["wall_time_s"].is_number());
  std::set<std::string> listed, on_disk;
  for (auto& f : m["files"]) listed.insert(f.get<std::string>());
  for (auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") on_disk.insert(e.path().filename().string());
  EXPECT_EQ(listed, on_disk);
  auto s = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(s["checks"]["violations"], 0);
  EXPECT_GT(s["checks"]["words"].get<long>(), 0);
}

TEST(Cli, ExhaustiveTokenForm) {
  auto dir = scratch("exh");
  auto r = cli({"--out", dir.string(), "combinatorics", "--exhaustive", "M=2", "len=8", "K=2"});
  EXPECT_EQ(r.code, 0) << r.err;
  auto m = manifest_of(dir);
  EXPECT_EQ(m["config"]["exhaustive_len"], "8");
  EXPECT_EQ(json::parse(slurp(dir / "summary.json"))["checks"]["violations"], 0);
  EXPECT_EQ(cli({"--validate", "combinatorics", "--exhaustive", "Q=2"}).code, 2);
  EXPECT_EQ(cli({"--validate", "combinatorics", "--exhaustive", "M=4"}).code, 2);
}

TEST(Cli, SurgeryReportsEveryCaseAndFailsOnMismatch) {
  auto dir = scratch("surg");
  auto r = cli({"--out", dir.string(), "surgery", "--d", "3"});
  auto cat = surgery_catalog();
  bool all_exact = true;
  for (const auto* list : {&cat.cases, &cat.aggregates})
    for (auto& c : *list) all_exact = all_exact && (c.match == MatchKind::exact || c.match == MatchKind::delta_K);
  EXPECT_EQ(r.code, all_exact ? 0 : 1);
  auto j = json::parse(slurp(dir / "surgery.json"));
  EXPECT_EQ(j["cases"].size(), cat.cases.size() + cat.aggregates.size());
  EXPECT_TRUE(j["feasibility"]["target_feasible"].get<bool>());
  long flagged = 0;
  for (auto& c : j["cases"]) flagged += !c["matches_claim"].get<bool>();
  EXPECT_EQ(flagged > 0, !all_exact);
  EXPECT_EQ(manifest_of(dir)["exit_code"], r.code);
}

TEST(Cli, BoltzmannFlatMatchesClosedForm) {
  auto dir = scratch("boltz");
  auto r = cli({"--out", dir.string(), "boltzmann", "--profile", "flat", "--check-analytic"});
  EXPECT_EQ(r.code, 0) << r.err;
  auto s = json::parse(slurp(dir / "summary.json"));
  EXPECT_NEAR(s["checks"]["analytic"]["closed_form"].get<double>(), 1.0 / (96 * std::pow(qdlab::pi, 4)), 1e-12);
}

TEST(Cli, SelfEnergyAndLadderPass) {
  auto d1 = scratch("se");
  EXPECT_EQ(cli({"--out", d1.string(), "selfenergy", "--alphas", "0.25,1"}).code, 0);
  auto d2 = scratch("lad");
  EXPECT_EQ(cli({"--out", d2.string(), "--set", "samples=20000", "ladder"}).code, 0);
}

TEST(Cli, SmallSchrodingerWritesWignerSidecar) {
  auto dir = scratch("schr");
  auto r = cli({"--out", dir.string(), "--set", "samples=5000", "schrodinger", "--grid", "8", "--L", "2", "--lambdas",
                "0.5,0.35", "--n-real", "1", "--wigner"});
  EXPECT_LE(r.code, 1) << r.err;
  auto side = json::parse(slurp(dir / "wigner.json"));
  long n = side["points_per_axis"];
  EXPECT_EQ(n, 16);
  EXPECT_EQ(fs::file_size(dir / "wigner.f64"), static_cast<std::uintmax_t>(std::pow(n, 6)) * sizeof(double));
  EXPECT_NEAR(side["mass"].get<double>(), 1.0, 1e-9);
  auto csv = slurp(dir / "kinetic.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  fs::remove_all(dir);
}

TEST(Cli, AcceptanceSubsetWritesOnlyChosen) {
  auto dir = scratch("acc");
  auto r = cli({"--out", dir.string(), "all-acceptance", "--only", "2,5"});
  EXPECT_EQ(r.code, 0) << r.out;
  auto j = json::parse(slurp(dir / "acceptance.json"));
  ASSERT_EQ(j["criteria"].size(), 2u);
  EXPECT_EQ(j["criteria"][0]["id"], 2);
  EXPECT_EQ(j["criteria"][1]["id"], 5);
  EXPECT_NE(r.out.find("PASS criterion 2"), std::string::npos);
  EXPECT_EQ(cli({"--out", dir.string(), "all-acceptance", "--only", "11"}).code, 2);
}

TEST(Cli, DataFilesAreBitIdenticalAcrossRuns) {
  for (auto sub : {"combinatorics", "ladder", "boltzmann"}) {
    auto a = scratch(std::string("rep_a_") + sub), b = scratch(std::string("rep_b_") + sub);
    std::vector<std::string> extra{"--seed", "11", "--set", "samples=3000", sub};
    auto args_a = extra, args_b = extra;
    args_a.insert(args_a.begin(), {"--out", a.string()});
    args_b.insert(args_b.begin(), {"--out", b.string()});
    int ca = cli(args_a).code, cb = cli(args_b).code;
    EXPECT_EQ(ca, cb);
    auto files = manifest_of(a)["files"];
    ASSERT_FALSE(files.empty());
    for (auto& f : files) {
      std::string name = f;
      EXPECT_EQ(slurp(a / name), slurp(b / name)) << sub << "/" << name;
    }
  }
}

TEST(Csv, QuotesAndNumbers) {
  Csv c;
  c.header = {"a", "b", "c", "d"};
  c.add(std::string("x,y"), 0.1, 3L, true);
  EXPECT_EQ(c.str(), "a,b,c,d\n\"x,y\",0.10000000000000001,3,true\n");
  Csv q;
  q.header = {"s"};
  q.add("say \"hi\"");
  EXPECT_EQ(q.str(), "s\n\"say \"\"hi\"\"\"\n");
}
