#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "../tools/cli.hpp"

using namespace capax;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "capax_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

// Runs the binary; stdout and stderr go to files in the scratch directory.
int run_cli(const std::string& args) {
  std::string cmd = std::string(CAPAX_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const std::string& p) { return json::parse(slurp(p)); }

cli::RunConfig parse(std::vector<std::string> args) {
  args.insert(args.begin(), "capax");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  return cli::parse(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config text round-trips and flags override the file") {
  cli::RunConfig c = parse({"verify", "--check", "adams", "--q", "3", "--alpha", "0.3", "--N", "64", "--count", "5",
                            "--seed", "99", "--R", "inf", "--family", "indicators", "--refine", "32,64", "--tol", "1e-7"});
  CHECK(c.command == "verify");
  CHECK(c.params.q == 3.0);
  CHECK(std::isinf(c.R));
  std::ofstream(path("cfg.txt")) << cli::to_config_text(c);
  cli::RunConfig back = parse({"--config", path("cfg.txt")});
  CHECK(back == c);
  CHECK(cli::to_config_text(back) == cli::to_config_text(c));

  cli::RunConfig over = parse({"--config", path("cfg.txt"), "--N", "128"});
  CHECK(over.N == 128);
  CHECK(over.params.alpha == 0.3);
  std::ofstream(path("bad_cfg.txt")) << "alpha=0.3\nbogus=1\n";
  CHECK_THROWS_AS(parse({"capacity", "--config", path("bad_cfg.txt")}), CLI::ParseError);
}

TEST_CASE("capacity result equals the library call and is byte-reproducible") {
  REQUIRE(run_cli("capacity --set ball:0.25 --alpha 0.4 --s 2 --n 1 --N 256 --output " + path("cap1.json")) == 0);
  REQUIRE(run_cli("capacity --set ball:0.25 --alpha 0.4 --s 2 --n 1 --N 256 --output " + path("cap2.json")) == 0);
  CHECK(slurp(path("cap1.json")) == slurp(path("cap2.json")));
  json j = load(path("cap1.json"));
  Params P;
  P.alpha = 0.4;
  Grid g(1, 4.0, 256);
  Mask E = Mask::from_predicate(g, [](const Point& x) { return std::abs(x[0]) <= 0.25; });
  CapacityResult r = capacity(E, P, KernelKind::riesz);
  CHECK(j["result"]["value"].get<double>() == r.value);
  CHECK(j["result"]["extremal"].get<std::vector<double>>() == r.extremal.data());
  CHECK(j["nodes"] == E.count());

  json m = load(path("cap1.json.manifest.json"));
  CHECK(m["config"]["set"] == "ball:0.25");
  CHECK(m.contains("wall_time_seconds"));
  CHECK(m["capax_version"] == kVersion);
}

TEST_CASE("set constructors") {
  Grid g(2, 2.0, 32);
  Mask ball = parse_set("ball:0.5", g);
  Mask ann = parse_set("annulus:0.5:1", g);
  Mask both = parse_set("ball:0.5+annulus:0.5:1", g);
  CHECK(both == (ball | ann));
  Mask shifted = parse_set("cube:0.25@1,-1", g);
  for (std::size_t i : shifted.indices()) {
    CHECK(std::abs(g.position(i)[0] - 1.0) <= 0.25);
    CHECK(std::abs(g.position(i)[1] + 1.0) <= 0.25);
  }
  CHECK_THROWS_AS(parse_set("ball:-1", g), invalid_input);
  CHECK_THROWS_AS(parse_set("cube:0.25@1", g), invalid_input);
  CHECK_THROWS_AS(parse_set("ball:1e-6", g), invalid_input);
}

TEST_CASE("verify runs match the library, are byte-reproducible and record the family seed") {
  const std::string args = "verify --check adams --q 3 --N 64 --count 5 --seed 11 --threads 2";
  REQUIRE(run_cli(args + " --output " + path("v1.json")) == 0);
  REQUIRE(run_cli(args + " --output " + path("v2.json")) == 0);
  REQUIRE(run_cli(args + " --output " + path("v1.csv")) == 0);
  CHECK(slurp(path("v1.json")) == slurp(path("v2.json")));

  Params P;
  P.q = 3.0;
  VerifyOptions opt;
  ConstantReport lib = check_adams(3.0, P, family("mixed", 11, 5, Grid(1, 4.0, 64)), KernelKind::riesz, opt);
  CHECK(slurp(path("v1.json")) == report_to_json(lib).dump(1) + "\n");
  CHECK(slurp(path("v1.csv")) == report_to_csv(lib));
  CHECK(load(path("v1.json.manifest.json"))["family_seed"] == 11);

  // The report command reads a report back and converts it.
  REQUIRE(run_cli("report --input " + path("v1.json") + " --output " + path("v3.csv")) == 0);
  CHECK(slurp(path("v3.csv")) == report_to_csv(lib));

  REQUIRE(run_cli("verify --check ibp --t 1 --N 64 --count 6 --output " + path("ibp.json")) == 0);
  json ibp = load(path("ibp.json"));
  REQUIRE(ibp["samples"].size() == 6);
  for (const auto& s : ibp["samples"]) CHECK(s["ratio"].get<double>() == 1.0);
}

TEST_CASE("field, Choquet and norm commands") {
  REQUIRE(run_cli("potential --set ball:0.5 --N 64 --output " + path("pot.bin")) == 0);
  REQUIRE(run_cli("potential --set ball:0.5 --N 64 --output " + path("pot.json")) == 0);
  std::ifstream bin(path("pot.bin"), std::ios::binary);
  Field u = read_field_binary(bin);
  Grid g(1, 4.0, 64);
  Field f = parse_set("ball:0.5", g).indicator();
  CHECK(u.data() == riesz_potential(f, 0.4).data());
  CHECK(load_field(path("pot.json")).data() == u.data());

  REQUIRE(run_cli("choquet --input " + path("pot.json") + " --N 64 --q 2 --output " + path("ch.json")) == 0);
  Params P;
  P.q = 2.0;
  CapacityOracle oracle(g, P, KernelKind::riesz);
  json ch = load(path("ch.json"));
  CHECK(ch["choquet"].get<double>() == oracle.choquet(u));
  CHECK(ch["lq_cap_norm"].get<double>() == oracle.lq_norm(u, 2.0));

  REQUIRE(run_cli("norm --norm otilde --q 1.5 --set ball:0.5 --N 64 --output " + path("n1.json")) == 0);
  REQUIRE(run_cli("norm --norm otilde --q 1.5 --set ball:0.5 --N 64 --output " + path("n2.json")) == 0);
  CHECK(slurp(path("n1.json")) == slurp(path("n2.json")));
  P.q = 1.5;
  NormEstimate e = otilde_norm(f, P, KernelKind::riesz);
  json n1 = load(path("n1.json"));
  CHECK(n1["estimate"]["upper"].get<double>() == e.upper);
  CHECK(n1["estimate"]["lower"].get<double>() == e.lower);
  CHECK(n1.contains("weight"));

  REQUIRE(run_cli("wolff --set ball:0.5 --N 64 --output " + path("w.json")) == 0);
  CHECK(load_field(path("w.json")).data() == wolff_potential(Measure::from_density(f), 0.4, 2.0).data());

  REQUIRE(run_cli("report --family atoms --count 3 --N 64 --output " + path("fam.json")) == 0);
  CHECK(load(path("fam.json")) == family_manifest(family("atoms", kDefaultFamilySeed, 3, g)));
}

TEST_CASE("exit codes and diagnostics") {
  CHECK(run_cli("capacity --set ball:0.5 --N 64 --budget 5 --output " + path("deg.json")) == 2);
  CHECK(load(path("deg.json"))["result"]["converged"] == false);
  CHECK(run_cli("capacity --set ball:0.25 --alpha 0.9") == 1);
  CHECK(slurp(path("stderr.txt")).find("alpha < n/s") != std::string::npos);
  CHECK(run_cli("capacity --set blob:1") == 1);
  CHECK(slurp(path("stderr.txt")).find("unknown set") != std::string::npos);
  CHECK(run_cli("potential --input " + path("missing.json")) == 1);
  CHECK(slurp(path("stderr.txt")).find("cannot open") != std::string::npos);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("verify --check nope") == 1);
  CHECK(run_cli("verify") == 1);
  CHECK(run_cli("capacity --set ball:0.5 --N 60") == 1);
  CHECK(slurp(path("stderr.txt")).find("power of two") != std::string::npos);
  std::ofstream(path("bad_cfg2.txt")) << "bogus=1\n";
  CHECK(run_cli("capacity --config " + path("bad_cfg2.txt")) == 1);
  CHECK(run_cli("capacity --set ball:0.5 --N 64 --output /nonexistent/dir/x.json") == 1);
}
