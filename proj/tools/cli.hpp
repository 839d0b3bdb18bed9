#pragma once

// capax command line: RunConfig, its flat key=value form, and dispatch.
// Exit status 0 ok, 2 results written but a solver hit its budget, 1
// invalid input.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "CLI11.hpp"
#include "capax/capax.hpp"

namespace capax::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"capacity", "potential", "wolff", "choquet", "norm", "verify", "report"};
  return c;
}

inline const std::vector<std::string>& norm_names() {
  static const std::vector<std::string> c{"f", "lq", "m", "otilde", "kv", "n", "lambda", "beta"};
  return c;
}

struct RunConfig {
  std::string command;
  Params params;
  double L = 4.0;
  int N = 128;
  std::string kind = "riesz";
  std::string input;
  std::string set;
  std::uint64_t seed = kDefaultFamilySeed;
  double tol = 1e-6;
  int levels = 48;
  int threads = 1;
  std::string output;
  std::string check;
  std::string family;
  int count = 8;
  double t = 1.0;
  double R = std::numeric_limits<double>::infinity();
  std::string norm = "f";
  std::string variant = "plain";
  std::string weight = "witness";
  std::string refine;
  int budget = SolverOptions{}.budget;

  Grid grid() const { return Grid(params.n, L, N); }
  KernelKind kernel() const { return kernel_kind_from_string(kind); }

  std::vector<int> refine_points() const {
    std::vector<int> out;
    if (refine.empty()) return out;
    for (const auto& s : capax::detail::split(refine, ',')) {
      try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        out.push_back(v);
      } catch (const std::exception&) {
        throw invalid_input("bad refine list '" + refine + "' (expected e.g. 64,128,256)");
      }
    }
    return out;
  }

  /// Default family of a check.
  std::string family_for_check() const {
    if (!family.empty()) return family;
    if (check == "boundedness") return "atoms";
    if (check == "upper_tri" || check == "wolff_weak") return "measures";
    if (check == "newnorm2") return "indicators";
    return "mixed";
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    auto key = [](const RunConfig& c) {
      return std::tie(c.command, c.params.n, c.params.alpha, c.params.s, c.params.q, c.params.p, c.params.r, c.L, c.N, c.kind,
                      c.input, c.set, c.seed, c.tol, c.levels, c.threads, c.output, c.check, c.family, c.count, c.t, c.R,
                      c.norm, c.variant, c.weight, c.refine, c.budget);
    };
    return key(a) == key(b);
  }
};

namespace detail {

inline std::string real_text(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Flat key=value text; reading it back with --config reproduces the config.
inline std::string to_config_text(const RunConfig& c) {
  std::ostringstream os;
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) os << k << '=' << '"' << v << '"' << '\n';
  };
  auto num = [&](const char* k, double v) { os << k << '=' << detail::real_text(v) << '\n'; };
  put("command", c.command);
  os << "n=" << c.params.n << '\n';
  num("alpha", c.params.alpha);
  num("s", c.params.s);
  num("q", c.params.q);
  num("p", c.params.p);
  num("r", c.params.r);
  num("L", c.L);
  os << "N=" << c.N << '\n';
  put("kind", c.kind);
  put("input", c.input);
  put("set", c.set);
  os << "seed=" << c.seed << '\n';
  num("tol", c.tol);
  os << "levels=" << c.levels << '\n';
  os << "threads=" << c.threads << '\n';
  put("output", c.output);
  put("check", c.check);
  put("family", c.family);
  os << "count=" << c.count << '\n';
  num("t", c.t);
  num("R", c.R);
  put("norm", c.norm);
  put("variant", c.variant);
  put("weight", c.weight);
  put("refine", c.refine);
  os << "budget=" << c.budget << '\n';
  return os.str();
}

inline json config_to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"params", params_to_json(c.params)},
              {"L", c.L},
              {"N", c.N},
              {"kind", c.kind},
              {"input", c.input},
              {"set", c.set},
              {"seed", c.seed},
              {"tol", c.tol},
              {"levels", c.levels},
              {"threads", c.threads},
              {"output", c.output},
              {"check", c.check},
              {"family", c.family},
              {"count", c.count},
              {"t", c.t},
              {"R", capax::detail::real(c.R)},
              {"norm", c.norm},
              {"variant", c.variant},
              {"weight", c.weight},
              {"refine", c.refine},
              {"budget", c.budget}};
}

inline void setup(CLI::App& app, RunConfig& c) {
  app.description("capax: capacities, potentials and inequality checks on uniform grids");
  app.add_option("command", c.command, "capacity | potential | wolff | choquet | norm | verify | report")
      ->check(CLI::IsMember(commands()));
  app.add_option("--n", c.params.n, "dimension (1, 2 or 3)");
  app.add_option("--alpha", c.params.alpha, "smoothness alpha");
  app.add_option("--s", c.params.s, "integrability s > 1");
  app.add_option("--q", c.params.q, "exponent q >= 1");
  app.add_option("--p", c.params.p, "exponent p > 1");
  app.add_option("--r", c.params.r, "exponent 0 < r <= s");
  app.add_option("--N", c.N, "points per axis (power of two)");
  app.add_option("--L", c.L, "box half width");
  app.add_option("--kind", c.kind, "riesz | bessel")->check(CLI::IsMember({"riesz", "bessel"}));
  app.add_option("--tol", c.tol, "relative duality-gap tolerance");
  app.add_option("--seed", c.seed, "family seed");
  app.add_option("--levels", c.levels, "capacity solves per Choquet integral");
  app.add_option("--threads", c.threads, "worker cap for verify")->check(CLI::PositiveNumber);
  app.add_option("--output", c.output, "result file (.json, .csv for reports, .bin for fields)");
  app.add_option("--check", c.check, "verify check name");
  app.add_option("--family", c.family, "family name (mixed, indicators, measures, atoms)");
  app.add_option("--count", c.count, "family size")->check(CLI::NonNegativeNumber);
  app.add_option("--set", c.set, "ball:R, cube:a, annulus:r1:r2, optional @x,y,z, joined by +");
  app.add_option("--input", c.input, "input field, mask, measure or report file");
  app.add_option("--t", c.t, "IBP exponent t");
  app.add_option("--R", c.R, "Wolff truncation radius (inf = none)");
  app.add_option("--norm", c.norm, "f | lq | m | otilde | kv | n | lambda | beta")->check(CLI::IsMember(norm_names()));
  app.add_option("--variant", c.variant, "N-norm variant: plain | a1");
  app.add_option("--weight", c.weight, "main2 weights: witness | constant")->check(CLI::IsMember({"witness", "constant"}));
  app.add_option("--refine", c.refine, "comma-separated points per axis for a refinement study");
  app.add_option("--budget", c.budget, "capacity solver iteration budget")->check(CLI::PositiveNumber);
  app.set_config("--config", "", "flat key=value file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
}

/// Parses argv into a config; throws CLI::ParseError.
inline RunConfig parse(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app;
  setup(app, c);
  app.parse(argc, argv);
  return c;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write output file '" + path + "'");
  out << text;
  if (!out) throw invalid_input("failed writing output file '" + path + "'");
}

inline void write_field(const std::string& path, const Field& f) {
  if (has_suffix(path, ".bin")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw invalid_input("cannot write output file '" + path + "'");
    write_field_binary(out, f);
    return;
  }
  write_text(path, field_to_json(f).dump(1) + "\n");
}

inline Field input_field(const RunConfig& c, const Grid& g) {
  if (!c.input.empty()) {
    Field f = load_field(c.input);
    if (!(f.grid() == g)) throw invalid_input("input field grid does not match --n/--L/--N");
    return f;
  }
  if (!c.set.empty()) return parse_set(c.set, g).indicator();
  throw invalid_input("this command needs --input or --set");
}

inline json header(const RunConfig& c) {
  return json{{"command", c.command}, {"kind", c.kind}, {"params", params_to_json(c.params)}, {"grid", grid_to_json(c.grid())}};
}

struct Outcome {
  json result;
  std::string text;  // alternative result body (CSV)
  std::optional<Field> field;
  bool degraded = false;
};

inline Outcome run_capacity(const RunConfig& c, std::ostream& log) {
  const Grid g = c.grid();
  const KernelKind kind = c.kernel();
  c.params.validate(kind);
  Mask E = !c.input.empty() ? load_mask(c.input) : (!c.set.empty() ? parse_set(c.set, g) : throw invalid_input("capacity needs --set or --input"));
  if (!(E.grid() == g)) throw invalid_input("input mask grid does not match --n/--L/--N");
  SolverOptions so;
  so.tol = c.tol;
  so.budget = c.budget;
  CapacityResult r = obstacle_solver(g, c.params.alpha, c.params.s, kind)->solve(E.indicator(), so);
  Outcome o;
  o.result = header(c);
  o.result["set"] = c.set.empty() ? c.input : c.set;
  o.result["nodes"] = E.count();
  o.result["result"] = capacity_result_to_json(r);
  o.degraded = !r.converged;
  log << "capacity = " << detail::real_text(r.value) << "  (gap " << detail::real_text(r.gap) << ", " << r.iterations
      << " iterations" << (r.converged ? "" : ", NOT converged") << (r.outside_middle_half ? ", set reaches outside the middle half" : "")
      << ")\n";
  return o;
}

inline Outcome run_potential(const RunConfig& c, std::ostream& log) {
  const Grid g = c.grid();
  const KernelKind kind = c.kernel();
  c.params.validate(kind);
  Field f = input_field(c, g);
  Field u = potential(f, c.params.alpha, kind);
  Outcome o;
  o.field = u;
  log << (kind == KernelKind::riesz ? "Riesz" : "Bessel") << " potential: max " << detail::real_text(u.max()) << ", integral "
      << detail::real_text(integrate(u)) << "\n";
  return o;
}

inline Outcome run_wolff(const RunConfig& c, std::ostream& log) {
  const Grid g = c.grid();
  c.params.validate(c.kernel());
  Measure mu(g);
  if (!c.input.empty()) mu = load_measure(c.input);
  else if (!c.set.empty()) mu = Measure::from_density(parse_set(c.set, g).indicator());
  else throw invalid_input("wolff needs --input or --set");
  if (!(mu.grid == g)) throw invalid_input("input measure grid does not match --n/--L/--N");
  Field W = wolff_potential(mu, c.params.alpha, c.params.s, c.R);
  Outcome o;
  o.field = W;
  log << "Wolff potential: max " << detail::real_text(W.max()) << ", min " << detail::real_text(W.min()) << "\n";
  return o;
}

inline Outcome run_choquet(const RunConfig& c, std::ostream& log) {
  const Grid g = c.grid();
  const KernelKind kind = c.kernel();
  c.params.validate(kind);
  Field f = input_field(c, g).abs();
  CapacityOracle oracle(g, c.params, kind, c.tol, c.levels);
  double value = oracle.choquet(f);
  double lq = oracle.lq_norm(f, c.params.q);
  Outcome o;
  o.result = header(c);
  o.result["choquet"] = capax::detail::real(value);
  o.result["lq_cap_norm"] = capax::detail::real(lq);
  o.result["capacity_solves"] = oracle.solves();
  o.degraded = oracle.degraded();
  log << "Choquet integral = " << detail::real_text(value) << ", L^" << c.params.q << "(cap) norm = " << detail::real_text(lq)
      << "\n";
  return o;
}

inline Outcome run_norm(const RunConfig& c, std::ostream& log) {
  const Grid g = c.grid();
  const KernelKind kind = c.kernel();
  c.params.validate(kind);
  Field f = input_field(c, g);
  SpaceOptions so;
  so.tol = c.tol;
  so.levels = c.levels;
  SpaceEvaluator ev(g, c.params, kind, so);
  NormEstimate e;
  bool weight = false;
  if (c.norm == "f") e = ev.oracle().f_norm(f, c.params.r);
  else if (c.norm == "lq") {
    double v = ev.cap_norm(f.abs(), c.params.q);
    e.lower = e.upper = v;
    e.witness_ref = "choquet";
  } else if (c.norm == "m") e = ev.m_norm(f);
  else if (c.norm == "otilde") e = ev.otilde_norm(f), weight = true;
  else if (c.norm == "kv") e = ev.kv_norm(f);
  else if (c.norm == "n") e = ev.n_norm(f, n_variant_from_string(c.variant)), weight = true;
  else if (c.norm == "lambda") e = ev.lambda_functional(f);
  else e = ev.beta_functional(f);
  Outcome o;
  o.result = header(c);
  o.result["norm"] = c.norm;
  if (c.norm == "n") o.result["variant"] = to_string(n_variant_from_string(c.variant));
  o.result["estimate"] = norm_estimate_to_json(e);
  if (weight && !f.is_zero()) o.result["weight"] = weight_witness_to_json(ev.last_weight());
  o.degraded = !e.converged || ev.oracle().degraded();
  log << c.norm << " norm in [" << detail::real_text(e.lower) << ", " << detail::real_text(e.upper) << "]";
  for (const auto& fl : e.heuristic_flags) log << " " << fl;
  log << "\n";
  return o;
}

inline ConstantReport verify_on(const RunConfig& c, const Grid& g) {
  const KernelKind kind = c.kernel();
  VerifyOptions opt;
  opt.tol = c.tol;
  opt.levels = c.levels;
  opt.threads = c.threads;
  Family fam = family(c.family_for_check(), c.seed, c.count, g);
  const Params& P = c.params;
  switch (check_from_string(c.check)) {
    case Check::csim: return check_csim(P, fam, kind, opt);
    case Check::adams: return check_adams(P.q, P, fam, kind, opt);
    case Check::main2:
      return check_main2(P.q, P, fam, kind, c.weight == "constant" ? Main2Weight::constant : Main2Weight::otilde_witness, opt);
    case Check::ibp: return check_ibp(c.t, P, fam, kind, opt);
    case Check::boundedness: return check_boundedness(P, fam, c.R, opt);
    case Check::upper_tri: return check_upper_tri(P, fam, kind, opt);
    case Check::wolff_weak: return check_wolff_weak_sweep(P, fam, kind, 4, opt);
    case Check::newnorm2: return check_newnorm2(P.q, P, fam, kind, opt);
    case Check::kv_equiv: return check_kv_equiv(P.q, P, fam, kind, opt);
    case Check::main3: return check_main3(P, fam, kind, opt);
    case Check::weights: return check_weights(P, fam, kind, opt);
  }
  throw invalid_input("unknown check");
}

inline void summarise(const ConstantReport& r, std::ostream& log) {
  log << r.label << " on " << r.family << " (seed " << r.family_seed << ", " << r.samples.size() << " rows, N = " << r.grid.points
      << "): max ratio " << detail::real_text(r.max_ratio) << "\n";
  for (const auto& b : r.bands())
    log << "  " << (b.quantity.empty() ? "ratio" : b.quantity) << ": [" << detail::real_text(b.min_ratio) << ", "
        << detail::real_text(b.max_ratio) << "] over " << b.samples << " samples\n";
  if (!r.refinement.empty()) log << "  refinement drift " << detail::real_text(refinement_drift(r)) << "\n";
  for (const auto& f : r.flags) log << "  flag: " << f << "\n";
}

inline Outcome report_outcome(const ConstantReport& r, const RunConfig& c) {
  Outcome o;
  if (has_suffix(c.output, ".csv")) o.text = report_to_csv(r);
  else o.result = report_to_json(r);
  o.degraded = std::find(r.flags.begin(), r.flags.end(), "solver_degraded") != r.flags.end();
  return o;
}

inline Outcome run_verify(const RunConfig& c, std::ostream& log) {
  if (c.check.empty()) throw invalid_input("verify needs --check (" + [] {
    std::string all;
    for (const auto& [k, name] : check_names()) all += (all.empty() ? "" : ", ") + name;
    return all;
  }() + ")");
  check_from_string(c.check);
  c.params.validate(c.kernel());
  const Grid g = c.grid();
  auto pts = c.refine_points();
  ConstantReport r = pts.empty() ? verify_on(c, g)
                                 : refinement_study(g, pts, [&](const Grid& gi) { return verify_on(c, gi); });
  summarise(r, log);
  return report_outcome(r, c);
}

inline ConstantReport report_from_json(const json& j) {
  ConstantReport r;
  try {
    r.inequality_id = check_from_string(j.at("inequality_id").get<std::string>());
    r.label = j.at("label").get<std::string>();
    const auto& p = j.at("params");
    r.params.n = p.at("n");
    r.params.alpha = p.at("alpha");
    r.params.s = p.at("s");
    r.params.q = p.at("q");
    r.params.p = p.at("p");
    r.params.r = p.at("r");
    r.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    r.family = j.at("family").get<std::string>();
    r.family_seed = j.at("family_seed").get<std::uint64_t>();
    r.grid = grid_from_json(j.at("grid"));
    auto num = [](const json& v) {
      if (v.is_number()) return v.get<double>();
      std::string s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      return std::numeric_limits<double>::quiet_NaN();
    };
    for (const auto& [k, v] : j.at("settings").items()) r.settings.push_back({k, num(v)});
    for (const auto& s : j.at("samples")) {
      Sample x;
      x.id = s.at("sample_id").get<std::string>();
      x.quantity = s.value("quantity", "");
      x.lhs = num(s.at("lhs"));
      x.rhs = num(s.at("rhs"));
      x.skipped = s.value("skipped", false);
      if (!x.skipped) x.ratio = num(s.at("ratio"));
      r.samples.push_back(x);
    }
    r.max_ratio = num(j.at("max_ratio"));
    for (const auto& p2 : j.at("refinement"))
      r.refinement.push_back({p2.at("N").get<int>(), p2.at("quantity").get<std::string>(), num(p2.at("min_ratio")),
                              num(p2.at("max_ratio"))});
    r.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw invalid_input(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline Outcome run_report(const RunConfig& c, std::ostream& log) {
  if (c.input.empty()) {
    if (c.family.empty()) throw invalid_input("report needs --input <report.json> or --family <name>");
    Outcome o;
    o.result = family_manifest(family(c.family, c.seed, c.count, c.grid()));
    log << "family " << c.family << " (seed " << c.seed << "): " << o.result["members"].size() << " members\n";
    return o;
  }
  std::ifstream in(c.input);
  if (!in) throw invalid_input("cannot open input file '" + c.input + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw invalid_input("cannot parse '" + c.input + "': " + e.what());
  }
  ConstantReport r = report_from_json(j);
  summarise(r, log);
  return report_outcome(r, c);
}

inline json manifest(const RunConfig& c, double seconds) {
  return json{{"capax_version", kVersion},
              {"fftw_version", std::string(fftw_version)},
              {"json_version", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                   "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11_version", CLI11_VERSION},
              {"compiler", __VERSION__},
              {"config", config_to_json(c)},
              {"config_text", to_config_text(c)},
              {"family_seed", c.seed},
              {"results", c.output},
              {"wall_time_seconds", seconds}};
}

}  // namespace detail

/// Runs one command; writes results (and a manifest beside them) when
/// c.output is set. Returns the exit status.
inline int run(const RunConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.command.empty()) throw invalid_input("no command given (one of capacity, potential, wolff, choquet, norm, verify, report)");
    c.grid();
    c.kernel();
    if (c.levels < 2) throw invalid_input("--levels must be at least 2");
    if (!(c.tol > 0.0)) throw invalid_input("--tol must be positive");
    detail::Outcome o;
    if (c.command == "capacity") o = detail::run_capacity(c, log);
    else if (c.command == "potential") o = detail::run_potential(c, log);
    else if (c.command == "wolff") o = detail::run_wolff(c, log);
    else if (c.command == "choquet") o = detail::run_choquet(c, log);
    else if (c.command == "norm") o = detail::run_norm(c, log);
    else if (c.command == "verify") o = detail::run_verify(c, log);
    else if (c.command == "report") o = detail::run_report(c, log);
    else throw invalid_input("unknown command '" + c.command + "'");
    if (!c.output.empty()) {
      if (o.field) detail::write_field(c.output, *o.field);
      else if (!o.text.empty()) detail::write_text(c.output, o.text);
      else detail::write_text(c.output, o.result.dump(1) + "\n");
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      detail::write_text(c.output + ".manifest.json", detail::manifest(c, secs).dump(1) + "\n");
    }
    if (o.degraded) {
      err << "warning: a solver stopped at its iteration budget; results are flagged\n";
      return 2;
    }
    return 0;
  } catch (const incompatible_grids& e) {
    err << "error: incompatible grids: " << e.what() << "\n";
  } catch (const domain_error& e) {
    err << "error: outside the admissible exponent range: " << e.what() << "\n";
  } catch (const invalid_input& e) {
    err << "error: invalid input: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace capax::cli
