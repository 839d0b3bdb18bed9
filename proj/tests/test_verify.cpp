#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "capax/verify.hpp"

using namespace capax;
using Catch::Approx;

namespace {

Params base_params() {
  Params P;
  P.n = 1;
  P.alpha = 0.4;
  P.s = 2.0;
  P.q = 1.5;
  P.p = 2.0;
  P.r = 1.0;
  return P;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Ratios of two reports over the same samples, matched in order.
double max_ratio_change(const ConstantReport& a, const ConstantReport& b) {
  REQUIRE(a.samples.size() == b.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    REQUIRE(a.samples[i].id == b.samples[i].id);
    REQUIRE(a.samples[i].quantity == b.samples[i].quantity);
    REQUIRE(a.samples[i].skipped == b.samples[i].skipped);
    if (!a.samples[i].skipped) worst = std::max(worst, rel(b.samples[i].ratio, a.samples[i].ratio));
  }
  return worst;
}

Family with_zero_member(Family f) {
  f.fields.push_back({"zero", "zero", Field(f.grid)});
  return f;
}

const Grid kGrid{1, 4.0, 64};

}  // namespace

TEST_CASE("families are deterministic and seeded per sample") {
  for (const auto& name : family_names()) {
    Family a = family(name, 7, 6, kGrid);
    Family b = family(name, 7, 6, kGrid);
    Family longer = family(name, 7, 9, kGrid);
    REQUIRE(a.size() == 6);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a.is_measure()) {
        CHECK(node_masses(a.measures[k].measure) == node_masses(b.measures[k].measure));
        CHECK(node_masses(a.measures[k].measure) == node_masses(longer.measures[k].measure));
      } else {
        CHECK(a.fields[k].field.data() == b.fields[k].field.data());
        CHECK(a.fields[k].field.data() == longer.fields[k].field.data());
      }
    }
    CHECK(family(name, 7, 0, kGrid).size() == 0);
  }
  CHECK_THROWS_AS(family("bogus", 1, 3, kGrid), invalid_input);
  CHECK_THROWS_AS(family("mixed", 1, -1, kGrid), invalid_input);
}

TEST_CASE("family statistics match the recorded manifest") {
  std::ifstream in(CAPAX_TEST_DATA "/family_manifest.json");
  REQUIRE(in);
  json recorded = json::parse(in);
  REQUIRE(recorded.size() == 6);
  for (const auto& rec : recorded) {
    Grid g = grid_from_json(rec.at("grid"));
    json now = family_manifest(family(rec.at("family").get<std::string>(), rec.at("seed").get<std::uint64_t>(),
                                      static_cast<int>(rec.at("members").size()), g));
    REQUIRE(now.at("members").size() == rec.at("members").size());
    for (std::size_t k = 0; k < now.at("members").size(); ++k) {
      const auto& x = now.at("members")[k];
      const auto& y = rec.at("members")[k];
      CHECK(x.at("id") == y.at("id"));
      CHECK(x.at("shape") == y.at("shape"));
      CHECK(x.at("support") == y.at("support"));
      CHECK(rel(x.at("mass").get<double>(), y.at("mass").get<double>()) < 1e-12);
    }
  }
}

TEST_CASE("report bookkeeping: ratios, guards, bands and drift") {
  ConstantReport r;
  r.add("b", "", 2.0, 4.0);
  r.add("a", "", 3.0, 1.0);
  r.add("c", "", 0.0, 0.0);
  r.finalize();
  REQUIRE(r.samples.size() == 3);
  CHECK(r.samples[0].id == "a");
  CHECK(r.samples[1].ratio == 0.5);
  CHECK(r.samples[2].skipped);
  CHECK(r.max_ratio == 3.0);
  CHECK(r.finite());
  CHECK(r.flags == std::vector<std::string>{"skipped_zero_sample"});

  r.add("d", "", 1.0, 0.0);
  r.finalize();
  CHECK(std::isinf(r.max_ratio));
  CHECK_FALSE(r.finite());

  ConstantReport t;
  t.refinement = {{64, "x", 1.0, 2.0}, {64, "y", 1.0, 1.0}, {128, "x", 1.1, 2.0}, {128, "y", 1.0, 1.3}};
  CHECK(refinement_drift(t) == Approx(0.3));
  CHECK_THROWS_AS(refinement_study(kGrid, {128, 64}, [](const Grid&) { return ConstantReport{}; }), invalid_input);
}

TEST_CASE("check_adams at q = s is bit-equal to check_csim; zero samples are skipped") {
  Params P = base_params();
  Family fam = with_zero_member(family("mixed", kDefaultFamilySeed, 6, kGrid));
  auto csim = check_csim(P, fam, KernelKind::riesz);
  auto adams = check_adams(P.s, P, fam, KernelKind::riesz);
  REQUIRE(csim.samples.size() == adams.samples.size());
  for (std::size_t i = 0; i < csim.samples.size(); ++i) {
    CHECK(csim.samples[i].lhs == adams.samples[i].lhs);
    CHECK(csim.samples[i].rhs == adams.samples[i].rhs);
  }
  CHECK(csim.max_ratio == adams.max_ratio);
  CHECK(csim.samples.back().id == "zero");
  CHECK(csim.samples.back().skipped);
  CHECK(csim.finite());

  // Independent oracle for one sample: Choquet integral and a plain sum.
  const Field& f = fam.fields[0].field;
  Field If = riesz_potential(f, P.alpha);
  double lhs = choquet_integral(If.pow(P.s), P, KernelKind::riesz);
  double rhs = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) rhs += std::pow(f[i], P.s) * kGrid.cell_volume();
  CHECK(rel(csim.samples[0].lhs, lhs) < 1e-12);
  CHECK(rel(csim.samples[0].rhs, rhs) < 1e-12);

  for (double q : {1.0, 3.0}) CHECK(check_adams(q, P, fam, KernelKind::riesz).finite());
  CHECK_THROWS_AS(check_adams(0.5, P, fam, KernelKind::riesz), invalid_input);
  CHECK_THROWS_AS(check_csim(P, family("measures", 1, 2, kGrid), KernelKind::riesz), invalid_input);
}

TEST_CASE("check_ibp: t = 1 gives ratio exactly 1 at every sample") {
  Params P = base_params();
  for (KernelKind kind : {KernelKind::riesz, KernelKind::bessel}) {
    auto r = check_ibp(1.0, P, family("mixed", kDefaultFamilySeed, 10, kGrid), kind);
    for (const auto& s : r.samples) CHECK(s.ratio == 1.0);
    CHECK(r.max_ratio == 1.0);
  }
  // Ratios are at least 1 at the argmax for t > 1 (the lemma's direction is
  // the upper bound, but the ratio is finite).
  for (double t : {1.5, 2.0, 3.0}) {
    auto r = check_ibp(t, P, family("indicators", kDefaultFamilySeed, 6, kGrid), KernelKind::riesz);
    CHECK(r.finite());
    CHECK(r.max_ratio >= 1.0);
  }
}

TEST_CASE("check_boundedness: single atom at the bound, configurations below it") {
  Params P = base_params();
  const double beta = P.wolff_exponent();
  Family fam = family("atoms", kDefaultFamilySeed, 9, kGrid);
  auto r = check_boundedness(P, fam, std::numeric_limits<double>::infinity());
  REQUIRE(r.samples.size() == 9);
  for (const auto& s : r.samples) CHECK(s.ratio <= 1.0);
  // A single atom: both maxima sit at the atom, so the ratio is 2^{-beta}.
  CHECK(r.samples[0].ratio == Approx(std::pow(2.0, -beta)).epsilon(1e-12));
  // Truncated potential.
  auto t = check_boundedness(P, fam, 0.5);
  for (const auto& s : t.samples) CHECK(s.ratio <= 1.0);
  CHECK_THROWS_AS(check_boundedness(P, family("measures", 1, 3, kGrid), 1.0), invalid_input);
}

TEST_CASE("check_upper_tri: zero measure skipped, Dirac Wolff-mu closed form") {
  Params P = base_params();
  P.r = 1.0;
  Family fam = family("measures", kDefaultFamilySeed, 4, kGrid);
  fam.measures.push_back({"zero", "zero", Measure(kGrid)});
  auto r = check_upper_tri(P, fam, KernelKind::riesz);
  CHECK(r.finite());
  int skipped = 0;
  for (const auto& s : r.samples)
    if (s.id == "zero") {
      CHECK(s.skipped);
      ++skipped;
    }
  CHECK(skipped == 6);

  // Dirac at a node: W = (h/2)^{-beta} / beta there.
  const double h = kGrid.spacing(), beta = P.wolff_exponent();
  double W0 = std::pow(0.5 * h, -beta) / beta;
  auto v = upper_tri_quantities(fam.measures[0].measure, P, KernelKind::riesz);
  CHECK(rel(v.wolff_mu, std::pow(W0, (P.s - 1.0) * P.r / P.s)) < 0.02);
  CHECK(v.trace > 0.0);
  CHECK(v.dual > 0.0);
  CHECK(v.wolff_cap > 0.0);
  // Dirac trace constant: sup (I h(x0))^r / ||h||_s^r = cap({x0})^{-r/s}.
  Mask point(kGrid);
  point.set(kGrid.nearest_node(Point{0.0, 0.0, 0.0}), true);
  double cap0 = capacity(point, P, KernelKind::riesz).value;
  CHECK(v.trace <= std::pow(cap0, -P.r / P.s) * (1.0 + 1e-6));
  CHECK(v.trace >= 0.9 * std::pow(cap0, -P.r / P.s));

  Params bad = P;
  bad.r = P.s;
  CHECK_THROWS_AS(check_upper_tri(bad, fam, KernelKind::riesz), invalid_input);
}

TEST_CASE("upper_tri_quantities are linear when unit normalisation rounds") {
  Params P = base_params();
  P.r = 1.0;
  Measure mu(kGrid);
  mu.add_atom(kGrid.position(20), 0.1);
  mu.add_atom(kGrid.position(40), 0.2 / 3.0);
  REQUIRE(mu.scaled(1.0 / mu.total_mass()).total_mass() != 1.0);
  auto v = upper_tri_quantities(mu, P, KernelKind::riesz);
  auto unit = upper_tri_quantities(mu.scaled(1.0 / mu.total_mass()), P, KernelKind::riesz);
  CHECK(v.wolff_mu == Approx(unit.wolff_mu * mu.total_mass()).epsilon(1e-12));
  CHECK(v.trace == Approx(unit.trace * mu.total_mass()).epsilon(1e-12));
}

TEST_CASE("check_wolff_weak: empty above the maximum, Dirac superlevel balls") {
  Params P = base_params();
  Measure dirac = Measure::dirac(kGrid, kGrid.position(kGrid.nearest_node(Point{0.0, 0.0, 0.0})));
  const double beta = P.wolff_exponent(), h = kGrid.spacing();
  const double W0 = std::pow(0.5 * h, -beta) / beta;
  for (const auto& row : check_wolff_weak(dirac, 1.01 * W0, P)) {
    CHECK(row.lhs == 0.0);
    CHECK(row.rhs == 0.0);
  }
  // Away from the atom W = |x|^{-beta} / beta, so {W > a t} is the ball of
  // radius (beta a t)^{-1/beta}.
  const double t = W0 / 16.0;
  for (const auto& row : check_wolff_weak(dirac, t, P)) {
    double rho = std::pow(beta * row.a * t, -1.0 / beta);
    Mask ball = Mask::from_predicate(kGrid, [&](const Point& x) { return std::abs(x[0] - dirac.atoms[0].position[0]) < rho; });
    CHECK(rel(row.lhs, capacity(ball, P, KernelKind::riesz).value) < 1e-6);
    CHECK(row.rhs == Approx(std::pow(t, 1.0 - P.s)));
    CHECK(std::isfinite(row.lhs / row.rhs));
  }
  CHECK_THROWS_AS(check_wolff_weak(dirac, 0.0, P), invalid_input);
  auto sweep = check_wolff_weak_sweep(P, family("measures", kDefaultFamilySeed, 4, kGrid), KernelKind::riesz);
  CHECK(sweep.finite());
}

TEST_CASE("check_main2: witness weights finite; constant weight tends to the CSIM ratio as q -> s") {
  Params P = base_params();
  Family fam = with_zero_member(family("mixed", kDefaultFamilySeed, 4, kGrid));
  auto r = check_main2(1.5, P, fam, KernelKind::riesz);
  CHECK(r.finite());
  CHECK(r.samples.back().skipped);

  const double q = P.s - 1e-3;
  auto near = check_main2(q, P, fam, KernelKind::riesz, Main2Weight::constant);
  auto csim = check_csim(P, fam, KernelKind::riesz);
  for (std::size_t i = 0; i + 1 < near.samples.size(); ++i)
    CHECK(rel(near.samples[i].ratio, std::pow(csim.samples[i].ratio, 1.0 / P.s)) < 0.01);
  CHECK_THROWS_AS(check_main2(P.s, P, fam, KernelKind::riesz), invalid_input);
}

TEST_CASE("every check is invariant under scaling the family") {
  Params P = base_params();
  const double lambda = 2.5;
  Family fields = family("mixed", kDefaultFamilySeed, 4, kGrid);
  Family measures = family("measures", kDefaultFamilySeed, 4, kGrid);
  Family atoms = family("atoms", kDefaultFamilySeed, 4, kGrid);
  Params Pr = P;
  Pr.r = 1.5;
  auto same = [&](const std::function<ConstantReport(const Family&)>& run, const Family& fam, double tol) {
    double d = max_ratio_change(run(fam), run(fam.scaled(lambda)));
    INFO("relative change " << d << " for " << run(fam).label);
    CHECK(d < tol);
  };
  same([&](const Family& f) { return check_csim(P, f, KernelKind::riesz); }, fields, 1e-9);
  same([&](const Family& f) { return check_adams(3.0, P, f, KernelKind::riesz); }, fields, 1e-9);
  same([&](const Family& f) { return check_adams(1.0, P, f, KernelKind::bessel); }, fields, 1e-9);
  same([&](const Family& f) { return check_main2(1.5, P, f, KernelKind::riesz); }, fields, 1e-6);
  same([&](const Family& f) { return check_ibp(2.0, P, f, KernelKind::riesz); }, fields, 1e-9);
  same([&](const Family& f) { return check_boundedness(P, f, 1.0); }, atoms, 1e-12);
  same([&](const Family& f) { return check_upper_tri(P, f, KernelKind::riesz); }, measures, 1e-6);
  same([&](const Family& f) { return check_newnorm2(1.5, P, f, KernelKind::riesz); }, fields, 1e-6);
  same([&](const Family& f) { return check_kv_equiv(1.5, P, f, KernelKind::riesz); }, fields, 1e-6);
  same([&](const Family& f) { return check_main3(P, f, KernelKind::riesz); }, fields, 1e-6);
  same([&](const Family& f) { return check_weights(Pr, f, KernelKind::riesz); }, fields, 1e-6);
}

TEST_CASE("norm-equivalence bands are finite") {
  Params P = base_params();
  Family ind = family("indicators", kDefaultFamilySeed, 6, kGrid);
  Family mixed = family("mixed", kDefaultFamilySeed, 6, kGrid);
  for (double q : {1.0, 1.5}) {
    auto nn = check_newnorm2(q, P, ind, KernelKind::riesz);
    CHECK(nn.finite());
    CHECK(nn.bands().size() == 3);
    auto kv = check_kv_equiv(q, P, mixed, KernelKind::riesz);
    CHECK(kv.finite());
  }
  auto m3 = check_main3(P, mixed, KernelKind::riesz);
  CHECK(m3.finite());
  for (double r : {0.5, 1.5}) {
    Params Pr = P;
    Pr.r = r;
    auto w = check_weights(Pr, mixed, KernelKind::riesz);
    CHECK(w.finite());
  }
}

TEST_CASE("reports are reproducible, thread-independent and serialise to JSON and CSV") {
  Params P = base_params();
  Family fam = with_zero_member(family("mixed", kDefaultFamilySeed, 5, kGrid));
  VerifyOptions one, three;
  three.threads = 3;
  auto a = check_adams(3.0, P, fam, KernelKind::riesz, one);
  auto b = check_adams(3.0, P, fam, KernelKind::riesz, three);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  auto c = check_newnorm2(1.5, P, fam, KernelKind::riesz, three);
  auto d = check_newnorm2(1.5, P, fam, KernelKind::riesz, one);
  CHECK(report_to_json(c).dump() == report_to_json(d).dump());

  json j = report_to_json(a);
  CHECK(j["inequality_id"] == "adams");
  CHECK(j["family_seed"] == kDefaultFamilySeed);
  CHECK(j["samples"].size() == 6);
  CHECK(j["samples"][5]["ratio"].is_null());
  CHECK(j["max_ratio"].get<double>() == a.max_ratio);

  std::string csv = report_to_csv(a);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "sample_id,quantity,lhs,rhs,ratio");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (rows == 1) {
      double lhs = 0, rhs = 0, ratio = 0;
      auto first = line.find(',');
      std::sscanf(line.c_str() + line.find(',', first + 1) + 1, "%lf,%lf,%lf", &lhs, &rhs, &ratio);
      CHECK(lhs == a.samples[0].lhs);
      CHECK(ratio == a.samples[0].ratio);
    }
  }
  CHECK(rows == 6);

  auto study = refinement_study(kGrid, {32, 64}, [&](const Grid& g) {
    return check_csim(P, family("mixed", kDefaultFamilySeed, 4, g), KernelKind::riesz);
  });
  REQUIRE(study.refinement.size() == 2);
  CHECK(study.refinement[0].points == 32);
  CHECK(study.grid.points == 64);
  CHECK(refinement_drift(study) < 0.25);
  CHECK(check_from_string(to_string(Check::upper_tri)) == Check::upper_tri);
  CHECK_THROWS_AS(check_from_string("nope"), invalid_input);
}
