#include <catch_amalgamated.hpp>

#include <random>

#include "capax/potential.hpp"

using namespace capax;
using Catch::Approx;

namespace {

Field random_field(const Grid& g, unsigned seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(g.size());
  for (auto& x : v) x = lo + (hi - lo) * double(rng() >> 11) * 0x1.0p-53;
  return Field(g, std::move(v), lo >= 0.0);
}

// Mean over the 2^n nodes adjacent to the origin.
double centre_value(const Field& f) {
  const Grid& g = f.grid();
  double s = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.position(i);
    bool adj = true;
    for (int a = 0; a < g.dim; ++a) adj = adj && std::abs(x[a]) < g.spacing();
    if (adj) {
      s += f[i];
      ++count;
    }
  }
  return s / count;
}

double max_rel_dev(const Field& a, const Field& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return worst;
}

}  // namespace

TEST_CASE("potentials of zero vanish") {
  Grid g(2, 1.0, 16);
  CHECK(riesz_potential(Field(g), 0.5).is_zero());
  CHECK(bessel_potential(Field(g), 0.5).is_zero());
  Measure mu(g);
  CHECK(wolff_potential(mu, 0.5, 2.0).is_zero());
}

TEST_CASE("riesz potential of a ball at its centre") {
  const double R = 0.5;
  for (auto [n, alpha, tol] : {std::tuple{1, 0.4, 0.02}, std::tuple{2, 0.8, 0.03}}) {
    Grid g(n, 1.0, 256);
    Field ball = Mask::from_predicate(g, [&](const Point& x) { return distance(x, {0, 0, 0}, n) <= R; }).indicator();
    double oracle = riesz_gamma(n, alpha) * unit_sphere_area(n) * std::pow(R, alpha) / alpha;
    CHECK(centre_value(riesz_potential(ball, alpha)) == Approx(oracle).epsilon(tol));
  }
}

TEST_CASE("fast and direct convolution agree") {
  Grid g(2, 1.0, 64);
  Field f = random_field(g, 17);
  CHECK(max_rel_dev(riesz_potential(f, 0.7, Method::fast), riesz_potential(f, 0.7, Method::direct)) <= 1e-10);
  CHECK(max_rel_dev(bessel_potential(f, 0.7, Method::fast), bessel_potential(f, 0.7, Method::direct)) <= 1e-10);
  Grid g1(1, 1.0, 128);
  Field f1 = random_field(g1, 3);
  CHECK(max_rel_dev(riesz_potential(f1, 0.3, Method::fast), riesz_potential(f1, 0.3, Method::direct)) <= 1e-10);
}

TEST_CASE("bessel potential is dominated by riesz potential") {
  for (int n : {1, 2}) {
    Grid g(n, 2.0, 32);
    Field f = random_field(g, 23 + n);
    Field G = bessel_potential(f, 0.4 * n);
    Field I = riesz_potential(f, 0.4 * n);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(G[i] <= I[i] * (1 + 1e-8));
  }
}

TEST_CASE("riesz potential is linear, monotone and log-convex in its argument") {
  Grid g(2, 1.0, 32);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    Field a = random_field(g, seed);
    Field b = random_field(g, seed + 40);
    Field Ia = riesz_potential(a, 0.6), Ib = riesz_potential(b, 0.6);
    Field Iab = riesz_potential(a + b, 0.6);
    Field I3 = riesz_potential(a.scaled(3.0), 0.6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(Iab[i] >= Ia[i]);
      CHECK(I3[i] == Approx(3.0 * Ia[i]).epsilon(1e-12));
    }
    for (double theta : {0.25, 0.5, 0.8}) {
      Field mix = a.pow(1 - theta) * b.pow(theta);
      Field Im = riesz_potential(mix, 0.6);
      for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(Im[i] <= std::pow(Ia[i], 1 - theta) * std::pow(Ib[i], theta) * (1 + 1e-12));
    }
  }
}

TEST_CASE("wolff potential of a dirac mass") {
  const double alpha = 0.3, s = 2.0;
  const int n = 1;
  const double beta = (n - alpha * s) / (s - 1);
  for (int N : {64, 128, 256}) {
    Grid g(n, 1.0, N);
    Point at{g.coordinate(N / 2), 0, 0};
    Field W = wolff_potential(Measure::dirac(g, at), alpha, s);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = distance(g.position(i), at, n);
      if (d < 2 * g.spacing()) continue;
      double exact = (s - 1) / (n - alpha * s) * std::pow(d, -beta);
      CHECK(W[i] == Approx(exact).epsilon(0.03));
    }
    CHECK(W[N / 2] == Approx(std::pow(g.spacing() / 2, -beta) / beta).epsilon(1e-12));
  }
}

TEST_CASE("wolff potential of a density against log-radius quadrature") {
  Grid g(2, 1.0, 16);
  Field f = Field::from_function(g, [](const Point& x) { return std::exp(-8 * (x[0] * x[0] + x[1] * x[1])); }, true);
  Measure mu = Measure::from_density(f);
  const double alpha = 0.5, s = 1.5;
  WolffEvaluator W(mu, alpha, s);
  const double beta = (2 - alpha * s) / (s - 1);
  for (std::size_t i : {0ul, 77ul, 136ul}) {
    Point x = g.position(i);
    // Midpoint rule in u = log t over [log(h/2), log 16], tail above 16 in closed form,
    // plus the centre-cell contribution below h/2.
    double a = std::log(g.spacing() / 2), b = std::log(16.0);
    const int steps = 200000;
    double sum = 0.0;
    for (int k = 0; k < steps; ++k) {
      double t = std::exp(a + (k + 0.5) * (b - a) / steps);
      sum += std::pow(mu.ball_mass(x, t) * std::pow(t, alpha * s - 2), 1 / (s - 1));
    }
    sum *= (b - a) / steps;
    sum += std::pow(mu.total_mass(), 1 / (s - 1)) * std::pow(16.0, -beta) / beta;
    double e = alpha * s / (s - 1);
    sum += std::pow(f[i] * M_PI, 1 / (s - 1)) * std::pow(g.spacing() / 2, e) / e;
    CHECK(W(x) == Approx(sum).epsilon(2e-3));
  }
}

TEST_CASE("wolff potential truncation, scaling and monotonicity") {
  Grid g(1, 1.0, 64);
  std::mt19937_64 rng(4);
  Measure mu(g);
  for (int k = 0; k < 6; ++k) mu.add_atom({g.coordinate(static_cast<int>(rng() % 64)), 0, 0}, 0.5 + (rng() % 100) / 100.0);
  const double alpha = 0.25, s = 3.0;
  WolffEvaluator W(mu, alpha, s);
  Field w1 = W.on_grid(0.2), w2 = W.on_grid(0.4), w = W.on_grid();
  Field scaled = wolff_potential(mu.scaled(5.0), alpha, s);
  Measure bigger = mu;
  bigger.add_atom({0.1, 0, 0}, 1.0);
  Field wb = wolff_potential(bigger, alpha, s);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(w1[i] <= w2[i]);
    CHECK(w2[i] <= w[i]);
    CHECK(scaled[i] == Approx(std::pow(5.0, 1 / (s - 1)) * w[i]).epsilon(1e-12));
    CHECK(wb[i] >= w[i]);
  }
}

TEST_CASE("boundedness principle for a single atom is exact") {
  const double alpha = 0.3, s = 2.0;
  Grid g(1, 1.0, 64);
  Point at{g.coordinate(20), 0, 0};
  WolffEvaluator W(Measure::dirac(g, at), alpha, s);
  double beta = W.exponent();
  Field all = W.on_grid();
  CHECK(all.max() == W(at));
  CHECK(all.max() <= std::pow(2.0, beta) * W(at));
}

TEST_CASE("wolff potential rejects a divergent tail") {
  Grid g(1, 1.0, 16);
  CHECK_THROWS_AS(WolffEvaluator(Measure::dirac(g, {0, 0, 0}), 0.6, 2.0), domain_error);
  WolffEvaluator critical(Measure::dirac(g, {0, 0, 0}), 0.5, 2.0);
  CHECK_THROWS_AS(critical({0.5, 0, 0}), domain_error);
  CHECK(std::isfinite(critical({0.5, 0, 0}, 1.0)));
}
