#include <catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <random>

#include "capax/kernel.hpp"

using namespace capax;
using Catch::Approx;

namespace {

// Independent closed form: int_0^inf e^{-u - r^2/(4u)} u^{nu-1} du = 2 (r/2)^nu K_nu(r).
double bessel_oracle(int n, double alpha, double r) {
  double nu = 0.5 * (alpha - n);
  return std::pow(4.0 * M_PI, -0.5 * n) / std::tgamma(0.5 * alpha) * 2.0 * std::pow(0.5 * r, nu) *
         std::cyl_bessel_k(std::abs(nu), r);
}

// Brute-force dyadic maximal function in n = 1 from interval overlaps.
std::vector<double> maximal_oracle_1d(const Grid& g, const std::vector<double>& f, bool truncated) {
  const double h = g.spacing();
  std::vector<double> radii{h / 2};
  for (double r = h; r <= 2 * g.half_width + 1e-12; r *= 2)
    if (!truncated || r <= 1.0 + 1e-12) radii.push_back(r);
  std::vector<double> out(f.size(), 0.0);
  for (int c = 0; c < g.points; ++c) {
    double xc = g.coordinate(c);
    for (double r : radii) {
      double s = 0.0;
      for (int j = 0; j < g.points; ++j) {
        double lo = std::max(xc - r, g.coordinate(j) - h / 2);
        double hi = std::min(xc + r, g.coordinate(j) + h / 2);
        if (hi > lo) s += std::abs(f[j]) * (hi - lo);
      }
      out[c] = std::max(out[c], s / (2 * r));
    }
  }
  return out;
}

std::vector<double> maximal_oracle_2d(const Grid& g, const std::vector<double>& f) {
  const double h = g.spacing();
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    out[c] = std::abs(f[c]);
    for (int R = 1; R <= g.points; R *= 2) {
      double s = 0.0;
      int count = 0;
      for (int a = -R; a <= R; ++a)
        for (int b = -R; b <= R; ++b) {
          if (a * a + b * b > R * R) continue;
          ++count;
          Point y = g.position(c);
          y[0] += a * h;
          y[1] += b * h;
          if (!g.contains(y)) continue;
          s += std::abs(f[g.nearest_node(y)]);
        }
      out[c] = std::max(out[c], s / count);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("riesz_gamma closed values") {
  CHECK(riesz_gamma(1, 0.5) == Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  CHECK(riesz_gamma(2, 1.0) == Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
  using big = boost::multiprecision::cpp_bin_float_50;
  big pi = boost::math::constants::pi<big>();
  big g3 = boost::math::tgamma(big(0.5)) / (pow(pi, big(1.5)) * big(4) * boost::math::tgamma(big(1)));
  CHECK(std::abs(riesz_gamma(3, 2.0) / static_cast<double>(g3) - 1.0) <= 1e-14);
  CHECK_THROWS_AS(riesz_gamma(2, 2.0), domain_error);
  CHECK_THROWS_AS(riesz_gamma(1, 0.0), domain_error);
}

TEST_CASE("riesz table shape") {
  for (int n : {1, 2, 3}) {
    Grid g(n, 1.0, 8);
    double alpha = 0.5 * n;
    auto t = riesz_kernel_table(g, alpha);
    for (double v : t.values) CHECK(v > 0.0);
    double prev = t.at({0, 0, 0});
    for (int k = 1; k < g.points; ++k) {
      std::array<int, 3> off{k, 0, 0};
      double v = t.at(off);
      CHECK(v <= prev);
      prev = v;
      CHECK(t.at({-k, 0, 0}) == v);
    }
  }
}

TEST_CASE("riesz singular cell in one dimension") {
  Grid g(1, 1.0, 64);
  double alpha = 0.4, h = g.spacing();
  auto t = riesz_kernel_table(g, alpha);
  CHECK(t.at({0, 0, 0}) == Approx(riesz_gamma(1, alpha) / h * 2.0 * std::pow(h / 2, alpha) / alpha).epsilon(1e-14));
}

TEST_CASE("riesz table homogeneity") {
  for (int n : {1, 2}) {
    double alpha = 0.3 + 0.2 * n;
    auto fine = riesz_kernel_table(Grid(n, 1.0, 16), alpha);
    auto coarse = riesz_kernel_table(Grid(n, 2.0, 16), alpha);
    for (std::size_t i = 0; i < fine.values.size(); ++i)
      CHECK(coarse.values[i] == Approx(std::pow(2.0, alpha - n) * fine.values[i]).epsilon(1e-13));
  }
}

TEST_CASE("bessel profile matches the modified Bessel closed form") {
  for (int n : {1, 2, 3})
    for (double alpha : {0.3, 0.5 * n, 0.9 * n})
      for (double r : {1e-3, 0.05, 0.7, 3.0, 12.0}) {
        BesselProfile G(n, alpha);
        CHECK(G(r) == Approx(bessel_oracle(n, alpha, r)).epsilon(1e-7));
      }
}

TEST_CASE("bessel table mass, shape and small-radius asymptote") {
  Grid g(1, 8.0, 256);
  auto t = bessel_kernel_table(g, 0.5);
  double mass = 0.0;
  for (double v : t.values) mass += v;
  mass *= g.spacing();
  CHECK(mass == Approx(1.0).epsilon(0.01));
  for (double v : t.values) CHECK(v > 0.0);

  const auto& cache = *t.bessel;
  for (int i = 1; i < cache.samples(); ++i) CHECK(cache(cache.radius(i)) <= cache(cache.radius(i - 1)));

  // n = 2, alpha = 1 and n = 3, alpha = 2 have G / Riesz = e^{-r}.
  for (auto [n, alpha] : {std::pair{2, 1.0}, std::pair{3, 2.0}}) {
    Grid fine(n, 0.25 * (n == 2 ? 4 : 1), n == 2 ? 128 : 32);
    auto bt = bessel_kernel_table(fine, alpha);
    auto rt = riesz_kernel_table(fine, alpha);
    CHECK(bt.at({1, 0, 0}) / rt.at({1, 0, 0}) == Approx(1.0).margin(0.02));
    CHECK(bt.at({0, 0, 0}) / rt.at({0, 0, 0}) == Approx(1.0).margin(0.02));
  }
}

TEST_CASE("bessel kernel is dominated by riesz kernel away from the origin") {
  for (int n : {1, 2, 3}) {
    double alpha = 0.4 * n;
    BesselProfile G(n, alpha);
    double gamma = riesz_gamma(n, alpha);
    for (double r : {2.0, 3.0, 5.0, 9.0}) CHECK(G(r) < gamma * std::pow(r, alpha - n));
  }
}

TEST_CASE("bessel cache csv export") {
  BesselCache c(1, 0.5, 0.01, 4.0, 16);
  std::ostringstream os;
  c.write_csv(os);
  std::string s = os.str();
  CHECK(s.rfind("radius,value\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 17);
}

TEST_CASE("maximal function of a constant") {
  for (int n : {1, 2, 3}) {
    Grid g(n, 1.0, n == 3 ? 8 : 32);
    Field c(g, 0.37);
    Field m = maximal_function(c, false);
    for (double v : m.values()) CHECK(v == 0.37);
    CHECK(a1_constant(c, false) == 1.0);
    CHECK(a1_constant(c, true) == 1.0);
  }
}

TEST_CASE("maximal function against enumeration") {
  std::mt19937_64 rng(5);
  Grid g1(1, 1.0, 64);
  std::vector<double> f(g1.size());
  for (auto& x : f) x = double(rng() >> 11) * 0x1.0p-53 - 0.3;
  Field w(g1, f);
  for (bool tr : {false, true}) {
    auto oracle = maximal_oracle_1d(g1, f, tr);
    Field m = maximal_function(w, tr);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(m[i] == Approx(oracle[i]).epsilon(1e-12));
  }

  std::vector<double> spike(g1.size(), 0.0);
  spike[20] = 1.0;
  auto so = maximal_oracle_1d(g1, spike, false);
  Field ms = maximal_function(Field(g1, spike), false);
  for (std::size_t i = 0; i < spike.size(); ++i) CHECK(ms[i] == Approx(so[i]).epsilon(1e-12));
  double h = g1.spacing();
  for (int d : {2, 4, 8}) {
    double approx = h / (2.0 * d * h);
    CHECK(ms[20 + d] >= 0.5 * approx);
    CHECK(ms[20 + d] <= 2.0 * approx);
  }

  Grid g2(2, 1.0, 16);
  std::vector<double> f2(g2.size());
  for (auto& x : f2) x = double(rng() >> 11) * 0x1.0p-53;
  auto o2 = maximal_oracle_2d(g2, f2);
  Field m2 = maximal_function(Field(g2, f2), false);
  for (std::size_t i = 0; i < f2.size(); ++i) CHECK(m2[i] == Approx(o2[i]).epsilon(1e-12));
}

TEST_CASE("maximal function properties") {
  std::mt19937_64 rng(9);
  for (int n : {1, 2}) {
    Grid g(n, 2.0, 32);
    std::vector<double> v(g.size());
    for (auto& x : v) x = double(rng() >> 11) * 0x1.0p-53;
    Field w(g, v, true);
    Field full = maximal_function(w, false);
    Field trunc = maximal_function(w, true);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(trunc[i] <= full[i]);
      CHECK(full[i] >= w[i]);
    }
    CHECK(a1_constant(w.scaled(7.5), false) == Approx(a1_constant(w, false)).epsilon(1e-12));
  }
}

TEST_CASE("a1 constant sentinel and riesz weight") {
  Grid g(1, 1.0, 16);
  std::vector<double> v(16, 1.0);
  v[5] = 0.0;
  CHECK(std::isinf(a1_constant(Field(g, v), false)));
  CHECK_THROWS_AS(a1_constant(Field(g), false), invalid_input);

  double alpha = 0.4;
  std::vector<double> a1s;
  for (int N : {64, 128, 256}) {
    Grid gr(1, 1.0, N);
    Field w = Field::from_function(gr, [&](const Point& x) { return std::pow(std::abs(x[0]), alpha - 1.0); }, true);
    a1s.push_back(a1_constant(w, false));
  }
  for (double a : a1s) CHECK(std::isfinite(a));
  CHECK(a1s[1] / a1s[0] == Approx(1.0).margin(0.1));
  CHECK(a1s[2] / a1s[1] == Approx(1.0).margin(0.1));
}
