#pragma once

// Seeded sample families: bumps, indicators, multi-scale sums and atom
// clouds, defined in physical coordinates so the same (name, seed, k)
// gives the same continuous object on every grid.
//
// Sample k draws from its own stream, seeded by splitmix64(seed + k), so
// asking for more samples never changes the earlier ones.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "capax/grid.hpp"
#include "capax/potential.hpp"

namespace capax {

/// Seed of the candidate-h family used by the norm evaluators.
inline constexpr std::uint64_t kCandidateSeed = 0x5eed0c4a5ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// mt19937_64 with a fixed bits-to-double map (std distributions are
/// implementation defined, this is not).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(splitmix64(seed)) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)) % (hi - lo + 1); }

 private:
  std::mt19937_64 eng_;
};

struct FamilyMember {
  std::string id;
  std::string shape;
  Field field;
};

struct MeasureMember {
  std::string id;
  std::string shape;
  Measure measure;
};

namespace detail {

inline Point random_centre(Stream& rng, const Grid& g, double spread) {
  Point c{0.0, 0.0, 0.0};
  for (int a = 0; a < g.dim; ++a) c[a] = rng.uniform(-spread, spread);
  return c;
}

inline double gaussian(const Point& x, const Point& c, double sigma, int dim) {
  double r = distance(x, c, dim);
  return std::exp(-0.5 * r * r / (sigma * sigma));
}

inline std::string sample_id(const std::string& name, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", k);
  return name + "-" + buf;
}

// One member of the mixed family; the shape cycles with k.
inline FamilyMember mixed_member(const Grid& g, std::uint64_t seed, int k, const std::string& name) {
  Stream rng(seed + static_cast<std::uint64_t>(k));
  const double L = g.half_width;
  const std::array<double, 3> scales{L / 16, L / 10, L / 6};
  const int n = g.dim;
  double amp = rng.uniform(0.5, 2.0);
  Point c = random_centre(rng, g, L / 8);
  FamilyMember m;
  m.id = sample_id(name, k);
  switch (k % 5) {
    case 0: {
      double R = rng.uniform(L / 16, L / 6);
      m.shape = "ball";
      m.field = Field::from_function(g, [&](const Point& x) { return distance(x, c, n) <= R ? amp : 0.0; }, true);
      break;
    }
    case 1:
    case 2: {
      double sigma = scales[rng.integer(0, 2)];
      m.shape = "gaussian";
      m.field = Field::from_function(g, [&](const Point& x) { return amp * gaussian(x, c, sigma, n); }, true);
      break;
    }
    case 3: {
      Point c2 = random_centre(rng, g, L / 8);
      double s1 = scales[rng.integer(0, 2)], s2 = scales[rng.integer(0, 2)];
      double w2 = rng.uniform(0.25, 1.0);
      m.shape = "two_bump";
      m.field = Field::from_function(
          g, [&](const Point& x) { return amp * (gaussian(x, c, s1, n) + w2 * gaussian(x, c2, s2, n)); }, true);
      break;
    }
    default: {
      // Different widths along the two sides (n = 1) or along rotated axes.
      double a = scales[rng.integer(0, 2)], b = scales[rng.integer(0, 2)] * rng.uniform(0.3, 0.7);
      double theta = rng.uniform(0.0, std::numbers::pi);
      m.shape = "anisotropic";
      m.field = Field::from_function(g, [&](const Point& x) {
        if (n == 1) {
          double d = x[0] - c[0];
          double sg = d < 0.0 ? a : b;
          return amp * std::exp(-0.5 * d * d / (sg * sg));
        }
        double dx = x[0] - c[0], dy = x[1] - c[1];
        double u = std::cos(theta) * dx + std::sin(theta) * dy;
        double v = -std::sin(theta) * dx + std::cos(theta) * dy;
        double e = u * u / (a * a) + v * v / (b * b);
        for (int ax = 2; ax < n; ++ax) e += (x[ax] - c[ax]) * (x[ax] - c[ax]) / (a * a);
        return amp * std::exp(-0.5 * e);
      }, true);
      break;
    }
  }
  return m;
}

inline FamilyMember indicator_member(const Grid& g, std::uint64_t seed, int k, const std::string& name) {
  Stream rng(seed + static_cast<std::uint64_t>(k));
  const double L = g.half_width;
  const int n = g.dim;
  Point c = random_centre(rng, g, L / 8);
  FamilyMember m;
  m.id = sample_id(name, k);
  switch (k % 3) {
    case 0: {
      double R = rng.uniform(L / 16, L / 6);
      m.shape = "ball";
      m.field = Field::from_function(g, [&](const Point& x) { return distance(x, c, n) <= R ? 1.0 : 0.0; }, true);
      break;
    }
    case 1: {
      double a = rng.uniform(L / 16, L / 6);
      m.shape = "cube";
      m.field = Field::from_function(g, [&](const Point& x) {
        for (int ax = 0; ax < n; ++ax)
          if (std::abs(x[ax] - c[ax]) > a) return 0.0;
        return 1.0;
      }, true);
      break;
    }
    default: {
      Point c2 = random_centre(rng, g, L / 8);
      double R1 = rng.uniform(L / 20, L / 10), R2 = rng.uniform(L / 20, L / 10);
      m.shape = "two_balls";
      m.field = Field::from_function(g, [&](const Point& x) {
        return distance(x, c, n) <= R1 || distance(x, c2, n) <= R2 ? 1.0 : 0.0;
      }, true);
      break;
    }
  }
  // A set that missed every node would be a degenerate sample.
  if (m.field.is_zero()) {
    std::vector<double> v(g.size(), 0.0);
    v[g.nearest_node(c)] = 1.0;
    m.field = Field(g, std::move(v), true);
  }
  return m;
}

inline MeasureMember measure_member(const Grid& g, std::uint64_t seed, int k, const std::string& name) {
  Stream rng(seed + static_cast<std::uint64_t>(k));
  const double L = g.half_width;
  MeasureMember m;
  m.id = sample_id(name, k);
  m.measure = Measure(g);
  if (k == 0) {
    m.shape = "dirac";
    m.measure.add_atom(g.position(g.nearest_node(Point{0.0, 0.0, 0.0})), 1.0);
  } else if (k % 2 == 1) {
    int atoms = rng.integer(2, 10);
    m.shape = "atoms";
    for (int a = 0; a < atoms; ++a) {
      Point c = random_centre(rng, g, L / 4);
      m.measure.add_atom(g.position(g.nearest_node(c)), rng.uniform(0.25, 1.0));
    }
  } else {
    m.shape = "density";
    m.measure = Measure::from_density(mixed_member(g, seed ^ 0xd3e5ULL, k, name).field);
  }
  return m;
}

// Purely atomic configurations: a single atom, two equal atoms at a
// distance that doubles along the family, and ten random atoms.
inline MeasureMember atoms_member(const Grid& g, std::uint64_t seed, int k, const std::string& name) {
  Stream rng(seed + static_cast<std::uint64_t>(k));
  const double L = g.half_width;
  MeasureMember m;
  m.id = sample_id(name, k);
  m.measure = Measure(g);
  auto node = [&](const Point& x) { return g.position(g.nearest_node(x)); };
  switch (k % 3) {
    case 0: {
      m.shape = "single";
      Point c = k == 0 ? Point{0.0, 0.0, 0.0} : random_centre(rng, g, L / 4);
      m.measure.add_atom(node(c), 1.0);
      break;
    }
    case 1: {
      m.shape = "pair";
      double d = std::ldexp(L / 64, (k / 3) % 5);
      Point a{0.0, 0.0, 0.0}, b{0.0, 0.0, 0.0};
      a[0] = -0.5 * d;
      b[0] = 0.5 * d;
      m.measure.add_atom(node(a), 1.0);
      m.measure.add_atom(node(b), 1.0);
      break;
    }
    default: {
      m.shape = "cloud";
      for (int a = 0; a < 10; ++a) {
        Point c = random_centre(rng, g, L / 4);
        m.measure.add_atom(node(c), rng.uniform(0.25, 1.0));
      }
      break;
    }
  }
  return m;
}

}  // namespace detail

/// Names: "mixed" (balls, Gaussians at three scales, two-bump sums,
/// anisotropic bumps), "indicators" (balls, cubes, pairs of balls),
/// "measures" (a Dirac mass, atom clouds and densities), "atoms" (single
/// atoms, equal pairs, ten-atom clouds).
inline std::vector<std::string> family_names() { return {"mixed", "indicators", "measures", "atoms"}; }

inline bool is_measure_family(const std::string& name) { return name == "measures" || name == "atoms"; }

inline std::vector<FamilyMember> field_family(const std::string& name, std::uint64_t seed, int count, const Grid& g) {
  if (count < 0) throw invalid_input("family count must be nonnegative");
  std::vector<FamilyMember> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    if (name == "mixed") out.push_back(detail::mixed_member(g, seed, k, name));
    else if (name == "indicators") out.push_back(detail::indicator_member(g, seed, k, name));
    else throw invalid_input("unknown field family '" + name + "'");
  }
  return out;
}

inline std::vector<MeasureMember> measure_family(const std::string& name, std::uint64_t seed, int count, const Grid& g) {
  if (count < 0) throw invalid_input("family count must be nonnegative");
  if (!is_measure_family(name)) throw invalid_input("unknown measure family '" + name + "'");
  std::vector<MeasureMember> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    out.push_back(name == "atoms" ? detail::atoms_member(g, seed, k, name) : detail::measure_member(g, seed, k, name));
  return out;
}

/// Node masses of a measure whose atoms sit on grid nodes (atoms elsewhere
/// go to the nearest node).
inline std::vector<double> node_masses(const Measure& mu) {
  const Grid& g = mu.grid;
  std::vector<double> m(g.size(), 0.0);
  for (const auto& a : mu.atoms) m[g.nearest_node(a.position)] += a.mass;
  if (mu.density) {
    const double hn = g.cell_volume();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += (*mu.density)[i] * hn;
  }
  return m;
}

}  // namespace capax
