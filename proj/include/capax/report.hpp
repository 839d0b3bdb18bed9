#pragma once

// JSON forms of solver results and norm estimates, measure files, and
// built-in set constructors (ball:R, cube:a, annulus:r1:r2 and unions).

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "capax/capacity.hpp"
#include "capax/io.hpp"
#include "capax/potential.hpp"
#include "capax/spaces.hpp"
#include "capax/verify.hpp"

namespace capax {

inline json capacity_result_to_json(const CapacityResult& r, bool with_fields = true) {
  json j{{"value", detail::real(r.value)},
         {"dual_value", detail::real(r.dual_value)},
         {"gap", detail::real(r.gap)},
         {"feasibility_residual", detail::real(r.feasibility_residual)},
         {"iterations", r.iterations},
         {"converged", r.converged},
         {"outside_middle_half", r.outside_middle_half}};
  if (with_fields) {
    j["extremal"] = r.extremal.data();
    j["multiplier"] = r.multiplier.data();
  }
  return j;
}

inline json norm_estimate_to_json(const NormEstimate& e, bool with_fields = true) {
  json j{{"lower", detail::real(e.lower)},
         {"upper", detail::real(e.upper)},
         {"equivalence", std::isnan(e.equivalence) ? json(nullptr) : detail::real(e.equivalence)},
         {"converged", e.converged},
         {"heuristic_flags", e.heuristic_flags},
         {"witness_ref", e.witness_ref}};
  if (with_fields && e.witness.size() > 0) j["witness"] = e.witness.data();
  return j;
}

inline json weight_witness_to_json(const WeightWitness& w) {
  return json{{"construction", to_string(w.construction)},
              {"lq_cap_norm", detail::real(w.lq_cap_norm_value)},
              {"a1", detail::real(w.a1_value)},
              {"weight", w.weight.data()}};
}

/// {"grid": ..., "atoms": [{"position": [...], "mass": m}], "density": [...]}
inline json measure_to_json(const Measure& mu) {
  json atoms = json::array();
  for (const auto& a : mu.atoms) {
    std::vector<double> x(a.position.begin(), a.position.begin() + mu.grid.dim);
    atoms.push_back({{"position", x}, {"mass", a.mass}});
  }
  json j = grid_to_json(mu.grid);
  j["atoms"] = atoms;
  if (mu.density) j["density"] = mu.density->data();
  return j;
}

inline Measure measure_from_json(const json& j) {
  Grid g = grid_from_json(j);
  Measure mu(g);
  try {
    if (j.contains("atoms")) {
      for (const auto& a : j.at("atoms")) {
        auto x = a.at("position").get<std::vector<double>>();
        if (static_cast<int>(x.size()) != g.dim) throw invalid_input("atom position has the wrong dimension");
        Point p{0.0, 0.0, 0.0};
        for (int k = 0; k < g.dim; ++k) p[k] = x[k];
        mu.add_atom(p, a.at("mass").get<double>());
      }
    }
    if (j.contains("density")) {
      Field f(g, j.at("density").get<std::vector<double>>());
      Measure d = Measure::from_density(f);
      mu.density = d.density;
    }
  } catch (const json::exception& e) {
    throw invalid_input(std::string("malformed measure: ") + e.what());
  }
  return mu;
}

/// A measure file (.json with atoms and/or density) or a field file read as
/// a density.
inline Measure load_measure(const std::string& path) {
  if (has_suffix(path, ".json")) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open input file '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw invalid_input("cannot parse '" + path + "': " + e.what());
    }
    if (j.contains("atoms") || j.contains("density")) return measure_from_json(j);
    return Measure::from_density(field_from_json(j));
  }
  return Measure::from_density(load_field(path));
}

namespace detail {

inline double parse_number(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw invalid_input("bad number '" + s + "' in set '" + spec + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace detail

/// Set constructors, all centred at the origin unless "@x[,y[,z]]" follows:
/// ball:R (|x - c| <= R), cube:a (max |x_i - c_i| <= a), annulus:r1:r2
/// (r1 <= |x - c| <= r2). "A+B" is the union.
inline Mask parse_set(const std::string& spec, const Grid& g) {
  if (spec.empty()) throw invalid_input("empty set specification");
  Mask out(g);
  for (const std::string& part : detail::split(spec, '+')) {
    std::string body = part;
    Point c{0.0, 0.0, 0.0};
    if (auto at = part.find('@'); at != std::string::npos) {
      body = part.substr(0, at);
      auto coords = detail::split(part.substr(at + 1), ',');
      if (static_cast<int>(coords.size()) != g.dim) throw invalid_input("set centre in '" + part + "' needs " + std::to_string(g.dim) + " coordinates");
      for (int k = 0; k < g.dim; ++k) c[k] = detail::parse_number(coords[k], spec);
    }
    auto f = detail::split(body, ':');
    const int n = g.dim;
    Mask m(g);
    if (f[0] == "ball" && f.size() == 2) {
      double R = detail::parse_number(f[1], spec);
      if (!(R > 0.0)) throw invalid_input("ball radius must be positive in '" + spec + "'");
      m = Mask::from_predicate(g, [&](const Point& x) { return distance(x, c, n) <= R; });
    } else if (f[0] == "cube" && f.size() == 2) {
      double a = detail::parse_number(f[1], spec);
      if (!(a > 0.0)) throw invalid_input("cube half side must be positive in '" + spec + "'");
      m = Mask::from_predicate(g, [&](const Point& x) {
        for (int k = 0; k < n; ++k)
          if (std::abs(x[k] - c[k]) > a) return false;
        return true;
      });
    } else if (f[0] == "annulus" && f.size() == 3) {
      double r1 = detail::parse_number(f[1], spec), r2 = detail::parse_number(f[2], spec);
      if (!(r1 >= 0.0 && r2 > r1)) throw invalid_input("annulus needs 0 <= r1 < r2 in '" + spec + "'");
      m = Mask::from_predicate(g, [&](const Point& x) {
        double d = distance(x, c, n);
        return d >= r1 && d <= r2;
      });
    } else {
      throw invalid_input("unknown set '" + part + "' (expected ball:R, cube:a or annulus:r1:r2)");
    }
    out = out | m;
  }
  if (out.empty()) throw invalid_input("set '" + spec + "' contains no grid node");
  return out;
}

}  // namespace capax
