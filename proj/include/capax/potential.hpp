#pragma once

// Riesz, Bessel and Wolff potentials.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "capax/fft.hpp"
#include "capax/grid.hpp"
#include "capax/kernel.hpp"

namespace capax {

enum class Method { direct, fast };

/// The linear map f -> K f = h^n sum_y k(x - y) f(y) for one kernel.
class PotentialOperator {
 public:
  explicit PotentialOperator(KernelTable table)
      : table_(std::move(table)), conv_(std::make_unique<Convolver>(table_.grid, table_.values)) {}

  const Grid& grid() const { return table_.grid; }
  const KernelTable& table() const { return table_; }
  double alpha() const { return table_.alpha; }
  KernelKind kind() const { return table_.kind; }

  /// Unscaled convolution sum_y k(x - y) v(y).
  std::vector<double> convolve(std::span<const double> v) const { return conv_->apply(v); }
  void convolve_into(std::span<const double> v, std::span<double> out) const { conv_->apply_into(v, out); }

  Field apply(const Field& f, Method method = Method::fast) const {
    if (!(f.grid() == grid())) throw incompatible_grids();
    std::vector<double> v = method == Method::fast ? convolve(f.values()) : direct(f.values());
    const double hn = grid().cell_volume();
    bool nn = f.nonneg();
    for (double& x : v) x *= hn;
    if (nn)  // FFT rounding may leave tiny negatives where the exact result is >= 0
      for (double& x : v) x = std::max(x, 0.0);
    return Field(grid(), std::move(v), nn);
  }

  std::vector<double> direct(std::span<const double> f) const {
    const Grid& g = grid();
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t x = 0; x < g.size(); ++x) {
      auto ix = g.unravel(x);
      double s = 0.0;
      for (std::size_t y = 0; y < g.size(); ++y) {
        if (f[y] == 0.0) continue;
        auto iy = g.unravel(y);
        std::array<int, 3> off{0, 0, 0};
        for (int a = 0; a < g.dim; ++a) off[a] = ix[a] - iy[a];
        s += table_.at(off) * f[y];
      }
      out[x] = s;
    }
    return out;
  }

 private:
  KernelTable table_;
  std::unique_ptr<Convolver> conv_;
};

/// Process-wide memo of operators keyed by (grid, alpha, kind). Operators are
/// immutable, so sharing them is safe.
inline std::shared_ptr<const PotentialOperator> potential_operator(const Grid& g, double alpha, KernelKind kind) {
  using Key = std::tuple<int, double, int, double, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const PotentialOperator>> cache;
  Key key{g.dim, g.half_width, g.points, alpha, static_cast<int>(kind)};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto op = std::make_shared<const PotentialOperator>(kernel_table(g, alpha, kind));
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, op).first->second;
}

inline Field riesz_potential(const Field& f, double alpha, Method method = Method::fast) {
  return potential_operator(f.grid(), alpha, KernelKind::riesz)->apply(f, method);
}

inline Field bessel_potential(const Field& f, double alpha, Method method = Method::fast) {
  return potential_operator(f.grid(), alpha, KernelKind::bessel)->apply(f, method);
}

inline Field potential(const Field& f, double alpha, KernelKind kind, Method method = Method::fast) {
  return potential_operator(f.grid(), alpha, kind)->apply(f, method);
}

struct Atom {
  Point position{0.0, 0.0, 0.0};
  double mass = 0.0;
};

/// Nonnegative measure: point atoms plus an optional density dmu = f dx.
struct Measure {
  Grid grid;
  std::vector<Atom> atoms;
  std::optional<Field> density;

  Measure() = default;
  explicit Measure(const Grid& g) : grid(g) {}

  static Measure dirac(const Grid& g, const Point& x, double mass = 1.0) {
    Measure m(g);
    m.add_atom(x, mass);
    return m;
  }

  static Measure from_density(const Field& f) {
    if (f.min() < 0.0) throw invalid_input("measure density must be nonnegative");
    Measure m(f.grid());
    m.density = f;
    return m;
  }

  void add_atom(const Point& x, double mass) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw invalid_input("atom mass must be positive and finite");
    if (!grid.contains(x)) throw invalid_input("atom lies outside the box");
    atoms.push_back({x, mass});
  }

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    if (density) m += integrate(*density);
    return m;
  }

  bool is_zero() const { return atoms.empty() && (!density || density->is_zero()); }

  Measure scaled(double c) const {
    Measure m(grid);
    for (const auto& a : atoms) m.atoms.push_back({a.position, a.mass * c});
    if (density) m.density = density->scaled(c);
    return m;
  }

  /// mu(B_t(x)) with closed balls; density nodes count with mass f h^n.
  double ball_mass(const Point& x, double t) const {
    double m = 0.0;
    for (const auto& a : atoms)
      if (distance(a.position, x, grid.dim) <= t) m += a.mass;
    if (density) {
      const double hn = grid.cell_volume();
      for (std::size_t i = 0; i < grid.size(); ++i)
        if ((*density)[i] > 0.0 && distance(grid.position(i), x, grid.dim) <= t) m += (*density)[i] * hn;
    }
    return m;
  }
};

/// Wolff potential W^R_{alpha,s} mu = int_0^R [mu(B_t(x)) / t^{n - alpha s}]^{1/(s-1)} dt/t.
///
/// t -> mu(B_t(x)) is a step function on the grid, so the integral is summed
/// exactly piece by piece. Radii below h/2 see no atoms; a density node at
/// x itself contributes f(x) |B_t| there, as the continuous density would.
class WolffEvaluator {
 public:
  WolffEvaluator(const Measure& mu, double alpha, double s) : mu_(mu), alpha_(alpha), s_(s) {
    const int n = mu.grid.dim;
    if (!(s > 1.0)) throw domain_error("Wolff potential requires s > 1");
    if (!(alpha > 0.0) || alpha * s > n) throw domain_error("Wolff potential requires 0 < alpha s <= n");
    beta_ = (n - alpha * s) / (s - 1.0);
    t_min_ = 0.5 * mu.grid.spacing();
    if (mu.density) {
      const Grid& g = mu.grid;
      const int N = g.points;
      // Offsets sorted by length; ties keep lexicographic order.
      std::vector<std::pair<double, std::array<int, 3>>> offs;
      std::array<int, 3> k{0, 0, 0};
      const int span = 2 * N - 1;
      std::size_t total = 1;
      for (int a = 0; a < n; ++a) total *= span;
      offs.reserve(total);
      for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        double r2 = 0.0;
        for (int a = n - 1; a >= 0; --a) {
          k[a] = static_cast<int>(rest % span) - (N - 1);
          rest /= span;
          r2 += double(k[a]) * k[a];
        }
        offs.push_back({std::sqrt(r2) * g.spacing(), k});
      }
      std::stable_sort(offs.begin(), offs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      offsets_ = std::move(offs);
    }
  }

  double exponent() const { return beta_; }

  /// W^R at an arbitrary point; R = +inf gives the untruncated potential.
  double operator()(const Point& x, double R = std::numeric_limits<double>::infinity()) const {
    const Grid& g = mu_.grid;
    const int n = g.dim;
    if (std::isinf(R) && !(beta_ > 0.0)) throw domain_error("untruncated Wolff potential diverges when n = alpha s");
    if (!(R > 0.0)) return 0.0;
    // (distance, mass) events in increasing distance.
    std::vector<std::pair<double, double>> events;
    for (const auto& a : mu_.atoms) events.push_back({distance(a.position, x, n), a.mass});
    std::sort(events.begin(), events.end());
    double centre_density = 0.0;
    std::vector<std::pair<double, double>> dens;
    if (mu_.density) {
      const double hn = g.cell_volume();
      const Field& f = *mu_.density;
      // Offsets are relative to the node nearest x; for x off the lattice the
      // true distances are recomputed and resorted.
      std::size_t c = g.nearest_node(x);
      auto ic = g.unravel(c);
      bool on_node = distance(g.position(c), x, n) == 0.0;
      for (const auto& [d, off] : offsets_) {
        std::array<int, 3> j{0, 0, 0};
        bool inside = true;
        for (int a = 0; a < n; ++a) {
          j[a] = ic[a] + off[a];
          if (j[a] < 0 || j[a] >= g.points) inside = false;
        }
        if (!inside) continue;
        std::size_t idx = g.ravel(j);
        if (f[idx] <= 0.0) continue;
        double dist = on_node ? d : distance(g.position(idx), x, n);
        dens.push_back({dist, f[idx] * hn});
      }
      if (on_node) centre_density = f[c];
      else std::stable_sort(dens.begin(), dens.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    // Merge the two sorted streams.
    std::vector<std::pair<double, double>> all;
    all.reserve(events.size() + dens.size());
    std::merge(events.begin(), events.end(), dens.begin(), dens.end(), std::back_inserter(all),
               [](const auto& a, const auto& b) { return a.first < b.first; });

    const double inv = 1.0 / (s_ - 1.0);
    double total = 0.0;
    double lower = t_min_;
    if (centre_density > 0.0) {
      // int_0^{min(h/2,R)} (f |B_1| t^{alpha s})^{1/(s-1)} dt/t
      double e = alpha_ * s_ * inv;
      double top = std::min(t_min_, R);
      total += std::pow(centre_density * unit_ball_volume(n), inv) * std::pow(top, e) / e;
    }
    if (R <= lower) return total;
    double mass = 0.0;
    std::size_t i = 0;
    while (i < all.size() && all[i].first <= lower) mass += all[i++].second;
    while (lower < R) {
      double upper = i < all.size() ? std::min(all[i].first, R) : R;
      if (mass > 0.0 && upper > lower) total += std::pow(mass, inv) * piece(lower, upper);
      if (i >= all.size() || upper >= R) break;
      lower = upper;
      double d = all[i].first;
      while (i < all.size() && all[i].first == d) mass += all[i++].second;
    }
    return total;
  }

  /// W^R at every grid node.
  Field on_grid(double R = std::numeric_limits<double>::infinity()) const {
    const Grid& g = mu_.grid;
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (*this)(g.position(i), R);
    return Field(g, std::move(v), true);
  }

 private:
  // int_a^b t^{-beta} dt / t, b possibly infinite.
  double piece(double a, double b) const {
    if (beta_ == 0.0) return std::log(b / a);
    double tail = std::isinf(b) ? 0.0 : std::pow(b, -beta_);
    return (std::pow(a, -beta_) - tail) / beta_;
  }

  Measure mu_;
  double alpha_;
  double s_;
  double beta_ = 0.0;
  double t_min_ = 0.0;
  std::vector<std::pair<double, std::array<int, 3>>> offsets_;
};

inline Field wolff_potential(const Measure& mu, double alpha, double s,
                             double R = std::numeric_limits<double>::infinity()) {
  return WolffEvaluator(mu, alpha, s).on_grid(R);
}

}  // namespace capax
