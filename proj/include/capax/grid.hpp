#pragma once

// Uniform cell-centred grids on [-L, L]^n, grid functions, node sets and
// the exponent tuple shared by every other module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace capax {

class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class incompatible_grids : public invalid_input {
 public:
  incompatible_grids() : invalid_input("fields live on incompatible grids") {}
};

enum class KernelKind { riesz, bessel };

inline const char* to_string(KernelKind k) { return k == KernelKind::riesz ? "riesz" : "bessel"; }

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "riesz") return KernelKind::riesz;
  if (s == "bessel") return KernelKind::bessel;
  throw invalid_input("unknown kernel kind '" + s + "' (expected riesz or bessel)");
}

using Point = std::array<double, 3>;

/// Cell-centred tensor grid. Node k on each axis sits at -L + (k + 1/2) h.
struct Grid {
  int dim = 1;
  double half_width = 1.0;
  int points = 64;

  Grid() = default;
  Grid(int n, double L, int N) : dim(n), half_width(L), points(N) { validate(); }

  void validate() const {
    if (dim < 1 || dim > 3) throw invalid_input("grid dimension must be 1, 2 or 3");
    if (!(half_width > 0.0) || !std::isfinite(half_width))
      throw invalid_input("grid half width must be positive and finite");
    if (points < 8 || (points & (points - 1)) != 0)
      throw invalid_input("points per axis must be a power of two >= 8");
  }

  double spacing() const { return 2.0 * half_width / points; }
  double cell_volume() const { return std::pow(spacing(), dim); }

  std::size_t size() const {
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(points);
    return total;
  }

  double coordinate(int k) const { return -half_width + (k + 0.5) * spacing(); }

  /// Row-major: axis 0 varies slowest.
  std::array<int, 3> unravel(std::size_t idx) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      ijk[a] = static_cast<int>(idx % points);
      idx /= points;
    }
    return ijk;
  }

  std::size_t ravel(const std::array<int, 3>& ijk) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * points + static_cast<std::size_t>(ijk[a]);
    return idx;
  }

  Point position(std::size_t idx) const {
    auto ijk = unravel(idx);
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) x[a] = coordinate(ijk[a]);
    return x;
  }

  bool contains(const Point& x) const {
    for (int a = 0; a < dim; ++a)
      if (x[a] < -half_width || x[a] > half_width) return false;
    return true;
  }

  /// Index of the node whose cell contains x (x clamped into the box).
  std::size_t nearest_node(const Point& x) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      int k = static_cast<int>(std::floor((x[a] + half_width) / spacing()));
      ijk[a] = std::clamp(k, 0, points - 1);
    }
    return ravel(ijk);
  }

  double box_volume() const { return std::pow(2.0 * half_width, dim); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim == b.dim && a.half_width == b.half_width && a.points == b.points;
  }
};

inline double distance(const Point& x, const Point& y, int dim) {
  double d2 = 0.0;
  for (int a = 0; a < dim; ++a) d2 += (x[a] - y[a]) * (x[a] - y[a]);
  return std::sqrt(d2);
}

inline double unit_ball_volume(int n) {
  return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Surface area of the unit sphere S^{n-1}.
inline double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

namespace detail {

// Fixed-order pairwise summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 32) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace detail

/// A real grid function. Values outside the box are taken to be zero.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0) : grid_(g), values_(g.size(), fill) {
    nonneg_ = fill >= 0.0;
    check();
  }
  Field(const Grid& g, std::vector<double> values, bool nonneg = false)
      : grid_(g), values_(std::move(values)), nonneg_(nonneg) {
    if (values_.size() != grid_.size()) throw invalid_input("field value count does not match grid");
    check();
  }

  template <class Fn>
  static Field from_function(const Grid& g, Fn&& fn, bool nonneg = false) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(g.position(i));
    return Field(g, std::move(v), nonneg);
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  bool nonneg() const { return nonneg_; }

  double max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }
  double min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double x : values_) m = std::max(m, std::abs(x));
    return m;
  }
  bool is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return x == 0.0; });
  }

  /// Pointwise map; the nonneg flag is recomputed from the result.
  template <class Fn>
  Field map(Fn&& fn) const {
    std::vector<double> v(values_.size());
    bool nn = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = fn(values_[i]);
      nn = nn && v[i] >= 0.0;
    }
    return Field(grid_, std::move(v), nn);
  }

  Field abs() const { return map([](double x) { return std::abs(x); }); }
  Field scaled(double c) const { return map([c](double x) { return c * x; }); }
  Field pow(double t) const {
    return map([t](double x) { return x == 0.0 ? 0.0 : std::pow(std::abs(x), t); });
  }

  friend Field operator+(const Field& a, const Field& b) { return combine(a, b, std::plus<>{}); }
  friend Field operator-(const Field& a, const Field& b) { return combine(a, b, std::minus<>{}); }
  friend Field operator*(const Field& a, const Field& b) { return combine(a, b, std::multiplies<>{}); }

  template <class Op>
  static Field combine(const Field& a, const Field& b, Op op) {
    if (!(a.grid_ == b.grid_)) throw incompatible_grids();
    std::vector<double> v(a.size());
    bool nn = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = op(a.values_[i], b.values_[i]);
      nn = nn && v[i] >= 0.0;
    }
    return Field(a.grid_, std::move(v), nn);
  }

  friend bool operator==(const Field& a, const Field& b) {
    return a.grid_ == b.grid_ && a.values_ == b.values_;
  }

 private:
  void check() const {
    for (double x : values_) {
      if (!std::isfinite(x)) throw invalid_input("field values must be finite");
      if (nonneg_ && x < 0.0) throw invalid_input("field flagged nonnegative has a negative value");
    }
  }

  Grid grid_;
  std::vector<double> values_;
  bool nonneg_ = true;
};

/// A set of grid nodes.
class Mask {
 public:
  Mask() = default;
  explicit Mask(const Grid& g, bool full = false) : grid_(g), members_(g.size(), full ? 1 : 0) {}
  Mask(const Grid& g, std::vector<std::uint8_t> members) : grid_(g), members_(std::move(members)) {
    if (members_.size() != grid_.size()) throw invalid_input("mask size does not match grid");
    for (auto& m : members_) m = m ? 1 : 0;
  }

  template <class Pred>
  static Mask from_predicate(const Grid& g, Pred&& pred) {
    Mask m(g);
    for (std::size_t i = 0; i < g.size(); ++i) m.members_[i] = pred(g.position(i)) ? 1 : 0;
    return m;
  }

  /// {x : f(x) > t}
  static Mask superlevel(const Field& f, double t) {
    Mask m(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) m.members_[i] = f[i] > t ? 1 : 0;
    return m;
  }

  static Mask support(const Field& f) { return superlevel(f.abs(), 0.0); }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return members_.size(); }
  bool operator[](std::size_t i) const { return members_[i] != 0; }
  void set(std::size_t i, bool v) { members_[i] = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bytes() const { return members_; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), 1)); }
  bool empty() const { return count() == 0; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i]) idx.push_back(i);
    return idx;
  }

  Mask complement() const {
    Mask m(*this);
    for (auto& b : m.members_) b = b ? 0 : 1;
    return m;
  }
  friend Mask operator|(const Mask& a, const Mask& b) { return merge(a, b, [](int x, int y) { return x | y; }); }
  friend Mask operator&(const Mask& a, const Mask& b) { return merge(a, b, [](int x, int y) { return x & y; }); }
  friend bool operator==(const Mask& a, const Mask& b) { return a.grid_ == b.grid_ && a.members_ == b.members_; }

  bool subset_of(const Mask& other) const {
    if (!(grid_ == other.grid_)) throw incompatible_grids();
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i] && !other.members_[i]) return false;
    return true;
  }

  /// True when every member lies in [-L/2, L/2]^n.
  bool within_middle_half() const {
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (!members_[i]) continue;
      auto x = grid_.position(i);
      for (int a = 0; a < grid_.dim; ++a)
        if (std::abs(x[a]) > 0.5 * grid_.half_width) return false;
    }
    return true;
  }

  Field indicator(double value = 1.0) const {
    std::vector<double> v(members_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = members_[i] ? value : 0.0;
    return Field(grid_, std::move(v), value >= 0.0);
  }

  std::size_t hash() const {
    std::size_t h = 1469598103934665603ull;
    for (auto b : members_) h = (h ^ b) * 1099511628211ull;
    return h;
  }

 private:
  template <class Op>
  static Mask merge(const Mask& a, const Mask& b, Op op) {
    if (!(a.grid_ == b.grid_)) throw incompatible_grids();
    Mask m(a.grid_);
    for (std::size_t i = 0; i < a.members_.size(); ++i) m.members_[i] = static_cast<std::uint8_t>(op(a.members_[i], b.members_[i]));
    return m;
  }

  Grid grid_;
  std::vector<std::uint8_t> members_;
};

/// Midpoint rule over the box: h^n * sum of values.
inline double integrate(const Field& f) {
  return f.grid().cell_volume() * detail::pairwise_sum(f.values());
}

inline double lp_norm(const Field& f, double t) {
  if (!(t >= 1.0) || !std::isfinite(t)) throw invalid_input("lp_norm exponent must be finite and >= 1");
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(std::abs(f[i]), t);
  double integral = f.grid().cell_volume() * detail::pairwise_sum(v);
  return std::pow(integral, 1.0 / t);
}

/// Exponent tuple (n, alpha, s, q, p, r).
struct Params {
  int n = 1;
  double alpha = 0.4;
  double s = 2.0;
  double q = 1.0;
  double p = 2.0;
  double r = 1.0;

  double s_conj() const { return s / (s - 1.0); }
  double p_conj() const { return p / (p - 1.0); }

  /// (n - alpha s) / (s - 1): the Wolff decay exponent.
  double wolff_exponent() const { return (n - alpha * s) / (s - 1.0); }

  /// r = s(s - q) / ((s - 1) q), the index pairing the O-tilde and N spaces.
  static double r_for_otilde(double s, double q) { return s * (s - q) / ((s - 1.0) * q); }

  void validate(KernelKind kind) const {
    if (n < 1 || n > 3) throw invalid_input("n must be 1, 2 or 3");
    if (!(s > 1.0)) throw invalid_input("s must exceed 1");
    double limit = n / s;
    if (!(alpha > 0.0)) throw invalid_input("alpha must be positive");
    if (kind == KernelKind::riesz && !(alpha < limit))
      throw invalid_input("Riesz case requires alpha < n/s");
    if (kind == KernelKind::bessel && !(alpha <= limit))
      throw invalid_input("Bessel case requires alpha <= n/s");
    if (!(q >= 1.0)) throw invalid_input("q must be >= 1");
    if (!(p > 1.0)) throw invalid_input("p must exceed 1");
    if (!(r > 0.0 && r <= s)) throw invalid_input("r must satisfy 0 < r <= s");
  }
};

}  // namespace capax
