#pragma once

// Riesz and Bessel kernel tables on the doubled grid, the dyadic
// Hardy-Littlewood maximal function and A1 characteristics.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capax/grid.hpp"

namespace capax {

class domain_error : public invalid_input {
 public:
  using invalid_input::invalid_input;
};

class quadrature_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double riesz_gamma(int n, double alpha) {
  if (n < 1 || !(alpha > 0.0) || !(alpha < n))
    throw domain_error("riesz_gamma requires 0 < alpha < n");
  return std::tgamma(0.5 * (n - alpha)) /
         (std::pow(M_PI, 0.5 * n) * std::pow(2.0, alpha) * std::tgamma(0.5 * alpha));
}

/// Average of gamma |y|^{alpha-n} over the ball with the volume of one cell.
inline double riesz_singular_cell(int n, double alpha, double h) {
  double rho = std::pow(std::pow(h, n) / unit_ball_volume(n), 1.0 / n);
  return riesz_gamma(n, alpha) * std::pow(h, -n) * unit_sphere_area(n) * std::pow(rho, alpha) / alpha;
}

/// Radial profile of the Bessel kernel G_alpha in R^n.
///
/// Uses G(r) = (4 pi)^{-n/2} / Gamma(alpha/2) * int_0^inf exp(-u - r^2/(4u)) u^{(alpha-n)/2 - 1} du,
/// which is the subordination integral after t = 4 pi u. The substitution u = e^v
/// turns the integrand into a smooth bump around its peak.
class BesselProfile {
 public:
  BesselProfile(int n, double alpha, double tol = 1e-8) : n_(n), alpha_(alpha), tol_(tol) {
    if (n < 1 || n > 3 || !(alpha > 0.0)) throw domain_error("Bessel kernel requires alpha > 0 and n in {1,2,3}");
  }

  int dim() const { return n_; }
  double alpha() const { return alpha_; }

  double operator()(double r) const { return std::exp(log_value(r)); }

  /// Mean of G over the ball of radius rho, by quadrature in log r; below
  /// r = rho e^{-vmax} the singular power law is integrated in closed form.
  double ball_average(double rho) const {
    const double vmax = 40.0 / alpha_;
    auto integrand = [&](double v) {
      double r = rho * std::exp(-v);
      return (*this)(r) * std::pow(r, n_);
    };
    double err = 0.0;
    double I = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, vmax, 20, tol_ * 1e-2, &err);
    if (!(I > 0.0) || !std::isfinite(I) || err > tol_ * I)
      throw quadrature_error("Bessel kernel cell average did not reach tolerance");
    double gamma = std::tgamma(0.5 * (n_ - alpha_)) /
                   (std::pow(M_PI, 0.5 * n_) * std::pow(2.0, alpha_) * std::tgamma(0.5 * alpha_));
    I += gamma * std::pow(rho * std::exp(-vmax), alpha_) / alpha_;
    return unit_sphere_area(n_) * I / (unit_ball_volume(n_) * std::pow(rho, n_));
  }

  double log_value(double r) const {
    if (!(r > 0.0)) throw domain_error("Bessel kernel evaluated at r <= 0");
    const double a = 0.5 * (alpha_ - n_);
    const double r2 = r * r;
    auto phi = [&](double v) { return -std::exp(v) - 0.25 * r2 * std::exp(-v) + a * v; };
    // Peak of phi: root of y^2 - a y - r^2/4 = 0 with y = e^v, in cancellation-free form.
    double root = std::sqrt(a * a + r2);
    double vstar = std::log(a >= 0.0 ? 0.5 * (a + root) : 0.5 * r2 / (root - a));
    double peak = phi(vstar);
    // Walk out until the integrand is negligible relative to the peak.
    double lo = vstar - 1.0, hi = vstar + 1.0;
    while (phi(lo) > peak - 60.0) lo -= 1.0;
    while (phi(hi) > peak - 60.0) hi += 1.0;
    auto integrand = [&](double v) { return std::exp(phi(v) - peak); };
    double err = 0.0;
    double I = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 20, tol_ * 1e-2, &err);
    if (!(I > 0.0) || !std::isfinite(I) || err > tol_ * I)
      throw quadrature_error("Bessel kernel quadrature did not reach tolerance at r = " + std::to_string(r));
    return std::log(I) + peak - 0.5 * n_ * std::log(4.0 * M_PI) - std::lgamma(0.5 * alpha_);
  }

 private:
  int n_;
  double alpha_;
  double tol_;
};

/// Log-spaced radial lookup of the Bessel profile with log-log linear
/// interpolation (monotone, since the tabulated values are decreasing).
class BesselCache {
 public:
  BesselCache(int n, double alpha, double r_min, double r_max, int samples = 1024, double tol = 1e-8)
      : profile_(n, alpha, tol) {
    if (!(r_min > 0.0) || !(r_max > r_min) || samples < 2) throw domain_error("bad Bessel cache range");
    log_r_min_ = std::log(r_min);
    step_ = (std::log(r_max) - log_r_min_) / (samples - 1);
    log_values_.resize(samples);
    for (int i = 0; i < samples; ++i) log_values_[i] = profile_.log_value(std::exp(log_r_min_ + i * step_));
  }

  double radius(int i) const { return std::exp(log_r_min_ + i * step_); }
  int samples() const { return static_cast<int>(log_values_.size()); }
  const BesselProfile& profile() const { return profile_; }

  double operator()(double r) const {
    double t = (std::log(r) - log_r_min_) / step_;
    int last = samples() - 1;
    if (t <= 0.0 || t >= last) return profile_(r);
    int i = static_cast<int>(t);
    double w = t - i;
    return std::exp((1.0 - w) * log_values_[i] + w * log_values_[i + 1]);
  }

  void write_csv(std::ostream& os) const {
    os << "radius,value\n";
    os.precision(17);
    for (int i = 0; i < samples(); ++i) os << radius(i) << ',' << std::exp(log_values_[i]) << '\n';
  }

 private:
  BesselProfile profile_;
  double log_r_min_ = 0.0;
  double step_ = 1.0;
  std::vector<double> log_values_;
};

/// Kernel sampled at every grid offset z = x - y, stored on the doubled grid
/// (M = 2N per axis) in wraparound order for FFT convolution.
struct KernelTable {
  Grid grid;
  KernelKind kind = KernelKind::riesz;
  double alpha = 0.0;
  std::vector<double> values;
  std::shared_ptr<const BesselCache> bessel;

  int doubled() const { return 2 * grid.points; }

  /// Offset (in units of h) represented by wrapped index m.
  int offset(int m) const { return m < grid.points ? m : m - doubled(); }

  double at(const std::array<int, 3>& off) const {
    int M = doubled();
    std::size_t idx = 0;
    for (int a = 0; a < grid.dim; ++a) idx = idx * M + static_cast<std::size_t>((off[a] % M + M) % M);
    return values[idx];
  }
};

namespace detail {

template <class Radial>
KernelTable build_table(const Grid& g, KernelKind kind, double alpha, double singular, Radial&& radial) {
  KernelTable t;
  t.grid = g;
  t.kind = kind;
  t.alpha = alpha;
  const int M = 2 * g.points;
  const double h = g.spacing();
  std::size_t total = 1;
  for (int a = 0; a < g.dim; ++a) total *= static_cast<std::size_t>(M);
  t.values.resize(total);
  std::array<int, 3> m{0, 0, 0};
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int a = g.dim - 1; a >= 0; --a) {
      m[a] = static_cast<int>(rest % M);
      rest /= M;
    }
    double r2 = 0.0;
    bool zero = true;
    for (int a = 0; a < g.dim; ++a) {
      // Offset N never occurs in a linear convolution of length-N arrays;
      // it is filled with the kernel at distance N h to keep the table positive.
      int k = m[a] < g.points ? m[a] : m[a] - M;
      if (k != 0) zero = false;
      r2 += double(k) * double(k);
    }
    t.values[idx] = zero ? singular : radial(h * std::sqrt(r2));
  }
  return t;
}

}  // namespace detail

inline KernelTable riesz_kernel_table(const Grid& g, double alpha) {
  g.validate();
  const double gamma = riesz_gamma(g.dim, alpha);
  const double e = alpha - g.dim;
  return detail::build_table(g, KernelKind::riesz, alpha, riesz_singular_cell(g.dim, alpha, g.spacing()),
                             [&](double r) { return gamma * std::pow(r, e); });
}

inline KernelTable bessel_kernel_table(const Grid& g, double alpha, double tol = 1e-8) {
  g.validate();
  if (!(alpha > 0.0) || !(alpha < g.dim)) throw domain_error("Bessel kernel table requires 0 < alpha < n");
  const double h = g.spacing();
  double r_max = h * g.points * std::sqrt(double(g.dim)) * 1.0001;
  auto cache = std::make_shared<const BesselCache>(g.dim, alpha, 0.5 * h, r_max, 1024, tol);
  double rho = std::pow(g.cell_volume() / unit_ball_volume(g.dim), 1.0 / g.dim);
  auto t = detail::build_table(g, KernelKind::bessel, alpha, cache->profile().ball_average(rho),
                               [&](double r) { return (*cache)(r); });
  t.bessel = cache;
  return t;
}

inline KernelTable kernel_table(const Grid& g, double alpha, KernelKind kind) {
  return kind == KernelKind::riesz ? riesz_kernel_table(g, alpha) : bessel_kernel_table(g, alpha);
}

/// Dyadic Hardy-Littlewood maximal function of |w|.
///
/// Radii are h/2 (the centre cell itself), h, 2h, ..., 2L; the truncated
/// variant keeps radii <= 1. In n = 1 ball averages use exact cell overlap;
/// in n >= 2 they average the nodes whose centres lie in the closed ball,
/// counting nodes outside the box as zeros.
inline Field maximal_function(const Field& w, bool truncated) {
  const Grid& g = w.grid();
  const int N = g.points;
  const double h = g.spacing();
  std::vector<double> a(w.size());
  double top = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::abs(w[i]);
    top = std::max(top, a[i]);
  }
  std::vector<double> out = a;

  std::vector<int> levels;
  for (int m = 0; (1 << m) <= N; ++m) {
    if (truncated && (1 << m) * h > 1.0 + 1e-12) break;
    levels.push_back(m);
  }

  // Running sums along the last axis: P[row][k] = sum_{j<k} a[row][j].
  const std::size_t rows = a.size() / N;
  std::vector<double> prefix(rows * (N + 1), 0.0);
  for (std::size_t row = 0; row < rows; ++row)
    for (int k = 0; k < N; ++k) prefix[row * (N + 1) + k + 1] = prefix[row * (N + 1) + k] + a[row * N + k];
  auto row_sum = [&](std::size_t row, int lo, int hi) {  // inclusive, clipped to the box
    lo = std::max(lo, 0);
    hi = std::min(hi, N - 1);
    if (lo > hi) return 0.0;
    return prefix[row * (N + 1) + hi + 1] - prefix[row * (N + 1) + lo];
  };

  for (int m : levels) {
    const int R = 1 << m;
    if (g.dim == 1) {
      const double inner = 1.0 / double(2 * R);
      const double edge = 1.0 / double(4 * R);
      for (int c = 0; c < N; ++c) {
        double s = inner * row_sum(0, c - R + 1, c + R - 1);
        if (c - R >= 0) s += edge * a[c - R];
        if (c + R < N) s += edge * a[c + R];
        out[c] = std::max(out[c], std::min(s, top));
      }
      continue;
    }
    // Row extents of the lattice ball |k|^2 <= R^2.
    std::vector<std::array<int, 3>> spans;  // (d0, d1, half-length along last axis)
    std::size_t count = 0;
    if (g.dim == 2) {
      for (int d0 = -R; d0 <= R; ++d0) {
        int x = static_cast<int>(std::floor(std::sqrt(double(R) * R - double(d0) * d0)));
        spans.push_back({d0, 0, x});
        count += 2 * x + 1;
      }
    } else {
      for (int d0 = -R; d0 <= R; ++d0)
        for (int d1 = -R; d1 <= R; ++d1) {
          double rem = double(R) * R - double(d0) * d0 - double(d1) * d1;
          if (rem < 0) continue;
          int x = static_cast<int>(std::floor(std::sqrt(rem)));
          spans.push_back({d0, d1, x});
          count += 2 * x + 1;
        }
    }
    const double inv = 1.0 / double(count);
    for (std::size_t idx = 0; idx < a.size(); ++idx) {
      auto c = g.unravel(idx);
      double s = 0.0;
      for (const auto& sp : spans) {
        int i0 = c[0] + sp[0];
        if (i0 < 0 || i0 >= N) continue;
        std::size_t row;
        int last;
        if (g.dim == 2) {
          row = static_cast<std::size_t>(i0);
          last = c[1];
        } else {
          int i1 = c[1] + sp[1];
          if (i1 < 0 || i1 >= N) continue;
          row = static_cast<std::size_t>(i0) * N + i1;
          last = c[2];
        }
        s += row_sum(row, last - sp[2], last + sp[2]);
      }
      // The clamp only removes rounding: a ball average never exceeds max |w|.
      out[idx] = std::max(out[idx], std::min(s * inv, top));
    }
  }
  return Field(g, std::move(out), true);
}

/// max over nodes of (M w)/w with 0/0 = 1 and positive/0 = +inf.
inline double a1_constant(const Field& w, bool truncated) {
  if (w.min() < 0.0) throw invalid_input("a1_constant requires a nonnegative weight");
  if (w.is_zero()) throw invalid_input("a1_constant requires a weight that is not identically zero");
  Field mw = maximal_function(w, truncated);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double ratio;
    if (w[i] == 0.0)
      ratio = mw[i] == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    else
      ratio = mw[i] / w[i];
    worst = std::max(worst, ratio);
  }
  return worst;
}

}  // namespace capax
