#pragma once

// (alpha,s)-capacity and obstacle problems, Choquet integrals, L^q(cap)
// quasi-norms and the obstacle-form F-norm.
//
// All of them reduce to
//     minimise h^n sum f^s   subject to   (K f)_i >= psi_i  where psi_i > 0,   f >= 0,
// with K the Riesz or Bessel potential operator on the grid. The dual is
//     g(lambda) = sum lambda psi - (s-1) h^n sum (P/s)^{s'},   P = k * lambda,  lambda >= 0,
// with primal recovery f = (P/s)^{1/(s-1)}. Every primal point is scaled
// to exact feasibility before it is reported, so value is an upper bound
// and value - g(lambda) a certified gap.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "capax/grid.hpp"
#include "capax/potential.hpp"

namespace capax {

struct SolverOptions {
  double tol = 1e-6;
  int budget = 20000;
  // Chambolle-Pock iterations run before the Newton phase (or all of them
  // when newton is false).
  int primal_dual_iterations = 100;
  bool newton = true;
};

struct CapacityResult {
  double value = 0.0;
  Field extremal;
  double feasibility_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double dual_value = 0.0;
  Field multiplier;  // lambda, zero off the constraint set
  bool converged = true;
  bool outside_middle_half = false;
};

struct NormEstimate {
  double lower = 0.0;
  double upper = 0.0;
  Field witness;
  std::vector<std::string> heuristic_flags;
  std::string witness_ref;
  bool converged = true;
  // Constant-free equivalent quantity (cube or Wolff functional) when the
  // upper bound comes from an equivalence theorem; NaN otherwise.
  double equivalence = std::numeric_limits<double>::quiet_NaN();

  NormEstimate scaled(double c) const {
    NormEstimate e = *this;
    e.lower *= c;
    e.upper *= c;
    e.equivalence *= c;
    return e;
  }
};

class ObstacleSolver {
 public:
  ObstacleSolver(std::shared_ptr<const PotentialOperator> op, double s) : op_(std::move(op)), s_(s) {
    if (!(s > 1.0)) throw invalid_input("capacity requires s > 1");
    const KernelTable& t = op_->table();
    std::vector<double> sq(t.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = t.values[i] * t.values[i];
    squared_ = std::make_shared<Convolver>(t.grid, sq);
  }

  const PotentialOperator& op() const { return *op_; }
  double s() const { return s_; }

  CapacityResult solve(const Field& psi, const SolverOptions& opt = {}, const std::vector<double>* warm = nullptr) const {
    const Grid& g = op_->grid();
    if (!(psi.grid() == g)) throw incompatible_grids();
    if (!(opt.tol > 0.0)) throw invalid_input("solver tolerance must be positive");
    State st(*this, psi);
    CapacityResult res;
    res.extremal = Field(g);
    res.multiplier = Field(g);
    if (st.C.empty()) return res;

    std::vector<double> lambda(g.size(), 0.0);
    bool have_start = false;
    if (warm && warm->size() == g.size()) {
      for (std::size_t i : st.C) lambda[i] = std::max((*warm)[i], 0.0);
      have_start = std::any_of(lambda.begin(), lambda.end(), [](double x) { return x > 0.0; });
    }
    int iterations = 0;
    Best best;
    if (!have_start || !opt.newton) {
      iterations += primal_dual(st, opt, lambda, best, have_start);
    }
    if (std::none_of(lambda.begin(), lambda.end(), [](double x) { return x > 0.0; }))
      for (std::size_t i : st.C) lambda[i] = 1.0;
    rescale(st, lambda);
    if (opt.newton) iterations += newton(st, opt, lambda, best, opt.budget - iterations);
    else consider(st, lambda, best);

    res.value = best.value;
    res.dual_value = best.dual;
    res.gap = std::max(best.value - best.dual, 0.0);
    res.iterations = iterations;
    res.extremal = Field(g, std::move(best.f), true);
    res.multiplier = Field(g, std::move(best.lambda), true);
    res.feasibility_residual = best.residual;
    res.converged = res.gap <= opt.tol * std::max(res.value, 1.0) && res.feasibility_residual <= opt.tol;
    Mask support(g);
    for (std::size_t i : st.C) support.set(i, true);
    res.outside_middle_half = !support.within_middle_half();
    return res;
  }

 private:
  struct State {
    const ObstacleSolver& self;
    const Field& psi;
    std::vector<std::size_t> C;
    double hn;
    State(const ObstacleSolver& sv, const Field& p) : self(sv), psi(p), hn(sv.op_->grid().cell_volume()) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) throw invalid_input("obstacle must be nonnegative");
        if (p[i] > 0.0) C.push_back(i);
      }
    }
  };

  struct Best {
    double value = std::numeric_limits<double>::infinity();
    double dual = -std::numeric_limits<double>::infinity();
    double residual = 0.0;
    std::vector<double> f;
    std::vector<double> lambda;
  };

  // Quantities derived from a multiplier.
  struct Eval {
    std::vector<double> P, f, Kf;
    double dual = 0.0;
  };

  Eval evaluate(const State& st, const std::vector<double>& lambda) const {
    Eval e;
    e.P = op_->convolve(lambda);
    const double inv = 1.0 / (s_ - 1.0), sc = s_ / (s_ - 1.0);
    e.f.resize(e.P.size());
    double conj = 0.0;
    for (std::size_t i = 0; i < e.P.size(); ++i) {
      double q = std::max(e.P[i], 0.0) / s_;
      e.P[i] = q * s_;
      e.f[i] = q > 0.0 ? std::pow(q, inv) : 0.0;
      conj += q > 0.0 ? std::pow(q, sc) : 0.0;
    }
    e.Kf = op_->convolve(e.f);
    double lin = 0.0;
    for (std::size_t i : st.C) lin += lambda[i] * st.psi[i];
    for (double& x : e.Kf) x *= st.hn;
    e.dual = lin - (s_ - 1.0) * st.hn * conj;
    return e;
  }

  // Feasible rescaling of f and the resulting primal bound.
  void certify(const State& st, const std::vector<double>& f, const std::vector<double>& Kf, double dual,
               const std::vector<double>& lambda, Best& best) const {
    double c = 0.0;
    for (std::size_t i : st.C) {
      if (!(Kf[i] > 0.0)) return;
      c = std::max(c, st.psi[i] / Kf[i]);
    }
    double norm = 0.0;
    for (double x : f) norm += x > 0.0 ? std::pow(x, s_) : 0.0;
    double value = std::pow(c, s_) * st.hn * norm;
    if (dual > best.dual) {
      best.dual = dual;
      best.lambda = lambda;
    }
    if (value < best.value) {
      best.value = value;
      best.f = f;
      double res = 0.0;
      for (double& x : best.f) x *= c;
      for (std::size_t i : st.C) res = std::max(res, st.psi[i] - c * Kf[i]);
      best.residual = std::max(res, 0.0);
    }
    if (best.lambda.empty()) best.lambda = lambda;
  }

  void consider(const State& st, const std::vector<double>& lambda, Best& best) const {
    Eval e = evaluate(st, lambda);
    certify(st, e.f, e.Kf, e.dual, lambda, best);
  }

  // Optimal positive multiple of lambda for the dual: g(c lambda) is
  // c A - c^{s'} B, maximised at c = (A / (s' B))^{s-1}.
  void rescale(const State& st, std::vector<double>& lambda) const {
    Eval e = evaluate(st, lambda);
    double A = 0.0, B = 0.0;
    for (std::size_t i : st.C) A += lambda[i] * st.psi[i];
    const double sc = s_ / (s_ - 1.0);
    for (double P : e.P) B += P > 0.0 ? std::pow(P / s_, sc) : 0.0;
    B *= (s_ - 1.0) * st.hn;
    if (!(A > 0.0) || !(B > 0.0)) return;
    double c = std::pow(A / (sc * B), s_ - 1.0);
    for (double& x : lambda) x *= c;
  }

  // Chambolle-Pock on min_f G(f) + F(A f) with A f = (K f)_C,
  // G(f) = h^n sum f^s + i_{f >= 0}, F = indicator of {z >= psi_C}.
  // Returns the iteration count; lambda receives -y.
  int primal_dual(const State& st, const SolverOptions& opt, std::vector<double>& lambda, Best& best,
                  bool from_lambda) const {
    const std::size_t M = lambda.size();
    auto A = [&](const std::vector<double>& f) {
      auto v = op_->convolve(f);
      for (double& x : v) x *= st.hn;
      return v;
    };
    // ||A||^2 by power iteration on A^T A.
    std::vector<double> v(M, 1.0);
    double norm2 = 0.0;
    for (int k = 0; k < 30; ++k) {
      auto Av = A(v);
      std::vector<double> r(M, 0.0);
      for (std::size_t i : st.C) r[i] = Av[i];
      auto AtAv = A(r);
      double nv = std::sqrt(std::inner_product(AtAv.begin(), AtAv.end(), AtAv.begin(), 0.0));
      double nold = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      norm2 = nv / nold;
      for (std::size_t i = 0; i < M; ++i) v[i] = AtAv[i] / nv;
    }
    const double L = std::sqrt(norm2) * 1.01;
    const double tau = 0.99 / L, sigma = 0.99 / L;
    const double a = tau * st.hn * s_;  // prox: a f^{s-1} + f = v

    std::vector<double> y(M, 0.0), f(M, 0.0), fbar(M, 0.0);
    if (from_lambda) {
      for (std::size_t i : st.C) y[i] = -lambda[i];
      f = evaluate(st, lambda).f;
      fbar = f;
    }
    const int iters = opt.newton ? std::min(opt.primal_dual_iterations, opt.budget) : opt.budget;
    int k = 0;
    for (; k < iters; ++k) {
      auto Af = A(fbar);
      for (std::size_t i : st.C) y[i] = std::min(y[i] + sigma * Af[i] - sigma * st.psi[i], 0.0);
      auto Aty = A(y);
      for (std::size_t i = 0; i < M; ++i) {
        double w = f[i] - tau * Aty[i];
        double fn = prox_power(w, a);
        fbar[i] = 2.0 * fn - f[i];
        f[i] = fn;
      }
      if (!opt.newton && (k + 1) % 50 == 0) {
        std::vector<double> lam(M, 0.0);
        for (std::size_t i : st.C) lam[i] = -y[i];
        auto Kf = A(f);
        consider(st, lam, best);
        certify(st, f, Kf, best.dual, best.lambda, best);
        if (best.value - best.dual <= opt.tol * std::max(best.value, 1.0) && best.residual <= opt.tol) {
          ++k;
          break;
        }
      }
    }
    for (std::size_t i : st.C) lambda[i] = -y[i];
    return k;
  }

  // argmin_f a/s f^s ... i.e. the root of a f^{s-1} + f = v on f >= 0.
  double prox_power(double v, double a) const {
    if (v <= 0.0) return 0.0;
    if (s_ == 2.0) return v / (1.0 + a);
    double lo = 0.0, hi = v;
    double f = std::min(v, std::pow(v / a, 1.0 / (s_ - 1.0)));
    for (int it = 0; it < 60; ++it) {
      double r = a * std::pow(f, s_ - 1.0) + f - v;
      if (r > 0) hi = f;
      else lo = f;
      double d = a * (s_ - 1.0) * std::pow(f, s_ - 2.0) + 1.0;
      double next = f - r / d;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - f) <= 1e-15 * v) return next;
      f = next;
    }
    return f;
  }

  // Projected Newton-CG on the dual (Bertsekas two-metric active sets).
  int newton(const State& st, const SolverOptions& opt, std::vector<double>& lambda, Best& best, int budget) const {
    const std::size_t M = lambda.size();
    const double target = std::max(opt.tol * opt.tol, 1e-13);
    int it = 0;
    Eval e = evaluate(st, lambda);
    for (; it < std::max(budget, 1); ++it) {
      certify(st, e.f, e.Kf, e.dual, lambda, best);
      if (best.value - best.dual <= target * best.value) break;

      // Hessian diagonal: h^n (k^2 * D)_i with D = (P/s)^{(2-s)/(s-1)} / (s (s-1)).
      std::vector<double> D(M);
      for (std::size_t i = 0; i < M; ++i)
        D[i] = e.P[i] > 0.0 ? std::pow(e.P[i] / s_, (2.0 - s_) / (s_ - 1.0)) / (s_ * (s_ - 1.0)) : 0.0;
      auto diag = squared_->apply(D);
      std::vector<double> grad(M, 0.0);
      for (std::size_t i : st.C) {
        grad[i] = e.Kf[i] - st.psi[i];
        diag[i] = std::max(diag[i] * st.hn, std::numeric_limits<double>::min());
      }
      double w = 0.0;
      for (std::size_t i : st.C) w = std::max(w, std::abs(lambda[i] - std::max(lambda[i] - grad[i] / diag[i], 0.0)));
      std::vector<char> free(M, 0);
      std::vector<std::size_t> F;
      for (std::size_t i : st.C) {
        bool active = lambda[i] <= w && grad[i] > 0.0;
        if (!active) {
          free[i] = 1;
          F.push_back(i);
        }
      }
      auto hess = [&](const std::vector<double>& v) {
        auto Kv = op_->convolve(v);
        for (std::size_t i = 0; i < M; ++i) Kv[i] *= D[i];
        auto out = op_->convolve(Kv);
        std::vector<double> r(M, 0.0);
        for (std::size_t i : F) r[i] = out[i] * st.hn;
        return r;
      };
      // Preconditioned CG on H_FF d = -grad_F.
      std::vector<double> d(M, 0.0), r(M, 0.0), z(M, 0.0), p(M, 0.0);
      double gnorm = 0.0;
      for (std::size_t i : F) {
        r[i] = -grad[i];
        gnorm += grad[i] * grad[i];
      }
      gnorm = std::sqrt(gnorm);
      double forcing = std::min(0.5, std::sqrt(gnorm)) * gnorm;
      for (std::size_t i : F) z[i] = r[i] / diag[i];
      p = z;
      double rz = 0.0;
      for (std::size_t i : F) rz += r[i] * z[i];
      for (int cg = 0; cg < 250 && !F.empty(); ++cg) {
        auto Hp = hess(p);
        double pHp = 0.0;
        for (std::size_t i : F) pHp += p[i] * Hp[i];
        if (!(pHp > 0.0)) break;
        double step = rz / pHp;
        double rn = 0.0;
        for (std::size_t i : F) {
          d[i] += step * p[i];
          r[i] -= step * Hp[i];
          rn += r[i] * r[i];
        }
        if (std::sqrt(rn) <= forcing) break;
        double rz_new = 0.0;
        for (std::size_t i : F) {
          z[i] = r[i] / diag[i];
          rz_new += r[i] * z[i];
        }
        for (std::size_t i : F) p[i] = z[i] + (rz_new / rz) * p[i];
        rz = rz_new;
      }
      for (std::size_t i : st.C)
        if (!free[i]) d[i] = -grad[i] / diag[i];

      // Armijo backtracking along the projection arc; phi = -g.
      bool moved = false;
      for (double t = 1.0; t > 1e-12; t *= 0.5) {
        std::vector<double> trial(M, 0.0);
        double decrease = 0.0;
        for (std::size_t i : st.C) {
          trial[i] = std::max(lambda[i] + t * d[i], 0.0);
          decrease += grad[i] * (trial[i] - lambda[i]);
        }
        Eval et = evaluate(st, trial);
        // Near the optimum dual values stop resolving below rounding; then a
        // step is accepted when it leaves g unchanged to rounding and shrinks
        // the projected gradient.
        bool armijo = -et.dual <= -e.dual + 1e-4 * decrease;
        bool flat = std::abs(et.dual - e.dual) <= 64 * std::numeric_limits<double>::epsilon() * std::abs(e.dual) &&
                    projected_gradient(st, trial, et) < projected_gradient(st, lambda, e);
        if (armijo || flat) {
          lambda.swap(trial);
          e = std::move(et);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    certify(st, e.f, e.Kf, e.dual, lambda, best);
    return it + 1;
  }

  static double projected_gradient(const State& st, const std::vector<double>& lambda, const Eval& e) {
    double sum = 0.0;
    for (std::size_t i : st.C) {
      double gr = e.Kf[i] - st.psi[i];
      double pg = lambda[i] > 0.0 ? gr : std::min(gr, 0.0);
      sum += pg * pg;
    }
    return std::sqrt(sum);
  }

  std::shared_ptr<const PotentialOperator> op_;
  double s_;
  std::shared_ptr<Convolver> squared_;
};

inline std::shared_ptr<const ObstacleSolver> obstacle_solver(const Grid& g, double alpha, double s, KernelKind kind) {
  return std::make_shared<const ObstacleSolver>(potential_operator(g, alpha, kind), s);
}

inline CapacityResult capacity(const Mask& E, const Params& params, KernelKind kind, double tol = 1e-6) {
  params.validate(kind);
  if (E.grid().dim != params.n) throw invalid_input("mask dimension does not match n");
  SolverOptions opt;
  opt.tol = tol;
  return ObstacleSolver(potential_operator(E.grid(), params.alpha, kind), params.s).solve(E.indicator(), opt);
}

/// Capacities of masks on one grid, memoised by mask contents, plus the
/// Choquet integral built on them.
class CapacityOracle {
 public:
  CapacityOracle(const Grid& g, const Params& params, KernelKind kind, double tol = 1e-6, int levels = 48)
      : grid_(g), params_(params), kind_(kind), levels_(levels), solver_(obstacle_solver(g, params.alpha, params.s, kind)) {
    params.validate(kind);
    if (g.dim != params.n) throw invalid_input("grid dimension does not match n");
    if (levels < 2) throw invalid_input("Choquet integral needs at least 2 levels");
    opt_.tol = tol;
  }

  const Grid& grid() const { return grid_; }
  const Params& params() const { return params_; }
  KernelKind kind() const { return kind_; }
  const ObstacleSolver& solver() const { return *solver_; }
  const SolverOptions& options() const { return opt_; }
  int levels() const { return levels_; }
  int solves() const { return solves_; }
  bool degraded() const { return degraded_; }

  double capacity(const Mask& E, const std::vector<double>* warm = nullptr) { return entry(E, warm).value; }

  const CapacityResult& result(const Mask& E, const std::vector<double>* warm = nullptr) { return entry(E, warm); }

  /// int_0^inf cap({g > t}) dt for g >= 0.
  ///
  /// On a grid t -> cap({g > t}) is a step function with jumps at the
  /// distinct values d_1 > ... > d_D of g, so the integral is
  /// sum_j (d_j - d_{j+1}) cap({g >= d_j}). When D exceeds the level budget,
  /// capacities are computed on the sets whose node counts are nearest to
  /// a log-spaced sequence of counts and log-log interpolated in between.
  double choquet(const Field& g) {
    if (!(g.grid() == grid_)) throw incompatible_grids();
    if (g.min() < 0.0) throw invalid_input("Choquet integral needs a nonnegative function");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] > 0.0) order.push_back(i);
    if (order.empty()) return 0.0;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
    // Distinct values and the node count of each superlevel set. Values
    // within kTie of the level's top count as one level, so rounding in g
    // (mirror nodes of a symmetric bump) cannot change which sets are solved.
    constexpr double kTie = 1e-12;
    std::vector<double> vals;
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < order.size(); ++k) {
      double v = g[order[k]];
      if (vals.empty() || v < vals.back() * (1.0 - kTie)) {
        vals.push_back(v);
        counts.push_back(k + 1);
      } else {
        counts.back() = k + 1;
      }
    }
    const std::size_t D = vals.size();
    std::vector<std::size_t> chosen;
    if (D <= static_cast<std::size_t>(levels_)) {
      for (std::size_t j = 0; j < D; ++j) chosen.push_back(j);
    } else {
      double c0 = std::log(double(counts.front())), c1 = std::log(double(counts.back()));
      std::size_t j = 0;
      for (int l = 0; l < levels_; ++l) {
        double target = std::exp(c0 + (c1 - c0) * l / (levels_ - 1));
        while (j + 1 < D && std::abs(double(counts[j + 1]) - target) <= std::abs(double(counts[j]) - target)) ++j;
        if (chosen.empty() || chosen.back() != j) chosen.push_back(j);
      }
      if (chosen.back() != D - 1) chosen.push_back(D - 1);
    }
    // Solve from the smallest set outward, warm-starting each from the last.
    std::vector<double> caps(chosen.size());
    std::vector<double> warm;
    for (std::size_t c = 0; c < chosen.size(); ++c) {
      std::size_t j = chosen[c];
      Mask S(grid_);
      for (std::size_t k = 0; k < counts[j]; ++k) S.set(order[k], true);
      const CapacityResult& r = entry(S, warm.empty() ? nullptr : &warm);
      caps[c] = r.value;
      warm = r.multiplier.data();
    }
    for (std::size_t c = 1; c < caps.size(); ++c) caps[c] = std::max(caps[c], caps[c - 1]);
    double total = 0.0;
    std::size_t c = 0;
    for (std::size_t j = 0; j < D; ++j) {
      while (chosen[c] < j) ++c;
      double cap;
      if (chosen[c] == j) {
        cap = caps[c];
      } else {
        // chosen[c-1] < j < chosen[c]: interpolate log cap against log count.
        double x0 = std::log(double(counts[chosen[c - 1]])), x1 = std::log(double(counts[chosen[c]]));
        double y0 = std::log(caps[c - 1]), y1 = std::log(caps[c]);
        double x = std::log(double(counts[j]));
        cap = std::exp(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
      }
      double next = j + 1 < D ? vals[j + 1] : 0.0;
      total += (vals[j] - next) * cap;
    }
    return total;
  }

  double lq_norm(const Field& u, double q) {
    if (!(q >= 1.0)) throw invalid_input("L^q(cap) needs q >= 1");
    return std::pow(choquet(u.abs().pow(q)), 1.0 / q);
  }

  /// Obstacle program with psi = |u|^{1/r}: inf ||f||_s^r over f >= 0 with K f >= |u|^{1/r}.
  NormEstimate f_norm(const Field& u, double r, const std::vector<double>* warm = nullptr) {
    if (!(u.grid() == grid_)) throw incompatible_grids();
    if (!(r > 0.0)) throw invalid_input("f_norm needs r > 0");
    NormEstimate est;
    est.witness = Field(grid_);
    est.witness_ref = "f_norm_extremal";
    Field psi = u.abs().pow(1.0 / r);
    if (psi.is_zero()) return est;
    CapacityResult res = solver_->solve(psi, opt_, warm);
    ++solves_;
    degraded_ = degraded_ || !res.converged;
    est.upper = std::pow(res.value, r / params_.s);
    est.lower = std::pow(std::max(res.dual_value, 0.0), r / params_.s);
    est.witness = res.extremal;
    est.converged = res.converged;
    last_multiplier_ = res.multiplier.data();
    return est;
  }

  const std::vector<double>& last_multiplier() const { return last_multiplier_; }

 private:
  const CapacityResult& entry(const Mask& E, const std::vector<double>* warm) {
    if (!(E.grid() == grid_)) throw incompatible_grids();
    auto& bucket = memo_[E.hash()];
    for (auto& [mask, res] : bucket)
      if (mask == E) return res;
    CapacityResult r = solver_->solve(E.indicator(), opt_, warm);
    ++solves_;
    degraded_ = degraded_ || !r.converged;
    bucket.emplace_back(E, std::move(r));
    return bucket.back().second;
  }

  Grid grid_;
  Params params_;
  KernelKind kind_;
  int levels_;
  std::shared_ptr<const ObstacleSolver> solver_;
  SolverOptions opt_;
  std::unordered_map<std::size_t, std::vector<std::pair<Mask, CapacityResult>>> memo_;
  int solves_ = 0;
  bool degraded_ = false;
  std::vector<double> last_multiplier_;
};

inline double choquet_integral(const Field& g, const Params& params, KernelKind kind, int levels = 48, double tol = 1e-6) {
  CapacityOracle oracle(g.grid(), params, kind, tol, levels);
  return oracle.choquet(g);
}

inline double lq_cap_norm(const Field& u, double q, const Params& params, KernelKind kind, int levels = 48,
                          double tol = 1e-6) {
  CapacityOracle oracle(u.grid(), params, kind, tol, levels);
  return oracle.lq_norm(u, q);
}

inline NormEstimate f_norm(const Field& u, const Params& params, KernelKind kind, double tol = 1e-6) {
  CapacityOracle oracle(u.grid(), params, kind, tol);
  return oracle.f_norm(u, params.r);
}

}  // namespace capax
