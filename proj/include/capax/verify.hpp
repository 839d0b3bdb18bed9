#pragma once

// Empirical constants of the capacity inequalities over seeded families,
// with refinement studies. Every check returns a ConstantReport of
// (lhs, rhs, ratio) samples; checks comparing several equivalent
// quantities tag each sample with the pair it compares ("A1/W_mu").
//
// Samples are independent (each owns its capacity oracle), so running them
// on several threads gives the same report bit for bit.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "capax/capacity.hpp"
#include "capax/family.hpp"
#include "capax/io.hpp"
#include "capax/kernel.hpp"
#include "capax/potential.hpp"
#include "capax/spaces.hpp"

namespace capax {

enum class Check { csim, adams, main2, ibp, boundedness, upper_tri, wolff_weak, newnorm2, kv_equiv, main3, weights };

inline const std::vector<std::pair<Check, std::string>>& check_names() {
  static const std::vector<std::pair<Check, std::string>> names{
      {Check::csim, "csim"},         {Check::adams, "adams"},         {Check::main2, "main2"},
      {Check::ibp, "ibp"},           {Check::boundedness, "boundedness"}, {Check::upper_tri, "upper_tri"},
      {Check::wolff_weak, "wolff_weak"}, {Check::newnorm2, "newnorm2"},  {Check::kv_equiv, "kv_equiv"},
      {Check::main3, "main3"},       {Check::weights, "weights"}};
  return names;
}

inline std::string to_string(Check c) {
  for (const auto& [k, name] : check_names())
    if (k == c) return name;
  return "unknown";
}

inline Check check_from_string(const std::string& s) {
  for (const auto& [k, name] : check_names())
    if (name == s) return k;
  throw invalid_input("unknown check '" + s + "'");
}

/// Seed of the default verification families.
inline constexpr std::uint64_t kDefaultFamilySeed = 42;

/// A seeded family on one grid: fields or measures, never both.
struct Family {
  std::string name;
  std::uint64_t seed = 0;
  Grid grid;
  std::vector<FamilyMember> fields;
  std::vector<MeasureMember> measures;

  bool is_measure() const { return is_measure_family(name); }
  std::size_t size() const { return is_measure() ? measures.size() : fields.size(); }

  Family scaled(double c) const {
    Family f = *this;
    for (auto& m : f.fields) m.field = m.field.scaled(c);
    for (auto& m : f.measures) m.measure = m.measure.scaled(c);
    return f;
  }
};

inline Family family(const std::string& name, std::uint64_t seed, int count, const Grid& g) {
  Family f;
  f.name = name;
  f.seed = seed;
  f.grid = g;
  if (is_measure_family(name)) f.measures = measure_family(name, seed, count, g);
  else f.fields = field_family(name, seed, count, g);
  return f;
}

/// Per-member mass and support size; the recorded-manifest test compares
/// against this.
inline json family_manifest(const Family& f) {
  json members = json::array();
  if (f.is_measure()) {
    for (const auto& m : f.measures) {
      auto masses = node_masses(m.measure);
      std::size_t support = static_cast<std::size_t>(std::count_if(masses.begin(), masses.end(), [](double x) { return x > 0.0; }));
      members.push_back({{"id", m.id}, {"shape", m.shape}, {"mass", m.measure.total_mass()}, {"support", support}});
    }
  } else {
    for (const auto& m : f.fields) {
      members.push_back({{"id", m.id},
                         {"shape", m.shape},
                         {"mass", integrate(m.field.abs())},
                         {"support", Mask::support(m.field).count()}});
    }
  }
  return json{{"family", f.name}, {"seed", f.seed}, {"grid", grid_to_json(f.grid)}, {"members", members}};
}

struct Sample {
  std::string id;
  std::string quantity;  // empty for single-ratio checks
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool skipped = false;
};

struct RefinementPoint {
  int points = 0;
  std::string quantity;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

struct Band {
  std::string quantity;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  int samples = 0;
};

struct ConstantReport {
  Check inequality_id = Check::csim;
  std::string label;
  Params params;
  KernelKind kind = KernelKind::riesz;
  std::string family;
  std::uint64_t family_seed = 0;
  Grid grid;
  // Check-specific arguments (q, t, R, a, ...), in insertion order.
  std::vector<std::pair<std::string, double>> settings;
  std::vector<Sample> samples;
  double max_ratio = 0.0;
  std::vector<RefinementPoint> refinement;
  std::vector<std::string> flags;

  void flag(const std::string& f) {
    if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
  }

  /// Records lhs/rhs. 0/0 is skipped with a flag; lhs > 0 = rhs gives an
  /// infinite ratio, which fails finite().
  void add(const std::string& id, const std::string& quantity, double lhs, double rhs) {
    Sample s{id, quantity, lhs, rhs};
    if (rhs > 0.0) {
      s.ratio = lhs / rhs;
    } else if (lhs == 0.0 && rhs == 0.0) {
      s.skipped = true;
      flag("skipped_zero_sample");
    } else {
      s.ratio = std::numeric_limits<double>::infinity();
      flag("positive_over_zero");
    }
    samples.push_back(s);
  }

  /// Sorts by (id, quantity) and recomputes max_ratio. NaN poisons it.
  void finalize() {
    std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
      return a.id != b.id ? a.id < b.id : a.quantity < b.quantity;
    });
    max_ratio = 0.0;
    for (const auto& s : samples) {
      if (s.skipped) continue;
      if (std::isnan(s.ratio)) {
        max_ratio = s.ratio;
        return;
      }
      max_ratio = std::max(max_ratio, s.ratio);
    }
  }

  /// Min and max ratio per quantity, in order of first appearance.
  std::vector<Band> bands() const {
    std::vector<Band> out;
    for (const auto& s : samples) {
      if (s.skipped) continue;
      auto it = std::find_if(out.begin(), out.end(), [&](const Band& b) { return b.quantity == s.quantity; });
      if (it == out.end()) {
        out.push_back({s.quantity, s.ratio, s.ratio, 1});
      } else {
        it->min_ratio = std::min(it->min_ratio, s.ratio);
        it->max_ratio = std::max(it->max_ratio, s.ratio);
        ++it->samples;
      }
    }
    return out;
  }

  bool finite() const {
    if (!std::isfinite(max_ratio)) return false;
    for (const auto& s : samples)
      if (!s.skipped && !std::isfinite(s.ratio)) return false;
    return true;
  }

  double setting(const std::string& key) const {
    for (const auto& [k, v] : settings)
      if (k == key) return v;
    throw invalid_input("report has no setting '" + key + "'");
  }
};

/// Largest relative change |b/a - 1| of any band end between consecutive
/// refinement levels; +inf if a band vanishes or is not finite.
inline double refinement_drift(const ConstantReport& r) {
  double drift = 0.0;
  for (std::size_t i = 0; i < r.refinement.size(); ++i) {
    for (std::size_t j = i + 1; j < r.refinement.size(); ++j) {
      const auto& a = r.refinement[i];
      const auto& b = r.refinement[j];
      if (a.quantity != b.quantity) continue;
      for (auto [x, y] : {std::pair{a.min_ratio, b.min_ratio}, std::pair{a.max_ratio, b.max_ratio}}) {
        if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(y)) return std::numeric_limits<double>::infinity();
        drift = std::max(drift, std::abs(y / x - 1.0));
      }
      break;  // only the next level of the same quantity
    }
  }
  return drift;
}

struct VerifyOptions {
  double tol = 1e-6;
  int levels = 48;
  int threads = 1;
  SpaceOptions space{};

  SpaceOptions space_options() const {
    SpaceOptions o = space;
    o.tol = tol;
    o.levels = levels;
    return o;
  }
};

/// Runs fn(0..count-1) on up to `threads` workers. The first exception (by
/// index) is rethrown.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline ConstantReport start_report(Check id, const std::string& label, const Params& params, KernelKind kind,
                                   const Family& fam) {
  ConstantReport r;
  r.inequality_id = id;
  r.label = label;
  r.params = params;
  r.kind = kind;
  r.family = fam.name;
  r.family_seed = fam.seed;
  r.grid = fam.grid;
  return r;
}

inline std::string number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline void require_fields(const Family& fam, const char* check) {
  if (fam.is_measure()) throw invalid_input(std::string(check) + " needs a field family");
  if (fam.grid.dim == 0) throw invalid_input("family has no grid");
}

inline void require_measures(const Family& fam, const char* check) {
  if (!fam.is_measure()) throw invalid_input(std::string(check) + " needs a measure family");
}

// One (lhs, rhs) pair per sample, or several tagged pairs.
using Rows = std::vector<std::pair<std::string, std::pair<double, double>>>;

inline void run_samples(ConstantReport& report, std::size_t count, int threads,
                        const std::function<Rows(std::size_t)>& sample, const std::function<std::string(std::size_t)>& id) {
  std::vector<Rows> rows(count);
  parallel_for(count, threads, [&](std::size_t k) { rows[k] = sample(k); });
  for (std::size_t k = 0; k < count; ++k)
    for (const auto& [quantity, v] : rows[k]) report.add(id(k), quantity, v.first, v.second);
  report.finalize();
}

inline Rows pairwise(const std::vector<std::pair<std::string, double>>& q) {
  Rows out;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = i + 1; j < q.size(); ++j) out.push_back({q[i].first + "/" + q[j].first, {q[i].second, q[j].second}});
  return out;
}

inline double wolff_radius(KernelKind kind) {
  return kind == KernelKind::riesz ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace detail

// ------------------------------------------------------------ Adams / CSIM

/// int (I f)^q dcap <= A int_{f > 0} f^s (I f)^{q-s}; q = s is the
/// capacitary strong-type inequality.
inline ConstantReport check_adams(double q, const Params& params, const Family& fam, KernelKind kind,
                                  const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_adams");
  if (!(q >= 1.0)) throw invalid_input("check_adams requires q >= 1");
  Params p = params;
  p.q = q;
  auto report = detail::start_report(Check::adams, "adams q=" + detail::number(q), p, kind, fam);
  report.settings = {{"q", q}};
  auto op = potential_operator(fam.grid, params.alpha, kind);
  const double s = params.s;
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        // Both sides are q-homogeneous; evaluate on f / max f and scale back.
        const double m = fam.fields[k].field.max_abs();
        if (m == 0.0) return {{"", {0.0, 0.0}}};
        const Field f = fam.fields[k].field.abs().scaled(1.0 / m);
        Field If = op->apply(f);
        CapacityOracle oracle(fam.grid, params, kind, opt.tol, opt.levels);
        double lhs = oracle.choquet(If.pow(q));
        std::vector<double> v(f.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i)
          if (f[i] > 0.0) v[i] = std::pow(f[i], s) * std::pow(If[i], q - s);
        double rhs = integrate(Field(fam.grid, std::move(v), true));
        const double mq = std::pow(m, q);
        if (oracle.degraded()) degraded = true;
        return {{"", {lhs * mq, rhs * mq}}};
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

/// int (I f)^s dcap <= A int f^s. Same computation as check_adams at q = s.
inline ConstantReport check_csim(const Params& params, const Family& fam, KernelKind kind, const VerifyOptions& opt = {}) {
  ConstantReport r = check_adams(params.s, params, fam, kind, opt);
  r.inequality_id = Check::csim;
  r.label = "csim";
  r.settings.clear();
  return r;
}

// ------------------------------------------------------------------ Main2

enum class Main2Weight { otilde_witness, constant };

/// (int (I f)^q dcap)^{1/q} <= C (int_{f != 0} f^s w^{q-s})^{1/s} for
/// weights with ||w||_{L^q(cap)} <= 1: either the O~-norm witness of f or
/// the constant cap(box)^{-1/q}.
inline ConstantReport check_main2(double q, const Params& params, const Family& fam, KernelKind kind,
                                  Main2Weight weight = Main2Weight::otilde_witness, const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_main2");
  const double s = params.s;
  if (!(q >= 1.0 && q < s)) throw invalid_input("check_main2 requires 1 <= q < s");
  Params p = params;
  p.q = q;
  auto report = detail::start_report(Check::main2, "main2 q=" + detail::number(q), p, kind, fam);
  report.settings = {{"q", q}, {"constant_weight", weight == Main2Weight::constant ? 1.0 : 0.0}};
  auto op = potential_operator(fam.grid, params.alpha, kind);
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Field f = fam.fields[k].field.abs();
        SpaceEvaluator ev(fam.grid, p, kind, opt.space_options());
        Field w(fam.grid);
        if (weight == Main2Weight::constant) {
          double c = ev.cap_norm(Field(fam.grid, 1.0), q);
          w = Field(fam.grid, 1.0 / c);
        } else if (!f.is_zero()) {
          ev.otilde_norm(f);
          const Field& raw = ev.last_weight().weight;
          double nrm = ev.cap_norm(raw, q);
          if (nrm > 0.0) w = raw.scaled(1.0 / nrm);
        }
        double lhs = std::pow(ev.oracle().choquet(op->apply(f).pow(q)), 1.0 / q);
        std::vector<double> v(f.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (f[i] == 0.0) continue;
          v[i] = w[i] > 0.0 ? std::pow(f[i], s) * std::pow(w[i], q - s) : std::numeric_limits<double>::infinity();
        }
        double sum = 0.0;
        for (double x : v) sum += x;
        double rhs = std::isfinite(sum) ? std::pow(integrate(Field(fam.grid, std::move(v), true)), 1.0 / s) : sum;
        if (ev.oracle().degraded()) degraded = true;
        return {{"", {lhs, rhs}}};
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// -------------------------------------------------------------------- IBP

/// (I f)^t <= A I[f (I f)^{t-1}] pointwise; per sample the largest node
/// ratio, reported with the lhs and rhs at that node.
inline ConstantReport check_ibp(double t, const Params& params, const Family& fam, KernelKind kind,
                                const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_ibp");
  if (!(t >= 1.0)) throw invalid_input("check_ibp requires t >= 1");
  auto report = detail::start_report(Check::ibp, "ibp t=" + detail::number(t), params, kind, fam);
  report.settings = {{"t", t}};
  auto op = potential_operator(fam.grid, params.alpha, kind);
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Field f = fam.fields[k].field.abs();
        Field If = op->apply(f);
        Field lhs = If.pow(t);
        Field rhs = op->apply(f * If.pow(t - 1.0));
        double best = -1.0, bl = 0.0, br = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
          if (!(rhs[i] > 0.0)) {
            if (lhs[i] > 0.0) return {{"", {lhs[i], 0.0}}};
            continue;
          }
          double q = lhs[i] / rhs[i];
          if (q > best) {
            best = q;
            bl = lhs[i];
            br = rhs[i];
          }
        }
        return {{"", {bl, br}}};
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// ------------------------------------------------------------ Boundedness

/// max_x W^R mu(x) <= 2^beta sup_{supp mu} W^{2R} mu, beta = (n - alpha s)/(s - 1).
/// lhs = grid max of W^R, rhs = 2^beta times the support max of W^{2R}.
inline ConstantReport check_boundedness(const Params& params, const Family& fam, double R, const VerifyOptions& opt = {}) {
  params.validate(KernelKind::bessel);
  detail::require_measures(fam, "check_boundedness");
  if (!(R > 0.0)) throw invalid_input("check_boundedness requires R > 0");
  auto report = detail::start_report(Check::boundedness, "boundedness R=" + detail::number(R), params, KernelKind::riesz, fam);
  report.settings = {{"R", R}};
  const double bound = std::pow(2.0, params.wolff_exponent());
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.measures.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Measure& mu = fam.measures[k].measure;
        if (mu.density) throw invalid_input("check_boundedness needs atomic measures");
        if (mu.is_zero()) return {{"", {0.0, 0.0}}};
        WolffEvaluator W(mu, params.alpha, params.s);
        Field w = W.on_grid(R);
        double top = 0.0;
        for (const auto& a : mu.atoms) top = std::max(top, W(a.position, 2.0 * R));
        return {{"", {w.max(), bound * top}}};
      },
      [&](std::size_t k) { return fam.measures[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// ------------------------------------------------------- upper triangle

struct UpperTriQuantities {
  double trace = 0.0;     // A1: best trace constant found (lower bound)
  double dual = 0.0;      // A2: best sampled int u dmu / ||u||_{L^{s/r}(cap)}
  double wolff_mu = 0.0;  // (int W^{(s-1) r/(s-r)} dmu)^{(s-r)/s}
  double wolff_cap = 0.0; // (int W^{(s-1) s/(s-r)} dcap)^{(s-r)/s}
  bool degraded = false;  // some capacity solve hit its budget
};

namespace detail {

inline UpperTriQuantities upper_tri_unscaled(const Measure& mu, const Params& params, KernelKind kind,
                                             const VerifyOptions& opt) {
  const double s = params.s, r = params.r;
  UpperTriQuantities out;
  const Grid& g = mu.grid;
  SpaceEvaluator ev(g, params, kind, opt.space_options());
  std::vector<double> masses = node_masses(mu);
  Field h(g);
  out.trace = ev.trace_ascent(masses, r, 1.0, {}, &h);

  Field W = WolffEvaluator(mu, params.alpha, s).on_grid(detail::wolff_radius(kind));
  out.wolff_mu = ev.wolff_functional(mu, r, 1.0);
  out.wolff_cap = std::pow(ev.oracle().choquet(W.pow((s - 1.0) * s / (s - r))), (s - r) / s);

  auto pairing = [&](const Field& u) {
    double num = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) num += masses[i] * u[i];
    double den = ev.cap_norm(u, s / r);
    return den > 0.0 ? num / den : 0.0;
  };
  out.dual = std::max(pairing(W.pow((s - 1.0) * r / (s - r))), pairing(ev.potential(h).pow(r)));
  out.degraded = ev.oracle().degraded();
  return out;
}

}  // namespace detail

/// The four equivalent quantities for one measure; r = params.r < s.
inline UpperTriQuantities upper_tri_quantities(const Measure& mu, const Params& params, KernelKind kind,
                                               const VerifyOptions& opt = {}) {
  const double r = params.r;
  if (!(r > 0.0 && r < params.s)) throw invalid_input("upper-triangle quantities need 0 < r < s");
  if (mu.is_zero()) return {};
  // All four are linear in mu: evaluate at unit mass and scale back.
  const double total = mu.total_mass();
  if (total == 1.0) return detail::upper_tri_unscaled(mu, params, kind, opt);
  UpperTriQuantities u = detail::upper_tri_unscaled(mu.scaled(1.0 / total), params, kind, opt);
  return {u.trace * total, u.dual * total, u.wolff_mu * total, u.wolff_cap * total, u.degraded};
}

inline ConstantReport check_upper_tri(const Params& params, const Family& fam, KernelKind kind, const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_measures(fam, "check_upper_tri");
  if (!(params.r < params.s)) throw invalid_input("check_upper_tri requires r < s");
  auto report = detail::start_report(Check::upper_tri, "upper_tri r=" + detail::number(params.r), params, kind, fam);
  report.settings = {{"r", params.r}};
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.measures.size(), opt.threads,
      [&](std::size_t k) {
        auto v = upper_tri_quantities(fam.measures[k].measure, params, kind, opt);
        if (v.degraded) degraded = true;
        return detail::pairwise({{"A1", v.trace}, {"A2", v.dual}, {"W_mu", v.wolff_mu}, {"W_cap", v.wolff_cap}});
      },
      [&](std::size_t k) { return fam.measures[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// ------------------------------------------------------------ Wolff weak

struct WolffWeakRow {
  double a = 0.0;
  double t = 0.0;
  double lhs = 0.0;  // cap({W mu > a t})
  double rhs = 0.0;  // t^{1-s} mu({W mu > t})
};

/// cap(E_{a t}) against t^{1-s} mu(E_t), E_t = {W mu > t}, for a in {2, 4, 8}.
inline std::vector<WolffWeakRow> check_wolff_weak(const Measure& mu, double t, const Params& params,
                                                  KernelKind kind = KernelKind::riesz, double tol = 1e-6,
                                                  CapacityOracle* shared = nullptr) {
  params.validate(kind);
  if (!(t > 0.0)) throw invalid_input("check_wolff_weak requires t > 0");
  std::vector<WolffWeakRow> rows;
  Field W = mu.is_zero() ? Field(mu.grid) : WolffEvaluator(mu, params.alpha, params.s).on_grid(detail::wolff_radius(kind));
  std::vector<double> masses = node_masses(mu);
  double mass = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i)
    if (W[i] > t) mass += masses[i];
  std::unique_ptr<CapacityOracle> own;
  if (!shared) own = std::make_unique<CapacityOracle>(mu.grid, params, kind, tol);
  CapacityOracle& oracle = shared ? *shared : *own;
  for (double a : {2.0, 4.0, 8.0}) {
    Mask E = Mask::superlevel(W, a * t);
    double cap = E.empty() ? 0.0 : oracle.capacity(E);
    rows.push_back({a, t, cap, std::pow(t, 1.0 - params.s) * mass});
  }
  return rows;
}

/// check_wolff_weak over a measure family at t = max W / (8 * 2^j),
/// j < steps; the quantity tag is "a=<a>".
inline ConstantReport check_wolff_weak_sweep(const Params& params, const Family& fam, KernelKind kind, int steps = 4,
                                             const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_measures(fam, "check_wolff_weak");
  auto report = detail::start_report(Check::wolff_weak, "wolff_weak", params, kind, fam);
  report.settings = {{"steps", steps}};
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.measures.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Measure& mu = fam.measures[k].measure;
        if (mu.is_zero()) return {};
        CapacityOracle oracle(fam.grid, params, kind, opt.tol, opt.levels);
        double top = WolffEvaluator(mu, params.alpha, params.s).on_grid(detail::wolff_radius(kind)).max();
        detail::Rows rows;
        for (int j = 0; j < steps; ++j) {
          double t = std::ldexp(top / 8.0, -j) * (1.0 - 1e-9);
          for (const auto& row : check_wolff_weak(mu, t, params, kind, opt.tol, &oracle))
            rows.push_back({"a=" + detail::number(row.a) + " j=" + std::to_string(j), {row.lhs, row.rhs}});
        }
        if (oracle.degraded()) degraded = true;
        return rows;
      },
      [&](std::size_t k) { return fam.measures[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// ---------------------------------------------------- norm equivalences

/// ||u||_{L^q(cap)}, lambda(u) and beta(u) pairwise.
inline ConstantReport check_newnorm2(double q, const Params& params, const Family& fam, KernelKind kind,
                                     const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_newnorm2");
  Params p = params;
  p.q = q;
  if (!(q >= 1.0 && q < params.s)) throw invalid_input("check_newnorm2 requires 1 <= q < s");
  auto report = detail::start_report(Check::newnorm2, "newnorm2 q=" + detail::number(q), p, kind, fam);
  report.settings = {{"q", q}};
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) {
        const Field& u = fam.fields[k].field;
        SpaceEvaluator ev(fam.grid, p, kind, opt.space_options());
        double lq = ev.cap_norm(u.abs(), q);
        auto fn = ev.newnorm2(u);
        if (ev.oracle().degraded()) degraded = true;
        return detail::pairwise({{"Lq_cap", lq}, {"lambda", fn.lambda.upper}, {"beta", fn.beta.upper}});
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

/// KV_q(g) against ||g||_{O~_q} (upper estimates of both).
inline ConstantReport check_kv_equiv(double q, const Params& params, const Family& fam, KernelKind kind,
                                     const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_kv_equiv");
  Params p = params;
  p.q = q;
  if (!(q >= 1.0 && q < params.s)) throw invalid_input("check_kv_equiv requires 1 <= q < s");
  auto report = detail::start_report(Check::kv_equiv, "kv_equiv q=" + detail::number(q), p, kind, fam);
  report.settings = {{"q", q}};
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) {
        const Field& g = fam.fields[k].field;
        SpaceEvaluator ev(fam.grid, p, kind, opt.space_options());
        double ot = ev.otilde_norm(g).upper;
        double kv = ev.kv_norm(g).upper;
        if (ev.oracle().degraded()) degraded = true;
        return detail::pairwise({{"KV", kv}, {"Otilde", ot}});
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

/// Koethe dual of M_{p,r} against N_{p',s/r}: for each g the pairing lower
/// bound max_f int |f g| / ||f||_M over the family (||f||_M by its
/// equivalence value) against both N-norm variants.
inline ConstantReport check_main3(const Params& params, const Family& fam, KernelKind kind, const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_main3");
  auto report = detail::start_report(Check::main3, "main3 p=" + detail::number(params.p) + " r=" + detail::number(params.r),
                                     params, kind, fam);
  report.settings = {{"p", params.p}, {"r", params.r}};
  const std::size_t count = fam.fields.size();
  std::vector<double> m_upper(count, 0.0);
  std::atomic<bool> degraded{false};
  parallel_for(count, opt.threads, [&](std::size_t k) {
    SpaceEvaluator ev(fam.grid, params, kind, opt.space_options());
    m_upper[k] = ev.m_norm(fam.fields[k].field).upper;
    if (ev.oracle().degraded()) degraded = true;
  });
  detail::run_samples(
      report, count, opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Field g = fam.fields[k].field.abs();
        double pairing = 0.0;
        for (std::size_t j = 0; j < count; ++j) {
          if (!(m_upper[j] > 0.0)) continue;
          pairing = std::max(pairing, integrate(fam.fields[j].field.abs() * g) / m_upper[j]);
        }
        SpaceEvaluator ev(fam.grid, params, kind, opt.space_options());
        double plain = ev.n_norm(g, NVariant::plain).upper;
        double a1 = ev.n_norm(g, NVariant::a1_quasicontinuous).upper;
        if (ev.oracle().degraded()) degraded = true;
        return {{"pairing/N", {pairing, plain}}, {"pairing/N_a1", {pairing, a1}}};
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// ----------------------------------------------------------------- weights

/// Construction weights w = (I h)^r (r <= 1) or I(h (I h)^{r-1}) (r > 1):
/// "Lsr_cap" compares ||w||_{L^{s/r}(cap)} with ||h||_s^r, "A1" compares
/// [w]_{A1} with the A1 constant of the kernel itself on the same grid.
inline ConstantReport check_weights(const Params& params, const Family& fam, KernelKind kind, const VerifyOptions& opt = {}) {
  params.validate(kind);
  detail::require_fields(fam, "check_weights");
  const double r = params.r, s = params.s;
  auto report = detail::start_report(Check::weights, "weights r=" + detail::number(r), params, kind, fam);
  report.settings = {{"r", r}};
  const Grid& g = fam.grid;
  const bool truncated = kind == KernelKind::bessel;
  auto op = potential_operator(g, params.alpha, kind);
  // Kernel centred at the node nearest the origin.
  std::vector<double> delta(g.size(), 0.0);
  delta[g.nearest_node(Point{0.0, 0.0, 0.0})] = 1.0 / g.cell_volume();
  const double kernel_a1 = a1_constant(op->apply(Field(g, std::move(delta), true)), truncated);
  report.settings.push_back({"kernel_a1", kernel_a1});
  std::atomic<bool> degraded{false};
  detail::run_samples(
      report, fam.fields.size(), opt.threads,
      [&](std::size_t k) -> detail::Rows {
        const Field h = fam.fields[k].field.abs();
        if (h.is_zero()) return {{"Lsr_cap", {0.0, 0.0}}};
        SpaceEvaluator ev(g, params, kind, opt.space_options());
        Field w = ev.construction_weight(h, r);
        double c = ev.cap_norm(w, s / r);
        if (ev.oracle().degraded()) degraded = true;
        return {{"Lsr_cap", {c, std::pow(lp_norm(h, s), r)}}, {"A1", {a1_constant(w, truncated), kernel_a1}}};
      },
      [&](std::size_t k) { return fam.fields[k].id; });
  if (degraded) report.flag("solver_degraded");
  return report;
}

// -------------------------------------------------------------- refinement

/// Runs `run` on grids with the given points per axis (strictly
/// increasing) and returns the finest report with one refinement point per
/// quantity and level.
inline ConstantReport refinement_study(const Grid& base, const std::vector<int>& points,
                                       const std::function<ConstantReport(const Grid&)>& run) {
  if (points.empty()) throw invalid_input("refinement study needs at least one grid");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i] <= points[i - 1]) throw invalid_input("refinement grids must be strictly increasing");
  ConstantReport last;
  std::vector<RefinementPoint> refinement;
  for (int N : points) {
    last = run(Grid(base.dim, base.half_width, N));
    for (const auto& b : last.bands()) refinement.push_back({N, b.quantity, b.min_ratio, b.max_ratio});
  }
  last.refinement = std::move(refinement);
  return last;
}

// ------------------------------------------------------------------ output

namespace detail {

inline json real(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0.0 ? "inf" : "-inf";
}

}  // namespace detail

inline json params_to_json(const Params& p) {
  return json{{"n", p.n}, {"alpha", p.alpha}, {"s", p.s}, {"q", p.q}, {"p", p.p}, {"r", p.r}};
}

inline json report_to_json(const ConstantReport& r) {
  json settings = json::object();
  for (const auto& [k, v] : r.settings) settings[k] = detail::real(v);
  json samples = json::array();
  for (const auto& s : r.samples) {
    json j{{"sample_id", s.id}};
    if (!s.quantity.empty()) j["quantity"] = s.quantity;
    j["lhs"] = detail::real(s.lhs);
    j["rhs"] = detail::real(s.rhs);
    j["ratio"] = s.skipped ? json(nullptr) : detail::real(s.ratio);
    if (s.skipped) j["skipped"] = true;
    samples.push_back(j);
  }
  json bands = json::array();
  for (const auto& b : r.bands())
    bands.push_back({{"quantity", b.quantity}, {"min_ratio", detail::real(b.min_ratio)}, {"max_ratio", detail::real(b.max_ratio)},
                     {"samples", b.samples}});
  json refinement = json::array();
  for (const auto& p : r.refinement)
    refinement.push_back({{"N", p.points}, {"quantity", p.quantity}, {"min_ratio", detail::real(p.min_ratio)},
                          {"max_ratio", detail::real(p.max_ratio)}});
  return json{{"inequality_id", to_string(r.inequality_id)},
              {"label", r.label},
              {"params", params_to_json(r.params)},
              {"kind", to_string(r.kind)},
              {"family", r.family},
              {"family_seed", r.family_seed},
              {"grid", grid_to_json(r.grid)},
              {"settings", settings},
              {"samples", samples},
              {"max_ratio", detail::real(r.max_ratio)},
              {"bands", bands},
              {"refinement", refinement},
              {"drift", detail::real(r.refinement.empty() ? 0.0 : refinement_drift(r))},
              {"flags", r.flags}};
}

/// Flat table: sample_id,quantity,lhs,rhs,ratio (ratio empty when skipped).
inline std::string report_to_csv(const ConstantReport& r) {
  std::ostringstream os;
  os << "sample_id,quantity,lhs,rhs,ratio\n";
  char buf[128];
  for (const auto& s : r.samples) {
    os << s.id << ',' << s.quantity << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", s.lhs, s.rhs);
    os << buf;
    if (!s.skipped) {
      std::snprintf(buf, sizeof buf, "%.17g", s.ratio);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace capax
