// Capacity of balls of growing radius against the dilation law
// cap(B_R) = (R/R0)^{n - alpha s} cap(B_R0). The box grows with the ball so
// the discrete problems are exact dilates. In a fixed box, small balls lose
// resolution and large ones feel the box, and the last column bends away.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "capax/capax.hpp"

using namespace capax;

int main() {
  Params p;
  p.n = 1;
  p.alpha = 0.4;
  p.s = 2.0;
  auto ball_cap = [&](double R, double L) {
    Grid g(1, L, 256);
    return capacity(Mask::from_predicate(g, [&](const Point& x) { return std::abs(x[0]) <= R; }), p, KernelKind::riesz).value;
  };
  const double ref_radius = 0.25, ref_cap = ball_cap(ref_radius, 4.0);

  std::printf("%8s %14s %14s %10s %16s\n", "R", "cap(B_R)", "scaling law", "rel.dev", "fixed box L=4");
  for (double R : {0.125, 0.25, 0.5, 0.75, 1.0}) {
    double cap = ball_cap(R, 16.0 * R);
    double law = ref_cap * std::pow(R / ref_radius, p.n - p.alpha * p.s);
    std::printf("%8.3f %14.6f %14.6f %10.2e %16.6f\n", R, cap, law, std::abs(cap - law) / law, ball_cap(R, 4.0));
  }

  Grid g(1, 4.0, 256);
  CapacityOracle oracle(g, p, KernelKind::riesz);

  // The extremal f of B_{1/2}: its potential is >= 1 on the ball, and the
  // Choquet integral of the indicator gives back the capacity.
  Mask half = Mask::from_predicate(g, [](const Point& x) { return std::abs(x[0]) <= 0.5; });
  CapacityResult r = capacity(half, p, KernelKind::riesz);
  Field u = riesz_potential(r.extremal, p.alpha);
  double lowest = INFINITY;
  for (std::size_t i : half.indices()) lowest = std::min(lowest, u[i]);
  std::printf("\ncap(B_1/2) = %.6f  (gap %.1e, %d iterations)\n", r.value, r.gap, r.iterations);
  std::printf("min of I f on the ball = %.6f\n", lowest);
  std::printf("Choquet integral of 1_B = %.6f\n", oracle.choquet(half.indicator()));
}
