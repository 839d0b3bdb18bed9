// Empirical constants of the capacitary strong type inequality for q = 1, s, s + 1
// on the seeded mixed family, with their drift over three grid refinements.

#include <algorithm>
#include <cstdio>

#include "capax/capax.hpp"

using namespace capax;

int main() {
  Params p;
  p.n = 1;
  p.alpha = 0.4;
  p.s = 2.0;
  const Grid base(1, 4.0, 64);
  VerifyOptions opt;
  opt.threads = 2;

  for (double q : {1.0, p.s, p.s + 1.0}) {
    ConstantReport r = refinement_study(base, {64, 128, 256}, [&](const Grid& g) {
      return check_adams(q, p, family("mixed", kDefaultFamilySeed, 16, g), KernelKind::riesz, opt);
    });
    std::printf("q = %g\n", q);
    for (const RefinementPoint& pt : r.refinement)
      std::printf("  N = %3d  ratio in [%.4f, %.4f]\n", pt.points, pt.min_ratio, pt.max_ratio);
    std::printf("  drift %.2e, largest ratio %.4f (sample %s)\n", refinement_drift(r), r.max_ratio,
                r.samples.empty() ? "-" : std::max_element(r.samples.begin(), r.samples.end(), [](const Sample& a, const Sample& b) {
                                            return a.ratio < b.ratio;
                                          })->id.c_str());
  }
}
