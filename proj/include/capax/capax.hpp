#pragma once

// Everything: grids, kernels, potentials, capacities, function spaces,
// the verification harness and the JSON helpers.

#include "capax/grid.hpp"
#include "capax/kernel.hpp"
#include "capax/potential.hpp"
#include "capax/capacity.hpp"
#include "capax/family.hpp"
#include "capax/spaces.hpp"
#include "capax/verify.hpp"
#include "capax/io.hpp"
#include "capax/report.hpp"

namespace capax {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace capax
