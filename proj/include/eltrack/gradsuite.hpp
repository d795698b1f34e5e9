#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eltrack/gradcheck.hpp"

namespace eltrack {

struct GradSuiteEntry {
    std::string name;
    double tolerance = 0.0;
    GradCheckReport report;
};

/// Finite-difference checks of every differentiable building block on small
/// random 64-bit instances, plus an unrolled length-3 training loss on a tiny
/// model (looser tolerance).
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 1);

}  // namespace eltrack
