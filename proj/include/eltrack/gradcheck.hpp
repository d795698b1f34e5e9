#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eltrack/tensor.hpp"

namespace eltrack {

struct GradCheckOptions {
    double epsilon = 1e-6;
    double tolerance = 1e-4;
    // Denominator floor of the relative error, so gradients near zero are
    // judged on absolute error instead of blowing up.
    double denominator_floor = 1e-4;
    // 0 checks every entry; otherwise a seeded random subset per input.
    std::size_t max_entries_per_input = 0;
    std::uint64_t seed = 7;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    std::size_t entries_checked = 0;
    // Entries where the one-sided differences disagree or go non-finite.
    std::size_t nondifferentiable = 0;
    std::string worst_entry;
};

/// Compares backprop gradients of a scalar function against central
/// differences at 64-bit. `fn` must read the inputs through their Tensor
/// handles; entries are perturbed in place and restored.
GradCheckReport finite_difference_gradcheck(const std::function<Tensor<double>()>& fn,
                                            std::span<Tensor<double>> inputs,
                                            const GradCheckOptions& options = {});

/// Reduces a tensor to a scalar with a fixed pseudo-random projection.
Tensor<double> project_to_scalar(const Tensor<double>& t, std::uint64_t seed);

}  // namespace eltrack
