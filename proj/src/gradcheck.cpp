#include "eltrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "eltrack/layers.hpp"
#include "eltrack/ops.hpp"

namespace eltrack {

namespace {

double evaluate(const std::function<Tensor<double>()>& fn) {
    NoGradGuard guard;
    return fn().item();
}

}  // namespace

GradCheckReport finite_difference_gradcheck(const std::function<Tensor<double>()>& fn,
                                            std::span<Tensor<double>> inputs,
                                            const GradCheckOptions& opt) {
    GradCheckReport report;
    for (auto& in : inputs) {
        in.zero_grad();
    }
    const Tensor<double> root = fn();
    if (root.size() != 1) {
        throw ShapeError("gradcheck: function must return a scalar");
    }
    root.backward();

    std::mt19937_64 rng(opt.seed);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor<double>& in = inputs[t];
        const Mat<double> analytic =
            in.has_grad() ? in.grad() : Mat<double>::Zero(in.rows(), in.cols());
        std::vector<Index> entries(static_cast<std::size_t>(in.size()));
        std::iota(entries.begin(), entries.end(), Index{0});
        if (opt.max_entries_per_input != 0 && entries.size() > opt.max_entries_per_input) {
            std::shuffle(entries.begin(), entries.end(), rng);
            entries.resize(opt.max_entries_per_input);
        }
        for (const Index e : entries) {
            double& x = in.mutable_value().data()[e];
            const double saved = x;
            x = saved + opt.epsilon;
            const double f_plus = evaluate(fn);
            x = saved - opt.epsilon;
            const double f_minus = evaluate(fn);
            x = saved;
            const double f_mid = evaluate(fn);

            const double numeric = (f_plus - f_minus) / (2.0 * opt.epsilon);
            const double right = (f_plus - f_mid) / opt.epsilon;
            const double left = (f_mid - f_minus) / opt.epsilon;
            const double a = analytic.data()[e];
            ++report.entries_checked;

            const double scale = std::max({std::abs(left), std::abs(right), opt.denominator_floor});
            const bool kink = !std::isfinite(numeric) || std::abs(right - left) > 1e-2 * scale;
            double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), opt.denominator_floor});
            if (kink) {
                ++report.nondifferentiable;
                if (!std::isfinite(rel)) {
                    rel = std::numeric_limits<double>::infinity();
                }
            }
            if (rel > report.max_rel_err || !std::isfinite(rel)) {
                report.max_rel_err = rel;
                report.worst_entry = "input " + std::to_string(t) + " entry " + std::to_string(e) +
                                     " analytic " + std::to_string(a) + " numeric " +
                                     std::to_string(numeric);
            }
        }
    }
    for (auto& in : inputs) {
        in.zero_grad();
    }
    report.pass = std::isfinite(report.max_rel_err) && report.max_rel_err < opt.tolerance &&
                  report.nondifferentiable == 0;
    return report;
}

Tensor<double> project_to_scalar(const Tensor<double>& t, std::uint64_t seed) {
    InitRng rng(seed);
    return ops::sum(ops::mul(t, Tensor<double>(rng.uniform_matrix<double>(t.rows(), t.cols(), 1.0))));
}

}  // namespace eltrack
