#pragma once

#include <functional>
#include <vector>

#include "snlab/common.hpp"

namespace snlab {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = false;
    std::size_t evaluations = 0;
};

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    std::size_t max_intervals = 4000;
};

using Integrand = std::function<double(double)>;

// Globally adaptive Gauss-Kronrod 7-15 on [a, b] (a > b allowed, sign flips).
QuadResult integrate(const Integrand& f, double a, double b,
                     const QuadOptions& opts = {});

// Same, but with interior breakpoints seeded into the initial partition.
// Needed for integrands concentrated on a scale much smaller than |b - a|.
QuadResult integrate_segmented(const Integrand& f, double a, double b,
                               const std::vector<double>& breakpoints,
                               const QuadOptions& opts = {});

// Integral over [0, inf) via the map y = u/(1-u).
QuadResult integrate_half_line(const Integrand& f, const QuadOptions& opts = {});

// Throwing wrappers; raise NumericError with the achieved tolerance.
double integrate_or_throw(const Integrand& f, double a, double b,
                          const QuadOptions& opts = {});
double integrate_half_line_or_throw(const Integrand& f,
                                    const QuadOptions& opts = {});

}  // namespace snlab
