#pragma once

#include <functional>
#include <span>
#include <vector>

#include "snlab/coeffs.hpp"
#include "snlab/common.hpp"

namespace snlab {

// Dense one-step-method output: y is the scalar fast coordinate.
struct DensePath {
    Vec times;
    std::vector<Vec> x;
    Vec y;

    std::size_t size() const { return times.size(); }
};

// One of the two solutions leaving y = 0 immediately up or down. Solved in
// the transformed coordinate ytilde = |y|^(1-g), which makes the system
// locally Lipschitz; y is recovered as sign * ytilde^(1/(1-g)).
struct ExtremalSolution {
    int sign = +1;  // +1 or -1
    DensePath path;
    Vec y_tilde;
};

ExtremalSolution extremal_solution(const SmallNoiseModel& m, int sign, double T,
                                   double h);

using DriftFn = std::function<Vec(std::span<const double>)>;

// Classical fourth-order one-step solution of x' = psibar(x).
DensePath averaged_ode_solve(const DriftFn& psibar, const Vec& x0, double T,
                             double h);

// Additive forcing applied to the integral form of the system; null members
// mean zero forcing.
struct Forcing {
    std::function<Vec(double)> f_x;
    std::function<double(double)> f_y;
};

// Forcing drove the fast component to 0: the perturbation is too large for
// the one-sided solution to stay on its side.
struct StabilityViolation : NumericError {
    using NumericError::NumericError;
};

struct ForcedResult {
    DensePath forced;
    DensePath unforced;
    double sup_distance = 0.0;  // sup_t (|X_f - X| + |Y_f - Y|)
    bool converged = false;
    int sweeps = 0;
};

// Fixed-point solution of the forced integral system started at (x, y),
// y != 0, staying on the sign(y) side throughout.
ForcedResult forced_solution(const SmallNoiseModel& m, std::span<const double> x,
                             double y, const Forcing& f, double T, double h);

}  // namespace snlab
