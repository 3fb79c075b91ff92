#pragma once

#include <span>
#include <utility>
#include <vector>

#include "snlab/coeffs.hpp"
#include "snlab/common.hpp"

namespace snlab {

// Frozen-equation coefficients at a fixed slow point: phi±(x,0), beta±(x,0).
struct FrozenParams {
    double phi_plus = 1.0;
    double phi_minus = 1.0;
    double beta_plus = 1.0;
    double beta_minus = 1.0;
    double gamma = 0.5;

    void require_repulsive() const;
    void require_attractive() const;
    static FrozenParams at(const SmallNoiseModel& m, std::span<const double> x);
};

// Exit-side weights of the vanishing-noise limit: (p_minus, p_plus).
std::pair<double, double> selection_probabilities(const FrozenParams& p);

// Scale function s_eps(y), signed, s_eps(0) = 0. `nu` is the slack used in the
// sandwich bounds; it must satisfy nu < beta^2 on the active branch.
double scale_function(double y, const FrozenParams& p, double eps, double nu = 0.0);

// P(exit at +delta) = -s(-delta) / (s(delta) - s(-delta)), slack zero.
double exit_probability_quadrature(double delta, const FrozenParams& p, double eps);

// Expected-exit-time functional for unit diffusion and drift floor A;
// upper-bounds the mean exit time from (-|x|, |x|) started at 0.
double exit_time_functional(double x, double A, double eps, double gamma);

// One-sided integral of the scale-function kernel together with its
// small-eps closed form; used as a consistency probe for the quadrature.
struct GammaAsymptotic {
    double quadrature;
    double asymptotic;
};
GammaAsymptotic gamma_asymptotic(double delta, double A, double eps, double gamma);

// Stationary density of the frozen fast equation (attractive regime):
//   density(y) = c * exp( 2*phi± * |y|^(g+1) / ((g+1) * beta±^2) ),  phi± < 0.
class InvariantDensity {
public:
    explicit InvariantDensity(const FrozenParams& p);
    double operator()(double y) const;
    double mass_positive() const { return mass_plus_; }
    double mass_negative() const { return 1.0 - mass_plus_; }
    double normalization() const { return norm_; }
    const FrozenParams& params() const { return params_; }
    // Probability mass of [a, b] by adaptive quadrature.
    double mass_interval(double a, double b) const;

private:
    FrozenParams params_;
    double norm_;       // c: density value at y = 0 from both sides
    double mass_plus_;
};

InvariantDensity invariant_density(const FrozenParams& p);

// Averaged slow drift at x (attractive regime):
// psibar(x) = psi+(x,0) * mass_positive + psi-(x,0) * mass_negative.
Vec averaged_drift(std::span<const double> x, const SmallNoiseModel& m);

// Binning for empirical total-variation distances.
struct BinSpec {
    double lo = 0.0;
    double hi = 0.0;
    int bins = 64;
    bool automatic = true;  // derive [lo, hi] from the pooled samples
};

// Half L1 distance between histogram probability vectors on common bins.
double empirical_tv(std::span<const double> a, std::span<const double> b,
                    const BinSpec& spec = {});
// Same against exact bin masses of a reference density.
double empirical_tv_against(std::span<const double> samples,
                            const InvariantDensity& ref, const BinSpec& spec = {});

// Registered smooth test function with compact support:
//   phi(x) = (prod_i x_i^powers[i]) * bump(|x - center|^2 / radius^2),
// bump(s) = exp(1 - 1/(1-s)) for s < 1, 0 otherwise.
struct TestFunction {
    std::vector<int> powers;
    Vec center;
    double radius = 4.0;

    double value(std::span<const double> x) const;
    Vec gradient(std::span<const double> x) const;
    std::vector<double> hessian(std::span<const double> x) const;  // d*d row-major
};

std::vector<TestFunction> test_function_registry(int d, int max_degree,
                                                 double radius);

// Averaged characteristics of the slow component under the frozen invariant
// measure: drift, diffusion matrix, and image jump kernels (as atom clouds).
struct KernelAtom {
    Vec displacement;
    double weight = 0.0;
};

struct AveragedCharacteristics {
    Vec a_bar;                       // size d
    std::vector<double> b_bar;       // d*d row-major
    std::vector<KernelAtom> compensated;    // marks with |u| <= rho
    std::vector<KernelAtom> uncompensated;  // marks with |u| > rho
    Vec a_bar_se;                    // standard errors (zero for closed form)
    bool closed_form = false;
};

// L phi(x) for the averaged generator.
double generator_apply(const TestFunction& phi, std::span<const double> x,
                       const AveragedCharacteristics& avg);

struct FrozenSamplerSpec {
    int n_chains = 8;
    double burn_in = 20.0;     // time units discarded per chain
    double horizon = 200.0;    // total time per chain after burn-in
    double dt = 2e-3;
    int thin = 10;             // keep every thin-th step
    std::uint64_t seed = 1234;
    double rhat_threshold = 1.05;
    bool prefer_closed_form = true;
};

AveragedCharacteristics averaged_characteristics(const TwoScaleModel& m,
                                                 std::span<const double> x,
                                                 const FrozenSamplerSpec& spec);

// True when the fast block is the signed-power / two-sided-constant form whose
// stationary law is available in closed form (k = 1 only).
bool has_closed_form_frozen_law(const TwoScaleModel& m);
FrozenParams frozen_params_of(const TwoScaleModel& m, std::span<const double> x);

}  // namespace snlab
