#pragma once

#include <functional>
#include <span>

#include "snlab/coeffs.hpp"
#include "snlab/common.hpp"
#include "snlab/rng.hpp"

namespace snlab {

// Time-step policy for the small-noise system. The fast coordinate spends its
// critical time in a layer of width ~ eps^(2/(g+1)) around zero where the
// natural time scale is eps^(2(1-g)/(g+1)); inside the layer the step shrinks
// by that factor, outside it is chosen so one step moves y by at most
// drift_resolution of itself under the power drift.
struct StepPolicy {
    double base_dt = 1e-3;
    double min_factor = 1e-4;       // floor on the in-layer refinement factor
    double drift_resolution = 0.01; // relative y-move per step outside the layer
    bool adaptive = true;

    double dt_for(double y, double eps, double gamma, double phi_max) const;
};

struct PathState {
    double t = 0.0;
    std::span<const double> x;
    double y = 0.0;
};

// Return false to stop the path early.
using PathObserver = std::function<bool(const PathState&)>;

// Standard-normal increments for one step: dB has d entries, dW one. Used to
// couple coarse and fine discretizations in refinement studies.
using NoiseSource = std::function<void(std::span<double> dB, double& dW)>;

struct SmallNoiseOptions {
    double rho_bw = 0.0;   // correlation of dW with the first slow noise
    double y0 = 0.0;       // fast initial value (0 in the selection problem)
    StepPolicy policy;
    // When set, overrides rng-driven noise; the policy must be non-adaptive.
    NoiseSource noise;
};

struct PathEndpoint {
    double t = 0.0;
    Vec x;
    double y = 0.0;
    std::size_t steps = 0;
    bool stopped_early = false;  // observer returned false before T
};

// Euler-Maruyama for
//   dX = psi(X,Y) dt + eps * b(X,Y) dB,
//   dY = phi(X,Y) * |Y|^g sgn(Y) dt + eps * beta(X,Y) dW,  Y(0) = 0.
// Throws IntegrationError on non-finite state.
PathEndpoint simulate_small_noise(const SmallNoiseModel& m, double eps, double T,
                                  PathRng& rng, const PathObserver& observer,
                                  const SmallNoiseOptions& opts = {});

// Frozen fast equation at fixed slow point (unit noise amplitude):
//   dY = phi±(x,0) * |Y|^g sgn(Y) dt + beta±(x,0) dW.
struct FrozenOptions {
    double dt = 5e-3;
    double y0 = 0.0;
};

// Minimal coefficient view so sde does not depend on the analysis module.
struct FrozenParamsView {
    double phi_plus;
    double phi_minus;
    double beta_plus;
    double beta_minus;
    double gamma;
};

double simulate_frozen(const FrozenParamsView& p, double T, PathRng& rng,
                       const std::function<bool(double t, double y)>& observer,
                       const FrozenOptions& opts = {});

struct TwoScaleState {
    double t = 0.0;
    std::span<const double> x;
    std::span<const double> y;
};

using TwoScaleObserver = std::function<bool(const TwoScaleState&)>;

struct TwoScaleEndpoint {
    double t = 0.0;
    Vec x;
    Vec y;
    std::size_t steps = 0;
    std::size_t slow_jumps = 0;
    std::size_t fast_jumps = 0;
};

// Euler scheme for the coupled slow/fast jump-diffusion: the fast block runs
// at speed 1/eps (drift and jump rate) with diffusion 1/sqrt(eps); small marks
// (|u| <= rho slow, |z| <= 1 fast) are compensated by a continuous drift.
TwoScaleEndpoint simulate_two_scale(const TwoScaleModel& m, double eps,
                                    double dt, double T, PathRng& rng,
                                    const TwoScaleObserver& observer);

}  // namespace snlab
