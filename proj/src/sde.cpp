#include "snlab/sde.hpp"

#include <algorithm>
#include <cmath>

namespace snlab {

double StepPolicy::dt_for(double y, double eps, double gamma,
                          double phi_max) const {
    if (!adaptive) return base_dt;
    const double layer = std::pow(eps, 2.0 / (gamma + 1.0));
    const double slow_factor =
        std::max(std::pow(eps, 2.0 * (1.0 - gamma) / (gamma + 1.0)), min_factor);
    const double floor_dt = base_dt * slow_factor;
    if (std::abs(y) <= 2.0 * layer) return floor_dt;
    // Resolve the power drift: dt such that phi_max * |y|^g * dt is a small
    // fraction of |y|.
    const double resolve =
        drift_resolution * std::pow(std::abs(y), 1.0 - gamma) / phi_max;
    return std::clamp(resolve, floor_dt, base_dt);
}

namespace {

[[noreturn]] void throw_nonfinite(double t, std::span<const double> x, double y) {
    throw IntegrationError("non-finite state during integration", t,
                           Vec(x.begin(), x.end()), Vec{y});
}

}  // namespace

PathEndpoint simulate_small_noise(const SmallNoiseModel& m, double eps, double T,
                                  PathRng& rng, const PathObserver& observer,
                                  const SmallNoiseOptions& opts) {
    if (eps < 0.0 || T <= 0.0) {
        throw DomainError("simulate_small_noise requires eps >= 0 and T > 0");
    }
    if (opts.noise && opts.policy.adaptive) {
        throw DomainError("external noise requires a fixed-step policy");
    }
    m.gamma.require_valid();
    const double g = m.gamma.gamma;
    const double phi_max = std::max(m.max_abs_phi_at_origin(), 1e-12);
    const double rho = opts.rho_bw;
    if (std::abs(rho) > 1.0) throw DomainError("|rho_bw| must be <= 1");
    const double rho_c = std::sqrt(1.0 - rho * rho);

    PathEndpoint end;
    end.x = m.x0;
    end.x.resize(m.d, 0.0);
    Vec& x = end.x;
    double y = opts.y0;
    double t = 0.0;
    Vec dB(m.d, 0.0);
    std::size_t steps = 0;

    PathState state;
    while (t < T) {
        double dt = opts.policy.dt_for(y, eps, g, phi_max);
        dt = std::min(dt, T - t);
        const double sq = std::sqrt(dt);
        double dW;
        if (opts.noise) {
            opts.noise(dB, dW);
        } else {
            for (int i = 0; i < m.d; ++i) dB[i] = rng.normal();
            dW = rng.normal();
        }
        if (rho != 0.0 && m.d > 0) {
            dW = rho * dB[0] + rho_c * dW;
        }
        const double y_drift = eval_field(m.phi, x, y) * signed_pow(y, g);
        const double y_diff = eps * eval_field(m.beta, x, y);
        const double b_diff = eps * eval_field(m.bfield, x, y);
        for (int i = 0; i < m.d; ++i) {
            x[i] += eval_field(m.psi[i], x, y) * dt + b_diff * sq * dB[i];
        }
        y += y_drift * dt + y_diff * sq * dW;
        t += dt;
        ++steps;
        if (!std::isfinite(y)) throw_nonfinite(t, x, y);
        for (double xi : x) {
            if (!std::isfinite(xi)) throw_nonfinite(t, x, y);
        }
        state.t = t;
        state.x = x;
        state.y = y;
        if (observer && !observer(state)) {
            end.stopped_early = true;
            break;
        }
    }
    end.t = t;
    end.y = y;
    end.steps = steps;
    return end;
}

double simulate_frozen(const FrozenParamsView& p, double T, PathRng& rng,
                       const std::function<bool(double t, double y)>& observer,
                       const FrozenOptions& opts) {
    if (T <= 0.0 || opts.dt <= 0.0) {
        throw DomainError("simulate_frozen requires T > 0 and dt > 0");
    }
    const double sq = std::sqrt(opts.dt);
    double y = opts.y0;
    double t = 0.0;
    while (t < T) {
        const double phi = y >= 0.0 ? p.phi_plus : p.phi_minus;
        const double beta = y >= 0.0 ? p.beta_plus : p.beta_minus;
        y += phi * signed_pow(y, p.gamma) * opts.dt + beta * sq * rng.normal();
        t += opts.dt;
        if (!std::isfinite(y)) {
            throw IntegrationError("non-finite state during integration", t, {},
                                   Vec{y});
        }
        if (observer && !observer(t, y)) break;
    }
    return y;
}

namespace {

// Next-arrival scheduler for a compound-Poisson stream of given rate.
struct JumpClock {
    double rate = 0.0;
    double next = 1e300;

    void init(double r, PathRng& rng) {
        rate = r;
        next = r > 0.0 ? rng.exponential() / r : 1e300;
    }
    bool due(double t) const { return t >= next; }
    void advance(PathRng& rng) { next += rng.exponential() / rate; }
};

const JumpMeasure::Atom& pick_atom(const JumpMeasure& jm, double total,
                                   PathRng& rng) {
    double u = rng.uniform() * total;
    for (const auto& atom : jm.atoms) {
        u -= atom.weight;
        if (u <= 0.0) return atom;
    }
    return jm.atoms.back();
}

double mark_norm(const Vec& mark) {
    double n2 = 0.0;
    for (double v : mark) n2 += v * v;
    return std::sqrt(n2);
}

}  // namespace

TwoScaleEndpoint simulate_two_scale(const TwoScaleModel& m, double eps,
                                    double dt, double T, PathRng& rng,
                                    const TwoScaleObserver& observer) {
    if (eps <= 0.0 || dt <= 0.0 || T <= 0.0) {
        throw DomainError("simulate_two_scale requires positive eps, dt, T");
    }
    const double slow_rate = m.nu.total_intensity();
    const double fast_rate = m.mu.total_intensity() / eps;
    if ((slow_rate + fast_rate) * T > 1e8) {
        throw ResourceError("expected jump count exceeds 1e8; reduce T or increase eps");
    }
    if (fast_rate * dt > 0.5 && !m.mu.empty()) {
        throw ResourceError("fast jump rate too high for the step size dt");
    }

    // Compensator drifts for the small marks (constant amplitude factor aside).
    Vec comp_slow(m.d, 0.0);
    for (const auto& atom : m.nu.atoms) {
        if (mark_norm(atom.mark) <= m.rho) {
            for (int i = 0; i < m.d && i < static_cast<int>(atom.mark.size()); ++i) {
                comp_slow[i] += atom.mark[i] * atom.weight;
            }
        }
    }
    Vec comp_fast(m.k, 0.0);
    for (const auto& atom : m.mu.atoms) {
        if (mark_norm(atom.mark) <= 1.0) {
            for (int j = 0; j < m.k && j < static_cast<int>(atom.mark.size()); ++j) {
                comp_fast[j] += atom.mark[j] * atom.weight;
            }
        }
    }

    TwoScaleEndpoint end;
    end.x = m.x0;
    end.x.resize(m.d, 0.0);
    end.y = m.y0;
    end.y.resize(m.k, 0.0);
    Vec& x = end.x;
    Vec& y = end.y;

    JumpClock slow_clock, fast_clock;
    slow_clock.init(slow_rate, rng);
    fast_clock.init(fast_rate, rng);

    const double sq = std::sqrt(dt);
    const double fast_diff_scale = 1.0 / std::sqrt(eps);
    double t = 0.0;
    TwoScaleState state;
    while (t < T) {
        const double y0 = y.empty() ? 0.0 : y[0];
        const double c_amp = eval_field(m.c_amp, x, y0);
        const double C_amp = eval_field(m.C_amp, x, y0);
        const double sigma = eval_field(m.sigma, x, y0);
        const double Sigma = eval_field(m.Sigma, x, y0);
        for (int i = 0; i < m.d; ++i) {
            const double drift = eval_field(m.a[i], x, y0) - c_amp * comp_slow[i];
            x[i] += drift * dt + sigma * sq * rng.normal();
        }
        for (int j = 0; j < m.k; ++j) {
            const double drift =
                (eval_field(m.A[j], x, y[j]) - C_amp * comp_fast[j]) / eps;
            y[j] += drift * dt + fast_diff_scale * Sigma * sq * rng.normal();
        }
        t += dt;
        while (slow_clock.due(t)) {
            const auto& atom = pick_atom(m.nu, m.nu.total_intensity(), rng);
            const double amp = eval_field(m.c_amp, x, y.empty() ? 0.0 : y[0]);
            for (int i = 0; i < m.d && i < static_cast<int>(atom.mark.size()); ++i) {
                x[i] += amp * atom.mark[i];
            }
            ++end.slow_jumps;
            slow_clock.advance(rng);
        }
        while (fast_clock.due(t)) {
            const auto& atom = pick_atom(m.mu, m.mu.total_intensity(), rng);
            const double amp = eval_field(m.C_amp, x, y.empty() ? 0.0 : y[0]);
            for (int j = 0; j < m.k && j < static_cast<int>(atom.mark.size()); ++j) {
                y[j] += amp * atom.mark[j];
            }
            ++end.fast_jumps;
            fast_clock.advance(rng);
        }
        ++end.steps;
        for (double v : x) {
            if (!std::isfinite(v)) throw_nonfinite(t, x, y.empty() ? 0.0 : y[0]);
        }
        for (double v : y) {
            if (!std::isfinite(v)) throw_nonfinite(t, x, v);
        }
        state.t = t;
        state.x = x;
        state.y = y;
        if (observer && !observer(state)) break;
    }
    end.t = t;
    return end;
}

}  // namespace snlab
