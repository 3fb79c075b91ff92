#include "snlab/extremal.hpp"

#include <algorithm>
#include <cmath>

namespace snlab {

namespace {

void check_finite(std::span<const double> v, double t) {
    for (double s : v) {
        if (!std::isfinite(s)) {
            throw IntegrationError("non-finite state during integration", t,
                                   Vec(v.begin(), v.end()), {});
        }
    }
}

}  // namespace

ExtremalSolution extremal_solution(const SmallNoiseModel& m, int sign, double T,
                                   double h) {
    if (sign != 1 && sign != -1) throw DomainError("sign must be +1 or -1");
    if (T <= 0.0 || h <= 0.0) throw DomainError("T and h must be positive");
    m.gamma.require_valid();
    const double g = m.gamma.gamma;
    const double inv = 1.0 / (1.0 - g);

    const ParametricFunction& phi_b = sign > 0 ? m.phi.plus : m.phi.minus;
    auto psi_b = [&](int i) -> const ParametricFunction& {
        return sign > 0 ? m.psi[i].plus : m.psi[i].minus;
    };
    if (!(phi_b.eval(m.x0, 0.0) > 0.0)) {
        throw DomainError("extremal solution on this side requires phi > 0 at the start");
    }

    // State: (x_1..x_d, ytilde >= 0); y = sign * ytilde^(1/(1-g)).
    auto rhs = [&](std::span<const double> x, double yt, Vec& dx) -> double {
        const double y = sign * std::pow(std::max(yt, 0.0), inv);
        for (int i = 0; i < m.d; ++i) dx[i] = psi_b(i).eval(x, y);
        return (1.0 - g) * phi_b.eval(x, y);
    };

    const std::size_t n = static_cast<std::size_t>(std::ceil(T / h - 1e-12));
    ExtremalSolution sol;
    sol.sign = sign;
    sol.path.times.reserve(n + 1);
    sol.path.x.reserve(n + 1);
    sol.path.y.reserve(n + 1);
    sol.y_tilde.reserve(n + 1);

    Vec x = m.x0;
    x.resize(m.d, 0.0);
    double yt = 0.0;
    auto record = [&](double t) {
        sol.path.times.push_back(t);
        sol.path.x.push_back(x);
        sol.y_tilde.push_back(yt);
        sol.path.y.push_back(sign * std::pow(yt, inv));
    };
    record(0.0);

    Vec k1(m.d), k2(m.d), k3(m.d), k4(m.d), xs(m.d);
    for (std::size_t s = 0; s < n; ++s) {
        const double t = s * h;
        const double step = std::min(h, T - t);
        if (s == 0) {
            // Leave 0 by the explicit local expansion of the transformed flow.
            const double c1 = (1.0 - g) * phi_b.eval(x, 0.0);
            for (int i = 0; i < m.d; ++i) x[i] += psi_b(i).eval(x, 0.0) * step;
            yt += c1 * step;
        } else {
            const double l1 = rhs(x, yt, k1);
            for (int i = 0; i < m.d; ++i) xs[i] = x[i] + 0.5 * step * k1[i];
            const double l2 = rhs(xs, yt + 0.5 * step * l1, k2);
            for (int i = 0; i < m.d; ++i) xs[i] = x[i] + 0.5 * step * k2[i];
            const double l3 = rhs(xs, yt + 0.5 * step * l2, k3);
            for (int i = 0; i < m.d; ++i) xs[i] = x[i] + step * k3[i];
            const double l4 = rhs(xs, yt + step * l3, k4);
            for (int i = 0; i < m.d; ++i) {
                x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            yt += step / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        }
        check_finite(x, t + step);
        if (!std::isfinite(yt) || yt < 0.0) {
            throw IntegrationError("transformed fast coordinate left its domain",
                                   t + step, x, Vec{yt});
        }
        record(t + step);
    }
    return sol;
}

DensePath averaged_ode_solve(const DriftFn& psibar, const Vec& x0, double T,
                             double h) {
    if (T <= 0.0 || h <= 0.0) throw DomainError("T and h must be positive");
    const std::size_t n = static_cast<std::size_t>(std::ceil(T / h - 1e-12));
    const std::size_t d = x0.size();
    DensePath out;
    out.times.reserve(n + 1);
    out.x.reserve(n + 1);
    out.y.assign(n + 1, 0.0);

    Vec x = x0, xs(d);
    out.times.push_back(0.0);
    out.x.push_back(x);
    for (std::size_t s = 0; s < n; ++s) {
        const double t = s * h;
        const double step = std::min(h, T - t);
        const Vec k1 = psibar(x);
        for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * step * k1[i];
        const Vec k2 = psibar(xs);
        for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + 0.5 * step * k2[i];
        const Vec k3 = psibar(xs);
        for (std::size_t i = 0; i < d; ++i) xs[i] = x[i] + step * k3[i];
        const Vec k4 = psibar(xs);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_finite(x, t + step);
        out.times.push_back(t + step);
        out.x.push_back(x);
    }
    return out;
}

namespace {

// One fixed-point sweep of the integral system
//   X(t) = x0 + int_0^t psi(X,Y) + f_x(t),
//   Y(t) = y0 + int_0^t phi(X,Y) |Y|^g sgn(Y) + f_y(t),
// with trapezoidal integrals on the grid. Returns the sup change.
double sweep(const SmallNoiseModel& m, const Vec& x0, double y0,
             const Forcing& f, const Vec& times, std::vector<Vec>& X, Vec& Y,
             int side) {
    const double g = m.gamma.gamma;
    const std::size_t n = times.size();
    const std::size_t d = x0.size();
    std::vector<Vec> nx(n, Vec(d, 0.0));
    Vec ny(n, 0.0);

    // Integrand values at the current iterate.
    std::vector<Vec> fx(n, Vec(d, 0.0));
    Vec fy(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            fx[i][j] = eval_field(m.psi[j], X[i], Y[i]);
        }
        fy[i] = eval_field(m.phi, X[i], Y[i]) * signed_pow(Y[i], g);
    }
    Vec ix(d, 0.0);
    double iy = 0.0;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double hdt = 0.5 * (times[i] - times[i - 1]);
            for (std::size_t j = 0; j < d; ++j) ix[j] += hdt * (fx[i][j] + fx[i - 1][j]);
            iy += hdt * (fy[i] + fy[i - 1]);
        }
        const Vec fxi = f.f_x ? f.f_x(times[i]) : Vec(d, 0.0);
        const double fyi = f.f_y ? f.f_y(times[i]) : 0.0;
        for (std::size_t j = 0; j < d; ++j) nx[i][j] = x0[j] + ix[j] + fxi[j];
        ny[i] = y0 + iy + fyi;
        if (i > 0 && (ny[i] == 0.0 || (ny[i] > 0.0) != (side > 0))) {
            throw StabilityViolation(
                "forced fast component reached 0; forcing too large");
        }
        double diff = std::abs(ny[i] - Y[i]);
        for (std::size_t j = 0; j < d; ++j) diff += std::abs(nx[i][j] - X[i][j]);
        change = std::max(change, diff);
    }
    X = std::move(nx);
    Y = std::move(ny);
    return change;
}

DensePath solve_fixed_point(const SmallNoiseModel& m, const Vec& x0, double y0,
                            const Forcing& f, const Vec& times, bool& converged,
                            int& sweeps) {
    const std::size_t n = times.size();
    std::vector<Vec> X(n, x0);
    Vec Y(n, y0);
    const int side = y0 > 0.0 ? +1 : -1;
    converged = false;
    for (sweeps = 0; sweeps < 200; ++sweeps) {
        const double change = sweep(m, x0, y0, f, times, X, Y, side);
        if (change < 1e-10) {
            converged = true;
            break;
        }
    }
    DensePath out;
    out.times = times;
    out.x = std::move(X);
    out.y = std::move(Y);
    return out;
}

}  // namespace

ForcedResult forced_solution(const SmallNoiseModel& m, std::span<const double> x,
                             double y, const Forcing& f, double T, double h) {
    if (y == 0.0) throw DomainError("forced_solution requires y != 0");
    if (T <= 0.0 || h <= 0.0) throw DomainError("T and h must be positive");
    m.gamma.require_valid();
    const Vec x0(x.begin(), x.end());
    const std::size_t n = static_cast<std::size_t>(std::ceil(T / h - 1e-12));
    Vec times(n + 1);
    for (std::size_t i = 0; i <= n; ++i) times[i] = std::min(i * h, T);

    ForcedResult res;
    bool conv_u = false;
    int sweeps_u = 0;
    res.unforced = solve_fixed_point(m, x0, y, Forcing{}, times, conv_u, sweeps_u);
    res.forced = solve_fixed_point(m, x0, y, f, times, res.converged, res.sweeps);
    if (!conv_u) res.converged = false;

    double sup = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        double d = std::abs(res.forced.y[i] - res.unforced.y[i]);
        for (std::size_t j = 0; j < x0.size(); ++j) {
            d += std::abs(res.forced.x[i][j] - res.unforced.x[i][j]);
        }
        sup = std::max(sup, d);
    }
    res.sup_distance = sup;
    return res;
}

}  // namespace snlab
