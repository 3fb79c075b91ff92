#include "snlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace snlab {
namespace {

// QUADPACK dqk15 nodes/weights (positive half; node 7 is the midpoint).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
    double a, b;
    double value;
    double error;
    bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gk15(const Integrand& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = kWgk[7] * fc;
    double resg = kWg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double f1 = f(c - h * kXgk[j]);
        const double f2 = f(c + h * kXgk[j]);
        resk += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
    }
    Interval iv;
    iv.a = a;
    iv.b = b;
    iv.value = resk * h;
    const double diff = std::abs((resk - resg) * h);
    iv.error = diff;
    if (!std::isfinite(iv.value)) {
        throw NumericError("quadrature: non-finite integrand on [" +
                           std::to_string(a) + ", " + std::to_string(b) + "]");
    }
    return iv;
}

QuadResult adapt(const Integrand& f, std::vector<Interval> init,
                 const QuadOptions& opts) {
    std::priority_queue<Interval> heap;
    double total = 0.0, err = 0.0;
    std::size_t evals = 0;
    for (auto& iv : init) {
        total += iv.value;
        err += iv.error;
        evals += 15;
        heap.push(iv);
    }
    std::size_t n = init.size();
    while (n < opts.max_intervals) {
        const double tol = std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
        if (err <= tol) break;
        Interval worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) break;  // machine-precision interval
        Interval left = gk15(f, worst.a, mid);
        Interval right = gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        evals += 30;
        heap.push(left);
        heap.push(right);
        ++n;
    }
    QuadResult r;
    r.value = total;
    r.error = err;
    r.evaluations = evals;
    r.converged = err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
    return r;
}

}  // namespace

QuadResult integrate(const Integrand& f, double a, double b,
                     const QuadOptions& opts) {
    if (a == b) return {0.0, 0.0, true, 0};
    if (a > b) {
        QuadResult r = integrate(f, b, a, opts);
        r.value = -r.value;
        return r;
    }
    return adapt(f, {gk15(f, a, b)}, opts);
}

QuadResult integrate_segmented(const Integrand& f, double a, double b,
                               const std::vector<double>& breakpoints,
                               const QuadOptions& opts) {
    if (a == b) return {0.0, 0.0, true, 0};
    if (a > b) {
        QuadResult r = integrate_segmented(f, b, a, breakpoints, opts);
        r.value = -r.value;
        return r;
    }
    std::vector<double> pts{a, b};
    for (double p : breakpoints) {
        if (p > a && p < b) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    std::vector<Interval> init;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        init.push_back(gk15(f, pts[i], pts[i + 1]));
    }
    return adapt(f, std::move(init), opts);
}

QuadResult integrate_half_line(const Integrand& f, const QuadOptions& opts) {
    auto mapped = [&f](double u) {
        const double om = 1.0 - u;
        return f(u / om) / (om * om);
    };
    // Stop just short of u=1; the Jacobian blows up there and integrands of
    // interest decay stretched-exponentially.
    return integrate_segmented(mapped, 0.0, 1.0 - 1e-14,
                               {0.5, 0.9, 0.99, 0.999}, opts);
}

double integrate_or_throw(const Integrand& f, double a, double b,
                          const QuadOptions& opts) {
    QuadResult r = integrate(f, a, b, opts);
    if (!r.converged) {
        throw NumericError("quadrature did not converge, achieved error " +
                           std::to_string(r.error));
    }
    return r.value;
}

double integrate_half_line_or_throw(const Integrand& f, const QuadOptions& opts) {
    QuadResult r = integrate_half_line(f, opts);
    if (!r.converged) {
        throw NumericError("half-line quadrature did not converge, achieved error " +
                           std::to_string(r.error));
    }
    return r.value;
}

}  // namespace snlab
