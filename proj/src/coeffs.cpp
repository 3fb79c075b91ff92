#include "snlab/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace snlab {

double signed_pow(double y, double gamma) {
    if (y == 0.0) return 0.0;
    const double mag = std::pow(std::abs(y), gamma);
    return y > 0.0 ? mag : -mag;
}

void SignedPowerExponent::require_valid() const {
    if (!valid()) {
        throw ValidationError("exponent gamma must lie in (0,1), got " +
                              std::to_string(gamma));
    }
}

FieldFamily field_family_from_name(const std::string& name) {
    if (name == "constant") return FieldFamily::Constant;
    if (name == "affine") return FieldFamily::Affine;
    if (name == "bounded_smooth") return FieldFamily::BoundedSmooth;
    if (name == "signed_power_y") return FieldFamily::SignedPowerY;
    throw ValidationError("unknown coefficient family '" + name + "'");
}

std::string field_family_name(FieldFamily f) {
    switch (f) {
        case FieldFamily::Constant: return "constant";
        case FieldFamily::Affine: return "affine";
        case FieldFamily::BoundedSmooth: return "bounded_smooth";
        case FieldFamily::SignedPowerY: return "signed_power_y";
    }
    return "?";
}

double ParametricFunction::eval(std::span<const double> x, double y) const {
    auto linear = [&] {
        double v = c0;
        const std::size_t n = std::min(ax.size(), x.size());
        for (std::size_t i = 0; i < n; ++i) v += ax[i] * x[i];
        return v + ay * y;
    };
    switch (family) {
        case FieldFamily::Constant:
            return c0;
        case FieldFamily::Affine:
            return std::clamp(linear(), lo, hi);
        case FieldFamily::BoundedSmooth:
            return lo + (hi - lo) * 0.5 * (1.0 + std::tanh(linear()));
        case FieldFamily::SignedPowerY: {
            double v = c0;
            const std::size_t n = std::min(ax.size(), x.size());
            for (std::size_t i = 0; i < n; ++i) v += ax[i] * x[i];
            return v * signed_pow(y, exponent);
        }
    }
    return 0.0;
}

ParametricFunction ParametricFunction::constant(double v) {
    ParametricFunction f;
    f.family = FieldFamily::Constant;
    f.c0 = v;
    f.lo = f.hi = v;
    return f;
}

ParametricFunction ParametricFunction::affine(double c0, Vec ax, double ay,
                                              double lo, double hi) {
    ParametricFunction f;
    f.family = FieldFamily::Affine;
    f.c0 = c0;
    f.ax = std::move(ax);
    f.ay = ay;
    f.lo = lo;
    f.hi = hi;
    return f;
}

ParametricFunction ParametricFunction::signed_power(double coef, double exponent) {
    ParametricFunction f;
    f.family = FieldFamily::SignedPowerY;
    f.c0 = coef;
    f.exponent = exponent;
    return f;
}

double eval_field(const CoefficientField& f, std::span<const double> x, double y) {
    const double v = (y >= 0.0) ? f.plus.eval(x, y) : f.minus.eval(x, y);
    if (!std::isfinite(v)) {
        std::ostringstream oss;
        oss << "coefficient evaluation produced non-finite value at (x=[";
        for (std::size_t i = 0; i < x.size(); ++i) {
            oss << (i ? "," : "") << x[i];
        }
        oss << "], y=" << y << ")";
        throw NumericError(oss.str());
    }
    return v;
}

double SmallNoiseModel::max_abs_phi_at_origin() const {
    double m = std::abs(eval_field(phi, x0, 0.0));
    m = std::max(m, std::abs(phi.minus.eval(x0, -0.0)));
    return m;
}

double SmallNoiseModel::min_abs_phi_at_origin() const {
    return std::min(std::abs(phi.plus.eval(x0, 0.0)),
                    std::abs(phi.minus.eval(x0, 0.0)));
}

double JumpMeasure::total_intensity() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    for (std::size_t i = 0; i + 1 < density_grid.size(); ++i) {
        s += 0.5 * (density_values[i] + density_values[i + 1]) *
             (density_grid[i + 1] - density_grid[i]);
    }
    return s;
}

double JumpMeasure::mass_on_sphere(double rho) const {
    double s = 0.0;
    for (const auto& a : atoms) {
        double n2 = 0.0;
        for (double m : a.mark) n2 += m * m;
        if (std::sqrt(n2) == rho) s += a.weight;
    }
    return s;
}

namespace {

std::string point_string(std::span<const double> x, double y) {
    std::ostringstream oss;
    oss << "(x=[";
    for (std::size_t i = 0; i < x.size(); ++i) oss << (i ? "," : "") << x[i];
    oss << "], y=" << y << ")";
    return oss.str();
}

// Walks the product grid [lo,hi]^d x [lo,hi] and calls fn(x, y).
template <typename Fn>
void for_each_grid_point(int d, const GridSpec& g, Fn&& fn) {
    const int n = std::max(2, g.points_per_axis);
    const double step = (g.hi - g.lo) / (n - 1);
    // Full product grids explode for large d; sample axes jointly instead:
    // all coordinates move together plus each axis individually perturbed.
    Vec x(d, 0.0);
    for (int i = 0; i < n; ++i) {
        const double xi = g.lo + step * i;
        for (int j = 0; j < n; ++j) {
            const double y = g.lo + step * j;
            std::fill(x.begin(), x.end(), xi);
            fn(x, y);
            for (int axis = 0; axis < d; ++axis) {
                std::fill(x.begin(), x.end(), 0.0);
                x[axis] = xi;
                fn(x, y);
            }
        }
    }
}

void check_sign(ValidationReport& rep, const std::string& name,
                const CoefficientField& field, int d, const GridSpec& g,
                bool want_positive) {
    ValidationItem item{name, true, ""};
    for_each_grid_point(d, g, [&](const Vec& x, double /*y*/) {
        if (!item.passed) return;
        const double vp = field.plus.eval(x, 0.0);
        const double vm = field.minus.eval(x, 0.0);
        const bool ok = want_positive ? (vp > 0.0 && vm > 0.0)
                                      : (vp < 0.0 && vm < 0.0);
        if (!ok) {
            item.passed = false;
            item.witness = point_string(x, 0.0);
        }
    });
    rep.items.push_back(std::move(item));
}

void check_bounded(ValidationReport& rep, const std::string& name,
                   const CoefficientField& field, int d, const GridSpec& g,
                   double bound) {
    ValidationItem item{name, true, ""};
    for_each_grid_point(d, g, [&](const Vec& x, double y) {
        if (!item.passed) return;
        const double v = eval_field(field, x, y);
        if (!(std::abs(v) <= bound)) {
            item.passed = false;
            item.witness = point_string(x, y) + " |value|=" + std::to_string(std::abs(v));
        }
    });
    rep.items.push_back(std::move(item));
}

void check_separated(ValidationReport& rep, const std::string& name,
                     const CoefficientField& field, int d, const GridSpec& g) {
    ValidationItem item{name, true, ""};
    for_each_grid_point(d, g, [&](const Vec& x, double y) {
        if (!item.passed) return;
        const double v = eval_field(field, x, y);
        if (!(std::abs(v) > 1e-12)) {
            item.passed = false;
            item.witness = point_string(x, y);
        }
    });
    rep.items.push_back(std::move(item));
}

}  // namespace

bool ValidationReport::passed() const {
    return std::all_of(items.begin(), items.end(),
                       [](const ValidationItem& i) { return i.passed; });
}

std::string ValidationReport::summary() const {
    std::ostringstream oss;
    for (const auto& i : items) {
        oss << (i.passed ? "pass" : "FAIL") << "  " << i.assumption;
        if (!i.passed) oss << "  witness " << i.witness;
        oss << "\n";
    }
    return oss.str();
}

ValidationReport validate_model(const SmallNoiseModel& m, const GridSpec& grid) {
    ValidationReport rep;
    {
        ValidationItem item{"exponent in (0,1)", m.gamma.valid(),
                            m.gamma.valid() ? "" : "gamma=" + std::to_string(m.gamma.gamma)};
        rep.items.push_back(std::move(item));
    }
    {
        ValidationItem item{"dimension consistency", true, ""};
        if (m.d < 1 || static_cast<int>(m.psi.size()) != m.d ||
            static_cast<int>(m.x0.size()) != m.d) {
            item.passed = false;
            item.witness = "d=" + std::to_string(m.d) +
                           " psi.size=" + std::to_string(m.psi.size()) +
                           " x0.size=" + std::to_string(m.x0.size());
        }
        rep.items.push_back(std::move(item));
    }
    if (!rep.passed()) return rep;

    const bool repulsive = m.regime == Regime::Repulsive;
    check_sign(rep, repulsive ? "phi sign on hyperplane (repulsive: > 0)"
                              : "phi sign on hyperplane (attractive: < 0)",
               m.phi, m.d, grid, repulsive);
    for (int i = 0; i < m.d; ++i) {
        check_bounded(rep, "psi[" + std::to_string(i) + "] bounded", m.psi[i],
                      m.d, grid, 1e6);
    }
    check_bounded(rep, "phi bounded", m.phi, m.d, grid, 1e6);
    check_bounded(rep, "beta bounded", m.beta, m.d, grid, 1e6);
    check_separated(rep, "beta separated from zero", m.beta, m.d, grid);
    return rep;
}

ValidationReport validate_model(const TwoScaleModel& m, const GridSpec& grid) {
    ValidationReport rep;
    {
        ValidationItem item{"dimension consistency", true, ""};
        if (m.d < 1 || m.k < 1 || static_cast<int>(m.a.size()) != m.d ||
            static_cast<int>(m.A.size()) != m.k ||
            static_cast<int>(m.x0.size()) != m.d ||
            static_cast<int>(m.y0.size()) != m.k) {
            item.passed = false;
            item.witness = "d=" + std::to_string(m.d) + " k=" + std::to_string(m.k);
        }
        rep.items.push_back(std::move(item));
    }
    if (!rep.passed()) return rep;

    {
        ValidationItem item{"cutoff rho positive", m.rho > 0.0,
                            m.rho > 0.0 ? "" : "rho=" + std::to_string(m.rho)};
        rep.items.push_back(std::move(item));
    }
    {
        const bool ok = m.kappa + m.p_moment > 1.0;
        ValidationItem item{"balance condition kappa + p > 1", ok,
                            ok ? ""
                               : "kappa=" + std::to_string(m.kappa) +
                                     " p=" + std::to_string(m.p_moment)};
        rep.items.push_back(std::move(item));
    }
    {
        const double nm = m.nu.mass_on_sphere(m.rho);
        const double mm = m.mu.mass_on_sphere(m.rho);
        const bool ok = nm == 0.0 && mm == 0.0;
        ValidationItem item{"jump measures put no mass on the cutoff sphere", ok,
                            ok ? "" : "mass=" + std::to_string(nm + mm)};
        rep.items.push_back(std::move(item));
    }
    {
        // Attraction of the fast drift: A(x,y).y <= -c |y|^(kappa+1) outside
        // radius r, checked on the grid with the declared constants.
        ValidationItem item{"fast drift attraction inequality", true, ""};
        for_each_grid_point(m.d, grid, [&](const Vec& x, double ycoord) {
            if (!item.passed) return;
            // Fast points along each fast axis at the sampled magnitude.
            for (int axis = 0; axis < m.k; ++axis) {
                Vec y(m.k, 0.0);
                y[axis] = ycoord;
                double norm = std::abs(ycoord);
                if (norm < m.drift_r) continue;
                double dot = 0.0;
                for (int j = 0; j < m.k; ++j) {
                    dot += eval_field(m.A[j], x, y[j]) * y[j];
                }
                const double rhs = -m.drift_c * std::pow(norm, m.kappa + 1.0);
                if (!(dot <= rhs + 1e-12)) {
                    item.passed = false;
                    item.witness = point_string(x, ycoord) +
                                   " A.y=" + std::to_string(dot) +
                                   " bound=" + std::to_string(rhs);
                    return;
                }
            }
        });
        rep.items.push_back(std::move(item));
    }
    check_bounded(rep, "slow diffusion bounded", m.sigma, m.d, grid, 1e6);
    check_bounded(rep, "fast diffusion bounded", m.Sigma, m.d, grid, 1e6);
    return rep;
}

}  // namespace snlab
