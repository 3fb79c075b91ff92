#include "snlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "snlab/quadrature.hpp"
#include "snlab/rng.hpp"

namespace snlab {

namespace {

// Width of the boundary layer of exp(-q |y|^(g+1)): the scale where the
// exponent reaches 1.
double kernel_width(double q, double gamma) {
    if (q <= 0.0) return 1.0;
    return std::pow(1.0 / q, 1.0 / (gamma + 1.0));
}

std::vector<double> width_ladder(double w, double limit) {
    std::vector<double> pts;
    for (double s = w; s < limit; s *= 8.0) pts.push_back(s);
    return pts;
}

}  // namespace

void FrozenParams::require_repulsive() const {
    if (!(phi_plus > 0.0 && phi_minus > 0.0)) {
        throw DomainError("repulsive frozen parameters require phi+ > 0 and phi- > 0");
    }
    if (!(beta_plus > 0.0 && beta_minus > 0.0)) {
        throw DomainError("beta values must be positive");
    }
}

void FrozenParams::require_attractive() const {
    if (!(phi_plus < 0.0 && phi_minus < 0.0)) {
        throw DomainError("attractive frozen parameters require phi+ < 0 and phi- < 0");
    }
    if (!(beta_plus > 0.0 && beta_minus > 0.0)) {
        throw DomainError("beta values must be positive");
    }
}

FrozenParams FrozenParams::at(const SmallNoiseModel& m, std::span<const double> x) {
    FrozenParams p;
    p.phi_plus = m.phi.plus.eval(x, 0.0);
    p.phi_minus = m.phi.minus.eval(x, 0.0);
    p.beta_plus = m.beta.plus.eval(x, 0.0);
    p.beta_minus = m.beta.minus.eval(x, 0.0);
    p.gamma = m.gamma.gamma;
    return p;
}

std::pair<double, double> selection_probabilities(const FrozenParams& p) {
    p.require_repulsive();
    const double e = 1.0 / (p.gamma + 1.0);
    const double wp = std::pow(p.phi_plus / (p.beta_plus * p.beta_plus), e);
    const double wm = std::pow(p.phi_minus / (p.beta_minus * p.beta_minus), e);
    const double p_plus = wp / (wm + wp);
    return {1.0 - p_plus, p_plus};
}

double scale_function(double y, const FrozenParams& p, double eps, double nu) {
    if (eps <= 0.0) throw DomainError("scale_function requires eps > 0");
    if (y == 0.0) return 0.0;
    const double g = p.gamma;
    double num, den;
    if (y > 0.0) {
        num = p.phi_plus + nu;
        den = p.beta_plus * p.beta_plus - nu;
    } else {
        num = p.phi_minus - nu;
        den = p.beta_minus * p.beta_minus + nu;
    }
    if (den <= 0.0) throw DomainError("scale_function slack nu exceeds beta^2");
    const double q = 2.0 * num / (eps * eps * (g + 1.0) * den);
    auto kernel = [&](double z) {
        return std::exp(-q * std::pow(std::abs(z), g + 1.0));
    };
    const double w = kernel_width(std::abs(q), g);
    const double mag = integrate_segmented(kernel, 0.0, std::abs(y),
                                           width_ladder(w, std::abs(y)))
                           .value;
    return y > 0.0 ? mag : -mag;
}

double exit_probability_quadrature(double delta, const FrozenParams& p, double eps) {
    if (delta <= 0.0) throw DomainError("exit probability requires delta > 0");
    const double sp = scale_function(delta, p, eps, 0.0);
    const double sm = scale_function(-delta, p, eps, 0.0);
    return -sm / (sp - sm);
}

double exit_time_functional(double x, double A, double eps, double gamma) {
    if (A <= 0.0 || eps <= 0.0) {
        throw DomainError("exit_time_functional requires A > 0 and eps > 0");
    }
    if (x == 0.0) return 0.0;
    const double g = gamma;
    const double q = 2.0 * A / ((g + 1.0) * eps * eps);
    auto expo = [&](double t) { return q * std::pow(t, g + 1.0); };
    // Inner integral in the overflow-free form
    //   F(y) = (2/eps^2) * int_0^y exp(expo(z) - expo(y)) dz,
    // concentrated near z = y on the scale eps^2 / (2 A y^g).
    auto inner = [&](double y) {
        if (y <= 0.0) return 0.0;
        const double gy = expo(y);
        auto f = [&](double z) { return std::exp(expo(z) - gy); };
        const double wz = std::min(y, (eps * eps) / (2.0 * A * std::pow(y, g)));
        std::vector<double> pts;
        for (double s = wz; s < y; s *= 8.0) pts.push_back(y - s);
        const double v = integrate_segmented(f, 0.0, y, pts,
                                             {1e-12, 1e-7, 2000})
                             .value;
        return (2.0 / (eps * eps)) * v;
    };
    const double w0 = kernel_width(q, g);
    QuadResult r = integrate_segmented(inner, 0.0, std::abs(x),
                                       width_ladder(w0, std::abs(x)),
                                       {1e-10, 1e-6, 800});
    if (!r.converged) {
        throw NumericError("exit_time_functional quadrature achieved error " +
                           std::to_string(r.error));
    }
    return r.value;
}

GammaAsymptotic gamma_asymptotic(double delta, double A, double eps, double gamma) {
    if (delta <= 0.0 || A <= 0.0 || eps <= 0.0) {
        throw DomainError("gamma_asymptotic requires positive delta, A, eps");
    }
    const double q = A / (eps * eps);
    auto kernel = [&](double z) { return std::exp(-q * std::pow(z, gamma + 1.0)); };
    const double w = kernel_width(q, gamma);
    GammaAsymptotic out;
    out.quadrature =
        integrate_segmented(kernel, 0.0, delta, width_ladder(w, delta)).value;
    out.asymptotic = (1.0 / (1.0 + gamma)) *
                     std::pow(eps * eps / A, 1.0 / (1.0 + gamma)) *
                     std::tgamma(1.0 / (1.0 + gamma));
    return out;
}

InvariantDensity::InvariantDensity(const FrozenParams& p) : params_(p) {
    p.require_attractive();
    const double g = p.gamma;
    const double e = 1.0 / (g + 1.0);
    // Speed-measure weights per half line.
    const double kp = 2.0 * std::abs(p.phi_plus) / ((g + 1.0) * p.beta_plus * p.beta_plus);
    const double km = 2.0 * std::abs(p.phi_minus) / ((g + 1.0) * p.beta_minus * p.beta_minus);
    const double half = std::tgamma(e) * e;  // Gamma(1/(g+1)) / (g+1)
    const double ip = half * std::pow(kp, -e);
    const double im = half * std::pow(km, -e);
    norm_ = 1.0 / (ip + im);
    mass_plus_ = ip / (ip + im);
}

double InvariantDensity::operator()(double y) const {
    const double g = params_.gamma;
    const double phi = y >= 0.0 ? params_.phi_plus : params_.phi_minus;
    const double beta = y >= 0.0 ? params_.beta_plus : params_.beta_minus;
    return norm_ * std::exp(2.0 * phi * std::pow(std::abs(y), g + 1.0) /
                            ((g + 1.0) * beta * beta));
}

double InvariantDensity::mass_interval(double a, double b) const {
    auto f = [this](double y) { return (*this)(y); };
    // Split at 0 where the density kinks.
    if (a < 0.0 && b > 0.0) {
        return mass_interval(a, 0.0) + mass_interval(0.0, b);
    }
    return integrate(f, a, b).value;
}

InvariantDensity invariant_density(const FrozenParams& p) {
    return InvariantDensity(p);
}

Vec averaged_drift(std::span<const double> x, const SmallNoiseModel& m) {
    if (m.regime != Regime::Attractive) {
        throw DomainError("averaged drift is defined in the attractive regime");
    }
    const InvariantDensity pi(FrozenParams::at(m, x));
    const double wp = pi.mass_positive();
    const double wm = pi.mass_negative();
    Vec out(m.d, 0.0);
    for (int i = 0; i < m.d; ++i) {
        out[i] = m.psi[i].plus.eval(x, 0.0) * wp + m.psi[i].minus.eval(x, 0.0) * wm;
    }
    return out;
}

namespace {

struct Histogram {
    std::vector<double> probs;  // bins + 2 overflow slots
};

Histogram histogram(std::span<const double> s, double lo, double hi, int bins) {
    Histogram h;
    h.probs.assign(bins + 2, 0.0);
    const double inv = bins / (hi - lo);
    const double w = 1.0 / static_cast<double>(s.size());
    for (double v : s) {
        if (v < lo) {
            h.probs[bins] += w;
        } else if (v >= hi) {
            h.probs[bins + 1] += w;
        } else {
            h.probs[static_cast<int>((v - lo) * inv)] += w;
        }
    }
    return h;
}

std::pair<double, double> resolve_range(const BinSpec& spec,
                                        std::span<const double> a,
                                        std::span<const double> b) {
    if (!spec.automatic) return {spec.lo, spec.hi};
    double lo = a[0], hi = a[0];
    for (double v : a) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : b) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (lo == hi) { lo -= 0.5; hi += 0.5; }
    const double pad = 1e-9 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace

double empirical_tv(std::span<const double> a, std::span<const double> b,
                    const BinSpec& spec) {
    if (a.empty() || b.empty()) {
        throw DomainError("empirical_tv requires non-empty samples");
    }
    auto [lo, hi] = resolve_range(spec, a, b);
    const Histogram ha = histogram(a, lo, hi, spec.bins);
    const Histogram hb = histogram(b, lo, hi, spec.bins);
    double tv = 0.0;
    for (std::size_t i = 0; i < ha.probs.size(); ++i) {
        tv += std::abs(ha.probs[i] - hb.probs[i]);
    }
    return 0.5 * tv;
}

double empirical_tv_against(std::span<const double> samples,
                            const InvariantDensity& ref, const BinSpec& spec) {
    if (samples.empty()) throw DomainError("empirical_tv requires samples");
    auto [lo, hi] = resolve_range(spec, samples, samples);
    const Histogram hs = histogram(samples, lo, hi, spec.bins);
    double tv = 0.0;
    const double w = (hi - lo) / spec.bins;
    for (int i = 0; i < spec.bins; ++i) {
        const double mass = ref.mass_interval(lo + i * w, lo + (i + 1) * w);
        tv += std::abs(hs.probs[i] - mass);
    }
    const double lower_tail =
        integrate_half_line([&](double t) { return ref(lo - t); }).value;
    const double upper_tail =
        integrate_half_line([&](double t) { return ref(hi + t); }).value;
    tv += std::abs(hs.probs[spec.bins] - lower_tail);
    tv += std::abs(hs.probs[spec.bins + 1] - upper_tail);
    return 0.5 * tv;
}

double TestFunction::value(std::span<const double> x) const {
    double s2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = i < center.size() ? center[i] : 0.0;
        s2 += (x[i] - c) * (x[i] - c);
    }
    const double s = s2 / (radius * radius);
    if (s >= 1.0) return 0.0;
    double poly = 1.0;
    for (std::size_t i = 0; i < x.size() && i < powers.size(); ++i) {
        for (int p = 0; p < powers[i]; ++p) poly *= x[i];
    }
    return poly * std::exp(1.0 - 1.0 / (1.0 - s));
}

Vec TestFunction::gradient(std::span<const double> x) const {
    const double h = 1e-5;
    Vec g(x.size(), 0.0);
    Vec xp(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double f1 = value(xp);
        xp[i] = x[i] - h;
        const double f0 = value(xp);
        xp[i] = x[i];
        g[i] = (f1 - f0) / (2.0 * h);
    }
    return g;
}

std::vector<double> TestFunction::hessian(std::span<const double> x) const {
    const double h = 1e-4;
    const std::size_t d = x.size();
    std::vector<double> hess(d * d, 0.0);
    Vec xp(x.begin(), x.end());
    const double f0 = value(x);
    for (std::size_t i = 0; i < d; ++i) {
        xp[i] = x[i] + h;
        const double fp = value(xp);
        xp[i] = x[i] - h;
        const double fm = value(xp);
        xp[i] = x[i];
        hess[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = i + 1; j < d; ++j) {
            xp[i] = x[i] + h; xp[j] = x[j] + h;
            const double fpp = value(xp);
            xp[j] = x[j] - h;
            const double fpm = value(xp);
            xp[i] = x[i] - h; xp[j] = x[j] + h;
            const double fmp = value(xp);
            xp[j] = x[j] - h;
            const double fmm = value(xp);
            xp[i] = x[i]; xp[j] = x[j];
            hess[i * d + j] = hess[j * d + i] =
                (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return hess;
}

std::vector<TestFunction> test_function_registry(int d, int max_degree,
                                                 double radius) {
    std::vector<TestFunction> fns;
    // Products of coordinate monomials of total degree <= max_degree with the
    // common bump. Enumerate multi-indices by recursion.
    std::vector<int> powers(d, 0);
    auto emit = [&] {
        TestFunction f;
        f.powers = powers;
        f.center.assign(d, 0.0);
        f.radius = radius;
        fns.push_back(std::move(f));
    };
    std::function<void(int, int)> rec = [&](int axis, int budget) {
        if (axis == d) {
            emit();
            return;
        }
        for (int p = 0; p <= budget; ++p) {
            powers[axis] = p;
            rec(axis + 1, budget - p);
        }
        powers[axis] = 0;
    };
    rec(0, max_degree);
    return fns;
}

double generator_apply(const TestFunction& phi, std::span<const double> x,
                       const AveragedCharacteristics& avg) {
    const std::size_t d = x.size();
    const Vec grad = phi.gradient(x);
    const std::vector<double> hess = phi.hessian(x);
    double out = 0.0;
    for (std::size_t i = 0; i < d; ++i) out += grad[i] * avg.a_bar[i];
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out += 0.5 * hess[i * d + j] * avg.b_bar[i * d + j];
        }
    }
    const double fx = phi.value(x);
    Vec shifted(x.begin(), x.end());
    for (const auto& atom : avg.compensated) {
        double lin = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            shifted[i] = x[i] + atom.displacement[i];
            lin += grad[i] * atom.displacement[i];
        }
        out += atom.weight * (phi.value(shifted) - fx - lin);
    }
    for (const auto& atom : avg.uncompensated) {
        for (std::size_t i = 0; i < d; ++i) shifted[i] = x[i] + atom.displacement[i];
        out += atom.weight * (phi.value(shifted) - fx);
    }
    return out;
}

bool has_closed_form_frozen_law(const TwoScaleModel& m) {
    if (m.k != 1 || m.A.size() != 1) return false;
    if (!m.mu.empty()) return false;
    const auto& Ap = m.A[0].plus;
    const auto& Am = m.A[0].minus;
    if (Ap.family != FieldFamily::SignedPowerY ||
        Am.family != FieldFamily::SignedPowerY)
        return false;
    if (Ap.exponent != Am.exponent) return false;
    if (!(Ap.exponent > 0.0 && Ap.exponent < 1.0)) return false;
    return true;
}

FrozenParams frozen_params_of(const TwoScaleModel& m, std::span<const double> x) {
    if (!has_closed_form_frozen_law(m)) {
        throw DomainError("fast block has no closed-form stationary law");
    }
    FrozenParams p;
    p.gamma = m.A[0].plus.exponent;
    // Signed-power coefficient, possibly affine in x.
    auto coef = [&](const ParametricFunction& f) {
        double v = f.c0;
        for (std::size_t i = 0; i < f.ax.size() && i < x.size(); ++i) {
            v += f.ax[i] * x[i];
        }
        return v;
    };
    p.phi_plus = coef(m.A[0].plus);
    p.phi_minus = coef(m.A[0].minus);
    p.beta_plus = m.Sigma.plus.eval(x, 0.0);
    p.beta_minus = m.Sigma.minus.eval(x, 0.0);
    return p;
}

namespace {

// Euler chains for the frozen fast dynamics (general k, scalar diffusion,
// optional finite-activity jumps from mu with unit-ball compensation).
struct FrozenSamples {
    std::vector<Vec> ys;                // thinned draws, all chains pooled
    std::vector<std::vector<Vec>> per_chain;
};

FrozenSamples sample_frozen(const TwoScaleModel& m, std::span<const double> x,
                            const FrozenSamplerSpec& spec) {
    FrozenSamples out;
    out.per_chain.resize(spec.n_chains);
    const double mu_rate = m.mu.total_intensity();
    for (int c = 0; c < spec.n_chains; ++c) {
        PathRng rng(spec.seed + static_cast<std::uint64_t>(c) * 0x9e37ULL);
        Vec y(m.k, 0.0);
        // Stagger starts to decorrelate chains.
        for (int j = 0; j < m.k; ++j) y[j] = (c % 2 ? -1.0 : 1.0) * (0.5 + 0.1 * c);
        double t = 0.0;
        const double total = spec.burn_in + spec.horizon;
        const double sq = std::sqrt(spec.dt);
        double next_jump = mu_rate > 0.0 ? rng.exponential() / mu_rate : 1e300;
        int step = 0;
        while (t < total) {
            for (int j = 0; j < m.k; ++j) {
                double drift = eval_field(m.A[j], x, y[j]);
                if (mu_rate > 0.0) {
                    // compensator of small jumps (|z| <= 1)
                    double comp = 0.0;
                    for (const auto& atom : m.mu.atoms) {
                        double n2 = 0.0;
                        for (double mk : atom.mark) n2 += mk * mk;
                        if (std::sqrt(n2) <= 1.0 && j < static_cast<int>(atom.mark.size())) {
                            comp += eval_field(m.C_amp, x, y[j]) * atom.mark[j] * atom.weight;
                        }
                    }
                    drift -= comp;
                }
                const double dif = eval_field(m.Sigma, x, y[j]);
                y[j] += drift * spec.dt + dif * sq * rng.normal();
            }
            t += spec.dt;
            while (t >= next_jump) {
                // pick an atom proportionally to weight
                double u = rng.uniform() * mu_rate;
                for (const auto& atom : m.mu.atoms) {
                    u -= atom.weight;
                    if (u <= 0.0) {
                        for (int j = 0; j < m.k && j < static_cast<int>(atom.mark.size()); ++j) {
                            y[j] += eval_field(m.C_amp, x, y[j]) * atom.mark[j];
                        }
                        break;
                    }
                }
                next_jump += rng.exponential() / mu_rate;
            }
            if (t > spec.burn_in && (step % spec.thin) == 0) {
                out.per_chain[c].push_back(y);
            }
            ++step;
        }
    }
    for (auto& chain : out.per_chain) {
        out.ys.insert(out.ys.end(), chain.begin(), chain.end());
    }
    return out;
}

// Split-chain potential-scale-reduction diagnostic on the first coordinate.
double split_rhat(const std::vector<std::vector<Vec>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        if (h < 2) continue;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < h; ++i) a.push_back(c[i][0]);
        for (std::size_t i = h; i < 2 * h; ++i) b.push_back(c[i][0]);
        halves.push_back(std::move(a));
        halves.push_back(std::move(b));
    }
    if (halves.size() < 2) return 1.0;
    const std::size_t n = halves[0].size();
    const std::size_t mch = halves.size();
    std::vector<double> means(mch), vars(mch);
    for (std::size_t c = 0; c < mch; ++c) {
        double mu = std::accumulate(halves[c].begin(), halves[c].end(), 0.0) / n;
        double v = 0.0;
        for (double s : halves[c]) v += (s - mu) * (s - mu);
        means[c] = mu;
        vars[c] = v / (n - 1);
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / mch;
    double B = 0.0;
    for (double mu : means) B += (mu - grand) * (mu - grand);
    B *= static_cast<double>(n) / (mch - 1);
    const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / mch;
    if (W <= 0.0) return 1.0;
    const double var_hat = (static_cast<double>(n - 1) / n) * W + B / n;
    return std::sqrt(var_hat / W);
}

void append_image_atoms(std::vector<KernelAtom>& dst, const TwoScaleModel& m,
                        std::span<const double> x, const Vec& y, double u_scale,
                        bool compensated_side, double sample_weight) {
    // Only the first fast coordinate feeds the amplitude field.
    const double amp = eval_field(m.c_amp, x, y.empty() ? 0.0 : y[0]);
    for (const auto& atom : m.nu.atoms) {
        double n2 = 0.0;
        for (double mk : atom.mark) n2 += mk * mk;
        const bool small = std::sqrt(n2) <= m.rho;
        if (small != compensated_side) continue;
        KernelAtom ka;
        ka.displacement.assign(m.d, 0.0);
        for (int i = 0; i < m.d && i < static_cast<int>(atom.mark.size()); ++i) {
            ka.displacement[i] = amp * atom.mark[i] * u_scale;
        }
        ka.weight = atom.weight * sample_weight;
        dst.push_back(std::move(ka));
    }
}

}  // namespace

AveragedCharacteristics averaged_characteristics(const TwoScaleModel& m,
                                                 std::span<const double> x,
                                                 const FrozenSamplerSpec& spec) {
    AveragedCharacteristics out;
    out.a_bar.assign(m.d, 0.0);
    out.a_bar_se.assign(m.d, 0.0);
    out.b_bar.assign(static_cast<std::size_t>(m.d) * m.d, 0.0);

    if (spec.prefer_closed_form && has_closed_form_frozen_law(m)) {
        out.closed_form = true;
        const InvariantDensity pi(frozen_params_of(m, x));
        auto average = [&](const CoefficientField& f) {
            auto plus = [&](double y) { return f.plus.eval(x, y) * pi(y); };
            auto minus = [&](double y) { return f.minus.eval(x, -y) * pi(-y); };
            return integrate_half_line(plus).value +
                   integrate_half_line(minus).value;
        };
        for (int i = 0; i < m.d; ++i) out.a_bar[i] = average(m.a[i]);
        auto sigma_sq = [&](const CoefficientField& f) {
            auto plus = [&](double y) {
                const double v = f.plus.eval(x, y);
                return v * v * pi(y);
            };
            auto minus = [&](double y) {
                const double v = f.minus.eval(x, -y);
                return v * v * pi(-y);
            };
            return integrate_half_line(plus).value +
                   integrate_half_line(minus).value;
        };
        const double s2 = sigma_sq(m.sigma);
        for (int i = 0; i < m.d; ++i) out.b_bar[i * m.d + i] = s2;
        if (!m.nu.empty()) {
            // Amplitude assumed y-independent here; evaluated at y = 0.
            append_image_atoms(out.compensated, m, x, Vec(m.k, 0.0), 1.0, true, 1.0);
            append_image_atoms(out.uncompensated, m, x, Vec(m.k, 0.0), 1.0, false, 1.0);
        }
        return out;
    }

    FrozenSamples s = sample_frozen(m, x, spec);
    const double rhat = split_rhat(s.per_chain);
    if (rhat > spec.rhat_threshold) {
        throw NumericError("frozen-measure sampler did not converge, split R-hat = " +
                           std::to_string(rhat));
    }
    const std::size_t n = s.ys.size();
    if (n == 0) throw NumericError("frozen-measure sampler produced no draws");

    // Per-chain means for standard errors.
    std::vector<Vec> chain_means(s.per_chain.size(), Vec(m.d, 0.0));
    for (std::size_t c = 0; c < s.per_chain.size(); ++c) {
        for (const auto& y : s.per_chain[c]) {
            for (int i = 0; i < m.d; ++i) {
                chain_means[c][i] += eval_field(m.a[i], x, y[0]);
            }
        }
        for (int i = 0; i < m.d; ++i) chain_means[c][i] /= s.per_chain[c].size();
    }
    for (int i = 0; i < m.d; ++i) {
        double mu = 0.0;
        for (const auto& cm : chain_means) mu += cm[i];
        mu /= chain_means.size();
        out.a_bar[i] = mu;
        double v = 0.0;
        for (const auto& cm : chain_means) v += (cm[i] - mu) * (cm[i] - mu);
        out.a_bar_se[i] = std::sqrt(v / (chain_means.size() - 1) / chain_means.size());
    }
    double s2 = 0.0;
    for (const auto& y : s.ys) {
        const double v = eval_field(m.sigma, x, y[0]);
        s2 += v * v;
    }
    s2 /= n;
    for (int i = 0; i < m.d; ++i) out.b_bar[i * m.d + i] = s2;

    if (!m.nu.empty()) {
        // Thin the sample cloud so kernels stay small.
        const std::size_t stride = std::max<std::size_t>(1, n / 256);
        std::size_t used = 0;
        for (std::size_t i = 0; i < n; i += stride) ++used;
        for (std::size_t i = 0; i < n; i += stride) {
            append_image_atoms(out.compensated, m, x, s.ys[i], 1.0, true,
                               1.0 / used);
            append_image_atoms(out.uncompensated, m, x, s.ys[i], 1.0, false,
                               1.0 / used);
        }
    }
    return out;
}

}  // namespace snlab
