#include "snlab/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "snlab/extremal.hpp"
#include "snlab/rng.hpp"
#include "snlab/sde.hpp"

namespace snlab {

int worker_count() {
    if (const char* env = std::getenv("SNLAB_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_paths(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = std::min<int>(worker_count(), static_cast<int>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mu = 0.0;
    for (double s : v) mu += s;
    mu /= v.size();
    double var = 0.0;
    for (double s : v) var += (s - mu) * (s - mu);
    var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
    return {mu, std::sqrt(var)};
}

// Least-squares slope of log(stat) vs log(param).
std::optional<double> loglog_slope(const std::vector<double>& param,
                                   const std::vector<double>& stat) {
    if (param.size() < 2) return std::nullopt;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < param.size(); ++i) {
        if (param[i] <= 0.0 || stat[i] <= 0.0) return std::nullopt;
        lx.push_back(std::log(param[i]));
        ly.push_back(std::log(stat[i]));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
    mx /= lx.size();
    my /= ly.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

void require_repulsive_ball(const SmallNoiseModel& m, double delta) {
    if (m.regime != Regime::Repulsive) {
        throw DomainError("selection experiments require the repulsive regime");
    }
    // Coefficient signs must persist on the delta-ball the exit happens in.
    std::vector<Vec> xs{m.x0};
    for (int i = 0; i < m.d; ++i) {
        Vec lo = m.x0, hi = m.x0;
        lo[i] -= delta;
        hi[i] += delta;
        xs.push_back(lo);
        xs.push_back(hi);
    }
    for (const auto& x : xs) {
        for (double y : {-delta, -0.5 * delta, 0.0, 0.5 * delta, delta}) {
            if (!(m.phi.plus.eval(x, y) > 0.0) || !(m.phi.minus.eval(x, y) > 0.0)) {
                throw ValidationError(
                    "phi changes sign within the exit ball; shrink delta");
            }
        }
    }
}

double exit_time_cap(const SmallNoiseModel& m, double delta, double cap_factor) {
    const double g = m.gamma.gamma;
    const double phi_min = m.min_abs_phi_at_origin();
    if (phi_min <= 0.0) throw DomainError("phi vanishes at the origin");
    return cap_factor * std::pow(delta, 1.0 - g) / ((1.0 - g) * phi_min);
}

}  // namespace

bool ConvergenceLadder::decreasing() const {
    for (std::size_t i = 1; i < rungs.size(); ++i) {
        if (!(rungs[i].statistic < rungs[i - 1].statistic)) return false;
    }
    return true;
}

std::vector<SelectionRecord> selection_records(const SmallNoiseModel& m,
                                               double eps, double delta,
                                               std::size_t first,
                                               std::size_t count,
                                               std::uint64_t seed0,
                                               double cap_factor) {
    if (count == 0) throw DomainError("selection run requires at least one path");
    require_repulsive_ball(m, delta);
    const double cap = exit_time_cap(m, delta, cap_factor);

    std::vector<SelectionRecord> recs(count);
    parallel_paths(count, [&](std::size_t slot) {
        const std::size_t i = first + slot;
        PathRng rng(seed0 + i);
        SelectionRecord rec;
        rec.index = i;
        double exit_t = 0.0;
        int side = 0;
        auto observer = [&](const PathState& s) {
            if (std::abs(s.y) >= delta) {
                side = s.y > 0.0 ? +1 : -1;
                exit_t = s.t;
                return false;
            }
            return true;
        };
        PathEndpoint end = simulate_small_noise(m, eps, cap, rng, observer);
        rec.side = side;
        rec.exit_time = side != 0 ? exit_t : end.t;
        recs[slot] = rec;
    });
    return recs;
}

SelectionEstimate tally_selection(std::vector<SelectionRecord> records,
                                  double eps, double delta, double cap) {
    std::sort(records.begin(), records.end(),
              [](const SelectionRecord& a, const SelectionRecord& b) {
                  return a.index < b.index;
              });
    SelectionEstimate est;
    est.n_paths = records.size();
    est.delta = delta;
    est.eps = eps;
    est.time_cap = cap;
    std::vector<double> taus;
    taus.reserve(records.size());
    for (const auto& r : records) {
        if (r.side > 0) {
            ++est.n_plus;
        } else if (r.side < 0) {
            ++est.n_minus;
        } else {
            ++est.n_capped;
            continue;
        }
        taus.push_back(r.exit_time);
    }
    const std::size_t exited = est.n_plus + est.n_minus;
    if (exited > 0) {
        est.p_plus_hat = static_cast<double>(est.n_plus) / exited;
        est.p_minus_hat = static_cast<double>(est.n_minus) / exited;
        est.ci_halfwidth = 1.96 * std::sqrt(std::max(
            est.p_plus_hat * est.p_minus_hat / exited, 1e-300));
        auto [mu, sd] = mean_sd(taus);
        est.mean_exit_time = mu;
        est.exit_time_sd = sd;
    }
    est.warning = est.n_capped * 100 > est.n_paths;
    return est;
}

SelectionEstimate run_selection(const SmallNoiseModel& m, double eps,
                                double delta, std::size_t n_paths,
                                std::uint64_t seed0, double cap_factor) {
    auto recs = selection_records(m, eps, delta, 0, n_paths, seed0, cap_factor);
    return tally_selection(std::move(recs), eps, delta,
                           exit_time_cap(m, delta, cap_factor));
}

namespace {

// Piecewise-linear lookup into a dense uniform-step path.
struct DenseLookup {
    const DensePath* path;
    double h;

    double y_at(double t) const {
        const double pos = t / h;
        const std::size_t i =
            std::min(static_cast<std::size_t>(pos), path->size() - 2);
        const double f = std::clamp(pos - i, 0.0, 1.0);
        return path->y[i] * (1.0 - f) + path->y[i + 1] * f;
    }
    double x_at(double t, int coord) const {
        const double pos = t / h;
        const std::size_t i =
            std::min(static_cast<std::size_t>(pos), path->size() - 2);
        const double f = std::clamp(pos - i, 0.0, 1.0);
        return path->x[i][coord] * (1.0 - f) + path->x[i + 1][coord] * f;
    }
};

}  // namespace

PathwiseSelection run_pathwise_selection(const SmallNoiseModel& m, double eps,
                                         double delta, std::size_t n_paths,
                                         double T, std::uint64_t seed0) {
    if (n_paths == 0) throw DomainError("selection run requires at least one path");
    require_repulsive_ball(m, delta);
    PathwiseSelection out;
    if (T <= 0.0) {
        // Only the shared initial point is compared.
        out.n_used = n_paths;
        return out;
    }
    const double h = std::min(1e-3, T / 100.0);
    const ExtremalSolution plus = extremal_solution(m, +1, T, h);
    const ExtremalSolution minus = extremal_solution(m, -1, T, h);
    const DenseLookup lp{&plus.path, h};
    const DenseLookup lm{&minus.path, h};

    struct Rec {
        int side = 0;
        double sup_plus = 0.0;
        double sup_minus = 0.0;
    };
    std::vector<Rec> recs(n_paths);
    parallel_paths(n_paths, [&](std::size_t i) {
        PathRng rng(seed0 + i);
        Rec rec;
        auto observer = [&](const PathState& s) {
            double dp = std::abs(s.y - lp.y_at(s.t));
            double dm = std::abs(s.y - lm.y_at(s.t));
            for (int c = 0; c < m.d; ++c) {
                dp += std::abs(s.x[c] - lp.x_at(s.t, c));
                dm += std::abs(s.x[c] - lm.x_at(s.t, c));
            }
            rec.sup_plus = std::max(rec.sup_plus, dp);
            rec.sup_minus = std::max(rec.sup_minus, dm);
            if (rec.side == 0 && std::abs(s.y) >= delta) {
                rec.side = s.y > 0.0 ? +1 : -1;
            }
            return true;
        };
        simulate_small_noise(m, eps, T, rng, observer);
        recs[i] = rec;
    });

    std::vector<double> sups;
    std::size_t capped = 0;
    for (const auto& r : recs) {
        if (r.side == 0) {
            ++capped;
            continue;
        }
        sups.push_back(r.side > 0 ? r.sup_plus : r.sup_minus);
    }
    out.capped_fraction = static_cast<double>(capped) / n_paths;
    out.n_used = sups.size();
    if (!sups.empty()) {
        out.median_sup = quantile(sups, 0.5);
        out.q25 = quantile(sups, 0.25);
        out.q75 = quantile(sups, 0.75);
    }
    return out;
}

AttractionResult run_attraction(const SmallNoiseModel& m,
                                const std::vector<double>& eps_ladder, double T,
                                std::size_t n_paths, std::uint64_t seed0,
                                double dt) {
    if (m.regime != Regime::Attractive) {
        throw DomainError("attraction experiment requires the attractive regime");
    }
    if (n_paths == 0) throw DomainError("attraction run requires paths");
    DriftFn psibar = [&m](std::span<const double> x) {
        return averaged_drift(x, m);
    };
    const DensePath xbar = averaged_ode_solve(psibar, m.x0, T, dt);
    const DenseLookup lb{&xbar, dt};

    SmallNoiseOptions opts;
    opts.policy.adaptive = false;
    opts.policy.base_dt = dt;

    AttractionResult res;
    for (double eps : eps_ladder) {
        std::vector<double> sup_x(n_paths, 0.0), sup_y(n_paths, 0.0);
        parallel_paths(n_paths, [&](std::size_t i) {
            PathRng rng(seed0 + i);
            double sx = 0.0, sy = 0.0;
            auto observer = [&](const PathState& s) {
                double dx = 0.0;
                for (int c = 0; c < m.d; ++c) {
                    dx += std::abs(s.x[c] - lb.x_at(s.t, c));
                }
                sx = std::max(sx, dx);
                sy = std::max(sy, std::abs(s.y));
                return true;
            };
            simulate_small_noise(m, eps, T, rng, observer, opts);
            sup_x[i] = sx;
            sup_y[i] = sy;
        });
        LadderRung rx, ry;
        rx.parameter = ry.parameter = eps;
        rx.n = ry.n = n_paths;
        rx.statistic = quantile(sup_x, 0.5);
        rx.error_bar = quantile(sup_x, 0.75) - quantile(sup_x, 0.25);
        ry.statistic = quantile(sup_y, 0.5);
        ry.error_bar = quantile(sup_y, 0.75) - quantile(sup_y, 0.25);
        res.x_deviation.rungs.push_back(rx);
        res.y_sup.rungs.push_back(ry);
    }
    std::vector<double> ps, ys;
    for (const auto& r : res.y_sup.rungs) {
        ps.push_back(r.parameter);
        ys.push_back(r.statistic);
    }
    if (auto s = loglog_slope(ps, ys)) {
        res.y_slope = *s;
        res.y_sup.slope = s;
    }
    std::vector<double> xs;
    for (const auto& r : res.x_deviation.rungs) xs.push_back(r.statistic);
    res.x_deviation.slope = loglog_slope(ps, xs);
    return res;
}

ConvergenceLadder run_exit_time_scaling(const SmallNoiseModel& m, double eps,
                                        const std::vector<double>& delta_ladder,
                                        std::size_t n_paths, std::uint64_t seed0,
                                        double cap_factor) {
    for (std::size_t i = 1; i < delta_ladder.size(); ++i) {
        if (!(delta_ladder[i] < delta_ladder[i - 1])) {
            throw DomainError("delta ladder must be strictly decreasing");
        }
    }
    const double A = m.min_abs_phi_at_origin();
    ConvergenceLadder out;
    std::vector<double> params, stats;
    for (double delta : delta_ladder) {
        SelectionEstimate est = run_selection(m, eps, delta, n_paths, seed0,
                                              cap_factor);
        LadderRung r;
        r.parameter = delta;
        r.n = est.n_plus + est.n_minus;
        r.statistic = est.mean_exit_time;
        r.error_bar = est.exit_time_sd / std::sqrt(std::max<std::size_t>(r.n, 1));
        r.bound = exit_time_functional(delta, A, eps, m.gamma.gamma);
        out.rungs.push_back(r);
        params.push_back(delta);
        stats.push_back(r.statistic);
    }
    out.slope = loglog_slope(params, stats);
    return out;
}

ErgodicityResult run_frozen_ergodicity(std::span<const double> x,
                                       const SmallNoiseModel& m,
                                       const std::vector<double>& T_ladder,
                                       std::size_t n_paths,
                                       std::pair<double, double> y0_pair,
                                       std::uint64_t seed0, double dt,
                                       int bins) {
    if (T_ladder.empty() || n_paths == 0) {
        throw DomainError("ergodicity run requires horizons and paths");
    }
    const FrozenParams p = FrozenParams::at(m, x);
    p.require_attractive();
    const InvariantDensity pi(p);

    const double g = p.gamma;
    const double phi_min = std::min(std::abs(p.phi_plus), std::abs(p.phi_minus));
    const double beta_max = std::max(p.beta_plus, p.beta_minus);
    const double layer =
        std::pow((g + 1.0) * beta_max * beta_max / (2.0 * phi_min),
                 1.0 / (g + 1.0));
    ErgodicityResult res;
    res.relaxation_time = std::pow(layer, 1.0 - g) / phi_min;
    res.mass_positive = pi.mass_positive();

    std::vector<double> horizons = T_ladder;
    std::sort(horizons.begin(), horizons.end());
    const double T_max = horizons.back();
    const FrozenParamsView view{p.phi_plus, p.phi_minus, p.beta_plus,
                                p.beta_minus, p.gamma};

    // samples[h][start][i] = terminal y of path i at horizon h from start.
    std::vector<std::array<std::vector<double>, 2>> samples(horizons.size());
    for (auto& s : samples) {
        s[0].assign(n_paths, 0.0);
        s[1].assign(n_paths, 0.0);
    }
    std::vector<std::uint64_t> pos_steps(2 * n_paths, 0),
        tot_steps(2 * n_paths, 0);

    parallel_paths(2 * n_paths, [&](std::size_t slot) {
        const int start = slot < n_paths ? 0 : 1;
        const std::size_t i = slot % n_paths;
        PathRng rng(seed0 + slot);
        FrozenOptions fo;
        fo.dt = dt;
        fo.y0 = start == 0 ? y0_pair.first : y0_pair.second;
        std::size_t next_h = 0;
        auto observer = [&](double t, double y) {
            while (next_h < horizons.size() && t >= horizons[next_h]) {
                samples[next_h][start][i] = y;
                ++next_h;
            }
            if (t > 0.5 * T_max) {
                ++tot_steps[slot];
                if (y > 0.0) ++pos_steps[slot];
            }
            return true;
        };
        const double y_end = simulate_frozen(view, T_max, rng, observer, fo);
        while (next_h < horizons.size()) samples[next_h++][start][i] = y_end;
    });

    BinSpec spec;
    spec.bins = bins;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        LadderRung r;
        r.parameter = horizons[h];
        r.n = n_paths;
        r.statistic = empirical_tv(samples[h][0], samples[h][1], spec);
        const double tv0 = empirical_tv_against(samples[h][0], pi, spec);
        const double tv1 = empirical_tv_against(samples[h][1], pi, spec);
        r.statistic2 = 0.5 * (tv0 + tv1);
        res.rungs.rungs.push_back(r);
    }
    std::uint64_t pos = 0, tot = 0;
    for (std::size_t s = 0; s < pos_steps.size(); ++s) {
        pos += pos_steps[s];
        tot += tot_steps[s];
    }
    res.occupation_fraction = tot > 0 ? static_cast<double>(pos) / tot : 0.0;
    return res;
}

MomentBoundResult run_moment_bound(const SmallNoiseModel& m,
                                   const std::vector<double>& eps_ladder,
                                   double T, std::size_t n_paths,
                                   std::uint64_t seed0, double dt) {
    if (m.regime != Regime::Attractive) {
        throw DomainError("moment bound experiment requires the attractive regime");
    }
    if (eps_ladder.empty() || n_paths == 0) {
        throw DomainError("moment bound run requires a ladder and paths");
    }
    SmallNoiseOptions opts;
    opts.policy.adaptive = false;
    opts.policy.base_dt = dt;
    const int n_times = 101;
    const double sample_dt = T / (n_times - 1);

    MomentBoundResult res;
    for (double eps : eps_ladder) {
        // y2[i][k] = Y^2 of path i at sample time k.
        std::vector<std::vector<double>> y2(n_paths,
                                            std::vector<double>(n_times, 0.0));
        parallel_paths(n_paths, [&](std::size_t i) {
            PathRng rng(seed0 + i);
            int next_k = 1;  // k = 0 is the deterministic start Y(0) = 0
            auto observer = [&](const PathState& s) {
                while (next_k < n_times && s.t >= next_k * sample_dt - 1e-12) {
                    y2[i][next_k] = s.y * s.y;
                    ++next_k;
                }
                return true;
            };
            simulate_small_noise(m, eps, T, rng, observer, opts);
        });
        double sup = 0.0;
        for (int k = 0; k < n_times; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n_paths; ++i) mean += y2[i][k];
            sup = std::max(sup, mean / n_paths);
        }
        res.eps.push_back(eps);
        res.sup_mean_y2.push_back(sup);
    }
    res.C_fit = res.sup_mean_y2[0] / (res.eps[0] * res.eps[0]);
    res.holds = true;
    for (std::size_t i = 1; i < res.eps.size(); ++i) {
        if (res.sup_mean_y2[i] > res.C_fit * res.eps[i] * res.eps[i]) {
            res.holds = false;
        }
    }
    return res;
}

namespace {

double bootstrap_floor(const std::vector<double>& contrib, std::uint64_t seed) {
    PathRng rng(seed);
    const std::size_t n = contrib.size();
    std::vector<double> means;
    means.reserve(200);
    for (int b = 0; b < 200; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += contrib[static_cast<std::size_t>(rng.uniform() * n) % n];
        }
        means.push_back(s / n);
    }
    return mean_sd(means).second;
}

}  // namespace

ResidualTable run_martingale_residual(const TwoScaleModel& tm,
                                      const std::vector<double>& eps_ladder,
                                      const ResidualOptions& opts) {
    if (eps_ladder.empty() || opts.n_paths == 0) {
        throw DomainError("residual run requires an eps ladder and paths");
    }
    const Vec x0 = tm.x0;
    AveragedCharacteristics avg =
        averaged_characteristics(tm, x0, opts.sampler);
    // Deliberately wrong drift for the negative control: the plus branch only.
    Vec a_wrong(tm.d, 0.0);
    for (int i = 0; i < tm.d; ++i) a_wrong[i] = tm.a[i].plus.eval(x0, 0.0);
    Vec delta_a(tm.d, 0.0);
    for (int i = 0; i < tm.d; ++i) delta_a[i] = a_wrong[i] - avg.a_bar[i];

    const auto fns =
        test_function_registry(tm.d, opts.max_degree, opts.bump_radius);
    ResidualTable table;
    for (const auto& fn : fns) {
        std::string base = "p";
        for (int p : fn.powers) base += std::to_string(p);
        table.labels.push_back(base + "/w1");
        table.labels.push_back(base + "/wh");
    }
    table.ladder.assign(table.labels.size(), {});
    table.negative_control.assign(table.labels.size(), 0.0);
    table.negative_floor.assign(table.labels.size(), 0.0);

    const double T = opts.T;
    const double s_time = 0.5 * T;
    const double h_time = 0.25 * T;  // history-weight observation time

    for (std::size_t rung = 0; rung < eps_ladder.size(); ++rung) {
        const double eps = eps_ladder[rung];
        const double dt = opts.dt_over_eps * eps;
        const std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt));
        const std::size_t l_stride = std::max<std::size_t>(1, steps / 1000);
        const bool last = rung + 1 == eps_ladder.size();

        // contrib[label][path]; wrong-drift contributions tracked on the
        // smallest rung only.
        std::vector<std::vector<double>> contrib(
            table.labels.size(), std::vector<double>(opts.n_paths, 0.0));
        std::vector<std::vector<double>> contrib_wrong(
            last ? table.labels.size() : 0,
            std::vector<double>(last ? opts.n_paths : 0, 0.0));

        parallel_paths(opts.n_paths, [&](std::size_t ip) {
            PathRng rng(opts.seed0 + ip);
            const std::size_t nf = fns.size();
            std::vector<double> integral(nf, 0.0);     // int_s^t L phi
            std::vector<Vec> grad_int(nf, Vec(tm.d, 0.0));  // int_s^t grad phi
            std::vector<double> prev_L(nf, 0.0);
            std::vector<Vec> prev_grad(nf, Vec(tm.d, 0.0));
            std::vector<double> phi_s(nf, 0.0), phi_t(nf, 0.0);
            double weight_h = 0.0;
            bool have_h = false, have_s = false, have_prev = false;
            double prev_t = 0.0;
            std::size_t step_no = 0;

            auto observer = [&](const TwoScaleState& st) {
                ++step_no;
                if (!have_h && st.t >= h_time) {
                    weight_h = std::tanh(st.x[0]);
                    have_h = true;
                }
                if (!have_s && st.t >= s_time) {
                    have_s = true;
                    for (std::size_t j = 0; j < nf; ++j) {
                        phi_s[j] = fns[j].value(st.x);
                    }
                    prev_t = st.t;
                    for (std::size_t j = 0; j < nf; ++j) {
                        prev_L[j] = generator_apply(fns[j], st.x, avg);
                        prev_grad[j] = fns[j].gradient(st.x);
                    }
                    have_prev = true;
                    return true;
                }
                if (have_s && (step_no % l_stride == 0)) {
                    for (std::size_t j = 0; j < nf; ++j) {
                        const double L = generator_apply(fns[j], st.x, avg);
                        const Vec gr = fns[j].gradient(st.x);
                        if (have_prev) {
                            const double hdt = 0.5 * (st.t - prev_t);
                            integral[j] += hdt * (L + prev_L[j]);
                            for (int c = 0; c < tm.d; ++c) {
                                grad_int[j][c] += hdt * (gr[c] + prev_grad[j][c]);
                            }
                        }
                        prev_L[j] = L;
                        prev_grad[j] = gr;
                    }
                    prev_t = st.t;
                }
                return true;
            };
            TwoScaleEndpoint end = simulate_two_scale(tm, eps, dt, T, rng, observer);
            for (std::size_t j = 0; j < nf; ++j) {
                // close the time integral at T
                const double L = generator_apply(fns[j], end.x, avg);
                const Vec gr = fns[j].gradient(end.x);
                const double hdt = 0.5 * (end.t - prev_t);
                integral[j] += hdt * (L + prev_L[j]);
                for (int c = 0; c < tm.d; ++c) {
                    grad_int[j][c] += hdt * (gr[c] + prev_grad[j][c]);
                }
                phi_t[j] = fns[j].value(end.x);
                const double mart = phi_t[j] - phi_s[j] - integral[j];
                contrib[2 * j][ip] = mart;
                contrib[2 * j + 1][ip] = weight_h * mart;
                if (last) {
                    double shift = 0.0;
                    for (int c = 0; c < tm.d; ++c) {
                        shift += delta_a[c] * grad_int[j][c];
                    }
                    const double mart_w = mart - shift;
                    contrib_wrong[2 * j][ip] = mart_w;
                    contrib_wrong[2 * j + 1][ip] = weight_h * mart_w;
                }
            }
        });

        for (std::size_t l = 0; l < table.labels.size(); ++l) {
            ResidualEntry e;
            e.eps = eps;
            e.residual = std::abs(mean_sd(contrib[l]).first);
            e.floor = bootstrap_floor(contrib[l], opts.seed0 ^ (0xb00ULL + l));
            table.ladder[l].push_back(e);
            if (last) {
                table.negative_control[l] =
                    std::abs(mean_sd(contrib_wrong[l]).first);
                table.negative_floor[l] =
                    bootstrap_floor(contrib_wrong[l], opts.seed0 ^ (0xc00ULL + l));
            }
        }
    }
    return table;
}

}  // namespace snlab
