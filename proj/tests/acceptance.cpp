// End-to-end acceptance runner: every release-gating property of the library
// is checked at desk scale, one verdict line per criterion.  Exit status is
// the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "snlab/analysis.hpp"
#include "snlab/cli.hpp"
#include "snlab/config.hpp"
#include "snlab/experiments.hpp"

using namespace snlab;

namespace {

int g_failures = 0;

void verdict(int criterion, bool pass, const std::string& detail) {
    std::printf("CRITERION %d: %s  (%s)\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

SmallNoiseModel repulsive_model(double phi_plus, double phi_minus) {
    SmallNoiseModel m;
    m.d = 1;
    m.gamma.gamma = 0.5;
    m.psi = {CoefficientField::constant(0.0)};
    m.phi = CoefficientField::two_sided(phi_plus, phi_minus);
    m.beta = CoefficientField::constant(1.0);
    m.bfield = CoefficientField::constant(0.0);
    m.x0 = {0.0};
    m.regime = Regime::Repulsive;
    return m;
}

SmallNoiseModel averaging_model() {
    SmallNoiseModel m;
    m.d = 1;
    m.gamma.gamma = 0.5;
    m.psi = {CoefficientField::two_sided(1.0, 0.0)};
    m.phi = CoefficientField::two_sided(-8.0, -1.0);
    m.beta = CoefficientField::constant(1.0);
    m.bfield = CoefficientField::constant(0.0);
    m.x0 = {0.0};
    m.regime = Regime::Attractive;
    return m;
}

TwoScaleModel residual_model() {
    TwoScaleModel m;
    m.d = 1;
    m.k = 1;
    m.a = {CoefficientField::two_sided(1.0, 0.0)};
    m.sigma = CoefficientField::constant(0.5);
    m.c_amp = CoefficientField::constant(0.0);
    CoefficientField A;
    A.plus = ParametricFunction::signed_power(-8.0, 0.5);
    A.minus = ParametricFunction::signed_power(-1.0, 0.5);
    m.A = {A};
    m.Sigma = CoefficientField::constant(1.0);
    m.C_amp = CoefficientField::constant(0.0);
    m.x0 = {0.0};
    m.y0 = {0.0};
    return m;
}

// Criterion 1 result is reused by criterion 2.
double g_p_plus_hat_c1 = -1.0;

void criterion_1() {
    const SmallNoiseModel m = repulsive_model(4.0, 1.0);
    const auto t0 = std::chrono::steady_clock::now();
    const SelectionEstimate est = run_selection(m, 1e-3, 0.1, 10000, 20260101);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    g_p_plus_hat_c1 = est.p_plus_hat;
    const double err = std::abs(est.p_plus_hat - 0.7159);
    verdict(1, err <= 0.02 && secs <= 60.0,
            fmt("p_plus_hat=%.5f |err|=%.5f<=0.02, runtime %.1fs<=60s",
                est.p_plus_hat, err, secs));
}

void criterion_2() {
    const FrozenParams p{4.0, 1.0, 1.0, 1.0, 0.5};
    const double q = exit_probability_quadrature(0.1, p, 1e-3);
    const double closed = selection_probabilities(p).second;
    const double dmc = std::abs(q - g_p_plus_hat_c1);
    const double dcf = std::abs(q - closed);
    verdict(2, g_p_plus_hat_c1 >= 0.0 && dmc <= 0.015 && dcf <= 0.01,
            fmt("quadrature=%.5f |vs MC|=%.5f<=0.015 |vs closed|=%.5f<=0.01",
                q, dmc, dcf));
}

void criterion_3() {
    const SmallNoiseModel m = repulsive_model(1.0, 1.0);
    const SelectionEstimate est = run_selection(m, 1e-3, 0.1, 10000, 777);
    const double dev = std::abs(est.p_plus_hat - 0.5);
    const double sum_err = std::abs(est.p_plus_hat + est.p_minus_hat - 1.0);
    verdict(3, dev <= est.ci_halfwidth && sum_err <= 1e-12,
            fmt("|p-0.5|=%.5f<=CI %.5f, |p_m+p_p-1|=%.2e<=1e-12", dev,
                est.ci_halfwidth, sum_err));
}

void criterion_4() {
    const SmallNoiseModel m = repulsive_model(4.0, 1.0);
    const ConvergenceLadder l =
        run_exit_time_scaling(m, 1e-3, {0.4, 0.2, 0.1, 0.05}, 4000, 31);
    bool bounds_ok = true;
    for (const auto& r : l.rungs) {
        bounds_ok = bounds_ok && r.statistic <= r.bound + 3.0 * r.error_bar;
    }
    const double slope = l.slope.value_or(-1e9);
    const bool slope_ok = std::abs(slope - 0.5) <= 0.1;
    verdict(4, slope_ok && bounds_ok,
            fmt("slope=%.3f in 0.5+-0.1, all rungs below quadrature bound: %s",
                slope, bounds_ok ? "yes" : "no"));
}

void criterion_5() {
    const SmallNoiseModel m = averaging_model();
    // relaxation time of the frozen fast motion; horizon = 50 of them
    const double layer = std::pow(1.5 / 2.0, 2.0 / 3.0);
    const double T = 50.0 * std::sqrt(layer);
    const ErgodicityResult r = run_frozen_ergodicity(
        m.x0, m, {T}, 50000, {1.0, -1.0}, 99, 5e-3, 64);
    const double tv = r.rungs.rungs.back().statistic2;
    const double occ_err = std::abs(r.occupation_fraction - r.mass_positive);
    verdict(5, tv <= 0.05 && occ_err <= 0.02,
            fmt("TV vs closed-form density=%.4f<=0.05, |occ-mass|=%.4f<=0.02",
                tv, occ_err));
}

void criterion_6() {
    const SmallNoiseModel m = averaging_model();
    const AttractionResult r =
        run_attraction(m, {0.1, 0.05, 0.01}, 1.0, 2000, 13);
    const auto& rungs = r.x_deviation.rungs;
    const bool dec = r.x_deviation.decreasing();
    const double final_dev = rungs.back().statistic;
    const double target = 2.0 / 1.5;
    const bool slope_ok = std::abs(r.y_slope - target) <= 0.3;
    verdict(6, dec && final_dev <= 0.05 && slope_ok,
            fmt("x-dev decreasing:%s final=%.4f<=0.05, y slope=%.3f in %.3f+-0.3",
                dec ? "yes" : "no", final_dev, r.y_slope, target));
}

void criterion_7() {
    const SmallNoiseModel m = averaging_model();
    const MomentBoundResult r =
        run_moment_bound(m, {0.1, 0.05, 0.01}, 1.0, 2000, 47);
    verdict(7, r.C_fit > 0.0 && r.holds,
            fmt("C_fit=%.3f at eps=0.1, bound re-verified at 0.05 and 0.01: %s",
                r.C_fit, r.holds ? "yes" : "no"));
}

void criterion_8() {
    ResidualOptions opts;
    opts.n_paths = 2000;
    // Finer step than the default: the Euler discretization bias must sit
    // below the 2x-floor tolerance, and the floor shrinks like 1/sqrt(n).
    opts.dt_over_eps = 2.5e-4;
    opts.seed0 = 60601;
    const ResidualTable r =
        run_martingale_residual(residual_model(), {0.2, 0.1, 0.05}, opts);
    bool converged = true, control_ok = true;
    double worst_ratio = 0.0, worst_control = 1e18;
    for (std::size_t l = 0; l < r.labels.size(); ++l) {
        const auto& ladder = r.ladder[l];
        const double floor_last = std::max(ladder.back().floor, 1e-300);
        const double ratio = ladder.back().residual / floor_last;
        worst_ratio = std::max(worst_ratio, ratio);
        // "decreases to within 2x the floor": the endpoint must sit at the
        // noise floor, and no rung may sit significantly below its successor.
        if (ratio > 2.0) converged = false;
        for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
            const bool drop = ladder[i + 1].residual <=
                              ladder[i].residual + 2.0 * ladder[i + 1].floor;
            if (!drop) converged = false;
        }
        const double cr =
            r.negative_control[l] / std::max(r.negative_floor[l], 1e-300);
        worst_control = std::min(worst_control, cr);
        if (cr <= 5.0) control_ok = false;
    }
    verdict(8, converged && control_ok,
            fmt("%zu test functions, worst residual/floor=%.2f<=2, "
                "weakest control/floor=%.1f>5",
                r.labels.size(), worst_ratio, worst_control));
}

void criterion_9() {
    const char* cfg_text = R"({
      "experiment": "selection", "seed0": 5, "n_paths": 400,
      "eps": 0.01, "delta": 0.1,
      "model": {"type": "small_noise", "gamma": 0.5, "regime": "repulsive",
                "phi": {"plus": {"family": "constant", "value": 4.0},
                        "minus": {"family": "constant", "value": 1.0}}},
      "output": {"csv": "/tmp/snlab_acceptance_det.csv"}
    })";
    const ExperimentConfig cfg = parse_config(cfg_text);
    run_experiment(cfg);
    const std::string first =
        CsvWriter::body_of_file("/tmp/snlab_acceptance_det.csv");
    run_experiment(cfg);
    const std::string second =
        CsvWriter::body_of_file("/tmp/snlab_acceptance_det.csv");
    std::remove("/tmp/snlab_acceptance_det.csv");
    const bool bytes_equal = !first.empty() && first == second;

    const SmallNoiseModel m = repulsive_model(4.0, 1.0);
    auto full = selection_records(m, 0.01, 0.1, 0, 1000, 5);
    auto part = selection_records(m, 0.01, 0.1, 0, 600, 5);
    auto rest = selection_records(m, 0.01, 0.1, 600, 400, 5);
    part.insert(part.end(), rest.begin(), rest.end());
    const SelectionEstimate a = tally_selection(full, 0.01, 0.1, 1e9);
    const SelectionEstimate b = tally_selection(part, 0.01, 0.1, 1e9);
    const bool merged = a.n_plus == b.n_plus && a.n_minus == b.n_minus &&
                        a.p_plus_hat == b.p_plus_hat &&
                        a.mean_exit_time == b.mean_exit_time &&
                        a.exit_time_sd == b.exit_time_sd;
    verdict(9, bytes_equal && merged,
            fmt("rerun CSV bodies byte-identical:%s, split-range merge exact:%s",
                bytes_equal ? "yes" : "no", merged ? "yes" : "no"));
}

void criterion_10() {
    const GammaAsymptotic r = gamma_asymptotic(0.1, 1.0, 1e-3, 0.5);
    const double rel = std::abs(r.quadrature - r.asymptotic) / r.asymptotic;
    verdict(10, rel <= 0.01,
            fmt("quadrature=%.10g closed form=%.10g rel err=%.2e<=1e-2",
                r.quadrature, r.asymptotic, rel));
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    std::printf("%s: %d/10 criteria passed\n",
                g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                10 - g_failures);
    return g_failures;
}
