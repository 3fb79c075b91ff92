#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snlab/analysis.hpp"
#include "snlab/coeffs.hpp"
#include "snlab/common.hpp"

namespace snlab {

// Worker count for path-parallel loops: SNLAB_WORKERS overrides hardware
// concurrency. Results never depend on the worker count: path i always uses
// seed seed0 + i and writes to slot i.
int worker_count();
void parallel_paths(std::size_t n, const std::function<void(std::size_t)>& body);

struct SelectionEstimate {
    std::size_t n_paths = 0;
    std::size_t n_plus = 0;
    std::size_t n_minus = 0;
    std::size_t n_capped = 0;
    double p_plus_hat = 0.0;
    double p_minus_hat = 0.0;
    double ci_halfwidth = 0.0;  // 95% normal-approx binomial
    double mean_exit_time = 0.0;
    double exit_time_sd = 0.0;
    double delta = 0.0;
    double eps = 0.0;
    double time_cap = 0.0;
    bool warning = false;  // > 1% of paths hit the time cap
};

struct LadderRung {
    double parameter = 0.0;   // eps or delta
    double statistic = 0.0;
    double error_bar = 0.0;
    double statistic2 = 0.0;  // second tracked statistic, experiment-specific
    double bound = 0.0;       // closed-form comparison value where applicable
    std::size_t n = 0;
};

struct ConvergenceLadder {
    std::vector<LadderRung> rungs;
    std::optional<double> slope;  // log-log fit of statistic vs parameter

    bool decreasing() const;
};

// Per-path record kept so split-seed-range runs merge to the exact full-run
// tallies: merging is concatenation, statistics are computed from the records
// sorted by path index with a fixed summation order.
struct SelectionRecord {
    std::uint64_t index = 0;
    int side = 0;        // +1, -1, or 0 when capped
    double exit_time = 0.0;
};

std::vector<SelectionRecord> selection_records(const SmallNoiseModel& m,
                                               double eps, double delta,
                                               std::size_t first,
                                               std::size_t count,
                                               std::uint64_t seed0,
                                               double cap_factor = 100.0);
SelectionEstimate tally_selection(std::vector<SelectionRecord> records,
                                  double eps, double delta, double cap);

SelectionEstimate run_selection(const SmallNoiseModel& m, double eps,
                                double delta, std::size_t n_paths,
                                std::uint64_t seed0, double cap_factor = 100.0);

struct PathwiseSelection {
    double median_sup = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double capped_fraction = 0.0;
    std::size_t n_used = 0;
};

PathwiseSelection run_pathwise_selection(const SmallNoiseModel& m, double eps,
                                         double delta, std::size_t n_paths,
                                         double T, std::uint64_t seed0);

struct AttractionResult {
    ConvergenceLadder x_deviation;  // statistic = median sup_t |X - Xbar|
    ConvergenceLadder y_sup;        // statistic = median sup_t |Y|
    double y_slope = 0.0;           // log-log slope of median sup|Y| vs eps
};

AttractionResult run_attraction(const SmallNoiseModel& m,
                                const std::vector<double>& eps_ladder, double T,
                                std::size_t n_paths, std::uint64_t seed0,
                                double dt = 1e-3);

// statistic = mean exit time, error_bar = standard error, bound = the
// exit-time quadrature functional at the rung's delta.
ConvergenceLadder run_exit_time_scaling(const SmallNoiseModel& m, double eps,
                                        const std::vector<double>& delta_ladder,
                                        std::size_t n_paths, std::uint64_t seed0,
                                        double cap_factor = 100.0);

struct ErgodicityResult {
    // statistic = two-sample TV between starts, statistic2 = TV against the
    // closed-form stationary law (averaged over the two starts).
    ConvergenceLadder rungs;
    double occupation_fraction = 0.0;  // time fraction with y > 0, second half
    double mass_positive = 0.0;        // closed-form comparison
    double relaxation_time = 0.0;
};

ErgodicityResult run_frozen_ergodicity(std::span<const double> x,
                                       const SmallNoiseModel& m,
                                       const std::vector<double>& T_ladder,
                                       std::size_t n_paths,
                                       std::pair<double, double> y0_pair,
                                       std::uint64_t seed0, double dt = 5e-3,
                                       int bins = 64);

struct MomentBoundResult {
    std::vector<double> eps;
    std::vector<double> sup_mean_y2;  // sup over the time grid of mean Y^2
    double C_fit = 0.0;               // sup / eps^2 at the largest eps
    bool holds = false;               // bound holds at every smaller eps
};

MomentBoundResult run_moment_bound(const SmallNoiseModel& m,
                                   const std::vector<double>& eps_ladder,
                                   double T, std::size_t n_paths,
                                   std::uint64_t seed0, double dt = 1e-3);

struct ResidualEntry {
    double eps = 0.0;
    double residual = 0.0;      // |mean over paths|
    double floor = 0.0;         // bootstrap standard error (200 resamples)
};

struct ResidualTable {
    std::vector<std::string> labels;                 // test function x weight
    std::vector<std::vector<ResidualEntry>> ladder;  // [label][rung]
    std::vector<double> negative_control;            // residual at smallest eps
    std::vector<double> negative_floor;
};

struct ResidualOptions {
    double T = 1.0;
    double dt_over_eps = 1e-3;  // step = dt_over_eps * eps
    std::size_t n_paths = 1000;
    int max_degree = 3;
    double bump_radius = 4.0;
    std::uint64_t seed0 = 4242;
    FrozenSamplerSpec sampler;
};

ResidualTable run_martingale_residual(const TwoScaleModel& tm,
                                      const std::vector<double>& eps_ladder,
                                      const ResidualOptions& opts);

}  // namespace snlab
