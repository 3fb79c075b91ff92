#include "snlab/cli.hpp"

#include <cstdio>
#include <iostream>
#include <memory>

#include "CLI11.hpp"

#include "snlab/analysis.hpp"
#include "snlab/experiments.hpp"
#include "snlab/extremal.hpp"

namespace snlab {

namespace {

void print(const char* name, double v) {
    std::printf("%s = %.17g\n", name, v);
}

std::unique_ptr<CsvWriter> maybe_csv(const ExperimentConfig& cfg,
                                     const std::vector<std::string>& columns) {
    if (cfg.csv_path.empty()) return nullptr;
    return std::make_unique<CsvWriter>(cfg.csv_path, columns, config_hash(cfg),
                                       cfg.seed0);
}

void run_selection_cfg(const ExperimentConfig& cfg) {
    const SelectionEstimate est =
        run_selection(*cfg.small, cfg.eps, cfg.delta, cfg.n_paths, cfg.seed0,
                      cfg.cap_factor);
    auto csv = maybe_csv(cfg, {"eps", "delta", "n_paths", "n_plus", "n_minus",
                               "n_capped", "p_plus_hat", "p_minus_hat",
                               "ci_halfwidth", "mean_exit_time", "exit_time_sd"});
    if (csv) {
        csv->row({est.eps, est.delta, static_cast<double>(est.n_paths),
                  static_cast<double>(est.n_plus),
                  static_cast<double>(est.n_minus),
                  static_cast<double>(est.n_capped), est.p_plus_hat,
                  est.p_minus_hat, est.ci_halfwidth, est.mean_exit_time,
                  est.exit_time_sd});
    }
    print("p_plus_hat", est.p_plus_hat);
    print("p_minus_hat", est.p_minus_hat);
    print("ci_halfwidth", est.ci_halfwidth);
    print("mean_exit_time", est.mean_exit_time);
    if (est.warning) {
        std::cerr << "warning: " << est.n_capped
                  << " paths hit the time cap (>1%); eps may be too large\n";
    }
}

void run_pathwise_cfg(const ExperimentConfig& cfg) {
    std::vector<double> ladder =
        cfg.eps_ladder.empty() ? std::vector<double>{cfg.eps} : cfg.eps_ladder;
    auto csv = maybe_csv(cfg, {"eps", "median_sup", "q25", "q75",
                               "capped_fraction", "n_used"});
    for (double eps : ladder) {
        const PathwiseSelection r = run_pathwise_selection(
            *cfg.small, eps, cfg.delta, cfg.n_paths, cfg.T, cfg.seed0);
        if (csv) {
            csv->row({eps, r.median_sup, r.q25, r.q75, r.capped_fraction,
                      static_cast<double>(r.n_used)});
        }
        std::printf("eps=%g median_sup=%.17g capped=%.4f\n", eps, r.median_sup,
                    r.capped_fraction);
    }
}

void run_attraction_cfg(const ExperimentConfig& cfg) {
    if (cfg.eps_ladder.empty()) {
        throw ValidationError("attraction experiment needs eps_ladder");
    }
    const AttractionResult r = run_attraction(*cfg.small, cfg.eps_ladder, cfg.T,
                                              cfg.n_paths, cfg.seed0, cfg.dt);
    auto csv = maybe_csv(cfg, {"eps", "median_x_dev", "iqr_x", "median_y_sup",
                               "iqr_y", "n_paths"});
    for (std::size_t i = 0; i < r.x_deviation.rungs.size(); ++i) {
        const auto& rx = r.x_deviation.rungs[i];
        const auto& ry = r.y_sup.rungs[i];
        if (csv) {
            csv->row({rx.parameter, rx.statistic, rx.error_bar, ry.statistic,
                      ry.error_bar, static_cast<double>(rx.n)});
        }
        std::printf("eps=%g median_x_dev=%.17g median_y_sup=%.17g\n",
                    rx.parameter, rx.statistic, ry.statistic);
    }
    print("y_sup_loglog_slope", r.y_slope);
}

void run_exit_scaling_cfg(const ExperimentConfig& cfg) {
    if (cfg.delta_ladder.empty()) {
        throw ValidationError("exit-time-scaling experiment needs delta_ladder");
    }
    const ConvergenceLadder r = run_exit_time_scaling(
        *cfg.small, cfg.eps, cfg.delta_ladder, cfg.n_paths, cfg.seed0,
        cfg.cap_factor);
    auto csv = maybe_csv(cfg, {"delta", "mean_tau", "se", "bound", "n"});
    for (const auto& rung : r.rungs) {
        if (csv) {
            csv->row({rung.parameter, rung.statistic, rung.error_bar, rung.bound,
                      static_cast<double>(rung.n)});
        }
        std::printf("delta=%g mean_tau=%.17g bound=%.17g\n", rung.parameter,
                    rung.statistic, rung.bound);
    }
    if (r.slope) {
        print("loglog_slope", *r.slope);
    } else {
        std::printf("loglog_slope = (absent: ladder too short)\n");
    }
}

void run_ergodicity_cfg(const ExperimentConfig& cfg) {
    if (cfg.T_ladder.empty()) {
        throw ValidationError("frozen-ergodicity experiment needs T_ladder");
    }
    const ErgodicityResult r = run_frozen_ergodicity(
        cfg.small->x0, *cfg.small, cfg.T_ladder, cfg.n_paths, cfg.y0_pair,
        cfg.seed0, cfg.dt, cfg.bins);
    auto csv = maybe_csv(cfg, {"T", "tv_two_sample", "tv_vs_pi", "n"});
    for (const auto& rung : r.rungs.rungs) {
        if (csv) {
            csv->row({rung.parameter, rung.statistic, rung.statistic2,
                      static_cast<double>(rung.n)});
        }
        std::printf("T=%g tv_two_sample=%.17g tv_vs_pi=%.17g\n", rung.parameter,
                    rung.statistic, rung.statistic2);
    }
    print("occupation_fraction", r.occupation_fraction);
    print("mass_positive", r.mass_positive);
}

void run_moment_cfg(const ExperimentConfig& cfg) {
    if (cfg.eps_ladder.empty()) {
        throw ValidationError("moment-bound experiment needs eps_ladder");
    }
    const MomentBoundResult r = run_moment_bound(*cfg.small, cfg.eps_ladder,
                                                 cfg.T, cfg.n_paths, cfg.seed0,
                                                 cfg.dt);
    auto csv = maybe_csv(cfg, {"eps", "sup_mean_y2", "bound"});
    for (std::size_t i = 0; i < r.eps.size(); ++i) {
        if (csv) {
            csv->row({r.eps[i], r.sup_mean_y2[i],
                      r.C_fit * r.eps[i] * r.eps[i]});
        }
        std::printf("eps=%g sup_mean_y2=%.17g\n", r.eps[i], r.sup_mean_y2[i]);
    }
    print("C_fit", r.C_fit);
    std::printf("bound_holds = %s\n", r.holds ? "yes" : "no");
}

void run_residual_cfg(const ExperimentConfig& cfg) {
    if (cfg.eps_ladder.empty()) {
        throw ValidationError("martingale-residual experiment needs eps_ladder");
    }
    ResidualOptions opts;
    opts.T = cfg.T;
    opts.n_paths = cfg.n_paths;
    opts.seed0 = cfg.seed0;
    const ResidualTable r =
        run_martingale_residual(*cfg.two_scale, cfg.eps_ladder, opts);
    auto csv = maybe_csv(cfg, {"label", "eps", "residual", "floor"});
    for (std::size_t l = 0; l < r.labels.size(); ++l) {
        for (const auto& e : r.ladder[l]) {
            if (csv) {
                csv->row_mixed({r.labels[l], CsvWriter::format_double(e.eps),
                                CsvWriter::format_double(e.residual),
                                CsvWriter::format_double(e.floor)});
            }
            std::printf("%s eps=%g residual=%.17g floor=%.17g\n",
                        r.labels[l].c_str(), e.eps, e.residual, e.floor);
        }
        std::printf("%s negative_control=%.17g (floor %.17g)\n",
                    r.labels[l].c_str(), r.negative_control[l],
                    r.negative_floor[l]);
    }
}

void require_valid(const ExperimentConfig& cfg) {
    ValidationReport rep;
    if (cfg.small) {
        rep = validate_model(*cfg.small);
    } else if (cfg.two_scale) {
        rep = validate_model(*cfg.two_scale);
    }
    if (!rep.passed()) {
        throw ValidationError("model validation failed:\n" + rep.summary());
    }
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
    require_valid(cfg);
    const bool needs_small = cfg.kind != ExperimentKind::MartingaleResidual;
    if (needs_small && !cfg.small) {
        throw ValidationError("this experiment needs a small_noise model");
    }
    if (!needs_small && !cfg.two_scale) {
        throw ValidationError("this experiment needs a two_scale model");
    }
    switch (cfg.kind) {
        case ExperimentKind::Selection: run_selection_cfg(cfg); break;
        case ExperimentKind::PathwiseSelection: run_pathwise_cfg(cfg); break;
        case ExperimentKind::Attraction: run_attraction_cfg(cfg); break;
        case ExperimentKind::ExitTimeScaling: run_exit_scaling_cfg(cfg); break;
        case ExperimentKind::FrozenErgodicity: run_ergodicity_cfg(cfg); break;
        case ExperimentKind::MomentBound: run_moment_cfg(cfg); break;
        case ExperimentKind::MartingaleResidual: run_residual_cfg(cfg); break;
    }
}

void cmd_run(const std::string& config_path) {
    run_experiment(load_config(config_path));
}

void cmd_validate(const std::string& config_path) {
    const ExperimentConfig cfg = load_config(config_path);
    ValidationReport rep;
    if (cfg.small) rep = validate_model(*cfg.small);
    if (cfg.two_scale) rep = validate_model(*cfg.two_scale);
    std::printf("%s", rep.summary().c_str());
    if (!rep.passed()) throw ValidationError("model validation failed");
}

void cmd_demo() {
    // One-dimensional symmetric motivating example: y' = sqrt(|y|) sgn(y) with
    // two solutions +-t^2/4, selected with probability 1/2 each under noise.
    SmallNoiseModel m;
    m.d = 1;
    m.gamma.gamma = 0.5;
    m.psi = {CoefficientField::constant(0.0)};
    m.phi = CoefficientField::constant(1.0);
    m.beta = CoefficientField::constant(1.0);
    m.bfield = CoefficientField::constant(0.0);
    m.x0 = {0.0};
    m.regime = Regime::Repulsive;

    const ExtremalSolution plus = extremal_solution(m, +1, 2.0, 1e-3);
    const ExtremalSolution minus = extremal_solution(m, -1, 2.0, 1e-3);
    const auto at = [](const ExtremalSolution& s, double t) {
        const std::size_t i = static_cast<std::size_t>(t / 1e-3 + 0.5);
        return s.path.y[std::min(i, s.path.size() - 1)];
    };
    print("Y_plus(1)", at(plus, 1.0));
    print("Y_minus(2)", at(minus, 2.0));

    const SelectionEstimate est = run_selection(m, 1e-2, 0.1, 2000, 7);
    print("p_plus_hat", est.p_plus_hat);
    print("p_minus_hat", est.p_minus_hat);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"small-noise selection and averaging laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file (JSON)")->required();

    auto* validate =
        app.add_subcommand("validate", "check a config's model assumptions");
    std::string validate_path;
    validate->add_option("config", validate_path, "config file (JSON)")
        ->required();

    app.add_subcommand("demo", "run the one-dimensional motivating example");

    auto* analyze = app.add_subcommand("analyze", "closed-form evaluations");
    analyze->require_subcommand(1);
    double gamma = 0.5, phi_p = 1.0, phi_m = 1.0, beta_p = 1.0, beta_m = 1.0;
    double psi_p = 0.0, psi_m = 0.0, eps = 1e-3, delta = 0.1, y = 0.0, x = 0.1;
    double A = 1.0, nu_slack = 0.0;
    auto add_frozen = [&](CLI::App* sub) {
        sub->add_option("--gamma", gamma);
        sub->add_option("--phi-plus", phi_p);
        sub->add_option("--phi-minus", phi_m);
        sub->add_option("--beta-plus", beta_p);
        sub->add_option("--beta-minus", beta_m);
    };
    auto* psel = analyze->add_subcommand("p-select", "selection probabilities");
    add_frozen(psel);
    auto* psibar = analyze->add_subcommand("psi-bar", "averaged slow drift");
    add_frozen(psibar);
    psibar->add_option("--psi-plus", psi_p);
    psibar->add_option("--psi-minus", psi_m);
    auto* pimass = analyze->add_subcommand("pi-mass", "stationary half-line masses");
    add_frozen(pimass);
    auto* scale = analyze->add_subcommand("scale", "scale function value");
    add_frozen(scale);
    scale->add_option("--y", y);
    scale->add_option("--eps", eps);
    scale->add_option("--nu", nu_slack);
    auto* exitb = analyze->add_subcommand("exit-bound", "expected-exit-time bound");
    exitb->add_option("--x", x);
    exitb->add_option("--A", A);
    exitb->add_option("--eps", eps);
    exitb->add_option("--gamma", gamma);
    auto* gasym = analyze->add_subcommand("gamma-asym",
                                          "scale-kernel integral vs closed form");
    gasym->add_option("--delta", delta);
    gasym->add_option("--A", A);
    gasym->add_option("--eps", eps);
    gasym->add_option("--gamma", gamma);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) {
            cmd_run(config_path);
        } else if (validate->parsed()) {
            cmd_validate(validate_path);
        } else if (app.get_subcommand("demo")->parsed()) {
            cmd_demo();
        } else if (analyze->parsed()) {
            FrozenParams p{phi_p, phi_m, beta_p, beta_m, gamma};
            if (psel->parsed()) {
                const auto [pm, pp] = selection_probabilities(p);
                print("p_minus", pm);
                print("p_plus", pp);
            } else if (psibar->parsed()) {
                const InvariantDensity pi(p);
                print("psi_bar", psi_p * pi.mass_positive() +
                                     psi_m * pi.mass_negative());
            } else if (pimass->parsed()) {
                const InvariantDensity pi(p);
                print("mass_positive", pi.mass_positive());
                print("mass_negative", pi.mass_negative());
            } else if (scale->parsed()) {
                print("s_eps", scale_function(y, p, eps, nu_slack));
            } else if (exitb->parsed()) {
                print("v_eps", exit_time_functional(x, A, eps, gamma));
            } else if (gasym->parsed()) {
                const GammaAsymptotic r = gamma_asymptotic(delta, A, eps, gamma);
                print("quadrature", r.quadrature);
                print("asymptotic", r.asymptotic);
            }
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace snlab
