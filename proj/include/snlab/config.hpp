#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snlab/coeffs.hpp"
#include "snlab/common.hpp"

namespace snlab {

enum class ExperimentKind {
    Selection,
    PathwiseSelection,
    Attraction,
    ExitTimeScaling,
    FrozenErgodicity,
    MomentBound,
    MartingaleResidual,
};

ExperimentKind experiment_kind_from_name(const std::string& name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Selection;
    std::optional<SmallNoiseModel> small;
    std::optional<TwoScaleModel> two_scale;

    std::uint64_t seed0 = 0;
    std::size_t n_paths = 1000;
    double eps = 0.1;
    double delta = 0.1;
    double T = 1.0;
    double dt = 1e-3;
    double cap_factor = 100.0;
    int bins = 64;
    std::vector<double> eps_ladder;
    std::vector<double> delta_ladder;
    std::vector<double> T_ladder;
    std::pair<double, double> y0_pair{1.0, -1.0};

    std::string csv_path;  // empty = print only
    bool dump_paths = false;

    std::string canonical;  // sorted-key serialization used for hashing
};

// Throws ValidationError on schema problems (missing seed0, bad families,
// exponent outside (0,1), ...).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a(const std::string& data);

// CSV with one timestamp comment line; everything else is deterministic.
// Doubles are printed with round-trip precision.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              std::uint64_t cfg_hash, std::uint64_t seed0);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);

    static std::string format_double(double v);
    // Body = all non-comment lines; used by the determinism checks.
    static std::string body_of_file(const std::string& path);

private:
    std::ofstream out_;
    std::size_t n_cols_;
    std::string prefix_;  // config hash, seed0, version cells
};

}  // namespace snlab
