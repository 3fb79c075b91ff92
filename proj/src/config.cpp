#include "snlab/config.hpp"

#include <cstdio>
#include <ctime>
#include <sstream>

#include "json.hpp"

namespace snlab {

using nlohmann::json;

ExperimentKind experiment_kind_from_name(const std::string& name) {
    if (name == "selection") return ExperimentKind::Selection;
    if (name == "pathwise-selection") return ExperimentKind::PathwiseSelection;
    if (name == "attraction") return ExperimentKind::Attraction;
    if (name == "exit-time-scaling") return ExperimentKind::ExitTimeScaling;
    if (name == "frozen-ergodicity") return ExperimentKind::FrozenErgodicity;
    if (name == "moment-bound") return ExperimentKind::MomentBound;
    if (name == "martingale-residual") return ExperimentKind::MartingaleResidual;
    throw ValidationError("unknown experiment: " + name);
}

namespace {

ParametricFunction parse_function(const json& j) {
    if (!j.is_object() || !j.contains("family")) {
        throw ValidationError("coefficient branch needs a 'family' field");
    }
    ParametricFunction f;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "constant") {
        f = ParametricFunction::constant(j.value("value", 0.0));
        return f;
    }
    f.family = field_family_from_name(fam);
    f.c0 = j.value("c0", 0.0);
    if (j.contains("ax")) f.ax = j.at("ax").get<Vec>();
    f.ay = j.value("ay", 0.0);
    f.lo = j.value("lo", -1e6);
    f.hi = j.value("hi", 1e6);
    f.exponent = j.value("exponent", 0.5);
    return f;
}

CoefficientField parse_field(const json& j) {
    if (j.is_number()) {
        return CoefficientField::constant(j.get<double>());
    }
    CoefficientField f;
    if (j.contains("plus")) f.plus = parse_function(j.at("plus"));
    if (j.contains("minus")) f.minus = parse_function(j.at("minus"));
    if (!j.contains("plus") && !j.contains("minus")) {
        f.plus = parse_function(j);
        f.minus = f.plus;
    }
    return f;
}

std::vector<CoefficientField> parse_field_list(const json& j, int expected,
                                               const char* what) {
    std::vector<CoefficientField> out;
    if (j.is_array()) {
        for (const auto& e : j) out.push_back(parse_field(e));
    } else {
        out.push_back(parse_field(j));
    }
    if (static_cast<int>(out.size()) == 1 && expected > 1) {
        out.resize(expected, out[0]);
    }
    if (static_cast<int>(out.size()) != expected) {
        throw ValidationError(std::string(what) + ": expected " +
                              std::to_string(expected) + " entries");
    }
    return out;
}

JumpMeasure parse_jumps(const json& j) {
    JumpMeasure m;
    if (j.is_null()) return m;
    if (j.contains("atoms")) {
        for (const auto& a : j.at("atoms")) {
            JumpMeasure::Atom atom;
            if (a.at("mark").is_number()) {
                atom.mark = {a.at("mark").get<double>()};
            } else {
                atom.mark = a.at("mark").get<Vec>();
            }
            atom.weight = a.at("weight").get<double>();
            if (atom.weight < 0.0) {
                throw ValidationError("jump atom weight must be nonnegative");
            }
            m.atoms.push_back(std::move(atom));
        }
    }
    if (j.contains("density_grid")) {
        m.density_grid = j.at("density_grid").get<Vec>();
        m.density_values = j.at("density_values").get<Vec>();
    }
    return m;
}

SmallNoiseModel parse_small(const json& j) {
    SmallNoiseModel m;
    m.d = j.value("d", 1);
    if (m.d < 1) throw ValidationError("model dimension d must be >= 1");
    m.gamma.gamma = j.value("gamma", 0.5);
    if (!m.gamma.valid()) {
        throw ValidationError(
            "signed-power exponent gamma must lie in the open interval (0,1)");
    }
    const std::string reg = j.value("regime", "repulsive");
    if (reg == "repulsive") {
        m.regime = Regime::Repulsive;
    } else if (reg == "attractive") {
        m.regime = Regime::Attractive;
    } else {
        throw ValidationError("regime must be 'repulsive' or 'attractive'");
    }
    m.x0 = j.contains("x0") ? j.at("x0").get<Vec>() : Vec(m.d, 0.0);
    m.x0.resize(m.d, 0.0);
    m.psi = j.contains("psi")
                ? parse_field_list(j.at("psi"), m.d, "psi")
                : std::vector<CoefficientField>(m.d, CoefficientField::constant(0.0));
    if (!j.contains("phi")) throw ValidationError("model needs a 'phi' field");
    m.phi = parse_field(j.at("phi"));
    m.beta = j.contains("beta") ? parse_field(j.at("beta"))
                                : CoefficientField::constant(1.0);
    m.bfield = j.contains("b") ? parse_field(j.at("b"))
                               : CoefficientField::constant(0.0);
    return m;
}

TwoScaleModel parse_two_scale(const json& j) {
    TwoScaleModel m;
    m.d = j.value("d", 1);
    m.k = j.value("k", 1);
    if (m.d < 1 || m.k < 1) throw ValidationError("dimensions must be >= 1");
    m.a = j.contains("a")
              ? parse_field_list(j.at("a"), m.d, "a")
              : std::vector<CoefficientField>(m.d, CoefficientField::constant(0.0));
    m.sigma = j.contains("sigma") ? parse_field(j.at("sigma"))
                                  : CoefficientField::constant(0.0);
    m.c_amp = j.contains("c_amp") ? parse_field(j.at("c_amp"))
                                  : CoefficientField::constant(0.0);
    if (!j.contains("A")) throw ValidationError("two-scale model needs 'A'");
    m.A = parse_field_list(j.at("A"), m.k, "A");
    m.Sigma = j.contains("Sigma") ? parse_field(j.at("Sigma"))
                                  : CoefficientField::constant(1.0);
    m.C_amp = j.contains("C_amp") ? parse_field(j.at("C_amp"))
                                  : CoefficientField::constant(0.0);
    m.nu = parse_jumps(j.value("nu", json()));
    m.mu = parse_jumps(j.value("mu", json()));
    m.rho = j.value("rho", 1.0);
    m.kappa = j.value("kappa", 0.5);
    m.drift_c = j.value("drift_c", 1.0);
    m.drift_r = j.value("drift_r", 1.0);
    m.p_moment = j.value("p_moment", 2.0);
    m.x0 = j.contains("x0") ? j.at("x0").get<Vec>() : Vec(m.d, 0.0);
    m.x0.resize(m.d, 0.0);
    m.y0 = j.contains("y0") ? j.at("y0").get<Vec>() : Vec(m.k, 0.0);
    m.y0.resize(m.k, 0.0);
    return m;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    if (!j.contains("experiment")) {
        throw ValidationError("config needs an 'experiment' field");
    }
    cfg.kind = experiment_kind_from_name(j.at("experiment").get<std::string>());
    if (!j.contains("seed0")) {
        throw ValidationError("config needs 'seed0'; wall-clock seeding is not supported");
    }
    cfg.seed0 = j.at("seed0").get<std::uint64_t>();

    if (!j.contains("model")) throw ValidationError("config needs a 'model' section");
    const json& jm = j.at("model");
    const std::string type = jm.value("type", "small_noise");
    if (type == "small_noise") {
        cfg.small = parse_small(jm);
    } else if (type == "two_scale") {
        cfg.two_scale = parse_two_scale(jm);
    } else {
        throw ValidationError("model type must be 'small_noise' or 'two_scale'");
    }

    cfg.n_paths = j.value("n_paths", std::size_t{1000});
    cfg.eps = j.value("eps", 0.1);
    cfg.delta = j.value("delta", 0.1);
    cfg.T = j.value("T", 1.0);
    cfg.dt = j.value("dt", 1e-3);
    cfg.cap_factor = j.value("cap_factor", 100.0);
    cfg.bins = j.value("bins", 64);
    if (j.contains("eps_ladder")) cfg.eps_ladder = j.at("eps_ladder").get<Vec>();
    if (j.contains("delta_ladder"))
        cfg.delta_ladder = j.at("delta_ladder").get<Vec>();
    if (j.contains("T_ladder")) cfg.T_ladder = j.at("T_ladder").get<Vec>();
    if (j.contains("y0_pair")) {
        const Vec p = j.at("y0_pair").get<Vec>();
        if (p.size() != 2) throw ValidationError("y0_pair needs two entries");
        cfg.y0_pair = {p[0], p[1]};
    }
    if (j.contains("output")) {
        cfg.csv_path = j.at("output").value("csv", "");
        cfg.dump_paths = j.at("output").value("dump_paths", false);
    }
    cfg.canonical = j.dump();  // nlohmann objects iterate in sorted key order
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a(cfg.canonical);
}

std::string CsvWriter::format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns,
                     std::uint64_t cfg_hash, std::uint64_t seed0)
    : out_(path), n_cols_(columns.size()) {
    if (!out_) throw ResourceError("cannot open CSV output: " + path);
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out_ << "# generated " << stamp << "\n";
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(cfg_hash));
    out_ << "config_hash,seed0,version";
    for (const auto& c : columns) out_ << "," << c;
    out_ << "\n";
    prefix_ = std::string(hash_hex) + "," + std::to_string(seed0) + "," +
              kArtifactVersion;
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row_mixed(cells);
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) {
        throw DomainError("CSV row width does not match the header");
    }
    out_ << prefix_;
    for (const auto& c : cells) out_ << "," << c;
    out_ << "\n";
    out_.flush();
}

std::string CsvWriter::body_of_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open CSV file: " + path);
    std::string line, body;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        body += line;
        body += '\n';
    }
    return body;
}

}  // namespace snlab
