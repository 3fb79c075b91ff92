#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snlab/common.hpp"

namespace snlab {

// Signed power y^g = |y|^g * sgn(y); exactly 0 at y = 0.
double signed_pow(double y, double gamma);

// Exponent of the signed-power drift; valid range is the open interval (0,1).
struct SignedPowerExponent {
    double gamma = 0.5;
    bool valid() const { return gamma > 0.0 && gamma < 1.0; }
    void require_valid() const;
};

enum class FieldFamily {
    Constant,      // value
    Affine,        // c0 + ax.x + ay*y, clipped to [lo, hi]
    BoundedSmooth, // lo + (hi-lo) * (1 + tanh(c0 + ax.x + ay*y)) / 2
    SignedPowerY,  // (c0 + ax.x) * signed_pow(y, exponent)
};

FieldFamily field_family_from_name(const std::string& name);
std::string field_family_name(FieldFamily f);

// One branch of a two-sided coefficient; scalar-valued, defined everywhere.
struct ParametricFunction {
    FieldFamily family = FieldFamily::Constant;
    double c0 = 0.0;
    Vec ax;             // per-coordinate x coefficients (missing => 0)
    double ay = 0.0;
    double lo = -1e6;   // declared bounds, also used for validation
    double hi = 1e6;
    double exponent = 0.5;  // SignedPowerY only

    double eval(std::span<const double> x, double y) const;

    static ParametricFunction constant(double v);
    static ParametricFunction affine(double c0, Vec ax, double ay,
                                     double lo, double hi);
    static ParametricFunction signed_power(double coef, double exponent);
};

// Two-sided field: plus branch on y >= 0, minus branch on y < 0.
struct CoefficientField {
    ParametricFunction plus;
    ParametricFunction minus;

    static CoefficientField constant(double both) {
        return {ParametricFunction::constant(both),
                ParametricFunction::constant(both)};
    }
    static CoefficientField two_sided(double p, double m) {
        return {ParametricFunction::constant(p), ParametricFunction::constant(m)};
    }
};

// Indicator-split evaluation; throws NumericError if the result is non-finite.
double eval_field(const CoefficientField& f, std::span<const double> x, double y);

enum class Regime { Repulsive, Attractive };

struct SmallNoiseModel {
    int d = 1;
    SignedPowerExponent gamma;
    std::vector<CoefficientField> psi;  // slow drift, one field per coordinate
    CoefficientField phi;               // fast drift factor
    CoefficientField beta;              // fast diffusion
    CoefficientField bfield;            // slow diffusion, scalar * identity
    Vec x0;
    Regime regime = Regime::Repulsive;

    double max_abs_phi_at_origin() const;
    double min_abs_phi_at_origin() const;
};

// Finite atomic jump measure with an optional tabulated 1-d density part.
struct JumpMeasure {
    struct Atom {
        Vec mark;
        double weight = 0.0;
    };
    std::vector<Atom> atoms;
    // Density part: piecewise-linear density values on an increasing grid,
    // turned into an inverse-CDF table at model load.
    Vec density_grid;
    Vec density_values;

    double total_intensity() const;
    bool empty() const { return atoms.empty() && density_grid.empty(); }
    // Mass carried by marks with |mark| exactly equal to rho (atoms only;
    // the density part is atomless).
    double mass_on_sphere(double rho) const;
};

struct TwoScaleModel {
    int d = 1;  // slow dimension
    int k = 1;  // fast dimension
    std::vector<CoefficientField> a;      // slow drift, size d
    CoefficientField sigma;               // slow diffusion, scalar * identity
    CoefficientField c_amp;               // slow jump amplitude: c(x,y,u) = c_amp(x,y) * u
    std::vector<CoefficientField> A;      // fast drift, size k
    CoefficientField Sigma;               // fast diffusion, scalar * identity
    CoefficientField C_amp;               // fast jump amplitude
    JumpMeasure nu;                       // slow jump intensity measure
    JumpMeasure mu;                       // fast jump intensity measure (scaled by 1/eps)
    double rho = 1.0;                     // compensation cutoff
    double kappa = 0.5;                   // drift-condition exponent
    double drift_c = 1.0;                 // drift-condition constant
    double drift_r = 1.0;                 // drift-condition radius
    double p_moment = 2.0;                // moment exponent of the big-jump tail
    Vec x0;
    Vec y0;
};

// Finite sampling grid used for assumption checks.
struct GridSpec {
    double lo = -5.0;
    double hi = 5.0;
    int points_per_axis = 17;
};

struct ValidationItem {
    std::string assumption;
    bool passed = true;
    std::string witness;  // offending point, empty when passed
};

struct ValidationReport {
    std::vector<ValidationItem> items;
    bool passed() const;
    std::string summary() const;
};

ValidationReport validate_model(const SmallNoiseModel& m, const GridSpec& grid = {});
ValidationReport validate_model(const TwoScaleModel& m, const GridSpec& grid = {});

}  // namespace snlab
