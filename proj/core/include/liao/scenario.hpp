#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "liao/field.hpp"

namespace liao {

struct NumericBlock {
    double h = 1e-3;
    double tol = 1e-10;
    double horizon = 24.0;
    double xi = 0.05;
    double epsilon = 0.1;
    double window_T = 40.0;
    std::vector<double> d_grid = {1.0, 2.0, 5.0, 10.0};
};

struct DeltaProbe {
    int count = 100;
    double s_min = -5.0;
    double s_max = 5.0;
    double u_radius = 1.0;
};

/// Standalone triangular problem definition: matrix entries are term lists
/// in the single variable t, forcing components are term lists in
/// (t, z_1, ..., z_p).
struct DichotomyBlock {
    int p = 0;
    int p_minus = 0;
    std::vector<std::vector<std::vector<FieldTerm>>> coefficient_terms; ///< p x p
    std::vector<std::vector<FieldTerm>> forcing_terms;                  ///< p lists
    double eta_A = 0.0, xi_A = 0.0, eta_f = 0.0, L_f = 0.0;
    double horizon = 40.0;
    double step = 1e-3;
    DeltaProbe probe;
};

struct Scenario {
    std::string name;
    VectorFieldSpec field;
    std::optional<VectorFieldSpec> perturbation;
    std::vector<Vector> lambda_samples;
    int p_minus = 0;
    NumericBlock numeric;
    std::vector<double> residual_t_grid = {-10, -5, -2, -1, 1, 2, 5, 10};
    bool enforce_smallness = false;
    std::optional<DichotomyBlock> dichotomy;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    std::string source_hash; ///< FNV-1a of the scenario file bytes, hex
};

/// Value of a term list at a point (shape-checked against the point size).
double eval_terms(const std::vector<FieldTerm>& terms, const Vector& x);

/// Parses and validates a scenario document. Unknown keys, malformed terms
/// and out-of-range indices raise ValidationError (listing offending keys).
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// 64-bit FNV-1a of a byte string, as a fixed-width hex string.
std::string fnv1a64_hex(const std::string& bytes);

} // namespace liao
