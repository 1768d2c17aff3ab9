#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "liao/ode.hpp"

namespace liao {

/// Upper-triangular coefficient path t -> A(t).
using CoefficientPath = std::function<Matrix(double)>;
/// Bounded forcing (t, z) -> f(t, z).
using Forcing = std::function<Vector(double, const Vector&)>;

/// Triangular coefficient path with hyperbolic diagonal, plus a bounded
/// Lipschitz forcing, restricted to a finite window [-T, T] standing in for
/// the real line. The constant fields are the caller's claims; they are
/// checked by validate_class and drive the contraction estimates.
struct DichotomyProblem {
    int p = 0;
    int p_minus = 0;
    CoefficientPath A;
    Forcing f;
    double eta_A = 0.0; ///< claimed bound on |A(t)|
    double xi_A = 0.0;  ///< claimed kernel-integral supremum
    double eta_f = 0.0; ///< claimed bound on |f|
    double L_f = 0.0;   ///< claimed Lipschitz constant of f in z
    double horizon = 0.0;

    void validate_shape() const;
};

struct BoundedSolution {
    std::vector<double> times;
    std::vector<Vector> z;
    Vector initial_value; ///< z(0)
    int iterations = 0;
    double defect = 0.0; ///< sup a-posteriori ODE residual on the interior grid
    std::vector<double> defect_series;
    double sup_norm = 0.0;
    double a_priori_bound = 0.0; ///< eta_f * xi_A * (1 + 2 eta_A xi_A)^p

    /// Four-point cubic interpolation on the uniform grid.
    Vector at(double t) const;
};

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 50;
    double step = 1e-3;
    double ivp_tol = 1e-12;   ///< tolerance for auxiliary initial-value problems
    /// Abort bound for the perturbed trajectory inside delta_map; the
    /// default only rejects states that approach the representable range.
    double trajectory_bound = 1e250;
    bool check_defect = true;
    std::vector<Vector> initial_guess; ///< optional, on the solver grid
};

/// Unique bounded solution of z' = A(t) z + f(t, z) by Picard iteration on
/// the dichotomy Green kernel. In triangular coordinates the kernel splits
/// by component index, so the operator is evaluated as scalar sweeps: rows
/// are solved bottom-up, stable components forward from -T, unstable ones
/// backward from +T. Requires the contraction condition L_f * xi_A < 1.
BoundedSolution bounded_solution(const DichotomyProblem& problem,
                                 const SolveOptions& opts = {});

/// Correspondence sending a perturbed initial condition (s, u) to the
/// initial condition of the linear solution at bounded distance from it:
/// integrates the perturbed trajectory, solves the linear bounded-offset
/// problem with the frozen forcing, and subtracts.
Vector delta_map(const DichotomyProblem& problem, double s, const Vector& u,
                 const SolveOptions& opts = {});

struct EpsilonBound {
    double epsilon = 0.0;     ///< eta_f * xi_A * (1 + 2 eta_A xi_A)^p
    double L_threshold = 0.0; ///< 1 / (xi_A * (1 + eta_A xi_A)^p)
};

EpsilonBound epsilon_bound(double eta_A, double xi_A, double eta_f, int p);

struct ConditionCheck {
    std::string name;
    bool pass = false;
    double computed = 0.0;
    double claimed = 0.0;
    double witness_time = 0.0;
    Vector witness_point;
};

struct ClassReport {
    std::vector<ConditionCheck> conditions;
    bool all_pass = false;
};

/// Samples the five class conditions (triangularity, coefficient bound,
/// kernel integral, forcing bound, Lipschitz constant) against the claims.
ClassReport validate_class(const DichotomyProblem& problem, int sample_budget,
                           std::uint64_t seed = 0, double z_radius = 2.0);

struct ContinuityTable {
    std::vector<double> parameters;
    std::vector<Vector> delta_star;
    std::vector<bool> solved;
    std::vector<std::pair<double, double>> modulus; ///< (spacing, max difference)
};

/// Initial values of the bounded solutions across a parameter family, with
/// a difference table per grid spacing. Per-parameter failures are marked,
/// not fatal.
ContinuityTable continuity_probe(const std::function<DichotomyProblem(double)>& family,
                                 const std::vector<double>& parameter_grid, double tol,
                                 const SolveOptions& opts = {});

} // namespace liao
