#pragma once

#include <vector>

#include "liao/frame.hpp"

namespace liao {

/// Reduced linearized system along a transported frame: upper-triangular
/// coefficient samples R(t), their diagonal rate series (the Liao
/// qualitative functions), and the accumulated triangular propagator.
struct ReducedCocycle {
    std::vector<double> times; ///< uniform grid containing 0
    double step = 0.0;
    int p_minus = 0;
    std::vector<Matrix> R_samples; ///< upper triangular (n-1)^2 per time
    std::vector<Vector> omega;     ///< diagonal of R per time
    std::vector<Matrix> C_accum;   ///< triangular propagator, identity at t = 0
    /// Cumulative rate integrals W_k(t_j) anchored at times.front(); the
    /// per-step increments are the exact logs of the step-factor diagonals.
    std::vector<Vector> omega_cumulative;

    int fiber_dimension() const { return static_cast<int>(omega.front().size()); }
    double t_min() const { return times.front(); }
    double t_max() const { return times.back(); }

    /// Piecewise-constant coefficient evaluator (per transport step).
    Matrix R_at(double t) const;
    /// W_k(t) by piecewise-linear evaluation of the cumulative integrals.
    Vector omega_cumulative_at(double t) const;
    /// Integrals of each rate over [a, b].
    Vector omega_integral(double a, double b) const;
};

/// Builds the reduced system from transported frames: R(t) is the scaled
/// triangular matrix logarithm of each cached step factor. The propagator
/// path argument is cross-checked against the factors near t = 0 where
/// conditioning permits; disagreement raises InternalConsistencyError.
ReducedCocycle reduced_cocycle(const FramePath& frames,
                               const TransversalPropagatorPath& propagators, double h,
                               int p_minus);

/// Window-average certificate: all sampled window averages of the stable
/// rates stay below -eta_hat and the unstable ones above +eta_hat, for all
/// window lengths in the grid from d_hat up.
struct HyperbolicityCertificate {
    double eta_hat = 0.0;
    double d_hat = 0.0;
    double window_T = 0.0;
    bool pass = false;
    double worst_stable_average = 0.0;   ///< largest stable window average rate
    double worst_unstable_average = 0.0; ///< smallest unstable window average rate
    std::vector<double> d_grid;
    int t0_stride = 10;
};

HyperbolicityCertificate certify_hyperbolic(const ReducedCocycle& cocycle,
                                            std::vector<double> d_grid, double window_T,
                                            int t0_stride = 10);

/// Uniform bound on the reduced coefficients and the dichotomy
/// double-integral supremum, with an analytic bound on the truncated tails.
struct DichotomyConstants {
    double eta_A = 0.0;     ///< max over the grid of sum_ij |R_ij(t)|
    double xi_A = 0.0;      ///< sup over grid t of the two-sided kernel integrals
    double tail_bound = 0.0;
    bool tail_flagged = false; ///< true when the tail exceeds 1% of xi_A
    double horizon = 0.0;
    double argmax_t = 0.0;
};

/// Requires a passing certificate (the tails need an exponential rate).
DichotomyConstants dichotomy_constants(const ReducedCocycle& cocycle,
                                       const HyperbolicityCertificate& certificate);

/// Logarithm of an upper-triangular matrix with positive diagonal
/// (inverse scaling by triangular square roots, then the log series).
Matrix triangular_log(Matrix T);

} // namespace liao
