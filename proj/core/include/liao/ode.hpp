#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

namespace liao {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand side of an autonomous or nonautonomous first-order system.
using OdeRhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

struct OdeOptions {
    double tol = 1e-10;       ///< local error per unit time, relative to 1+|y|
    double max_step = 1.0;
    double initial_step = 0.0; ///< 0 = choose automatically
    double state_bound = std::numeric_limits<double>::infinity();
    long max_steps = 20'000'000;
    /// Norm used against state_bound; defaults to the sup norm of the full
    /// vector. Lets callers exclude auxiliary components (e.g. fundamental
    /// matrices) from the divergence check.
    std::function<double(const Vector&)> bound_norm;
};

/// Quartic interpolation coefficients for one accepted step.
struct DenseSegment {
    double t0 = 0.0;
    double h = 0.0;
    Vector r1, r2, r3, r4, r5;

    Vector eval(double t) const;
};

/// Accepted-step record of one integration sweep (single direction).
struct OdeSolution {
    std::vector<double> times;         ///< endpoints of accepted steps, includes t0
    std::vector<Vector> states;
    std::vector<DenseSegment> segments; ///< one per accepted step

    bool forward() const { return times.size() < 2 || times.back() >= times.front(); }
    const Vector& initial() const { return states.front(); }
    const Vector& final() const { return states.back(); }

    /// Dense evaluation anywhere inside the integrated span.
    Vector at(double t) const;
};

/// Embedded Dormand-Prince 5(4) pair with PI step-size control and the
/// classical quartic continuous extension. Integrates from t0 to t1 in
/// either direction. Throws DivergenceError when the sup-norm of the state
/// exceeds opts.state_bound or the step size collapses.
OdeSolution dopri5_integrate(const OdeRhs& rhs, Vector y0, double t0, double t1,
                             const OdeOptions& opts = {});

/// One classical fourth-order Runge-Kutta step, in place.
void rk4_step(const OdeRhs& rhs, double t, double h, Vector& y);

} // namespace liao
