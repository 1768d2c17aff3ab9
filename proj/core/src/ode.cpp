#include "liao/ode.hpp"

#include <algorithm>
#include <cmath>

#include "liao/errors.hpp"

namespace liao {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// Difference between the 5th-order and embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

double sup_norm(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

} // namespace

Vector DenseSegment::eval(double t) const {
    const double theta = (h == 0.0) ? 0.0 : (t - t0) / h;
    const double s = theta, s1 = 1.0 - theta;
    return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
}

Vector OdeSolution::at(double t) const {
    if (times.empty()) throw Error("empty ode solution");
    if (times.size() == 1 || segments.empty()) return states.front();
    const bool fwd = forward();
    if (fwd ? (t <= times.front()) : (t >= times.front())) return states.front();
    if (fwd ? (t >= times.back()) : (t <= times.back())) return states.back();
    // Binary search for the segment containing t.
    std::size_t lo = 0, hi = segments.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const double t_end = times[mid + 1];
        if (fwd ? (t <= t_end) : (t >= t_end))
            hi = mid;
        else
            lo = mid + 1;
    }
    return segments[lo].eval(t);
}

void rk4_step(const OdeRhs& rhs, double t, double h, Vector& y) {
    Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
    rhs(t, y, k1);
    rhs(t + 0.5 * h, y + 0.5 * h * k1, k2);
    rhs(t + 0.5 * h, y + 0.5 * h * k2, k3);
    rhs(t + h, y + h * k3, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

OdeSolution dopri5_integrate(const OdeRhs& rhs, Vector y0, double t0, double t1,
                             const OdeOptions& opts) {
    OdeSolution sol;
    sol.times.push_back(t0);
    sol.states.push_back(y0);
    if (t0 == t1) return sol;

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const std::size_t n = static_cast<std::size_t>(y0.size());

    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    rhs(t0, y0, k1);
    if (!k1.allFinite())
        throw DivergenceError("field evaluation not finite at initial point", t0);

    double h = opts.initial_step;
    if (h <= 0.0) {
        h = 0.01 * (1.0 + sup_norm(y0)) / (1.0 + sup_norm(k1));
    }
    h = std::min({h, opts.max_step, span});
    h *= dir;

    double t = t0;
    Vector y = y0;
    double err_prev = 1.0; // normalized error of the previous accepted step
    long steps = 0;

    while (dir * (t1 - t) > 0.0) {
        if (++steps > opts.max_steps)
            throw Error("integrator exceeded the maximum step count");
        if (std::abs(h) < 1e-14 * (1.0 + std::abs(t)))
            throw DivergenceError("step size collapsed during integration", t);
        if (dir * (t + h - t1) > 0.0) h = t1 - t;

        ytmp = y + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(t + h, ynew, k7);

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        bool finite = ynew.allFinite() && err.allFinite();
        double err_norm = 1e300;
        if (finite) {
            err_norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double scale = 1.0 + std::max(std::abs(y[i]), std::abs(ynew[i]));
                err_norm = std::max(err_norm, std::abs(err[i]) / scale);
            }
        }
        // Local error budget is tol per unit time.
        const double budget = opts.tol * std::abs(h);
        const double ratio = err_norm / std::max(budget, 1e-300);

        if (finite && ratio <= 1.0) {
            // Accept: record dense coefficients, then advance.
            DenseSegment seg;
            seg.t0 = t;
            seg.h = h;
            seg.r1 = y;
            seg.r2 = ynew - y;
            seg.r3 = h * k1 - seg.r2;
            seg.r4 = seg.r2 - h * k7 - seg.r3;
            seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            sol.segments.push_back(std::move(seg));

            t += h;
            y = ynew;
            k1 = k7; // FSAL
            sol.times.push_back(t);
            sol.states.push_back(y);

            const double bnorm = opts.bound_norm ? opts.bound_norm(y) : sup_norm(y);
            if (bnorm > opts.state_bound)
                throw DivergenceError("state norm exceeded the divergence bound", t);

            // PI controller (Hairer's exponents for the 5(4) pair).
            const double e_now = std::max(ratio, 1e-10);
            double fac = 0.9 * std::pow(e_now, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 5.0);
            err_prev = e_now;
            h *= fac;
            if (std::abs(h) > opts.max_step) h = dir * opts.max_step;
        } else {
            const double fac =
                finite ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.9) : 0.1;
            h *= fac;
        }
    }
    return sol;
}

} // namespace liao
