#include "liao/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liao/errors.hpp"

namespace liao {

namespace {

// Upper-triangular square root with positive diagonal.
Matrix triangular_sqrt(const Matrix& T) {
    const int m = static_cast<int>(T.rows());
    Matrix U = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        if (!(T(i, i) > 0.0))
            throw Error("triangular logarithm needs a positive diagonal");
        U(i, i) = std::sqrt(T(i, i));
    }
    for (int d = 1; d < m; ++d) {
        for (int i = 0; i + d < m; ++i) {
            const int j = i + d;
            double acc = T(i, j);
            for (int k = i + 1; k < j; ++k) acc -= U(i, k) * U(k, j);
            U(i, j) = acc / (U(i, i) + U(j, j));
        }
    }
    return U;
}

double cond_estimate_triangular(const Matrix& C) {
    const int m = static_cast<int>(C.rows());
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (int i = 0; i < m; ++i) {
        dmin = std::min(dmin, std::abs(C(i, i)));
        dmax = std::max(dmax, std::abs(C(i, i)));
    }
    if (dmin == 0.0) return std::numeric_limits<double>::infinity();
    const double off = C.cwiseAbs().maxCoeff();
    return (dmax / dmin) * (1.0 + off / dmax);
}

} // namespace

Matrix triangular_log(Matrix T) {
    const int m = static_cast<int>(T.rows());
    const Matrix I = Matrix::Identity(m, m);
    int halvings = 0;
    while ((T - I).cwiseAbs().maxCoeff() > 0.25) {
        if (++halvings > 80) throw Error("triangular logarithm did not converge");
        T = triangular_sqrt(T);
    }
    const Matrix E = T - I;
    Matrix term = E;
    Matrix acc = Matrix::Zero(m, m);
    for (int k = 1; k <= 60; ++k) {
        acc += (k % 2 == 1 ? 1.0 : -1.0) / k * term;
        term = term * E;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    return std::ldexp(1.0, halvings) * acc;
}

Matrix ReducedCocycle::R_at(double t) const {
    if (times.size() < 2) return R_samples.front();
    const double pos = (t - times.front()) / step;
    auto idx = static_cast<long>(std::floor(pos));
    idx = std::clamp<long>(idx, 0, static_cast<long>(times.size()) - 2);
    const auto k = static_cast<std::size_t>(idx);
    const double theta = std::clamp((t - times[k]) / step, 0.0, 1.0);
    return (1.0 - theta) * R_samples[k] + theta * R_samples[k + 1];
}

Vector ReducedCocycle::omega_cumulative_at(double t) const {
    if (times.size() < 2) return Vector::Zero(fiber_dimension());
    const double pos = (t - times.front()) / step;
    auto idx = static_cast<long>(std::floor(pos));
    idx = std::clamp<long>(idx, 0, static_cast<long>(times.size()) - 2);
    const auto k = static_cast<std::size_t>(idx);
    const double frac = t - times[k];
    return omega_cumulative[k] + frac * omega[k];
}

Vector ReducedCocycle::omega_integral(double a, double b) const {
    return omega_cumulative_at(b) - omega_cumulative_at(a);
}

ReducedCocycle reduced_cocycle(const FramePath& frames,
                               const TransversalPropagatorPath& propagators, double h,
                               int p_minus) {
    const int m = frames.fiber_dimension();
    const std::size_t N = frames.times.size();
    if (propagators.times.size() != N)
        throw ValidationError("frame and propagator paths must share a grid");
    if (std::abs(frames.step - h) > 1e-12 * (1.0 + h) && N > 1)
        throw ValidationError("grid step does not match the declared step");
    if (p_minus < 0 || p_minus > m)
        throw ValidationError("stable index must lie in [0, n-1]");

    ReducedCocycle c;
    c.times = frames.times;
    c.step = h;
    c.p_minus = p_minus;
    c.C_accum = accumulate_propagators(frames).matrices;

    if (N == 1) {
        c.R_samples.assign(1, Matrix::Zero(m, m));
        c.omega.assign(1, Vector::Zero(m));
        c.omega_cumulative.assign(1, Vector::Zero(m));
        return c;
    }

    // Cross-check the propagator path against the cached factors where the
    // accumulated propagator is well conditioned.
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const Matrix& Ck = propagators.matrices[k];
        if (cond_estimate_triangular(Ck) > 30.0) continue;
        const Matrix step_from_props =
            Ck.transpose()
                .triangularView<Eigen::Lower>()
                .solve(propagators.matrices[k + 1].transpose())
                .transpose();
        double below = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < i; ++j)
                below = std::max(below, std::abs(step_from_props(i, j)));
        const double scale = std::max(1.0, step_from_props.cwiseAbs().maxCoeff());
        if (below > 1e-10 * scale)
            throw InternalConsistencyError(
                "propagator-derived step factor is not upper triangular; the "
                "propagator path does not match the transported frames");
        if ((step_from_props - frames.step_factors[k]).cwiseAbs().maxCoeff() >
            1e-8 * scale)
            throw InternalConsistencyError(
                "propagator path disagrees with the cached transport factors");
    }

    // Scaled logs of the step factors approximate the coefficient matrix at
    // step midpoints; resample to grid times by averaging neighbours.
    std::vector<Matrix> step_R(N - 1);
    c.omega_cumulative.resize(N);
    c.omega_cumulative[0] = Vector::Zero(m);
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const Matrix L = triangular_log(frames.step_factors[k]);
        step_R[k] = L / h;
        c.omega_cumulative[k + 1] = c.omega_cumulative[k] + L.diagonal();
    }
    c.R_samples.resize(N);
    c.R_samples[0] = step_R.front();
    c.R_samples[N - 1] = step_R.back();
    for (std::size_t k = 1; k + 1 < N; ++k)
        c.R_samples[k] = 0.5 * (step_R[k - 1] + step_R[k]);
    c.omega.resize(N);
    for (std::size_t k = 0; k < N; ++k) c.omega[k] = c.R_samples[k].diagonal();
    return c;
}

HyperbolicityCertificate certify_hyperbolic(const ReducedCocycle& cocycle,
                                            std::vector<double> d_grid, double window_T,
                                            int t0_stride) {
    if (d_grid.empty()) throw ValidationError("window grid must be nonempty");
    std::sort(d_grid.begin(), d_grid.end());
    if (window_T < d_grid.back())
        throw InsufficientWindowError(
            "certification window is shorter than the largest requested average");
    if (cocycle.t_min() > -window_T + 1e-9 || cocycle.t_max() < window_T - 1e-9)
        throw ValidationError("cocycle does not cover the certification window");

    const int m = cocycle.fiber_dimension();
    const int p = cocycle.p_minus;
    HyperbolicityCertificate cert;
    cert.window_T = window_T;
    cert.d_grid = d_grid;
    cert.t0_stride = std::max(1, t0_stride);

    // Worst (least hyperbolic) window-average rates per window length.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> worst_stable(d_grid.size(), -inf);
    std::vector<double> worst_unstable(d_grid.size(), inf);
    for (std::size_t di = 0; di < d_grid.size(); ++di) {
        const double T = d_grid[di];
        for (std::size_t j = 0; j < cocycle.times.size();
             j += static_cast<std::size_t>(cert.t0_stride)) {
            const double t0 = cocycle.times[j];
            if (t0 < -window_T - 1e-12 || t0 + T > window_T + 1e-12) continue;
            const Vector avg = cocycle.omega_integral(t0, t0 + T) / T;
            for (int k = 0; k < p; ++k)
                worst_stable[di] = std::max(worst_stable[di], avg[k]);
            for (int k = p; k < m; ++k)
                worst_unstable[di] = std::min(worst_unstable[di], avg[k]);
        }
    }

    // Smallest d whose windows (d and longer) are uniformly hyperbolic.
    double best_eta = -inf;
    for (std::size_t di = 0; di < d_grid.size(); ++di) {
        double eta = inf;
        for (std::size_t dj = di; dj < d_grid.size(); ++dj) {
            if (p > 0) eta = std::min(eta, -worst_stable[dj]);
            if (p < m) eta = std::min(eta, worst_unstable[dj]);
        }
        if (eta > 0.0 && !cert.pass) {
            cert.pass = true;
            cert.d_hat = d_grid[di];
            cert.eta_hat = eta;
            double ws = -inf, wu = inf;
            for (std::size_t dj = di; dj < d_grid.size(); ++dj) {
                ws = std::max(ws, worst_stable[dj]);
                wu = std::min(wu, worst_unstable[dj]);
            }
            cert.worst_stable_average = ws;
            cert.worst_unstable_average = wu;
        }
        best_eta = std::max(best_eta, eta);
    }
    if (!cert.pass) {
        cert.eta_hat = std::max(0.0, best_eta);
        cert.d_hat = 0.0;
        cert.worst_stable_average = (p > 0) ? worst_stable.front() : -inf;
        cert.worst_unstable_average = (p < m) ? worst_unstable.front() : inf;
    }
    return cert;
}

DichotomyConstants dichotomy_constants(const ReducedCocycle& cocycle,
                                       const HyperbolicityCertificate& certificate) {
    if (!certificate.pass)
        throw PreconditionError(
            "dichotomy constants need a passing hyperbolicity certificate");
    const int m = cocycle.fiber_dimension();
    const int p = cocycle.p_minus;
    const std::size_t N = cocycle.times.size();
    const double h = cocycle.step;

    DichotomyConstants out;
    out.horizon = cocycle.t_max();
    for (const Matrix& R : cocycle.R_samples)
        out.eta_A = std::max(out.eta_A, R.cwiseAbs().sum());

    // Trapezoid recurrences for the one-sided kernel integrals; every factor
    // is an exponential of a one-step rate integral, so nothing overflows.
    std::vector<double> total(N, 0.0);
    for (int k = 0; k < p; ++k) {
        double I = 0.0;
        for (std::size_t j = 0; j + 1 < N; ++j) {
            const double dW =
                cocycle.omega_cumulative[j + 1][k] - cocycle.omega_cumulative[j][k];
            const double decay = std::exp(dW);
            I = decay * I + 0.5 * h * (decay + 1.0);
            total[j + 1] += I;
        }
    }
    for (int k = p; k < m; ++k) {
        double I = 0.0;
        std::vector<double> vals(N, 0.0);
        for (std::size_t j = N - 1; j-- > 0;) {
            const double dW =
                cocycle.omega_cumulative[j + 1][k] - cocycle.omega_cumulative[j][k];
            const double decay = std::exp(-dW);
            I = decay * I + 0.5 * h * (1.0 + decay);
            vals[j] = I;
        }
        for (std::size_t j = 0; j < N; ++j) total[j] += vals[j];
    }

    std::size_t arg = 0;
    for (std::size_t j = 0; j < N; ++j)
        if (total[j] > total[arg]) arg = j;
    out.xi_A = total[arg];
    out.argmax_t = cocycle.times[arg];

    const double eta = certificate.eta_hat;
    const double left = out.argmax_t - cocycle.t_min();
    const double right = cocycle.t_max() - out.argmax_t;
    out.tail_bound =
        (p * std::exp(-eta * left) + (m - p) * std::exp(-eta * right)) / eta;
    out.tail_flagged = out.tail_bound > 0.01 * out.xi_A;
    return out;
}

} // namespace liao
