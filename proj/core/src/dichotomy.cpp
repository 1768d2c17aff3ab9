#include "liao/dichotomy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "liao/errors.hpp"

namespace liao {

namespace {

struct Workspace {
    int p = 0;
    int p_minus = 0;
    double h = 0.0;
    std::size_t N = 0; ///< number of steps; N + 1 grid points
    std::vector<double> tg; ///< grid times
    std::vector<double> tm; ///< midpoint times
    std::vector<Matrix> Ag; ///< A at grid times
    std::vector<Matrix> Am; ///< A at midpoints
};

Workspace make_workspace(const DichotomyProblem& problem, double step) {
    Workspace ws;
    ws.p = problem.p;
    ws.p_minus = problem.p_minus;
    const double T = problem.horizon;
    ws.N = static_cast<std::size_t>(std::max(2L, std::lround(2.0 * T / step)));
    ws.h = 2.0 * T / static_cast<double>(ws.N);
    ws.tg.resize(ws.N + 1);
    ws.tm.resize(ws.N);
    for (std::size_t j = 0; j <= ws.N; ++j)
        ws.tg[j] = -T + ws.h * static_cast<double>(j);
    for (std::size_t j = 0; j < ws.N; ++j) ws.tm[j] = ws.tg[j] + 0.5 * ws.h;

    const auto fetch = [&](double t) {
        Matrix A = problem.A(t);
        if (A.rows() != ws.p || A.cols() != ws.p)
            throw ValidationError("coefficient path has the wrong dimensions");
        double below = 0.0;
        for (int i = 0; i < ws.p; ++i)
            for (int j = 0; j < i; ++j) below = std::max(below, std::abs(A(i, j)));
        if (below > 1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff()))
            throw ValidationError(
                "coefficient path is not upper triangular at t = " + std::to_string(t));
        return A;
    };
    ws.Ag.reserve(ws.N + 1);
    ws.Am.reserve(ws.N);
    for (double t : ws.tg) ws.Ag.push_back(fetch(t));
    for (double t : ws.tm) ws.Am.push_back(fetch(t));
    return ws;
}

// Four-point Lagrange interpolation of grid rows at the midpoint of step j.
double midpoint_sample(const std::vector<Vector>& grid, std::size_t j, int row) {
    const std::size_t N = grid.size() - 1;
    if (N < 3) return 0.5 * (grid[j][row] + grid[j + 1][row]);
    if (j == 0)
        return 0.3125 * grid[0][row] + 0.9375 * grid[1][row] - 0.3125 * grid[2][row] +
               0.0625 * grid[3][row];
    if (j == N - 1)
        return 0.0625 * grid[N - 3][row] - 0.3125 * grid[N - 2][row] +
               0.9375 * grid[N - 1][row] + 0.3125 * grid[N][row];
    return (-grid[j - 1][row] + 9.0 * grid[j][row] + 9.0 * grid[j + 1][row] -
            grid[j + 2][row]) /
           16.0;
}

// Unique bounded solution of z' = A(t) z + g(t) for forcing samples
// F (grid) and Fm (midpoints). Rows are solved from the bottom of the
// triangle up; each scalar equation integrates with RK4 along its decaying
// direction, so no exponential ever overflows.
std::vector<Vector> linear_bounded_sweep(const Workspace& ws, const std::vector<Vector>& F,
                                         const std::vector<Vector>& Fm) {
    const std::size_t N = ws.N;
    std::vector<Vector> z(N + 1, Vector::Zero(ws.p));
    std::vector<Vector> zm(N, Vector::Zero(ws.p));

    std::vector<double> G(N + 1), Gm(N);
    for (int k = ws.p - 1; k >= 0; --k) {
        for (std::size_t j = 0; j <= N; ++j) {
            double g = F[j][k];
            for (int c = k + 1; c < ws.p; ++c) g += ws.Ag[j](k, c) * z[j][c];
            G[j] = g;
        }
        for (std::size_t j = 0; j < N; ++j) {
            double g = Fm[j][k];
            for (int c = k + 1; c < ws.p; ++c) g += ws.Am[j](k, c) * zm[j][c];
            Gm[j] = g;
        }

        if (k < ws.p_minus) {
            double I = 0.0;
            z[0][k] = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                const double a0 = ws.Ag[j](k, k), am = ws.Am[j](k, k),
                             a1 = ws.Ag[j + 1](k, k);
                const double k1 = a0 * I + G[j];
                const double k2 = am * (I + 0.5 * ws.h * k1) + Gm[j];
                const double k3 = am * (I + 0.5 * ws.h * k2) + Gm[j];
                const double k4 = a1 * (I + ws.h * k3) + G[j + 1];
                I += ws.h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
                z[j + 1][k] = I;
            }
        } else {
            double I = 0.0;
            z[N][k] = 0.0;
            const double hb = -ws.h;
            for (std::size_t j = N; j-- > 0;) {
                const double a1 = ws.Ag[j + 1](k, k), am = ws.Am[j](k, k),
                             a0 = ws.Ag[j](k, k);
                const double k1 = a1 * I + G[j + 1];
                const double k2 = am * (I + 0.5 * hb * k1) + Gm[j];
                const double k3 = am * (I + 0.5 * hb * k2) + Gm[j];
                const double k4 = a0 * (I + hb * k3) + G[j];
                I += hb / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
                z[j][k] = I;
            }
        }
        for (std::size_t j = 0; j < N; ++j) zm[j][k] = midpoint_sample(z, j, k);
    }
    return z;
}

Vector cubic_sample(const std::vector<double>& times, const std::vector<Vector>& values,
                    double t) {
    const std::size_t count = times.size();
    if (count == 1) return values.front();
    const double h = times[1] - times[0];
    auto j = static_cast<long>(std::floor((t - times.front()) / h));
    j = std::clamp<long>(j, 1, static_cast<long>(count) - 3);
    const double x = (t - times[static_cast<std::size_t>(j - 1)]) / h;
    // Lagrange weights on nodes {0, 1, 2, 3} evaluated at x.
    const double w0 = -(x - 1) * (x - 2) * (x - 3) / 6.0;
    const double w1 = x * (x - 2) * (x - 3) / 2.0;
    const double w2 = -x * (x - 1) * (x - 3) / 2.0;
    const double w3 = x * (x - 1) * (x - 2) / 6.0;
    return w0 * values[j - 1] + w1 * values[j] + w2 * values[j + 1] + w3 * values[j + 2];
}

} // namespace

void DichotomyProblem::validate_shape() const {
    if (p < 1) throw ValidationError("dichotomy dimension must be at least 1");
    if (p_minus < 0 || p_minus > p)
        throw ValidationError("dichotomy stable index must lie in [0, p]");
    if (!(horizon > 0.0)) throw ValidationError("dichotomy horizon must be positive");
    if (!A) throw ValidationError("dichotomy problem needs a coefficient path");
    if (!f) throw ValidationError("dichotomy problem needs a forcing");
}

Vector BoundedSolution::at(double t) const { return cubic_sample(times, z, t); }

BoundedSolution bounded_solution(const DichotomyProblem& problem,
                                 const SolveOptions& opts) {
    problem.validate_shape();
    if (!(opts.tol > 0.0)) throw ValidationError("solver tolerance must be positive");
    const double contraction = problem.L_f * problem.xi_A;
    if (!(contraction < 1.0))
        throw PreconditionError(
            "contraction condition L_f * xi_A < 1 fails (factor " +
            std::to_string(contraction) + ")");

    const Workspace ws = make_workspace(problem, opts.step);
    const std::size_t N = ws.N;

    std::vector<Vector> z(N + 1, Vector::Zero(ws.p));
    if (!opts.initial_guess.empty()) {
        if (opts.initial_guess.size() != N + 1)
            throw ValidationError("initial guess does not match the solver grid");
        z = opts.initial_guess;
    }

    std::vector<Vector> F(N + 1, Vector::Zero(ws.p)), Fm(N, Vector::Zero(ws.p));
    const double stop = opts.tol * (1.0 - std::min(contraction, 0.999));

    double change = 0.0, prev_change = -1.0, ratio = 0.0;
    int iter = 0;
    bool converged = false;
    for (; iter < opts.max_iter; ++iter) {
        for (std::size_t j = 0; j <= N; ++j) F[j] = problem.f(ws.tg[j], z[j]);
        std::vector<Vector> zm(N, Vector::Zero(ws.p));
        for (std::size_t j = 0; j < N; ++j) {
            for (int k = 0; k < ws.p; ++k) zm[j][k] = midpoint_sample(z, j, k);
            Fm[j] = problem.f(ws.tm[j], zm[j]);
        }
        std::vector<Vector> z_new = linear_bounded_sweep(ws, F, Fm);

        change = 0.0;
        for (std::size_t j = 0; j <= N; ++j)
            change = std::max(change, (z_new[j] - z[j]).lpNorm<Eigen::Infinity>());
        z = std::move(z_new);
        ratio = (prev_change > 0.0) ? change / prev_change : 0.0;
        prev_change = change;
        if (change <= stop) {
            ++iter;
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonContractionError(
            "Picard iteration did not reach the requested tolerance (last "
            "increment ratio " +
                std::to_string(ratio) + ")",
            ratio);

    BoundedSolution sol;
    sol.times = ws.tg;
    sol.iterations = iter;
    sol.a_priori_bound = problem.eta_f * problem.xi_A *
                         std::pow(1.0 + 2.0 * problem.eta_A * problem.xi_A, problem.p);

    // A-posteriori defect on the interior grid via a fourth-order stencil.
    sol.defect_series.assign(N + 1, 0.0);
    for (std::size_t j = 0; j <= N; ++j) F[j] = problem.f(ws.tg[j], z[j]);
    for (std::size_t j = 2; j + 2 <= N; ++j) {
        const Vector dz =
            (z[j - 2] - 8.0 * z[j - 1] + 8.0 * z[j + 1] - z[j + 2]) / (12.0 * ws.h);
        const Vector res = dz - (ws.Ag[j] * z[j] + F[j]);
        sol.defect_series[j] = res.lpNorm<Eigen::Infinity>();
        sol.defect = std::max(sol.defect, sol.defect_series[j]);
    }
    if (opts.check_defect && sol.defect > 10.0 * opts.tol)
        throw InternalConsistencyError(
            "a-posteriori defect " + std::to_string(sol.defect) +
            " exceeds ten times the tolerance; refine the grid");

    for (std::size_t j = 0; j <= N; ++j)
        sol.sup_norm = std::max(sol.sup_norm, z[j].lpNorm<Eigen::Infinity>());
    sol.z = std::move(z);
    sol.initial_value = sol.at(0.0);
    return sol;
}

Vector delta_map(const DichotomyProblem& problem, double s, const Vector& u,
                 const SolveOptions& opts) {
    problem.validate_shape();
    if (std::abs(s) > problem.horizon)
        throw ValidationError("anchor time lies outside the window");
    if (static_cast<int>(u.size()) != problem.p)
        throw ValidationError("anchor point has the wrong dimension");

    const Workspace ws = make_workspace(problem, opts.step);
    const OdeRhs rhs = [&problem](double t, const Vector& y, Vector& dydt) {
        dydt = problem.A(t) * y + problem.f(t, y);
    };
    OdeOptions ode;
    ode.tol = opts.ivp_tol;
    ode.max_step = 0.25;
    ode.state_bound = opts.trajectory_bound;

    OdeSolution fwd, bwd;
    try {
        fwd = dopri5_integrate(rhs, u, s, problem.horizon, ode);
        bwd = dopri5_integrate(rhs, u, s, -problem.horizon, ode);
    } catch (const DivergenceError& e) {
        throw UnreliableDeltaError(
            "perturbed trajectory left the reliable window at t = " +
            std::to_string(e.last_valid_time()));
    }
    const auto pert_at = [&](double t) { return (t < s) ? bwd.at(t) : fwd.at(t); };

    std::vector<Vector> F(ws.N + 1), Fm(ws.N);
    for (std::size_t j = 0; j <= ws.N; ++j) F[j] = problem.f(ws.tg[j], pert_at(ws.tg[j]));
    for (std::size_t j = 0; j < ws.N; ++j) Fm[j] = problem.f(ws.tm[j], pert_at(ws.tm[j]));

    const std::vector<Vector> w = linear_bounded_sweep(ws, F, Fm);
    return u - cubic_sample(ws.tg, w, s);
}

EpsilonBound epsilon_bound(double eta_A, double xi_A, double eta_f, int p) {
    if (p < 1) throw ValidationError("dimension must be at least 1");
    if (eta_A < 0.0 || xi_A < 0.0 || eta_f < 0.0)
        throw ValidationError("dichotomy constants must be non-negative");
    EpsilonBound out;
    out.epsilon = eta_f * xi_A * std::pow(1.0 + 2.0 * eta_A * xi_A, p);
    const double denom = xi_A * std::pow(1.0 + eta_A * xi_A, p);
    out.L_threshold = (denom > 0.0) ? 1.0 / denom : std::numeric_limits<double>::infinity();
    return out;
}

ClassReport validate_class(const DichotomyProblem& problem, int sample_budget,
                           std::uint64_t seed, double z_radius) {
    problem.validate_shape();
    if (sample_budget < 100)
        throw ValidationError("class validation needs a sample budget of at least 100");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(-problem.horizon, problem.horizon);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto random_z = [&] {
        Vector z(problem.p);
        for (int i = 0; i < problem.p; ++i) z[i] = gauss(rng) * z_radius;
        return z;
    };

    ClassReport rep;
    ConditionCheck tri{"triangular", true, 0.0, 0.0, 0.0, {}};
    ConditionCheck bound{"coefficient_bound", true, 0.0, problem.eta_A, 0.0, {}};
    for (int i = 0; i < sample_budget; ++i) {
        const double t = ut(rng);
        const Matrix A = [&] {
            Matrix M = problem.A(t);
            return M;
        }();
        double below = 0.0;
        for (int r = 0; r < problem.p; ++r)
            for (int c = 0; c < r; ++c) below = std::max(below, std::abs(A(r, c)));
        if (below > 1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff()) && tri.pass) {
            tri.pass = false;
            tri.computed = below;
            tri.witness_time = t;
        }
        const double nrm = A.jacobiSvd().singularValues()(0);
        if (nrm > bound.computed) {
            bound.computed = nrm;
            bound.witness_time = t;
        }
    }
    bound.pass = bound.computed <= problem.eta_A * (1.0 + 1e-9);

    // Kernel integral recomputed from the diagonal by trapezoid recurrences,
    // with tails bounded by the per-component mean rates.
    ConditionCheck kernel{"kernel_integral", true, 0.0, problem.xi_A, 0.0, {}};
    {
        const Workspace ws = make_workspace(problem, 2.0 * problem.horizon / 4000.0);
        std::vector<double> total(ws.N + 1, 0.0);
        double min_rate = std::numeric_limits<double>::infinity();
        for (int k = 0; k < problem.p; ++k) {
            // Simpson per-step increments of the diagonal integral.
            std::vector<double> dW(ws.N);
            double W = 0.0;
            for (std::size_t j = 0; j < ws.N; ++j) {
                dW[j] = ws.h / 6.0 *
                        (ws.Ag[j](k, k) + 4.0 * ws.Am[j](k, k) + ws.Ag[j + 1](k, k));
                W += dW[j];
            }
            const double rate = std::abs(W) / (2.0 * problem.horizon);
            min_rate = std::min(min_rate, rate);
            if (k < problem.p_minus) {
                double I = 0.0;
                for (std::size_t j = 0; j < ws.N; ++j) {
                    const double decay = std::exp(dW[j]);
                    I = decay * I + 0.5 * ws.h * (decay + 1.0);
                    total[j + 1] += I;
                }
            } else {
                double I = 0.0;
                std::vector<double> vals(ws.N + 1, 0.0);
                for (std::size_t j = ws.N; j-- > 0;) {
                    const double decay = std::exp(-dW[j]);
                    I = decay * I + 0.5 * ws.h * (1.0 + decay);
                    vals[j] = I;
                }
                for (std::size_t j = 0; j <= ws.N; ++j) total[j] += vals[j];
            }
        }
        std::size_t arg = 0;
        for (std::size_t j = 0; j <= ws.N; ++j)
            if (total[j] > total[arg]) arg = j;
        double tail = 0.0;
        if (min_rate > 0.0) {
            const double left = ws.tg[arg] + problem.horizon;
            const double right = problem.horizon - ws.tg[arg];
            tail = (problem.p_minus * std::exp(-min_rate * left) +
                    (problem.p - problem.p_minus) * std::exp(-min_rate * right)) /
                   min_rate;
        }
        kernel.computed = total[arg] + tail;
        kernel.witness_time = ws.tg[arg];
        kernel.pass = kernel.computed <= problem.xi_A * 1.01;
    }

    ConditionCheck forcing{"forcing_bound", true, 0.0, problem.eta_f, 0.0, {}};
    ConditionCheck lipschitz{"lipschitz", true, 0.0, problem.L_f, 0.0, {}};
    for (int i = 0; i < sample_budget; ++i) {
        const double t = ut(rng);
        const Vector z = (i % 8 == 0) ? Vector(Vector::Zero(problem.p)) : random_z();
        const Vector fz = problem.f(t, z);
        const double nrm = fz.norm();
        if (nrm > forcing.computed) {
            forcing.computed = nrm;
            forcing.witness_time = t;
            forcing.witness_point = z;
        }
        // Lipschitz quotients over both tiny and moderate displacements.
        for (const double eps : {1e-6, 0.1, 1.0}) {
            Vector dir(problem.p);
            for (int d = 0; d < problem.p; ++d) dir[d] = gauss(rng);
            if (dir.norm() < 1e-12) continue;
            dir *= eps / dir.norm();
            const double quot = (problem.f(t, z + dir) - fz).norm() / dir.norm();
            if (quot > lipschitz.computed) {
                lipschitz.computed = quot;
                lipschitz.witness_time = t;
                lipschitz.witness_point = z;
            }
        }
    }
    forcing.pass = forcing.computed <= problem.eta_f * (1.0 + 1e-9);
    lipschitz.pass = lipschitz.computed <= problem.L_f * (1.0 + 1e-6) + 1e-300;

    rep.conditions = {tri, bound, kernel, forcing, lipschitz};
    rep.all_pass = true;
    for (const auto& c : rep.conditions) rep.all_pass = rep.all_pass && c.pass;
    return rep;
}

ContinuityTable continuity_probe(const std::function<DichotomyProblem(double)>& family,
                                 const std::vector<double>& parameter_grid, double tol,
                                 const SolveOptions& opts) {
    if (parameter_grid.size() < 2)
        throw ValidationError("continuity probe needs at least two parameters");
    ContinuityTable table;
    table.parameters = parameter_grid;
    SolveOptions local = opts;
    local.tol = tol;
    for (double lam : parameter_grid) {
        try {
            const BoundedSolution sol = bounded_solution(family(lam), local);
            table.delta_star.push_back(sol.initial_value);
            table.solved.push_back(true);
        } catch (const Error&) {
            table.delta_star.push_back(Vector());
            table.solved.push_back(false);
        }
    }
    const double base_spacing = parameter_grid[1] - parameter_grid[0];
    for (std::size_t k = 1; k < parameter_grid.size(); ++k) {
        double worst = 0.0;
        bool any = false;
        for (std::size_t i = 0; i + k < parameter_grid.size(); ++i) {
            if (!table.solved[i] || !table.solved[i + k]) continue;
            worst = std::max(worst,
                             (table.delta_star[i] - table.delta_star[i + k]).norm());
            any = true;
        }
        if (any)
            table.modulus.emplace_back(base_spacing * static_cast<double>(k), worst);
    }
    return table;
}

} // namespace liao
