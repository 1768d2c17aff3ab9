#include "liao/conjugacy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "liao/errors.hpp"

namespace liao {

namespace {

// Chart geometry and linear part frozen at one half-grid time; lets the
// Picard loop evaluate the forcing without re-interpolating frames.
struct ChartSlice {
    Vector base;
    Vector base_deriv;
    Matrix gamma;
    Matrix dgamma;
    Matrix R;
};

struct SliceTable {
    double t_first = 0.0;
    double half_step = 0.0;
    std::vector<ChartSlice> slices;

    const ChartSlice* lookup(double t) const {
        if (slices.empty()) return nullptr;
        const double pos = (t - t_first) / half_step;
        const auto idx = std::lround(pos);
        if (idx < 0 || idx >= static_cast<long>(slices.size())) return nullptr;
        if (std::abs(pos - static_cast<double>(idx)) > 0.25) return nullptr;
        return &slices[static_cast<std::size_t>(idx)];
    }
};

struct PreparedChart {
    std::shared_ptr<const StandardSystem> system;
    std::shared_ptr<const ReducedCocycle> cocycle;
    std::shared_ptr<const SliceTable> table;
    Matrix frame0; ///< frame columns at t = 0
};

SliceTable build_slice_table(const FramePath& path, const ReducedCocycle& cocycle) {
    const std::size_t N = path.times.size();
    SliceTable table;
    if (N < 3) return table;
    const double h = path.step;
    table.t_first = path.times.front();
    table.half_step = 0.5 * h;
    table.slices.resize(2 * N - 1);

    for (std::size_t k = 0; k < N; ++k) {
        ChartSlice& s = table.slices[2 * k];
        s.base = path.base_states[k];
        s.base_deriv = path.base_derivs[k];
        s.gamma = path.frames[k];
        const std::size_t lo = (k == 0) ? 0 : k - 1;
        const std::size_t hi = (k + 1 < N) ? k + 1 : k;
        s.dgamma = (path.frames[hi] - path.frames[lo]) /
                   (static_cast<double>(hi - lo) * h);
        s.R = cocycle.R_samples[k];
    }
    for (std::size_t k = 0; k + 1 < N; ++k) {
        ChartSlice& s = table.slices[2 * k + 1];
        const double t = path.times[k] + 0.5 * h;
        s.base = path.base_at(t);
        s.base_deriv = 0.5 * (path.base_derivs[k] + path.base_derivs[k + 1]);
        s.gamma = path.frame_at(t);
        s.dgamma = (path.frames[k + 1] - path.frames[k]) / h;
        s.R = 0.5 * (cocycle.R_samples[k] + cocycle.R_samples[k + 1]);
    }
    return table;
}

PreparedChart prepare_chart(const VectorFieldSpec& S, const VectorFieldSpec& V,
                            const Vector& w, const TransversalFrame& frame,
                            const ConjugacyConfig& config, double reach) {
    const double pad = 2.0 * config.transport_step;
    FramePath path = frame_transport(S, w, frame, -(reach + pad), reach + pad,
                                     config.transport_step);
    auto frames = std::make_shared<const FramePath>(std::move(path));

    auto cocycle = std::make_shared<const ReducedCocycle>(
        reduced_cocycle(*frames, accumulate_propagators(*frames), config.transport_step,
                        config.p_minus));

    double radius = config.chart_radius;
    if (radius <= 0.0)
        radius = estimate_chart_radius(*frames, config.chart_radius_cap);
    if (config.xi > radius)
        throw PreconditionError("cutoff radius exceeds the usable chart radius " +
                                std::to_string(radius));

    PreparedChart out;
    out.frame0 = frames->frames[frames->zero_index()];
    out.table = std::make_shared<const SliceTable>(build_slice_table(*frames, *cocycle));
    out.system = std::make_shared<const StandardSystem>(SectionChart(frames, radius), V,
                                                        cocycle);
    out.cocycle = std::move(cocycle);
    return out;
}

// Bump-modified remainder with the slice fast path; off-grid times fall back
// to the generic chart evaluation.
Vector bumped_remainder_eval(const PreparedChart& pc, const BumpedRemainder& generic,
                             double xi, double t, const Vector& y) {
    const double r = y.norm() / xi;
    if (r >= 1.0) return Vector::Zero(y.size());
    const ChartSlice* s = pc.table->lookup(t);
    if (!s) return generic(t, y);

    thread_local Vector u, point, v, q, rhs;
    u.noalias() = s->dgamma * y;
    u += s->base_deriv;
    point.noalias() = s->gamma * y;
    point += s->base;
    v = eval_field(pc.system->field(), point);

    q.noalias() = -s->gamma * (s->gamma.transpose() * u);
    q += u;
    const double denom = q.dot(u);
    if (!(denom > 0.0) || (1.0 + u.squaredNorm()) > 1e8 * denom)
        throw ChartError(
            "chart Jacobian is nearly singular at the requested point; shrink "
            "the chart radius");
    const double speed = q.dot(v) / denom;
    if (speed < 0.5 || speed > 2.0)
        throw NotInNeighborhoodError(
            "lifted longitudinal speed " + std::to_string(speed) +
            " left the [1/2, 2] window; the perturbation is too far from the "
            "base field");
    rhs.noalias() = s->gamma.transpose() * (v - speed * u);
    rhs /= speed;
    rhs.noalias() -= s->R * y;
    return bump(r) * rhs;
}

NeighborhoodChecklist run_checklist(const PreparedChart& pc,
                                    const ConjugacyConfig& config) {
    NeighborhoodChecklist cl;
    cl.sup_remainder_bound = config.epsilon * config.rho_xi;
    cl.lipschitz_bound = config.kappa;

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> ut(-config.horizon, config.horizon);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int m = pc.system->cocycle().fiber_dimension();

    const auto random_y = [&](double radius) {
        Vector y(m);
        for (int i = 0; i < m; ++i) y[i] = gauss(rng);
        const double nrm = y.norm();
        std::uniform_real_distribution<double> ur(0.0, 1.0);
        const double r = radius * std::pow(ur(rng), 1.0 / m);
        return Vector((nrm > 1e-14 ? r / nrm : 0.0) * y);
    };

    cl.speed_window_ok = true;
    for (int i = 0; i < config.smallness_budget; ++i) {
        const double t = ut(rng);
        const Vector y = (i % 16 == 0) ? Vector(Vector::Zero(m)) : random_y(0.98 * config.xi);
        const RemainderEvaluation ev = standard_rhs_and_remainder(
            pc.system->chart(), pc.system->field(), pc.system->cocycle(), t, y);
        cl.sup_remainder = std::max(cl.sup_remainder, ev.remainder.norm());

        Vector dir(m);
        for (int d = 0; d < m; ++d) dir[d] = gauss(rng);
        if (dir.norm() < 1e-14) continue;
        for (const double scale : {1e-6, 0.25 * config.xi}) {
            Vector y2 = y + (scale / dir.norm()) * dir;
            if (y2.norm() >= 0.995 * config.xi) continue;
            const RemainderEvaluation ev2 = standard_rhs_and_remainder(
                pc.system->chart(), pc.system->field(), pc.system->cocycle(), t, y2);
            const double quot = (ev2.remainder - ev.remainder).norm() / (y2 - y).norm();
            cl.lipschitz = std::max(cl.lipschitz, quot);
            if (y.norm() <= 0.5 * config.xi && y2.norm() <= 0.5 * config.xi)
                cl.lipschitz_core = std::max(cl.lipschitz_core, quot);
        }
    }
    cl.smallness_ok = cl.sup_remainder <= cl.sup_remainder_bound;
    cl.lipschitz_ok = cl.lipschitz <= cl.lipschitz_bound;

    if (config.enforce_smallness) {
        if (!cl.smallness_ok)
            throw PreconditionError(
                "remainder-smallness inequality violated: sup |remainder| = " +
                std::to_string(cl.sup_remainder) + " exceeds epsilon * rho_xi = " +
                std::to_string(cl.sup_remainder_bound));
        if (!cl.lipschitz_ok)
            throw PreconditionError(
                "remainder-Lipschitz inequality violated: constant " +
                std::to_string(cl.lipschitz) + " exceeds kappa = " +
                std::to_string(cl.lipschitz_bound));
    }
    return cl;
}

OffsetResult offset_from_prepared(const PreparedChart& pc, const ConjugacyConfig& config) {
    OffsetResult out;
    out.checklist = run_checklist(pc, config);
    out.system = pc.system;

    auto cocycle = pc.cocycle;
    double eta_measured = 0.0;
    for (const Matrix& R : cocycle->R_samples)
        eta_measured = std::max(eta_measured, R.cwiseAbs().sum());

    DichotomyProblem problem;
    problem.p = cocycle->fiber_dimension();
    problem.p_minus = config.p_minus;
    problem.A = [cocycle](double t) { return cocycle->R_at(t); };
    const BumpedRemainder generic(pc.system, config.xi);
    const double xi = config.xi;
    problem.f = [pc, generic, xi](double t, const Vector& y) {
        return bumped_remainder_eval(pc, generic, xi, t, y);
    };
    problem.eta_A = eta_measured;
    problem.xi_A = config.xi_lambda;
    problem.eta_f = std::max(out.checklist.sup_remainder, 1e-300);
    // Contraction claim: the core Lipschitz constant, valid while iterates
    // stay inside the bump-free half ball (checked after the solve).
    problem.L_f = out.checklist.lipschitz_core;
    problem.horizon = config.horizon;

    SolveOptions solve;
    solve.tol = config.tol;
    solve.step = config.transport_step;
    solve.max_iter = 50;
    out.solution = bounded_solution(problem, solve);

    if (out.solution.sup_norm > 0.5 * config.xi)
        throw PreconditionError(
            "bounded solution left the bump-free half ball (sup " +
            std::to_string(out.solution.sup_norm) +
            " > xi/2); the contraction estimate does not apply");

    out.x = out.solution.initial_value;
    out.h = pc.frame0 * out.x;
    out.offset_bound = std::min(config.epsilon, config.xi) / 4.0;
    out.within_bound = out.x.norm() <= out.offset_bound;
    return out;
}

Matrix block_rotation(int m, int p_minus, std::mt19937_64& rng) {
    Matrix Q = Matrix::Identity(m, m);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto fill_block = [&](int offset, int size) {
        if (size == 1) {
            Q(offset, offset) = -1.0; // sign swap, the smallest orthogonal change
            return;
        }
        Matrix G(size, size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) G(i, j) = gauss(rng);
        const Eigen::HouseholderQR<Matrix> qr(G);
        Matrix Qb = qr.householderQ();
        const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < size; ++i)
            if (R(i, i) < 0.0) Qb.col(i) = -Qb.col(i);
        Q.block(offset, offset, size, size) = Qb;
    };
    if (p_minus > 0) fill_block(0, p_minus);
    if (p_minus < m) fill_block(p_minus, m - p_minus);
    return Q;
}

std::vector<std::pair<double, double>> equivariance_with_chart(
    const PreparedChart& pc, const VectorFieldSpec& S, const VectorFieldSpec& V,
    const Vector& h, const std::vector<double>& t_grid, const ConjugacyConfig& config) {
    const SectionChart& chart = pc.system->chart();
    const Vector x0 = pc.frame0.transpose() * h;
    const auto sys = pc.system;
    const OdeRhs rhs = [sys](double t, const Vector& y, Vector& dydt) {
        dydt = sys->rhs(t, y);
    };
    OdeOptions ode;
    ode.tol = std::min(1e-13, config.tol);
    ode.max_step = 0.25;

    double t_fwd = 0.0, t_bwd = 0.0;
    for (double t : t_grid) {
        t_fwd = std::max(t_fwd, t);
        t_bwd = std::min(t_bwd, t);
    }
    const OdeSolution fwd = dopri5_integrate(rhs, x0, 0.0, t_fwd, ode);
    const OdeSolution bwd = dopri5_integrate(rhs, x0, 0.0, t_bwd, ode);

    std::vector<std::pair<double, double>> residuals;
    residuals.reserve(t_grid.size());
    for (double t : t_grid) {
        const Vector y_t = (t < 0.0) ? bwd.at(t) : fwd.at(t);
        const Vector evolved = chart.embed(t, y_t);

        const Vector w_t = chart.base_at(t);
        const TransversalFrame frame_t = stable_adapted_frame(
            S, w_t, config.p_minus, config.splitting_estimation_time,
            config.transport_step);
        const OffsetResult off_t = conjugacy_offset(S, V, w_t, frame_t, config);
        residuals.emplace_back(t, (evolved - (w_t + off_t.h)).norm());
    }
    return residuals;
}

// Runs a worker pool over [0, count) with a shared index counter.
void parallel_for_index(std::size_t count, const std::function<void(std::size_t)>& body) {
    const unsigned workers =
        std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                           static_cast<unsigned>(count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

ConjugacyConfig ConjugacyConfig::make(double epsilon, double xi, double eta_lambda,
                                      double xi_lambda, int dimension, int p_minus) {
    ConjugacyConfig c;
    c.epsilon = epsilon;
    c.xi = xi;
    c.eta_lambda = eta_lambda;
    c.xi_lambda = xi_lambda;
    c.p_minus = p_minus;
    const double denom =
        4.0 * xi_lambda * std::pow(1.0 + 2.0 * eta_lambda * xi_lambda, dimension - 1);
    c.rho_xi = xi / denom;
    c.kappa = 1.0 / denom;
    c.validate();
    return c;
}

void ConjugacyConfig::validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("closeness target must be positive");
    if (!(xi > 0.0) || xi >= 1.0)
        throw ValidationError("cutoff radius must lie in (0, 1)");
    if (!(horizon > 0.0) || !(tol > 0.0) || !(transport_step > 0.0))
        throw ValidationError("conjugacy numeric parameters must be positive");
    if (kappa > 0.0 && xi_lambda > 0.0 && kappa * xi_lambda > 0.25 + 1e-12)
        throw ValidationError("contraction margin kappa * xi_lambda exceeds 1/4");
}

OffsetResult conjugacy_offset(const VectorFieldSpec& S, const VectorFieldSpec& V,
                              const Vector& w, const TransversalFrame& frame,
                              const ConjugacyConfig& config) {
    config.validate();
    if ((frame.base - w).norm() > 1e-9 * (1.0 + w.norm()))
        throw ValidationError("frame is not based at the requested sample");
    const PreparedChart pc = prepare_chart(S, V, w, frame, config, config.horizon);
    return offset_from_prepared(pc, config);
}

std::vector<std::pair<double, double>> verify_equivariance(
    const VectorFieldSpec& S, const VectorFieldSpec& V, const Vector& w, const Vector& h,
    const std::vector<double>& t_grid, const ConjugacyConfig& config) {
    config.validate();
    double reach = config.horizon;
    for (double t : t_grid) reach = std::max(reach, std::abs(t));

    const TransversalFrame frame = stable_adapted_frame(
        S, w, config.p_minus, config.splitting_estimation_time, config.transport_step);
    const PreparedChart pc = prepare_chart(S, V, w, frame, config, reach);
    return equivariance_with_chart(pc, S, V, h, t_grid, config);
}

ConjugacyResult conjugacy_map(const VectorFieldSpec& S, const VectorFieldSpec& V,
                              const std::vector<Vector>& samples,
                              const HyperbolicityCertificate& certificate,
                              const DichotomyConstants& constants,
                              const ConjugacyConfig& config) {
    config.validate();
    if (!certificate.pass)
        throw PreconditionError("conjugacy construction needs a passing certificate");
    if (samples.empty()) throw ValidationError("conjugacy needs at least one sample");

    ConjugacyResult result;
    result.certificate = certificate;
    result.constants = constants;
    result.offset_bound = std::min(config.epsilon, config.xi) / 4.0;

    // Pin the chart radius once so every sample shares the same tube.
    ConjugacyConfig shared = config;
    if (shared.chart_radius <= 0.0) {
        const TransversalFrame probe_frame =
            stable_adapted_frame(S, samples.front(), config.p_minus,
                                 config.splitting_estimation_time,
                                 config.transport_step);
        const FramePath probe = frame_transport(
            S, samples.front(), probe_frame, -config.horizon, config.horizon,
            config.transport_step);
        shared.chart_radius = estimate_chart_radius(probe, config.chart_radius_cap);
    }

    double reach = shared.horizon;
    for (double t : shared.residual_t_grid) reach = std::max(reach, std::abs(t));

    result.samples.assign(samples.size(), SampleRecord{});
    parallel_for_index(samples.size(), [&](std::size_t i) {
        SampleRecord& rec = result.samples[i];
        rec.w = samples[i];
        try {
            const TransversalFrame frame =
                stable_adapted_frame(S, rec.w, shared.p_minus,
                                     shared.splitting_estimation_time,
                                     shared.transport_step);
            const PreparedChart pc = prepare_chart(S, V, rec.w, frame, shared, reach);
            OffsetResult off = offset_from_prepared(pc, shared);
            rec.x = off.x;
            rec.h = off.h;
            rec.sup_norm = off.solution.sup_norm;
            rec.checklist = off.checklist;
            rec.ok = true;
            if (!off.within_bound) {
                rec.ok = false;
                rec.failure = "offset norm " + std::to_string(off.x.norm()) +
                              " exceeds min(epsilon, xi)/4";
            } else if (!shared.residual_t_grid.empty()) {
                rec.residuals = equivariance_with_chart(pc, S, V, rec.h,
                                                        shared.residual_t_grid, shared);
            }
        } catch (const Error& e) {
            rec.ok = false;
            rec.failure = e.what();
        }
    });
    for (const auto& rec : result.samples)
        if (rec.ok) result.max_offset_norm = std::max(result.max_offset_norm, rec.h.norm());
    result.offsets_within_epsilon = result.max_offset_norm < config.epsilon;

    verify_injectivity_and_frame_independence(result, S, V, shared);
    return result;
}

void verify_injectivity_and_frame_independence(ConjugacyResult& result,
                                               const VectorFieldSpec& S,
                                               const VectorFieldSpec& V,
                                               const ConjugacyConfig& config) {
    std::vector<const SampleRecord*> ok;
    for (const auto& rec : result.samples)
        if (rec.ok) ok.push_back(&rec);

    InjectivityReport& inj = result.injectivity;
    if (ok.size() < 2) {
        inj.vacuous = true;
        inj.positive = true;
        inj.pass = true;
        result.min_image_separation = 0.0;
    } else {
        double min_sep = std::numeric_limits<double>::infinity();
        double max_h = 0.0;
        for (const auto* r : ok) max_h = std::max(max_h, r->h.norm());
        int violations = 0;
        for (std::size_t i = 0; i < ok.size(); ++i) {
            for (std::size_t j = i + 1; j < ok.size(); ++j) {
                const Vector hi = ok[i]->w + ok[i]->h;
                const Vector hj = ok[j]->w + ok[j]->h;
                const double sep = (hi - hj).norm();
                min_sep = std::min(min_sep, sep);
                const double wsep = (ok[i]->w - ok[j]->w).norm();
                if (wsep >= config.epsilon && sep < wsep - 2.0 * max_h - 1e-12)
                    ++violations;
            }
        }
        inj.min_separation = min_sep;
        inj.positive = min_sep > 0.0;
        inj.displacement_violations = violations;
        inj.pass = inj.positive && violations == 0;
        result.min_image_separation = min_sep;
    }

    FrameIndependenceReport& fir = result.frame_independence;
    if (ok.empty()) {
        fir.pass = false;
        return;
    }
    std::mt19937_64 rng(config.seed ^ 0xda3e39cb94b95bdbULL);
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < ok.size(); ++i) picks.push_back(i);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(std::min<std::size_t>(5, picks.size()));

    const int m = static_cast<int>(ok.front()->x.size());
    for (std::size_t idx : picks) {
        const SampleRecord& rec = *ok[idx];
        try {
            const TransversalFrame base_frame =
                stable_adapted_frame(S, rec.w, config.p_minus,
                                     config.splitting_estimation_time,
                                     config.transport_step);
            const Matrix Q = block_rotation(m, config.p_minus, rng);
            const TransversalFrame rotated = TransversalFrame::create(
                base_frame.base, base_frame.field_at_base, base_frame.columns * Q);
            const OffsetResult off = conjugacy_offset(S, V, rec.w, rotated, config);
            fir.max_discrepancy =
                std::max(fir.max_discrepancy, (off.h - rec.h).norm());
            ++fir.tested;
        } catch (const Error&) {
            // A failed recomputation counts as a discrepancy we cannot bound.
            fir.max_discrepancy = std::numeric_limits<double>::infinity();
            ++fir.tested;
        }
    }
    fir.pass = fir.tested > 0 &&
               fir.max_discrepancy <= std::max(10.0 * config.tol, 1e-12);
}

} // namespace liao
