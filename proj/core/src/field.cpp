#include "liao/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "liao/errors.hpp"

namespace liao {

namespace {

double int_pow(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

// Value and gradient of a single term at w.
void term_eval(const FieldTerm& term, const Vector& w, double& value, Vector& grad) {
    const int n = static_cast<int>(w.size());
    double mono = term.coef;
    for (int i = 0; i < n; ++i) mono *= int_pow(w[i], term.powers[i]);

    double trig_v = 1.0, trig_d = 0.0;
    if (term.trig) {
        const double arg = term.trig->coeffs.dot(w) + term.trig->phase;
        if (term.trig->kind == TrigFactor::Kind::Sin) {
            trig_v = std::sin(arg);
            trig_d = std::cos(arg);
        } else {
            trig_v = std::cos(arg);
            trig_d = -std::sin(arg);
        }
    }
    value = mono * trig_v;

    for (int j = 0; j < n; ++j) {
        double dmono = 0.0;
        if (term.powers[j] > 0) {
            dmono = term.coef * term.powers[j] * int_pow(w[j], term.powers[j] - 1);
            for (int i = 0; i < n; ++i)
                if (i != j) dmono *= int_pow(w[i], term.powers[i]);
        }
        double g = dmono * trig_v;
        if (term.trig) g += mono * trig_d * term.trig->coeffs[j];
        grad[j] += g;
    }
}

} // namespace

void VectorFieldSpec::validate() const {
    if (dimension < 2)
        throw ValidationError("vector field dimension must be at least 2");
    if (static_cast<int>(components.size()) != dimension)
        throw ValidationError("vector field '" + name + "' needs one term list per component");
    for (const auto& comp : components) {
        for (const auto& term : comp) {
            if (!std::isfinite(term.coef))
                throw ValidationError("non-finite coefficient in field '" + name + "'");
            if (static_cast<int>(term.powers.size()) != dimension)
                throw ValidationError("term power list length mismatch in field '" + name + "'");
            for (int k : term.powers)
                if (k < 0) throw ValidationError("negative exponent in field '" + name + "'");
            if (term.trig) {
                if (static_cast<int>(term.trig->coeffs.size()) != dimension)
                    throw ValidationError("trig linear form length mismatch in field '" + name + "'");
                if (!term.trig->coeffs.allFinite() || !std::isfinite(term.trig->phase))
                    throw ValidationError("non-finite trig data in field '" + name + "'");
            }
        }
    }
}

Vector eval_field(const VectorFieldSpec& spec, const Vector& w) {
    const int n = spec.dimension;
    if (static_cast<int>(w.size()) != n)
        throw ValidationError("point dimension does not match field '" + spec.name + "'");
    Vector value = Vector::Zero(n);
    for (int c = 0; c < n; ++c) {
        for (const auto& term : spec.components[c]) {
            double v = term.coef;
            for (int i = 0; i < n; ++i) v *= int_pow(w[i], term.powers[i]);
            if (term.trig) {
                const double arg = term.trig->coeffs.dot(w) + term.trig->phase;
                v *= (term.trig->kind == TrigFactor::Kind::Sin) ? std::sin(arg)
                                                                : std::cos(arg);
            }
            value[c] += v;
        }
        if (!std::isfinite(value[c]))
            throw EvaluationError("component " + std::to_string(c) + " of field '" +
                                      spec.name + "' evaluated to a non-finite value",
                                  c);
    }
    return value;
}

std::pair<Vector, Matrix> eval_field_and_jacobian(const VectorFieldSpec& spec,
                                                  const Vector& w) {
    Vector value;
    Matrix jac;
    eval_field_and_jacobian_into(spec, w, value, jac);
    return {std::move(value), std::move(jac)};
}

void eval_field_and_jacobian_into(const VectorFieldSpec& spec, const Vector& w,
                                  Vector& value, Matrix& jac) {
    const int n = spec.dimension;
    if (static_cast<int>(w.size()) != n)
        throw ValidationError("point dimension does not match field '" + spec.name + "'");

    value.setZero(n);
    jac.setZero(n, n);
    thread_local Vector grad;
    grad.resize(n);
    for (int c = 0; c < n; ++c) {
        for (const auto& term : spec.components[c]) {
            double v = 0.0;
            grad.setZero();
            term_eval(term, w, v, grad);
            value[c] += v;
            jac.row(c) += grad.transpose();
        }
        if (!std::isfinite(value[c]) || !jac.row(c).allFinite())
            throw EvaluationError("component " + std::to_string(c) + " of field '" +
                                      spec.name + "' evaluated to a non-finite value",
                                  c);
    }
}

Vector Trajectory::state_at(double t) const {
    const Vector& full = (t < 0.0) ? sweep_backward.at(t) : sweep_forward.at(t);
    if (!joint_variational) return full;
    return full.head(dimension());
}

Matrix Trajectory::fundamental_at(double t) const {
    if (!joint_variational)
        throw Error("trajectory was integrated without the variational equation");
    const int n = dimension();
    const Vector& full = (t < 0.0) ? sweep_backward.at(t) : sweep_forward.at(t);
    return Eigen::Map<const Matrix>(full.data() + n, n, n);
}

Trajectory integrate_flow(const VectorFieldSpec& spec, const Vector& w0,
                          double t_min, double t_max, const FlowOptions& opts) {
    spec.validate();
    if (t_min > 0.0 || t_max < 0.0)
        throw ValidationError("integration span must contain 0");
    if (opts.tol <= 0.0) throw ValidationError("integration tolerance must be positive");
    const int n = spec.dimension;
    if (static_cast<int>(w0.size()) != n)
        throw ValidationError("initial point dimension mismatch");

    const bool var = opts.with_variational;

    OdeRhs rhs;
    if (!var) {
        rhs = [&spec](double, const Vector& y, Vector& dydt) {
            dydt = eval_field(spec, y);
        };
    } else {
        rhs = [&spec, n](double, const Vector& y, Vector& dydt) {
            const Vector w = y.head(n);
            auto [s, jac] = eval_field_and_jacobian(spec, w);
            dydt.resize(n + n * n);
            dydt.head(n) = s;
            Eigen::Map<const Matrix> X(y.data() + n, n, n);
            Eigen::Map<Matrix> dX(dydt.data() + n, n, n);
            dX = jac * X;
        };
    }

    Vector y0;
    if (var) {
        y0 = Vector::Zero(n + n * n);
        y0.head(n) = w0;
        Eigen::Map<Matrix>(y0.data() + n, n, n).setIdentity();
    } else {
        y0 = w0;
    }

    OdeOptions ode;
    ode.tol = opts.tol;
    ode.max_step = opts.max_step;
    ode.state_bound = opts.blowup_bound;
    if (var) {
        ode.bound_norm = [n](const Vector& y) {
            return y.head(n).lpNorm<Eigen::Infinity>();
        };
    }

    Trajectory traj;
    traj.base_point = w0;
    traj.joint_variational = var;
    traj.sweep_backward = dopri5_integrate(rhs, y0, 0.0, t_min, ode);
    traj.sweep_forward = dopri5_integrate(rhs, y0, 0.0, t_max, ode);

    // Merge the two sweeps into one ascending grid containing 0 once.
    const auto& bw = traj.sweep_backward;
    const auto& fw = traj.sweep_forward;
    for (std::size_t i = bw.times.size(); i-- > 1;) {
        traj.times.push_back(bw.times[i]);
        traj.states.push_back(var ? Vector(bw.states[i].head(n)) : bw.states[i]);
        if (var)
            traj.fundamental.push_back(
                Eigen::Map<const Matrix>(bw.states[i].data() + n, n, n));
    }
    for (std::size_t i = 0; i < fw.times.size(); ++i) {
        traj.times.push_back(fw.times[i]);
        traj.states.push_back(var ? Vector(fw.states[i].head(n)) : fw.states[i]);
        if (var)
            traj.fundamental.push_back(
                Eigen::Map<const Matrix>(fw.states[i].data() + n, n, n));
    }
    return traj;
}

UniformityReport check_uniformity(const VectorFieldSpec& spec,
                                  const std::vector<Vector>& samples,
                                  std::vector<double> deltas, int random_probes,
                                  std::uint64_t seed) {
    spec.validate();
    if (samples.empty()) throw ValidationError("uniformity check needs samples");
    const int n = spec.dimension;

    UniformityReport rep;
    rep.sample_count = static_cast<int>(samples.size());
    rep.inf_speed = std::numeric_limits<double>::infinity();

    std::vector<Matrix> jacobians;
    jacobians.reserve(samples.size());
    for (const auto& w : samples) {
        auto [s, jac] = eval_field_and_jacobian(spec, w);
        const double speed = s.norm();
        rep.inf_speed = std::min(rep.inf_speed, speed);
        rep.sup_speed = std::max(rep.sup_speed, speed);
        rep.sup_jacobian =
            std::max(rep.sup_jacobian, jac.jacobiSvd().singularValues()(0));
        jacobians.push_back(std::move(jac));
    }
    if (rep.inf_speed == 0.0)
        throw PreconditionError(
            "a sample is a singularity of the field (inf speed 0 violates the "
            "nonvanishing-speed condition)");

    std::sort(deltas.begin(), deltas.end());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double running = 0.0;
    for (double delta : deltas) {
        if (delta <= 0.0) throw ValidationError("continuity deltas must be positive");
        for (std::size_t si = 0; si < samples.size(); ++si) {
            const Vector& w = samples[si];
            std::vector<Vector> dirs;
            for (int i = 0; i < n; ++i) {
                dirs.push_back(Vector::Unit(n, i));
                dirs.push_back(-Vector::Unit(n, i));
            }
            for (int r = 0; r < random_probes; ++r) {
                Vector d(n);
                for (int i = 0; i < n; ++i) d[i] = gauss(rng);
                if (d.norm() > 1e-12) dirs.push_back(d / d.norm());
            }
            for (const auto& d : dirs) {
                auto [sv, jac_probe] = eval_field_and_jacobian(spec, Vector(w + delta * d));
                (void)sv;
                const Matrix diff = jac_probe - jacobians[si];
                running = std::max(running, diff.jacobiSvd().singularValues()(0));
            }
        }
        rep.continuity_modulus.emplace_back(delta, running);
    }
    return rep;
}

} // namespace liao
