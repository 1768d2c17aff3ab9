#include "liao/standard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liao/errors.hpp"

namespace liao {

SectionChart::SectionChart(std::shared_ptr<const FramePath> frames, double radius)
    : frames_(std::move(frames)), radius_(radius) {
    if (!frames_ || frames_->times.empty())
        throw ValidationError("section chart needs a nonempty frame path");
    if (!(radius_ > 0.0)) throw ValidationError("chart radius must be positive");
}

double SectionChart::t_lo() const { return frames_->t_min() + frames_->step; }
double SectionChart::t_hi() const { return frames_->t_max() - frames_->step; }

Vector SectionChart::base_derivative_at(double t) const {
    const auto& fp = *frames_;
    if (fp.times.size() < 2) return fp.base_derivs.front();
    const std::size_t k = fp.segment_index(t);
    const double step = fp.step;
    const double theta = (t - fp.times[k]) / step;
    const double t2 = theta * theta;
    const double d00 = (6 * t2 - 6 * theta) / step, d10 = 3 * t2 - 4 * theta + 1;
    const double d01 = (-6 * t2 + 6 * theta) / step, d11 = 3 * t2 - 2 * theta;
    return d00 * fp.base_states[k] + d10 * fp.base_derivs[k] +
           d01 * fp.base_states[k + 1] + d11 * fp.base_derivs[k + 1];
}

Vector SectionChart::embed(double t, const Vector& y) const {
    if (y.norm() >= radius_)
        throw ChartError("chart coordinates outside the validity radius");
    if (t < frames_->t_min() - 1e-12 || t > frames_->t_max() + 1e-12)
        throw ChartError("chart time outside the frame path span");
    return base_at(t) + frame_at(t) * y;
}

std::pair<double, Vector> SectionChart::coordinates(const Vector& point,
                                                    double t_hint) const {
    double t = t_hint;
    const double fd = std::max(1e-7, 1e-3 * frames_->step);
    for (int it = 0; it < 60; ++it) {
        const Vector base = base_at(t);
        const Vector s = base_derivative_at(t);
        const double g = s.dot(point - base);
        if (std::abs(g) <= 1e-14 * (1.0 + s.squaredNorm())) break;
        const Vector bp = base_at(t + fd), bm = base_at(t - fd);
        const Vector sp = base_derivative_at(t + fd), sm = base_derivative_at(t - fd);
        const double gp = sp.dot(point - bp), gm = sm.dot(point - bm);
        const double dg = (gp - gm) / (2 * fd);
        if (dg == 0.0) break;
        t -= g / dg;
    }
    const Vector base = base_at(t);
    const Vector y = frame_at(t).transpose() * (point - base);
    const Vector recon = base + frame_at(t) * y;
    if ((recon - point).norm() > 1e-8 * (1.0 + point.norm()))
        throw ChartError("point is not in the chart tube");
    return {t, y};
}

LiftedVector lift_field(const SectionChart& chart, const VectorFieldSpec& V, double t,
                        const Vector& y, double cond_limit) {
    if (t < chart.t_lo() - 1e-12 || t > chart.t_hi() + 1e-12)
        throw ChartError("lift time outside the chart validity span");
    if (y.norm() >= chart.radius())
        throw ChartError("lift point outside the chart validity radius");

    const Matrix gamma = chart.frame_at(t);
    // Time column of the chart Jacobian.
    const Vector u = chart.base_derivative_at(t) + chart.frame_derivative_at(t) * y;
    const Vector point = chart.base_at(t) + gamma * y;
    const Vector v = eval_field(V, point);

    // Solve [u | gamma] * (speed, transversal) = v by projecting off the
    // frame span; exact because the frame columns are orthonormal.
    const Vector q = u - gamma * (gamma.transpose() * u);
    const double denom = q.dot(u); // = |q|^2
    const double cond_est = (1.0 + u.norm() * u.norm()) / std::max(denom, 1e-300);
    if (!(denom > 0.0) || cond_est > cond_limit)
        throw ChartError(
            "chart Jacobian is nearly singular at the requested point; shrink "
            "the chart radius");

    LiftedVector out;
    out.speed = q.dot(v) / denom;
    out.transversal = gamma.transpose() * (v - out.speed * u);
    return out;
}

RemainderEvaluation standard_rhs_and_remainder(const SectionChart& chart,
                                               const VectorFieldSpec& V,
                                               const ReducedCocycle& cocycle, double t,
                                               const Vector& y) {
    const LiftedVector lift = lift_field(chart, V, t, y);
    if (lift.speed < 0.5 || lift.speed > 2.0)
        throw NotInNeighborhoodError(
            "lifted longitudinal speed " + std::to_string(lift.speed) +
            " left the [1/2, 2] window; the perturbation is too far from the "
            "base field");
    RemainderEvaluation out;
    out.speed = lift.speed;
    out.rhs = lift.transversal / lift.speed;
    out.remainder = out.rhs - cocycle.R_at(t) * y;
    return out;
}

StandardSystem::StandardSystem(SectionChart chart, VectorFieldSpec field,
                               std::shared_ptr<const ReducedCocycle> cocycle)
    : chart_(std::move(chart)), field_(std::move(field)), cocycle_(std::move(cocycle)) {
    if (!cocycle_) throw ValidationError("standard system needs a reduced cocycle");
    field_.validate();
}

double StandardSystem::speed(double t, const Vector& y) const {
    return lift_field(chart_, field_, t, y).speed;
}

Vector StandardSystem::rhs(double t, const Vector& y) const {
    return standard_rhs_and_remainder(chart_, field_, *cocycle_, t, y).rhs;
}

Vector StandardSystem::remainder(double t, const Vector& y) const {
    return standard_rhs_and_remainder(chart_, field_, *cocycle_, t, y).remainder;
}

double bump(double r) {
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    const double s = 2.0 * (1.0 - r);
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

BumpedRemainder::BumpedRemainder(std::shared_ptr<const StandardSystem> system, double xi)
    : system_(std::move(system)), xi_(xi) {
    if (!system_) throw ValidationError("bump modification needs a standard system");
    if (!(xi_ > 0.0)) throw ValidationError("cutoff radius must be positive");
}

Vector BumpedRemainder::operator()(double t, const Vector& y) const {
    const double r = y.norm() / xi_;
    if (r >= 1.0) return Vector::Zero(y.size());
    return bump(r) * system_->remainder(t, y);
}

BumpedRemainder bump_modify(std::shared_ptr<const StandardSystem> system, double xi,
                            double chart_radius) {
    if (!(xi > 0.0) || xi > chart_radius)
        throw ValidationError("cutoff radius must lie in (0, chart radius]");
    return BumpedRemainder(std::move(system), xi);
}

FieldDistanceReport field_distance(const VectorFieldSpec& S, const VectorFieldSpec& V,
                                   const std::vector<SectionChart>& charts,
                                   const std::vector<double>& t_samples,
                                   const std::vector<Vector>& y_samples) {
    if (charts.empty()) throw ValidationError("field distance needs chart samples");
    FieldDistanceReport rep;
    const double fd = 1e-6;
    for (const auto& chart : charts) {
        for (double t : t_samples) {
            if (t < chart.t_lo() || t > chart.t_hi()) continue;
            for (const auto& y : y_samples) {
                if (y.norm() >= chart.radius()) continue;
                const int m = static_cast<int>(y.size());

                const auto diff_at = [&](const Vector& yy) {
                    const LiftedVector ls = lift_field(chart, S, t, yy);
                    const LiftedVector lv = lift_field(chart, V, t, yy);
                    Vector d(m + 1);
                    d[0] = ls.speed - lv.speed;
                    d.tail(m) = ls.transversal - lv.transversal;
                    return d;
                };

                const Vector d0 = diff_at(y);
                Matrix jac(m + 1, m);
                for (int j = 0; j < m; ++j) {
                    Vector yp = y, ym = y;
                    yp[j] += fd;
                    ym[j] -= fd;
                    jac.col(j) = (diff_at(yp) - diff_at(ym)) / (2 * fd);
                }
                rep.distance = std::max(
                    rep.distance, d0.norm() + jac.jacobiSvd().singularValues()(0));

                const Vector point = chart.embed(t, y);
                auto [sv, sj] = eval_field_and_jacobian(S, point);
                auto [vv, vj] = eval_field_and_jacobian(V, point);
                rep.ambient_c1_estimate = std::max(
                    rep.ambient_c1_estimate,
                    (sv - vv).norm() + (sj - vj).jacobiSvd().singularValues()(0));
            }
        }
    }
    rep.flat_ratio = (rep.distance > 0.0) ? rep.ambient_c1_estimate / rep.distance : 0.0;
    return rep;
}

double chart_condition_estimate(const SectionChart& chart, double t, const Vector& y) {
    const Matrix gamma = chart.frame_at(t);
    const Vector u = chart.base_derivative_at(t) + chart.frame_derivative_at(t) * y;
    const Vector q = u - gamma * (gamma.transpose() * u);
    const double denom = q.dot(u);
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return (1.0 + u.norm() * u.norm()) / denom;
}

double estimate_chart_radius(const FramePath& frames, double cap, double cond_limit,
                             int t_probes) {
    auto fp = std::make_shared<const FramePath>(frames);
    const double lo_t = fp->t_min() + fp->step;
    const double hi_t = fp->t_max() - fp->step;
    const int m = fp->fiber_dimension();

    const auto radius_ok = [&](double r) {
        SectionChart chart(fp, r * (1.0 + 1e-6) + 1e-12);
        for (int i = 0; i <= t_probes; ++i) {
            const double t = lo_t + (hi_t - lo_t) * i / std::max(1, t_probes);
            for (int j = 0; j < m; ++j) {
                for (double sign : {-1.0, 1.0}) {
                    Vector y = Vector::Zero(m);
                    y[j] = sign * r;
                    if (chart_condition_estimate(chart, t, y) > cond_limit) return false;
                }
            }
        }
        return true;
    };

    double lo = 0.0, hi = cap;
    if (radius_ok(cap)) return cap;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (radius_ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

} // namespace liao
