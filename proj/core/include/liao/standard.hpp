#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "liao/frame.hpp"
#include "liao/reduced.hpp"

namespace liao {

/// Moving chart around an orbit: P(t, y) = phi_t(w) + gamma(t) y, valid for
/// |y| below the chart radius and t one transport step inside the span.
class SectionChart {
public:
    SectionChart(std::shared_ptr<const FramePath> frames, double radius);

    const FramePath& frames() const { return *frames_; }
    std::shared_ptr<const FramePath> frames_ptr() const { return frames_; }
    double radius() const { return radius_; }
    double t_lo() const;
    double t_hi() const;

    Vector base_at(double t) const { return frames_->base_at(t); }
    /// Time derivative of the interpolated orbit (exact at grid times).
    Vector base_derivative_at(double t) const;
    Matrix frame_at(double t) const { return frames_->frame_at(t); }
    Matrix frame_derivative_at(double t) const { return frames_->frame_derivative_at(t); }

    /// Ambient point of chart coordinates; the transversal part has norm |y|.
    Vector embed(double t, const Vector& y) const;

    /// Inverts the chart near t_hint: returns (t, y) with embed(t, y) = point.
    std::pair<double, Vector> coordinates(const Vector& point, double t_hint) const;

private:
    std::shared_ptr<const FramePath> frames_;
    double radius_;
};

/// Components of a lifted field vector: longitudinal speed and the
/// transversal part in frame coordinates.
struct LiftedVector {
    double speed = 0.0; ///< component along the section-time direction
    Vector transversal;
};

/// Solves (D P)(t, y) * lift = V(P(t, y)). Throws ChartError when the chart
/// Jacobian is too ill conditioned (estimate above cond_limit).
LiftedVector lift_field(const SectionChart& chart, const VectorFieldSpec& V, double t,
                        const Vector& y, double cond_limit = 1e8);

struct RemainderEvaluation {
    Vector rhs;       ///< transversal dynamics V*(t, y)
    Vector remainder; ///< V*(t, y) - R(t) y
    double speed = 0.0;
};

/// Divides the lifted transversal part by the longitudinal speed and
/// subtracts the linear part. The speed must stay in the [1/2, 2] window;
/// outside it the perturbation is not in the admissible neighborhood.
RemainderEvaluation standard_rhs_and_remainder(const SectionChart& chart,
                                               const VectorFieldSpec& V,
                                               const ReducedCocycle& cocycle, double t,
                                               const Vector& y);

/// Standard system of a field in a fixed chart, with the reduced cocycle
/// supplying the linear part.
class StandardSystem {
public:
    StandardSystem(SectionChart chart, VectorFieldSpec field,
                   std::shared_ptr<const ReducedCocycle> cocycle);

    const SectionChart& chart() const { return chart_; }
    const VectorFieldSpec& field() const { return field_; }
    const ReducedCocycle& cocycle() const { return *cocycle_; }

    double speed(double t, const Vector& y) const;
    Vector rhs(double t, const Vector& y) const;
    Vector remainder(double t, const Vector& y) const;

private:
    SectionChart chart_;
    VectorFieldSpec field_;
    std::shared_ptr<const ReducedCocycle> cocycle_;
};

/// C^2 cutoff: 1 on [0, 1/2], 0 on [1, inf), quintic smoothstep between.
double bump(double r);

/// Total-function forcing b(|y|/xi) * remainder(t, y); identically zero for
/// |y| >= xi, so it never evaluates the chart outside its tube.
class BumpedRemainder {
public:
    BumpedRemainder(std::shared_ptr<const StandardSystem> system, double xi);
    Vector operator()(double t, const Vector& y) const;
    double xi() const { return xi_; }

private:
    std::shared_ptr<const StandardSystem> system_;
    double xi_;
};

BumpedRemainder bump_modify(std::shared_ptr<const StandardSystem> system, double xi,
                            double chart_radius);

struct FieldDistanceReport {
    double distance = 0.0;            ///< sup |lift(S)-lift(V)| + |d/dy of the difference|
    double ambient_c1_estimate = 0.0; ///< sup |S-V| + |S'-V'| over the probed points
    double flat_ratio = 0.0;          ///< ambient estimate / distance (0 when distance is 0)
};

FieldDistanceReport field_distance(const VectorFieldSpec& S, const VectorFieldSpec& V,
                                   const std::vector<SectionChart>& charts,
                                   const std::vector<double>& t_samples,
                                   const std::vector<Vector>& y_samples);

/// Condition estimate of the chart Jacobian at (t, y).
double chart_condition_estimate(const SectionChart& chart, double t, const Vector& y);

/// Largest radius (up to cap) where the chart Jacobian stays well
/// conditioned on a probe grid.
double estimate_chart_radius(const FramePath& frames, double cap,
                             double cond_limit = 1e6, int t_probes = 16);

} // namespace liao
