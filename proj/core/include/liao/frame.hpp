#pragma once

#include <cstdint>
#include <vector>

#include "liao/field.hpp"
#include "liao/ode.hpp"

namespace liao {

/// Orthonormal (n-1)-frame spanning the hyperplane orthogonal to the field
/// vector at its base point. Columns act as the isometry y -> gamma * y
/// between coordinates and the transversal tangent space.
struct TransversalFrame {
    Vector base;
    Vector field_at_base;
    Matrix columns; ///< n x (n-1)

    int ambient_dimension() const { return static_cast<int>(base.size()); }
    int fiber_dimension() const { return static_cast<int>(columns.cols()); }

    Vector to_ambient(const Vector& y) const { return columns * y; }
    Vector to_coordinates(const Vector& x) const { return columns.transpose() * x; }

    /// Validates orthonormality (1e-12) and transversality (1e-12 * |S|).
    static TransversalFrame create(Vector base, Vector field_at_base, Matrix columns);
};

/// Columns 2..n of the Householder reflector sending v/|v| to the first
/// axis; a deterministic orthonormal basis of the orthogonal complement.
Matrix householder_complement(const Vector& v);

/// Deterministic transversal frame at a base point. Throws SingularityError
/// when the field vector vanishes.
TransversalFrame orthonormal_complement(const Vector& base, const Vector& field_at_base);

/// Frame path along an orbit on a uniform grid, with the per-step
/// upper-triangular Gram-Schmidt factors cached for the reduced system.
struct FramePath {
    std::vector<double> times; ///< uniform ascending grid containing 0
    double step = 0.0;
    std::vector<Vector> base_states;
    std::vector<Vector> base_derivs; ///< field vectors along the orbit
    std::vector<Matrix> frames;      ///< n x (n-1) per grid time
    std::vector<Matrix> step_factors; ///< forward factor per step, (n-1)^2 upper triangular

    int ambient_dimension() const { return static_cast<int>(base_states.front().size()); }
    int fiber_dimension() const { return ambient_dimension() - 1; }
    double t_min() const { return times.front(); }
    double t_max() const { return times.back(); }
    std::size_t zero_index() const { return zero_index_; }

    std::size_t segment_index(double t) const;
    /// Cubic Hermite interpolation of the orbit (exact at grid times).
    Vector base_at(double t) const;
    /// Continuous frame: linear column interpolation re-orthonormalized by
    /// Gram-Schmidt with the positive-diagonal convention.
    Matrix frame_at(double t) const;
    /// Centered difference of the continuous frame with the transport step.
    Matrix frame_derivative_at(double t) const;

    TransversalFrame frame_record(std::size_t index) const;

    std::size_t zero_index_ = 0;
};

struct TransportOptions {
    int substeps = 1;         ///< fixed RK4 substeps per grid step
    double cond_limit = 1e12; ///< rank-loss guard on the pushed columns
    double min_speed = 1e-12;
};

/// Discrete QR transport of a frame along the orbit of w0: push columns by
/// the one-step variational flow, project onto the new transversal plane,
/// re-orthonormalize. The span is snapped to multiples of h around 0.
FramePath frame_transport(const VectorFieldSpec& spec, const Vector& w0,
                          const TransversalFrame& frame0, double t_min, double t_max,
                          double h, const TransportOptions& opts = {});

/// The derivative of the cross-section map in moving-frame coordinates,
/// sampled along a path.
struct TransversalPropagatorPath {
    std::vector<double> times;
    std::vector<Matrix> matrices; ///< (n-1)^2; identity at t = 0
};

/// Evaluates gamma(t)^T Pi(t) Dphi_t gamma(0) on the frame grid using the
/// trajectory's fundamental matrices (Pi projects out the flow direction).
TransversalPropagatorPath transversal_propagator(const Trajectory& traj,
                                                 const FramePath& frames);

/// Same object accumulated from the cached per-step factors (no ambient
/// fundamental matrices needed; stable for long spans).
TransversalPropagatorPath accumulate_propagators(const FramePath& frames);

/// Builds a stable-first frame at w: the leading p_minus columns span the
/// estimated contracting transversal subspace. The splitting is read off
/// the singular vectors of the finite-time transversal propagator.
TransversalFrame stable_adapted_frame(const VectorFieldSpec& spec, const Vector& w,
                                      int p_minus, double estimation_time = 5.0,
                                      double step = 1e-3);

} // namespace liao
