#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "liao/ode.hpp"

namespace liao {

/// Optional single-frequency factor sin(a.x + b) or cos(a.x + b).
struct TrigFactor {
    enum class Kind { Sin, Cos };
    Kind kind = Kind::Sin;
    Vector coeffs; ///< the linear form a
    double phase = 0.0;
};

/// One term: coef * prod_i x_i^powers[i] * [trig factor].
struct FieldTerm {
    double coef = 0.0;
    std::vector<int> powers; ///< one non-negative exponent per coordinate
    std::optional<TrigFactor> trig;
};

/// Term-list definition of a C^1 vector field with an exact Jacobian.
struct VectorFieldSpec {
    std::string name;
    int dimension = 0;
    std::vector<std::vector<FieldTerm>> components; ///< one term list per component

    /// Throws ValidationError on shape problems (dimension < 2, wrong
    /// power/trig lengths, non-finite coefficients).
    void validate() const;
};

Vector eval_field(const VectorFieldSpec& spec, const Vector& w);

/// Returns (S(w), S'(w)) with the Jacobian differentiated term by term.
/// Throws EvaluationError, naming the component, on non-finite results.
std::pair<Vector, Matrix> eval_field_and_jacobian(const VectorFieldSpec& spec,
                                                  const Vector& w);

/// Allocation-free variant writing into caller storage (hot paths).
void eval_field_and_jacobian_into(const VectorFieldSpec& spec, const Vector& w,
                                  Vector& value, Matrix& jac);

/// Orbit segment with optional fundamental-matrix path.
class Trajectory {
public:
    Vector base_point;
    std::vector<double> times; ///< ascending, contains 0
    std::vector<Vector> states;
    std::vector<Matrix> fundamental; ///< one per time when variational was on

    int dimension() const { return static_cast<int>(base_point.size()); }
    bool has_variational() const { return !fundamental.empty(); }
    double t_min() const { return times.front(); }
    double t_max() const { return times.back(); }

    /// Continuous state between grid points (quartic dense output; exact
    /// at grid times).
    Vector state_at(double t) const;
    /// Continuous fundamental matrix; requires variational integration.
    Matrix fundamental_at(double t) const;

    // Internal: dense sweeps for t <= 0 and t >= 0.
    OdeSolution sweep_backward;
    OdeSolution sweep_forward;
    bool joint_variational = false;
};

struct FlowOptions {
    double tol = 1e-10;
    bool with_variational = false;
    double blowup_bound = 1e8;
    double max_step = 1.0;
};

/// Adaptive integration of w' = S(w) over [t_min, t_max] (the span must
/// contain 0); optionally carries X' = S'(w) X, X(0) = I, jointly.
Trajectory integrate_flow(const VectorFieldSpec& spec, const Vector& w0,
                          double t_min, double t_max, const FlowOptions& opts = {});

/// Estimates of the uniformity conditions over a sample of the invariant set:
/// speed bounds, Jacobian bound, and a continuity modulus for the Jacobian.
struct UniformityReport {
    double inf_speed = 0.0;
    double sup_speed = 0.0;
    double sup_jacobian = 0.0;
    std::vector<std::pair<double, double>> continuity_modulus; ///< (delta, worst |S'(w)-S'(w0)|)
    int sample_count = 0;
};

/// Probes each sample's delta-ball with axis-aligned and seeded random
/// directions. Throws PreconditionError when a sample is a singularity.
UniformityReport check_uniformity(const VectorFieldSpec& spec,
                                  const std::vector<Vector>& samples,
                                  std::vector<double> deltas,
                                  int random_probes = 8, std::uint64_t seed = 0);

} // namespace liao
