#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "liao/dichotomy.hpp"
#include "liao/standard.hpp"

namespace liao {

/// Parameters of the conjugacy construction. rho_xi and kappa are derived
/// from the certified constants: both share the denominator
/// 4 * xi_lambda * (1 + 2 eta_lambda xi_lambda)^(n-1).
struct ConjugacyConfig {
    double epsilon = 0.1; ///< target closeness
    double xi = 0.05;     ///< cutoff radius
    double rho_xi = 0.0;
    double kappa = 0.0;
    double eta_lambda = 0.0;
    double xi_lambda = 0.0;
    int p_minus = 0;
    double horizon = 24.0; ///< dichotomy window per sample
    double tol = 1e-10;
    double transport_step = 1e-3;
    double chart_radius_cap = 1.0;
    double chart_radius = 0.0; ///< 0 = estimate per call
    double splitting_estimation_time = 5.0;
    int smallness_budget = 200;
    /// When set, violations of the remainder smallness and Lipschitz
    /// inequalities abort instead of being recorded in the checklist.
    bool enforce_smallness = false;
    std::vector<double> residual_t_grid;
    std::uint64_t seed = 0;

    static ConjugacyConfig make(double epsilon, double xi, double eta_lambda,
                                double xi_lambda, int dimension, int p_minus);
    void validate() const;
};

/// Empirical realization of the admissible-neighborhood checklist for a
/// concrete perturbation: speed window, remainder smallness against
/// epsilon * rho_xi, and remainder Lipschitz constant against kappa.
struct NeighborhoodChecklist {
    bool speed_window_ok = false;
    double sup_remainder = 0.0;
    double sup_remainder_bound = 0.0;
    bool smallness_ok = false;
    double lipschitz = 0.0;
    double lipschitz_bound = 0.0;
    bool lipschitz_ok = false;
    double lipschitz_core = 0.0; ///< measured inside the bump-free half ball
};

struct OffsetResult {
    Vector x; ///< offset in frame coordinates, the bounded solution at 0
    Vector h; ///< ambient offset gamma * x
    BoundedSolution solution;
    NeighborhoodChecklist checklist;
    double offset_bound = 0.0; ///< min(epsilon, xi) / 4
    bool within_bound = false;
    std::shared_ptr<const StandardSystem> system;
};

/// Offset of the conjugacy at one sample: builds the adapted bounded-forcing
/// problem with the reduced coefficients of the base field and the
/// bump-modified remainder of the perturbation, and returns its unique
/// bounded solution. The frame must be stable-first.
OffsetResult conjugacy_offset(const VectorFieldSpec& S, const VectorFieldSpec& V,
                              const Vector& w, const TransversalFrame& frame,
                              const ConjugacyConfig& config);

struct SampleRecord {
    Vector w;
    Vector x;
    Vector h;
    double sup_norm = 0.0;
    bool ok = false;
    std::string failure;
    NeighborhoodChecklist checklist;
    std::vector<std::pair<double, double>> residuals; ///< (t, equivariance residual)
};

struct InjectivityReport {
    double min_separation = 0.0;
    bool positive = false;
    int displacement_violations = 0;
    bool pass = false;
    bool vacuous = false;
};

struct FrameIndependenceReport {
    int tested = 0;
    double max_discrepancy = 0.0;
    bool pass = false;
};

struct ConjugacyResult {
    std::vector<SampleRecord> samples;
    double max_offset_norm = 0.0;
    double offset_bound = 0.0;
    bool offsets_within_epsilon = false;
    InjectivityReport injectivity;
    FrameIndependenceReport frame_independence;
    double min_image_separation = 0.0; ///< closedness diagnostic
    HyperbolicityCertificate certificate;
    DichotomyConstants constants;
};

/// Applies conjugacy_offset at every sample, records the image points
/// w + h(w), runs the equivariance residuals over config.residual_t_grid,
/// and fills the injectivity and frame-independence reports. Per-sample
/// failures are collected, not fatal.
ConjugacyResult conjugacy_map(const VectorFieldSpec& S, const VectorFieldSpec& V,
                              const std::vector<Vector>& samples,
                              const HyperbolicityCertificate& certificate,
                              const DichotomyConstants& constants,
                              const ConjugacyConfig& config);

/// Evolves w + h under the cross-section flow of V (standard-system
/// integration in the chart of w) to each section time t and compares with
/// an independently computed offset at the orbit point t.w.
std::vector<std::pair<double, double>> verify_equivariance(
    const VectorFieldSpec& S, const VectorFieldSpec& V, const Vector& w, const Vector& h,
    const std::vector<double>& t_grid, const ConjugacyConfig& config);

/// (a) pairwise-separation checks on the image points; (b) offset recomputed
/// at a few samples with frames rotated inside the stable and unstable
/// blocks, which must not change the ambient offset.
void verify_injectivity_and_frame_independence(ConjugacyResult& result,
                                               const VectorFieldSpec& S,
                                               const VectorFieldSpec& V,
                                               const ConjugacyConfig& config);

} // namespace liao
