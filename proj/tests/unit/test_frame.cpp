#include <doctest.h>

#include <random>

#include "liao/errors.hpp"
#include "liao/frame.hpp"
#include "support.hpp"

using namespace liao;
using namespace liao::testing;

namespace {

TransversalFrame stable_first_saddle_frame(const Vector& base) {
    Matrix cols(3, 2);
    cols << 0, 0, 0, 1, 1, 0; // columns e_z, e_y
    return TransversalFrame::create(base, vec3(1, 0, 0), cols);
}

void check_frame_invariants(const TransversalFrame& f) {
    const int m = f.fiber_dimension();
    CHECK((f.columns.transpose() * f.columns - Matrix::Identity(m, m))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((f.field_at_base.transpose() * f.columns).cwiseAbs().maxCoeff() <=
          1e-12 * f.field_at_base.norm());
}

} // namespace

TEST_SUITE("frame") {

TEST_CASE("axis-aligned complement keeps the remaining axes") {
    const Matrix cols = householder_complement(vec3(1, 0, 0));
    CHECK((cols.col(0) - vec3(0, 1, 0)).norm() <= 1e-15);
    CHECK((cols.col(1) - vec3(0, 0, 1)).norm() <= 1e-15);
}

TEST_CASE("complement of a coordinate direction satisfies the frame invariants") {
    const TransversalFrame f = orthonormal_complement(vec3(5, 5, 5), vec3(0, 2, 0));
    check_frame_invariants(f);
}

TEST_CASE("complement in dimension four") {
    Vector v(4);
    v << 1, 1, 1, 1;
    const Matrix cols = householder_complement(v);
    REQUIRE(cols.cols() == 3);
    CHECK((cols.transpose() * cols - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <=
          1e-12);
    CHECK((v.transpose() * cols).cwiseAbs().maxCoeff() <= 1e-12 * v.norm());
}

TEST_CASE("complement of the zero vector is a singularity") {
    CHECK_THROWS_AS(householder_complement(vec3(0, 0, 0)), SingularityError);
}

TEST_CASE("frame validation rejects non-orthonormal columns") {
    Matrix cols(3, 2);
    cols << 0, 0, 0, 1, 0.5, 0;
    CHECK_THROWS_AS(TransversalFrame::create(vec3(0, 0, 0), vec3(1, 0, 0), cols),
                    ValidationError);
}

TEST_CASE("invariant planes give a constant frame path") {
    const TransversalFrame f0 = stable_first_saddle_frame(vec3(0, 0, 0));
    const FramePath path =
        frame_transport(saddle_line_field(), vec3(0, 0, 0), f0, -1.0, 1.0, 1e-2);
    for (const Matrix& g : path.frames)
        CHECK((g - f0.columns).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("degenerate span keeps the initial frame untouched") {
    const TransversalFrame f0 = stable_first_saddle_frame(vec3(0, 0, 0));
    const FramePath path =
        frame_transport(saddle_line_field(), vec3(0, 0, 0), f0, 0.0, 0.0, 1e-2);
    REQUIRE(path.times.size() == 1);
    CHECK((path.frames.front() - f0.columns).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transport self-convergence under step refinement") {
    const VectorFieldSpec spec = rotated_saddle(0.3);
    const TransversalFrame f0 =
        orthonormal_complement(vec3(0, 0, 0), eval_field(spec, vec3(0, 0, 0)));
    const FramePath coarse = frame_transport(spec, vec3(0, 0, 0), f0, 0.0, 1.0, 1e-2);
    const FramePath fine = frame_transport(spec, vec3(0, 0, 0), f0, 0.0, 1.0, 1e-3);
    for (double t : {0.5, 1.0}) {
        const Matrix diff = coarse.frame_at(t) - fine.frame_at(t);
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-2);
        // The transport samples the frame flow itself, so the agreement is
        // limited only by the per-step integrator error.
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("rank loss inside one step is reported") {
    // Transversal generator with eigenvalues 0 and -60: one pushed column is
    // crushed by e^-60 within a unit step.
    VectorFieldSpec spec;
    spec.dimension = 3;
    spec.components = {{term(1.0, {0, 0, 0})},
                       {term(-30.0, {0, 1, 0}), term(30.0, {0, 0, 1})},
                       {term(30.0, {0, 1, 0}), term(-30.0, {0, 0, 1})}};
    const TransversalFrame f0 =
        orthonormal_complement(vec3(0, 0, 0), vec3(1, 0, 0));
    TransportOptions opts;
    opts.substeps = 200;
    CHECK_THROWS_AS(frame_transport(spec, vec3(0, 0, 0), f0, 0.0, 1.0, 1.0, opts),
                    DegenerateTransportError);
}

TEST_CASE("transversal propagator of the saddle is the diagonal exponential") {
    FlowOptions fopts;
    fopts.tol = 1e-12;
    fopts.with_variational = true;
    const Trajectory traj =
        integrate_flow(saddle_line_field(), vec3(0, 0, 0), -1.2, 1.2, fopts);
    const TransversalFrame f0 = stable_first_saddle_frame(vec3(0, 0, 0));
    const FramePath path =
        frame_transport(saddle_line_field(), vec3(0, 0, 0), f0, -1.0, 1.0, 1e-2);
    const TransversalPropagatorPath props = transversal_propagator(traj, path);

    const std::size_t z = path.zero_index();
    CHECK(props.matrices[z].isIdentity(1e-12));
    const std::size_t at1 = z + 100; // t = 1 at step 1e-2
    Matrix expected(2, 2);
    expected << std::exp(-1.0), 0, 0, std::exp(1.0);
    CHECK((props.matrices[at1] - expected).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("propagator composition across a time split") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.2, 1.1);
    for (const VectorFieldSpec& spec : {saddle_line_field(), rotated_saddle(0.4)}) {
        for (int trial = 0; trial < 3; ++trial) {
            const double t1 = u(rng), t2 = u(rng);
            const TransversalFrame f0 =
                orthonormal_complement(vec3(0, 0, 0), eval_field(spec, vec3(0, 0, 0)));
            const FramePath path =
                frame_transport(spec, vec3(0, 0, 0), f0, 0.0, t1 + t2 + 0.01, 1e-3);
            const TransversalPropagatorPath props = accumulate_propagators(path);

            const auto index_of = [&](double t) {
                return static_cast<std::size_t>(std::lround(t / path.step));
            };
            const std::size_t i1 = index_of(t1);
            const double t1_snap = path.times[i1];
            const std::size_t i12 = index_of(t1_snap + t2);
            const double t2_snap = path.times[i12] - t1_snap;

            const TransversalFrame f1 = path.frame_record(i1);
            const FramePath path2 = frame_transport(spec, f1.base, f1, 0.0,
                                                    t2_snap + 0.01, 1e-3);
            const TransversalPropagatorPath props2 = accumulate_propagators(path2);
            const std::size_t j2 = static_cast<std::size_t>(
                std::lround(t2_snap / path2.step));

            const Matrix composed = props2.matrices[j2] * props.matrices[i1];
            const Matrix direct = props.matrices[i12];
            CHECK((composed - direct).cwiseAbs().maxCoeff() <=
                  1e-8 * (1.0 + direct.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("orthonormality and transversality drift over ten thousand steps") {
    const VectorFieldSpec spec = rotated_saddle(0.2);
    const TransversalFrame f0 =
        orthonormal_complement(vec3(0, 0, 0), eval_field(spec, vec3(0, 0, 0)));
    const FramePath path = frame_transport(spec, vec3(0, 0, 0), f0, 0.0, 10.0, 1e-3);
    REQUIRE(path.times.size() >= 10000);
    double worst_gram = 0.0, worst_transversal = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const Matrix& g = path.frames[k];
        worst_gram = std::max(worst_gram,
                              (g.transpose() * g - Matrix::Identity(2, 2))
                                  .cwiseAbs()
                                  .maxCoeff());
        const Vector& s = path.base_derivs[k];
        worst_transversal =
            std::max(worst_transversal,
                     (s.transpose() * g).cwiseAbs().maxCoeff() / s.norm());
    }
    CHECK(worst_gram <= 1e-10);
    CHECK(worst_transversal <= 1e-10);
}

TEST_CASE("frames act as isometries on coordinates") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    const TransversalFrame f = orthonormal_complement(vec3(1, 2, 3), vec3(0.3, -1.1, 0.7));
    for (int trial = 0; trial < 20; ++trial) {
        Vector y(2);
        y << gauss(rng), gauss(rng);
        CHECK(std::abs(f.to_ambient(y).norm() - y.norm()) <= 1e-12 * (1.0 + y.norm()));
    }
}

TEST_CASE("stable-first frame of the saddle puts the contracting axis first") {
    const TransversalFrame f = stable_adapted_frame(saddle_line_field(), vec3(0, 0, 0), 1);
    CHECK((f.columns.col(0) - vec3(0, 0, 1)).norm() <= 1e-9);
    CHECK((f.columns.col(1) - vec3(0, 1, 0)).norm() <= 1e-9);
}

TEST_CASE("stable-first frame tracks rotated eigen directions") {
    const double theta = 0.3;
    const TransversalFrame f = stable_adapted_frame(rotated_saddle(theta), vec3(0, 0, 0), 1);
    const Vector stable_dir = vec3(0, -std::sin(theta), std::cos(theta));
    CHECK(std::min((f.columns.col(0) - stable_dir).norm(),
                   (f.columns.col(0) + stable_dir).norm()) <= 1e-8);
    check_frame_invariants(f);
}

} // TEST_SUITE
