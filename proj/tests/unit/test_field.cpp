#include <doctest.h>

#include <random>

#include "liao/errors.hpp"
#include "liao/field.hpp"
#include "support.hpp"

using namespace liao;
using namespace liao::testing;

namespace {

VectorFieldSpec random_spec(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> npow(0, 3);
    std::uniform_int_distribution<int> nterms(1, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    VectorFieldSpec spec;
    spec.name = "random";
    spec.dimension = n;
    spec.components.resize(n);
    for (int c = 0; c < n; ++c) {
        const int k = nterms(rng);
        for (int t = 0; t < k; ++t) {
            FieldTerm term;
            term.coef = coef(rng);
            term.powers.resize(n);
            for (int i = 0; i < n; ++i) term.powers[i] = npow(rng);
            if (coin(rng)) {
                TrigFactor trig;
                trig.kind = coin(rng) ? TrigFactor::Kind::Sin : TrigFactor::Kind::Cos;
                trig.coeffs = Vector(n);
                for (int i = 0; i < n; ++i) trig.coeffs[i] = coef(rng) / 2.0;
                trig.phase = coef(rng);
                term.trig = trig;
            }
            spec.components[c].push_back(term);
        }
    }
    return spec;
}

Matrix central_difference_jacobian(const VectorFieldSpec& spec, const Vector& w,
                                   double step) {
    const int n = spec.dimension;
    Matrix J(n, n);
    for (int j = 0; j < n; ++j) {
        Vector wp = w, wm = w;
        wp[j] += step;
        wm[j] -= step;
        J.col(j) = (eval_field(spec, wp) - eval_field(spec, wm)) / (2.0 * step);
    }
    return J;
}

} // namespace

TEST_SUITE("field") {

TEST_CASE("saddle line field value and Jacobian at a point") {
    auto [s, jac] = eval_field_and_jacobian(saddle_line_field(), vec3(2, 0.5, -1));
    CHECK(s.isApprox(vec3(1, 0.5, 1), 1e-15));
    Matrix expected = Matrix::Zero(3, 3);
    expected(1, 1) = 1.0;
    expected(2, 2) = -1.0;
    CHECK((jac - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero field evaluates to zero everywhere") {
    VectorFieldSpec zero;
    zero.name = "zero";
    zero.dimension = 2;
    zero.components.resize(2);
    auto [s, jac] = eval_field_and_jacobian(zero, vec2(3.7, -4.1));
    CHECK(s.norm() == 0.0);
    CHECK(jac.norm() == 0.0);
}

TEST_CASE("trig term differentiates by hand") {
    VectorFieldSpec spec = saddle_line_field();
    spec.components[1].push_back(
        trig_term(0.01, {0, 0, 0}, TrigFactor::Kind::Sin, {1, 0, 0}));
    auto [s, jac] = eval_field_and_jacobian(spec, vec3(0, 0, 0));
    CHECK(s.isApprox(vec3(1, 0, 0), 1e-15));
    CHECK(jac(1, 0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(jac(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(jac(2, 2) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("overflowing component names itself") {
    VectorFieldSpec spec;
    spec.dimension = 2;
    spec.components = {{term(1e308, {8, 0})}, {term(1.0, {0, 1})}};
    try {
        eval_field_and_jacobian(spec, vec2(1e30, 0.0));
        FAIL("expected EvaluationError");
    } catch (const EvaluationError& e) {
        CHECK(e.component() == 0);
    }
}

TEST_CASE("Jacobian matches central differences on random fields") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    std::uniform_int_distribution<int> dim(2, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng);
        const VectorFieldSpec spec = random_spec(rng, n);
        Vector w(n);
        for (int i = 0; i < n; ++i) w[i] = coord(rng);
        auto [s, jac] = eval_field_and_jacobian(spec, w);
        const Matrix fd = central_difference_jacobian(spec, w, 1e-5);
        CHECK((jac - fd).norm() <= 1e-6 * (1.0 + jac.norm()));
    }
}

TEST_CASE("flow hits the saddle closed form") {
    FlowOptions opts;
    opts.tol = 1e-10;
    Trajectory traj = integrate_flow(saddle_line_field(), vec3(0, 1, 1), 0.0, 1.0, opts);
    const Vector end = traj.state_at(1.0);
    CHECK(std::abs(end[0] - 1.0) <= 1e-10);
    CHECK(std::abs(end[1] - std::exp(1.0)) <= 1e-9);
    CHECK(std::abs(end[2] - std::exp(-1.0)) <= 1e-10);
}

TEST_CASE("degenerate span returns the initial state with identity variational") {
    FlowOptions opts;
    opts.with_variational = true;
    Trajectory traj = integrate_flow(saddle_line_field(), vec3(2, 3, 4), 0.0, 0.0, opts);
    REQUIRE(traj.times.size() == 1);
    CHECK(traj.states.front().isApprox(vec3(2, 3, 4)));
    CHECK(traj.fundamental.front().isIdentity(1e-15));
}

TEST_CASE("variational flow matches the closed-form fundamental matrix") {
    FlowOptions opts;
    opts.tol = 1e-10;
    opts.with_variational = true;
    Trajectory traj = integrate_flow(saddle_line_field(), vec3(0, 0, 0), 0.0, 2.0, opts);
    const Matrix X = traj.fundamental_at(2.0);
    Matrix expected = Matrix::Zero(3, 3);
    expected(0, 0) = 1.0;
    expected(1, 1) = std::exp(2.0);
    expected(2, 2) = std::exp(-2.0);
    CHECK((X - expected).cwiseAbs().maxCoeff() <= 10 * opts.tol * expected(1, 1));
}

TEST_CASE("finite-time blow-up reports the last valid time") {
    VectorFieldSpec spec;
    spec.dimension = 2;
    // y' = y^2 from y = 1 leaves every bound before t = 1.
    spec.components = {{term(1.0, {2, 0})}, {term(0.0, {0, 0})}};
    FlowOptions opts;
    opts.blowup_bound = 1e6;
    try {
        integrate_flow(spec, vec2(1.0, 0.0), 0.0, 2.0, opts);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.last_valid_time() <= 1.01);
        CHECK(e.last_valid_time() > 0.5);
    }
}

TEST_CASE("flow group law within 50 tol") {
    const double tol = 1e-10;
    FlowOptions opts;
    opts.tol = tol;
    const Vector w0 = vec3(0.0, 0.3, 0.7);
    Trajectory full = integrate_flow(saddle_line_field(), w0, 0.0, 2.0, opts);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double s = u(rng), t = u(rng);
        const Vector mid = full.state_at(s);
        Trajectory second = integrate_flow(saddle_line_field(), mid, 0.0, t, opts);
        const Vector via = second.state_at(t);
        const Vector direct = full.state_at(t + s);
        CHECK((via - direct).norm() <= 50 * tol);
    }
}

TEST_CASE("variational chain rule within 100 tol") {
    const double tol = 1e-10;
    FlowOptions opts;
    opts.tol = tol;
    opts.with_variational = true;
    const Vector w0 = vec3(0.0, 0.2, 0.4);
    Trajectory full = integrate_flow(saddle_line_field(), w0, 0.0, 2.0, opts);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double s = u(rng), t = u(rng);
        Trajectory second =
            integrate_flow(saddle_line_field(), full.state_at(s), 0.0, t, opts);
        const Matrix chained = second.fundamental_at(t) * full.fundamental_at(s);
        const Matrix direct = full.fundamental_at(t + s);
        CHECK((chained - direct).norm() <= 100 * tol * (1.0 + direct.norm()));
    }
}

TEST_CASE("uniformity report on the saddle axis") {
    std::vector<Vector> samples;
    for (int k = -5; k <= 5; ++k) samples.push_back(vec3(k, 0, 0));
    const UniformityReport rep =
        check_uniformity(saddle_line_field(), samples, {0.01, 0.1}, 4, 99);
    CHECK(rep.inf_speed == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rep.sup_speed == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rep.sup_jacobian == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.sample_count == 11);
    // Constant Jacobian: the continuity modulus vanishes.
    for (const auto& [delta, worst] : rep.continuity_modulus) CHECK(worst <= 1e-12);
}

TEST_CASE("continuity modulus of a quadratic component is exactly 2 delta") {
    VectorFieldSpec spec;
    spec.dimension = 3;
    spec.components = {{term(1.0, {0, 0, 0})},
                       {term(1.0, {0, 2, 0})},
                       {term(-1.0, {0, 0, 1})}};
    std::vector<Vector> samples;
    for (int k = -100; k <= 100; k += 10) samples.push_back(vec3(k, 0, 0));
    const UniformityReport rep = check_uniformity(spec, samples, {0.01, 0.1}, 4, 3);
    REQUIRE(rep.continuity_modulus.size() == 2);
    CHECK(rep.continuity_modulus[0].first == 0.01);
    CHECK(rep.continuity_modulus[0].second == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(rep.continuity_modulus[1].second == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(rep.continuity_modulus[0].second <= rep.continuity_modulus[1].second);
}

TEST_CASE("singular sample violates the nonvanishing-speed condition") {
    VectorFieldSpec spec;
    spec.dimension = 2;
    spec.components = {{term(1.0, {0, 1})}, {term(-1.0, {1, 0})}};
    CHECK_THROWS_AS(check_uniformity(spec, {vec2(0, 0)}, {0.1}), PreconditionError);
}

TEST_CASE("spec validation catches shape problems") {
    VectorFieldSpec spec;
    spec.dimension = 1;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.dimension = 2;
    spec.components = {{term(1.0, {0})}, {}};
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

} // TEST_SUITE
