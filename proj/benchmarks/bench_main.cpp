#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "liao/conjugacy.hpp"
#include "liao/standard.hpp"

namespace {

using namespace liao;

Vector vec3(double x, double y, double z) {
    Vector v(3);
    v << x, y, z;
    return v;
}

VectorFieldSpec saddle_field() {
    VectorFieldSpec s;
    s.name = "saddle_line";
    s.dimension = 3;
    s.components.resize(3);
    FieldTerm t;
    t.coef = 1.0;
    t.powers = {0, 0, 0};
    s.components[0] = {t};
    t.powers = {0, 1, 0};
    s.components[1] = {t};
    t.coef = -1.0;
    t.powers = {0, 0, 1};
    s.components[2] = {t};
    return s;
}

VectorFieldSpec shifted_field(double delta) {
    VectorFieldSpec s = saddle_field();
    FieldTerm t;
    t.coef = delta;
    t.powers = {0, 0, 0};
    s.components[1].push_back(t);
    return s;
}

void BM_field_jacobian(benchmark::State& state) {
    const VectorFieldSpec spec = saddle_field();
    const Vector w = vec3(0.3, 0.02, -0.01);
    Vector value;
    Matrix jac;
    for (auto _ : state) {
        eval_field_and_jacobian_into(spec, w, value, jac);
        benchmark::DoNotOptimize(value.data());
    }
}
BENCHMARK(BM_field_jacobian);

void BM_frame_transport(benchmark::State& state) {
    const VectorFieldSpec spec = saddle_field();
    const TransversalFrame frame = stable_adapted_frame(spec, vec3(0, 0, 0), 1);
    const double reach = static_cast<double>(state.range(0));
    for (auto _ : state) {
        FramePath path = frame_transport(spec, vec3(0, 0, 0), frame, 0.0, reach, 1e-3);
        benchmark::DoNotOptimize(path.frames.back().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(reach / 1e-3));
}
BENCHMARK(BM_frame_transport)->Arg(1)->Arg(10);

void BM_reduced_cocycle(benchmark::State& state) {
    const VectorFieldSpec spec = saddle_field();
    const TransversalFrame frame = stable_adapted_frame(spec, vec3(0, 0, 0), 1);
    const FramePath path = frame_transport(spec, vec3(0, 0, 0), frame, -5.0, 5.0, 1e-3);
    for (auto _ : state) {
        ReducedCocycle c = reduced_cocycle(path, accumulate_propagators(path), 1e-3, 1);
        benchmark::DoNotOptimize(c.omega.back().data());
    }
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_reduced_cocycle);

void BM_remainder_eval(benchmark::State& state) {
    const VectorFieldSpec spec = saddle_field();
    const TransversalFrame frame = stable_adapted_frame(spec, vec3(0, 0, 0), 1);
    auto frames = std::make_shared<const FramePath>(
        frame_transport(spec, vec3(0, 0, 0), frame, -2.0, 2.0, 1e-3));
    auto cocycle = std::make_shared<const ReducedCocycle>(
        reduced_cocycle(*frames, accumulate_propagators(*frames), 1e-3, 1));
    const SectionChart chart(frames, 1.0);
    const VectorFieldSpec pert = shifted_field(0.01);
    Vector y(2);
    y << 0.01, -0.02;
    for (auto _ : state) {
        const RemainderEvaluation ev =
            standard_rhs_and_remainder(chart, pert, *cocycle, 0.37, y);
        benchmark::DoNotOptimize(ev.remainder.data());
    }
}
BENCHMARK(BM_remainder_eval);

void BM_bounded_solution(benchmark::State& state) {
    DichotomyProblem p;
    p.p = 2;
    p.p_minus = 1;
    p.A = [](double) {
        Matrix A(2, 2);
        A << -1, 0, 0, 1;
        return A;
    };
    const double delta = 0.01;
    p.f = [delta](double t, const Vector&) {
        Vector f(2);
        f << 0.0, delta * std::sin(t);
        return f;
    };
    p.eta_A = 2.0;
    p.xi_A = 2.0;
    p.eta_f = delta;
    p.L_f = 0.0;
    p.horizon = static_cast<double>(state.range(0));
    for (auto _ : state) {
        BoundedSolution sol = bounded_solution(p);
        benchmark::DoNotOptimize(sol.initial_value.data());
    }
}
BENCHMARK(BM_bounded_solution)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_conjugacy_offset(benchmark::State& state) {
    const VectorFieldSpec spec = saddle_field();
    const VectorFieldSpec pert = shifted_field(0.01);
    ConjugacyConfig cfg = ConjugacyConfig::make(0.1, 0.05, 2.0, 2.0, 3, 1);
    cfg.horizon = static_cast<double>(state.range(0));
    cfg.tol = 1e-10;
    cfg.transport_step = 1e-3;
    const Vector w = vec3(0.7, 0, 0);
    const TransversalFrame frame = stable_adapted_frame(spec, w, 1);
    for (auto _ : state) {
        OffsetResult off = conjugacy_offset(spec, pert, w, frame, cfg);
        benchmark::DoNotOptimize(off.h.data());
    }
}
BENCHMARK(BM_conjugacy_offset)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
