#pragma once

#include <vector>

#include "liao/field.hpp"

namespace liao::testing {

inline FieldTerm term(double coef, std::vector<int> powers) {
    FieldTerm t;
    t.coef = coef;
    t.powers = std::move(powers);
    return t;
}

inline FieldTerm trig_term(double coef, std::vector<int> powers, TrigFactor::Kind kind,
                           std::vector<double> a, double b = 0.0) {
    FieldTerm t = term(coef, std::move(powers));
    TrigFactor f;
    f.kind = kind;
    f.coeffs = Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
    f.phase = b;
    t.trig = f;
    return t;
}

/// Unit drift along the x-axis with an exponential saddle in (y, z):
/// S(x, y, z) = (1, y, -z). The x-axis is invariant; the transversal
/// dynamics contracts z and expands y at unit rate.
inline VectorFieldSpec saddle_line_field() {
    VectorFieldSpec s;
    s.name = "saddle_line";
    s.dimension = 3;
    s.components = {{term(1.0, {0, 0, 0})},
                    {term(1.0, {0, 1, 0})},
                    {term(-1.0, {0, 0, 1})}};
    return s;
}

/// Saddle line field with a constant shift in the expanding component:
/// V = (1, y + delta, -z). Its invariant line is y = -delta, z = 0.
inline VectorFieldSpec constant_perturbation(double delta) {
    VectorFieldSpec s = saddle_line_field();
    s.name = "saddle_constant_shift";
    s.components[1].push_back(term(delta, {0, 0, 0}));
    return s;
}

/// Saddle line field with x-periodic forcing in both transversal
/// components: V = (1, y + delta sin x, -z + delta cos x).
inline VectorFieldSpec trig_perturbation(double delta) {
    VectorFieldSpec s = saddle_line_field();
    s.name = "saddle_trig_shift";
    s.components[1].push_back(
        trig_term(delta, {0, 0, 0}, TrigFactor::Kind::Sin, {1, 0, 0}));
    s.components[2].push_back(
        trig_term(delta, {0, 0, 0}, TrigFactor::Kind::Cos, {1, 0, 0}));
    return s;
}

/// Saddle line field with the stable/unstable axes rotated by theta in the
/// (y, z) plane; the x-axis stays invariant.
inline VectorFieldSpec rotated_saddle(double theta) {
    const double c = std::cos(2 * theta), s2 = std::sin(2 * theta);
    VectorFieldSpec s;
    s.name = "rotated_saddle";
    s.dimension = 3;
    s.components = {{term(1.0, {0, 0, 0})},
                    {term(c, {0, 1, 0}), term(s2, {0, 0, 1})},
                    {term(s2, {0, 1, 0}), term(-c, {0, 0, 1})}};
    return s;
}

/// Drift with transversal rates (+2, -3): S = (1, 2y, -3z).
inline VectorFieldSpec rate_two_three_field() {
    VectorFieldSpec s;
    s.name = "rate_two_three";
    s.dimension = 3;
    s.components = {{term(1.0, {0, 0, 0})},
                    {term(2.0, {0, 1, 0})},
                    {term(-3.0, {0, 0, 1})}};
    return s;
}

inline Vector vec3(double x, double y, double z) {
    Vector v(3);
    v << x, y, z;
    return v;
}

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

/// Closed-form conjugacy offset for trig_perturbation at (x0, 0, 0):
/// h = (0, -delta (sin x0 + cos x0)/2, delta (cos x0 + sin x0)/2).
inline Vector trig_offset_oracle(double delta, double x0) {
    const double s = std::sin(x0), c = std::cos(x0);
    return vec3(0.0, -delta * (s + c) / 2.0, delta * (c + s) / 2.0);
}

} // namespace liao::testing
