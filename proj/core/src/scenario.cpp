#include "liao/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "liao/errors.hpp"

namespace liao {

namespace {

using json = nlohmann::ordered_json;

void expect_object(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw ValidationError(ctx + " must be a JSON object");
}

void check_keys(const json& obj, const std::string& ctx,
                const std::set<std::string>& allowed,
                const std::set<std::string>& required) {
    expect_object(obj, ctx);
    std::string unknown;
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            if (!unknown.empty()) unknown += ", ";
            unknown += item.key();
        }
    }
    if (!unknown.empty())
        throw ValidationError("unknown keys in " + ctx + ": " + unknown);
    for (const auto& key : required)
        if (!obj.contains(key))
            throw ValidationError(ctx + " is missing required key '" + key + "'");
}

double get_number(const json& j, const std::string& ctx) {
    if (!j.is_number()) throw ValidationError(ctx + " must be a number");
    return j.get<double>();
}

double parse_coef(const json& j, const std::string& ctx) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        const auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return std::stod(s);
            const double num = std::stod(s.substr(0, slash));
            const double den = std::stod(s.substr(slash + 1));
            if (den == 0.0) throw ValidationError(ctx + ": zero denominator");
            return num / den;
        } catch (const std::invalid_argument&) {
            throw ValidationError(ctx + ": cannot parse rational '" + s + "'");
        }
    }
    throw ValidationError(ctx + " must be a number or a rational string");
}

Vector parse_vector(const json& j, int expected, const std::string& ctx) {
    if (!j.is_array()) throw ValidationError(ctx + " must be an array");
    if (expected >= 0 && static_cast<int>(j.size()) != expected)
        throw ValidationError(ctx + " must have length " + std::to_string(expected));
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = get_number(j[i], ctx + " entry");
    return v;
}

FieldTerm parse_term(const json& j, int vars, const std::string& ctx) {
    check_keys(j, ctx, {"coef", "powers", "trig"}, {"coef"});
    FieldTerm term;
    term.coef = parse_coef(j.at("coef"), ctx + ".coef");
    term.powers.assign(vars, 0);
    if (j.contains("powers")) {
        const json& p = j.at("powers");
        if (!p.is_array() || static_cast<int>(p.size()) != vars)
            throw ValidationError(ctx + ".powers must be an array of length " +
                                  std::to_string(vars));
        for (int i = 0; i < vars; ++i) {
            if (!p[i].is_number_integer() || p[i].get<long>() < 0)
                throw ValidationError(ctx + ".powers entries must be non-negative integers");
            term.powers[i] = p[i].get<int>();
        }
    }
    if (j.contains("trig")) {
        const json& t = j.at("trig");
        check_keys(t, ctx + ".trig", {"kind", "a", "b"}, {"kind", "a"});
        TrigFactor trig;
        const std::string kind = t.at("kind").is_string() ? t.at("kind").get<std::string>() : "";
        if (kind == "sin")
            trig.kind = TrigFactor::Kind::Sin;
        else if (kind == "cos")
            trig.kind = TrigFactor::Kind::Cos;
        else
            throw ValidationError(ctx + ".trig.kind must be 'sin' or 'cos'");
        trig.coeffs = parse_vector(t.at("a"), vars, ctx + ".trig.a");
        trig.phase = t.contains("b") ? get_number(t.at("b"), ctx + ".trig.b") : 0.0;
        term.trig = trig;
    }
    return term;
}

std::vector<FieldTerm> parse_term_list(const json& j, int vars, const std::string& ctx) {
    if (!j.is_array()) throw ValidationError(ctx + " must be an array of terms");
    std::vector<FieldTerm> terms;
    for (std::size_t i = 0; i < j.size(); ++i)
        terms.push_back(parse_term(j[i], vars, ctx + "[" + std::to_string(i) + "]"));
    return terms;
}

VectorFieldSpec parse_field(const json& j, const std::string& ctx) {
    check_keys(j, ctx, {"name", "dimension", "components"}, {"dimension", "components"});
    VectorFieldSpec spec;
    spec.name = j.contains("name") ? j.at("name").get<std::string>() : "field";
    if (!j.at("dimension").is_number_integer())
        throw ValidationError(ctx + ".dimension must be an integer");
    spec.dimension = j.at("dimension").get<int>();
    const json& comps = j.at("components");
    if (!comps.is_array() || static_cast<int>(comps.size()) != spec.dimension)
        throw ValidationError(ctx + ".components must list one term array per component");
    for (std::size_t c = 0; c < comps.size(); ++c)
        spec.components.push_back(parse_term_list(
            comps[c], spec.dimension, ctx + ".components[" + std::to_string(c) + "]"));
    spec.validate();
    return spec;
}

NumericBlock parse_numeric(const json& j) {
    check_keys(j, "numeric",
               {"h", "tol", "horizon", "xi", "epsilon", "window_T", "d_grid"}, {});
    NumericBlock nb;
    if (j.contains("h")) nb.h = get_number(j.at("h"), "numeric.h");
    if (j.contains("tol")) nb.tol = get_number(j.at("tol"), "numeric.tol");
    if (j.contains("horizon")) nb.horizon = get_number(j.at("horizon"), "numeric.horizon");
    if (j.contains("xi")) nb.xi = get_number(j.at("xi"), "numeric.xi");
    if (j.contains("epsilon")) nb.epsilon = get_number(j.at("epsilon"), "numeric.epsilon");
    if (j.contains("window_T")) nb.window_T = get_number(j.at("window_T"), "numeric.window_T");
    if (j.contains("d_grid")) {
        nb.d_grid.clear();
        for (const auto& d : j.at("d_grid"))
            nb.d_grid.push_back(get_number(d, "numeric.d_grid entry"));
    }
    for (double v : {nb.h, nb.tol, nb.horizon, nb.xi, nb.epsilon, nb.window_T})
        if (!(v > 0.0))
            throw ValidationError("numeric block values must be positive");
    if (nb.d_grid.empty()) throw ValidationError("numeric.d_grid must be nonempty");
    for (double d : nb.d_grid)
        if (!(d > 0.0)) throw ValidationError("numeric.d_grid entries must be positive");
    return nb;
}

DichotomyBlock parse_dichotomy(const json& j) {
    check_keys(j, "dichotomy",
               {"p", "p_minus", "A", "f", "eta_A", "xi_A", "eta_f", "L_f", "horizon",
                "step", "delta_probe"},
               {"p", "p_minus", "A", "f", "eta_A", "xi_A", "eta_f", "L_f"});
    DichotomyBlock b;
    b.p = j.at("p").get<int>();
    b.p_minus = j.at("p_minus").get<int>();
    if (b.p < 1) throw ValidationError("dichotomy.p must be at least 1");
    if (b.p_minus < 0 || b.p_minus > b.p)
        throw ValidationError("dichotomy.p_minus out of range [0, p]");

    const json& A = j.at("A");
    if (!A.is_array() || static_cast<int>(A.size()) != b.p)
        throw ValidationError("dichotomy.A must be a p x p array of term lists");
    for (int r = 0; r < b.p; ++r) {
        if (!A[r].is_array() || static_cast<int>(A[r].size()) != b.p)
            throw ValidationError("dichotomy.A must be a p x p array of term lists");
        std::vector<std::vector<FieldTerm>> row;
        for (int c = 0; c < b.p; ++c) {
            row.push_back(parse_term_list(A[r][c], 1,
                                          "dichotomy.A[" + std::to_string(r) + "][" +
                                              std::to_string(c) + "]"));
            if (c < r && !row.back().empty())
                throw ValidationError("dichotomy.A must be upper triangular (entry " +
                                      std::to_string(r) + "," + std::to_string(c) +
                                      " is below the diagonal)");
        }
        b.coefficient_terms.push_back(std::move(row));
    }
    const json& f = j.at("f");
    if (!f.is_array() || static_cast<int>(f.size()) != b.p)
        throw ValidationError("dichotomy.f must list p term arrays over (t, z)");
    for (int c = 0; c < b.p; ++c)
        b.forcing_terms.push_back(
            parse_term_list(f[c], 1 + b.p, "dichotomy.f[" + std::to_string(c) + "]"));

    b.eta_A = get_number(j.at("eta_A"), "dichotomy.eta_A");
    b.xi_A = get_number(j.at("xi_A"), "dichotomy.xi_A");
    b.eta_f = get_number(j.at("eta_f"), "dichotomy.eta_f");
    b.L_f = get_number(j.at("L_f"), "dichotomy.L_f");
    if (j.contains("horizon")) b.horizon = get_number(j.at("horizon"), "dichotomy.horizon");
    if (j.contains("step")) b.step = get_number(j.at("step"), "dichotomy.step");
    if (!(b.horizon > 0.0) || !(b.step > 0.0))
        throw ValidationError("dichotomy horizon and step must be positive");
    if (j.contains("delta_probe")) {
        const json& d = j.at("delta_probe");
        check_keys(d, "dichotomy.delta_probe", {"count", "s_range", "u_radius"}, {});
        if (d.contains("count")) b.probe.count = d.at("count").get<int>();
        if (d.contains("s_range")) {
            const Vector r = parse_vector(d.at("s_range"), 2, "dichotomy.delta_probe.s_range");
            b.probe.s_min = r[0];
            b.probe.s_max = r[1];
        }
        if (d.contains("u_radius"))
            b.probe.u_radius = get_number(d.at("u_radius"), "dichotomy.delta_probe.u_radius");
        if (b.probe.count < 1 || b.probe.s_min > b.probe.s_max || !(b.probe.u_radius > 0))
            throw ValidationError("dichotomy.delta_probe is inconsistent");
    }
    return b;
}

} // namespace

double eval_terms(const std::vector<FieldTerm>& terms, const Vector& x) {
    const int n = static_cast<int>(x.size());
    double acc = 0.0;
    for (const auto& term : terms) {
        if (static_cast<int>(term.powers.size()) != n)
            throw ValidationError("term power list does not match the point dimension");
        double v = term.coef;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < term.powers[i]; ++k) v *= x[i];
        if (term.trig) {
            if (static_cast<int>(term.trig->coeffs.size()) != n)
                throw ValidationError("trig linear form does not match the point dimension");
            const double arg = term.trig->coeffs.dot(x) + term.trig->phase;
            v *= (term.trig->kind == TrigFactor::Kind::Sin) ? std::sin(arg) : std::cos(arg);
        }
        acc += v;
    }
    return acc;
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream oss;
    oss << std::hex << std::setw(16) << std::setfill('0') << h;
    return oss.str();
}

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("scenario file is not valid JSON: ") + e.what());
    }
    check_keys(doc, "scenario",
               {"schema", "name", "seed", "output_dir", "field", "perturbation",
                "lambda_samples", "p_minus", "numeric", "conjugacy", "dichotomy"},
               {"field", "lambda_samples", "p_minus"});

    Scenario sc;
    if (doc.contains("schema")) {
        const std::string schema = doc.at("schema").get<std::string>();
        if (schema != "liao-scenario-v1")
            throw ValidationError("unsupported scenario schema '" + schema + "'");
    }
    sc.name = doc.contains("name") ? doc.at("name").get<std::string>() : "scenario";
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0)
            throw ValidationError("seed must be a non-negative integer");
        sc.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("output_dir")) sc.output_dir = doc.at("output_dir").get<std::string>();

    sc.field = parse_field(doc.at("field"), "field");
    const int n = sc.field.dimension;
    if (doc.contains("perturbation")) {
        sc.perturbation = parse_field(doc.at("perturbation"), "perturbation");
        if (sc.perturbation->dimension != n)
            throw ValidationError("perturbation dimension does not match the base field");
    }

    const json& samples = doc.at("lambda_samples");
    if (!samples.is_array() || samples.empty())
        throw ValidationError("lambda_samples must be a nonempty array of points");
    for (std::size_t i = 0; i < samples.size(); ++i)
        sc.lambda_samples.push_back(
            parse_vector(samples[i], n, "lambda_samples[" + std::to_string(i) + "]"));

    if (!doc.at("p_minus").is_number_integer())
        throw ValidationError("p_minus must be an integer");
    sc.p_minus = doc.at("p_minus").get<int>();
    if (sc.p_minus < 0 || sc.p_minus > n - 1)
        throw ValidationError("p_minus out of range [0, n-1]: got " +
                              std::to_string(sc.p_minus) + " with n = " +
                              std::to_string(n));

    if (doc.contains("numeric")) sc.numeric = parse_numeric(doc.at("numeric"));
    if (doc.contains("conjugacy")) {
        const json& c = doc.at("conjugacy");
        check_keys(c, "conjugacy", {"residual_t_grid", "enforce_smallness"}, {});
        if (c.contains("residual_t_grid")) {
            sc.residual_t_grid.clear();
            for (const auto& t : c.at("residual_t_grid"))
                sc.residual_t_grid.push_back(get_number(t, "conjugacy.residual_t_grid entry"));
        }
        if (c.contains("enforce_smallness"))
            sc.enforce_smallness = c.at("enforce_smallness").get<bool>();
    }
    if (doc.contains("dichotomy")) sc.dichotomy = parse_dichotomy(doc.at("dichotomy"));

    sc.source_hash = fnv1a64_hex(text);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

} // namespace liao
