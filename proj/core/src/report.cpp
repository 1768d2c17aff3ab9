#include "liao/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "liao/errors.hpp"
#include "liao/reduced.hpp"

namespace liao {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

json meta_block(const Scenario& sc, const char* subcommand) {
    json m;
    m["scenario"] = sc.name;
    m["scenario_hash"] = sc.source_hash;
    m["seed"] = sc.seed;
    m["subcommand"] = subcommand;
    return m;
}

json certificate_to_json(const HyperbolicityCertificate& cert) {
    json j;
    j["eta_hat"] = cert.eta_hat;
    j["d_hat"] = cert.d_hat;
    j["window_T"] = cert.window_T;
    j["pass"] = cert.pass;
    j["worst_stable_average"] = number_or_null(cert.worst_stable_average);
    j["worst_unstable_average"] = number_or_null(cert.worst_unstable_average);
    j["d_grid"] = cert.d_grid;
    j["t0_stride"] = cert.t0_stride;
    return j;
}

json constants_to_json(const DichotomyConstants& c) {
    json j;
    j["eta"] = c.eta_A;
    j["xi"] = c.xi_A;
    j["tail_bound"] = c.tail_bound;
    j["tail_flagged"] = c.tail_flagged;
    j["horizon"] = c.horizon;
    j["argmax_t"] = c.argmax_t;
    return j;
}

json uniformity_to_json(const UniformityReport& u) {
    json j;
    j["inf_speed"] = u.inf_speed;
    j["sup_speed"] = u.sup_speed;
    j["sup_jacobian"] = u.sup_jacobian;
    j["sample_count"] = u.sample_count;
    json mod = json::array();
    for (const auto& [delta, value] : u.continuity_modulus)
        mod.push_back(json::array({delta, value}));
    j["continuity_modulus"] = mod;
    return j;
}

json checklist_to_json(const NeighborhoodChecklist& cl) {
    json j;
    j["speed_window_ok"] = cl.speed_window_ok;
    j["sup_remainder"] = cl.sup_remainder;
    j["sup_remainder_bound"] = cl.sup_remainder_bound;
    j["smallness_ok"] = cl.smallness_ok;
    j["lipschitz"] = cl.lipschitz;
    j["lipschitz_bound"] = cl.lipschitz_bound;
    j["lipschitz_ok"] = cl.lipschitz_ok;
    j["lipschitz_core"] = cl.lipschitz_core;
    return j;
}

struct SampleCertification {
    HyperbolicityCertificate certificate;
    DichotomyConstants constants;
};

SampleCertification certify_one(const Scenario& sc, const Vector& w) {
    const TransversalFrame frame =
        stable_adapted_frame(sc.field, w, sc.p_minus, 5.0, sc.numeric.h);
    const FramePath path =
        frame_transport(sc.field, w, frame, -sc.numeric.window_T,
                        sc.numeric.window_T, sc.numeric.h);
    const ReducedCocycle cocycle = reduced_cocycle(
        path, accumulate_propagators(path), sc.numeric.h, sc.p_minus);
    SampleCertification out;
    out.certificate =
        certify_hyperbolic(cocycle, sc.numeric.d_grid, sc.numeric.window_T);
    if (out.certificate.pass)
        out.constants = dichotomy_constants(cocycle, out.certificate);
    return out;
}

DichotomyProblem problem_from_block(const DichotomyBlock& block) {
    DichotomyProblem problem;
    problem.p = block.p;
    problem.p_minus = block.p_minus;
    problem.eta_A = block.eta_A;
    problem.xi_A = block.xi_A;
    problem.eta_f = block.eta_f;
    problem.L_f = block.L_f;
    problem.horizon = block.horizon;
    const auto coeffs = block.coefficient_terms;
    const int p = block.p;
    problem.A = [coeffs, p](double t) {
        Matrix A = Matrix::Zero(p, p);
        Vector x(1);
        x[0] = t;
        for (int r = 0; r < p; ++r)
            for (int c = r; c < p; ++c)
                if (!coeffs[r][c].empty()) A(r, c) = eval_terms(coeffs[r][c], x);
        return A;
    };
    const auto forcing = block.forcing_terms;
    problem.f = [forcing, p](double t, const Vector& z) {
        Vector x(1 + p);
        x[0] = t;
        x.tail(p) = z;
        Vector out(p);
        for (int c = 0; c < p; ++c) out[c] = eval_terms(forcing[c], x);
        return out;
    };
    return problem;
}

void run_certify(const Scenario& sc, const fs::path& out_dir,
                 std::vector<std::string>& files) {
    const CertificationOutcome outcome = certify_scenario(sc);
    json j;
    j["schema"] = "liao-certify-v1";
    j.update(meta_block(sc, "certify"));
    j["uniformity"] = uniformity_to_json(outcome.uniformity);
    j["certificate"] = certificate_to_json(outcome.certificate);
    j["constants"] = constants_to_json(outcome.constants);
    write_file(out_dir / "certify.json", j.dump(2) + "\n");
    files.push_back("certify.json");
}

void run_exponents(const Scenario& sc, const fs::path& out_dir,
                   std::vector<std::string>& files) {
    const Vector& w = sc.lambda_samples.front();
    const TransversalFrame frame =
        stable_adapted_frame(sc.field, w, sc.p_minus, 5.0, sc.numeric.h);
    const FramePath path = frame_transport(sc.field, w, frame, -sc.numeric.window_T,
                                           sc.numeric.window_T, sc.numeric.h);
    const ReducedCocycle cocycle =
        reduced_cocycle(path, accumulate_propagators(path), sc.numeric.h, sc.p_minus);

    const int m = cocycle.fiber_dimension();
    std::string csv = "t";
    for (int k = 1; k <= m; ++k) csv += ",omega_" + std::to_string(k);
    csv += "\n";
    for (std::size_t j = 0; j < cocycle.times.size(); ++j) {
        csv += format_double(cocycle.times[j]);
        for (int k = 0; k < m; ++k) csv += "," + format_double(cocycle.omega[j][k]);
        csv += "\n";
    }
    write_file(out_dir / "omega.csv", csv);
    files.push_back("omega.csv");

    write_frame_path_csv((out_dir / "frames.csv").string(), path);
    files.push_back("frames.csv");
}

void run_delta(const Scenario& sc, const fs::path& out_dir,
               std::vector<std::string>& files) {
    if (!sc.dichotomy)
        throw ValidationError("the delta subcommand needs a 'dichotomy' block");
    const DichotomyBlock& block = *sc.dichotomy;
    const DichotomyProblem problem = problem_from_block(block);

    SolveOptions solve;
    solve.tol = sc.numeric.tol;
    solve.step = block.step;
    const BoundedSolution sol = bounded_solution(problem, solve);

    std::string csv = "t";
    for (int k = 1; k <= block.p; ++k) csv += ",z_" + std::to_string(k);
    csv += ",defect\n";
    for (std::size_t j = 0; j < sol.times.size(); ++j) {
        csv += format_double(sol.times[j]);
        for (int k = 0; k < block.p; ++k) csv += "," + format_double(sol.z[j][k]);
        csv += "," + format_double(sol.defect_series[j]) + "\n";
    }
    write_file(out_dir / "bounded_solution.csv", csv);
    files.push_back("bounded_solution.csv");

    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> us(block.probe.s_min, block.probe.s_max);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> ur(0.0, 1.0);

    std::string dcsv = "s";
    for (int k = 1; k <= block.p; ++k) dcsv += ",u_" + std::to_string(k);
    for (int k = 1; k <= block.p; ++k) dcsv += ",delta_" + std::to_string(k);
    dcsv += ",displacement\n";
    double max_disp = 0.0;
    for (int i = 0; i < block.probe.count; ++i) {
        const double s = us(rng);
        Vector u(block.p);
        for (int k = 0; k < block.p; ++k) u[k] = gauss(rng);
        const double nrm = u.norm();
        if (nrm > 1e-14)
            u *= block.probe.u_radius * std::pow(ur(rng), 1.0 / block.p) / nrm;
        const Vector d = delta_map(problem, s, u, solve);
        max_disp = std::max(max_disp, (d - u).norm());
        dcsv += format_double(s);
        for (int k = 0; k < block.p; ++k) dcsv += "," + format_double(u[k]);
        for (int k = 0; k < block.p; ++k) dcsv += "," + format_double(d[k]);
        dcsv += "," + format_double((d - u).norm()) + "\n";
    }
    write_file(out_dir / "delta_map.csv", dcsv);
    files.push_back("delta_map.csv");

    const EpsilonBound eps =
        epsilon_bound(block.eta_A, block.xi_A, block.eta_f, block.p);
    const ClassReport klass = validate_class(problem, std::max(100, block.probe.count),
                                             sc.seed);
    json j;
    j["schema"] = "liao-delta-v1";
    j.update(meta_block(sc, "delta"));
    j["claims"] = {{"eta_A", block.eta_A},
                   {"xi_A", block.xi_A},
                   {"eta_f", block.eta_f},
                   {"L_f", block.L_f},
                   {"horizon", block.horizon}};
    j["epsilon_bound"] = {{"epsilon", eps.epsilon}, {"L_threshold", eps.L_threshold}};
    j["bounded_solution"] = {{"iterations", sol.iterations},
                             {"defect", sol.defect},
                             {"sup_norm", sol.sup_norm},
                             {"initial_value", vector_to_json(sol.initial_value)},
                             {"a_priori_bound", sol.a_priori_bound}};
    j["max_displacement"] = max_disp;
    json conds = json::array();
    for (const auto& c : klass.conditions) {
        json cj;
        cj["name"] = c.name;
        cj["pass"] = c.pass;
        cj["computed"] = c.computed;
        cj["claimed"] = c.claimed;
        cj["witness_time"] = c.witness_time;
        conds.push_back(cj);
    }
    j["class_conditions"] = conds;
    j["class_all_pass"] = klass.all_pass;
    write_file(out_dir / "delta_summary.json", j.dump(2) + "\n");
    files.push_back("delta_summary.json");
}

void run_conjugate(const Scenario& sc, const fs::path& out_dir,
                   std::vector<std::string>& files) {
    if (!sc.perturbation)
        throw ValidationError("the conjugate subcommand needs a 'perturbation' field");

    const CertificationOutcome outcome = certify_scenario(sc);
    if (!outcome.certificate.pass)
        throw PreconditionError("hyperbolicity certification failed for the scenario");

    ConjugacyConfig config = ConjugacyConfig::make(
        sc.numeric.epsilon, sc.numeric.xi, outcome.constants.eta_A,
        outcome.constants.xi_A, sc.field.dimension, sc.p_minus);
    config.horizon = sc.numeric.horizon;
    config.tol = sc.numeric.tol;
    config.transport_step = sc.numeric.h;
    config.residual_t_grid = sc.residual_t_grid;
    config.enforce_smallness = sc.enforce_smallness;
    config.seed = sc.seed;

    const ConjugacyResult result =
        conjugacy_map(sc.field, *sc.perturbation, sc.lambda_samples,
                      outcome.certificate, outcome.constants, config);

    json j;
    j["schema"] = "liao-conjugate-v1";
    j.update(meta_block(sc, "conjugate"));
    json samples = json::array(), offsets = json::array(), residuals = json::array();
    for (const auto& rec : result.samples) {
        samples.push_back(vector_to_json(rec.w));
        json off;
        off["ok"] = rec.ok;
        off["x"] = vector_to_json(rec.x);
        off["h"] = vector_to_json(rec.h);
        off["sup_norm"] = rec.sup_norm;
        off["failure"] = rec.failure;
        off["checklist"] = checklist_to_json(rec.checklist);
        offsets.push_back(off);
        json res = json::array();
        for (const auto& [t, r] : rec.residuals) res.push_back(json::array({t, r}));
        residuals.push_back(res);
    }
    j["samples"] = samples;
    j["offsets"] = offsets;
    j["residuals"] = residuals;
    j["config"] = {{"epsilon", config.epsilon},
                   {"xi", config.xi},
                   {"rho_xi", config.rho_xi},
                   {"kappa", config.kappa},
                   {"eta_lambda", config.eta_lambda},
                   {"xi_lambda", config.xi_lambda},
                   {"p_minus", config.p_minus},
                   {"horizon", config.horizon},
                   {"tol", config.tol},
                   {"transport_step", config.transport_step},
                   {"residual_t_grid", config.residual_t_grid},
                   {"enforce_smallness", config.enforce_smallness}};
    json cert_ref;
    cert_ref["certificate"] = certificate_to_json(result.certificate);
    cert_ref["constants"] = constants_to_json(result.constants);
    cert_ref["uniformity"] = uniformity_to_json(outcome.uniformity);
    j["certificate_ref"] = cert_ref;
    j["summary"] = {
        {"max_offset_norm", result.max_offset_norm},
        {"offset_bound", result.offset_bound},
        {"offsets_within_epsilon", result.offsets_within_epsilon},
        {"min_image_separation", result.min_image_separation},
        {"injectivity",
         {{"min_separation", number_or_null(result.injectivity.min_separation)},
          {"positive", result.injectivity.positive},
          {"displacement_violations", result.injectivity.displacement_violations},
          {"pass", result.injectivity.pass},
          {"vacuous", result.injectivity.vacuous}}},
        {"frame_independence",
         {{"tested", result.frame_independence.tested},
          {"max_discrepancy", number_or_null(result.frame_independence.max_discrepancy)},
          {"pass", result.frame_independence.pass}}}};
    write_file(out_dir / "conjugacy.json", j.dump(2) + "\n");
    files.push_back("conjugacy.json");

    const int n = sc.field.dimension;
    std::string csv;
    for (int k = 1; k <= n; ++k) csv += (k > 1 ? "," : "") + std::string("w_") + std::to_string(k);
    csv += ",t,residual\n";
    for (const auto& rec : result.samples) {
        for (const auto& [t, r] : rec.residuals) {
            for (int k = 0; k < n; ++k)
                csv += (k > 0 ? "," : "") + format_double(rec.w[k]);
            csv += "," + format_double(t) + "," + format_double(r) + "\n";
        }
    }
    write_file(out_dir / "residuals.csv", csv);
    files.push_back("residuals.csv");
}

} // namespace

Subcommand parse_subcommand(const std::string& name) {
    if (name == "certify") return Subcommand::Certify;
    if (name == "exponents") return Subcommand::Exponents;
    if (name == "delta") return Subcommand::Delta;
    if (name == "conjugate") return Subcommand::Conjugate;
    throw ValidationError("unknown subcommand '" + name + "'");
}

CertificationOutcome certify_scenario(const Scenario& sc) {
    CertificationOutcome outcome;
    outcome.uniformity = check_uniformity(sc.field, sc.lambda_samples,
                                          {1e-3, 1e-2, 1e-1}, 8, sc.seed);

    bool first = true;
    for (const Vector& w : sc.lambda_samples) {
        const SampleCertification one = certify_one(sc, w);
        const auto& cert = one.certificate;
        if (first) {
            outcome.certificate = cert;
            outcome.constants = one.constants;
            first = false;
            continue;
        }
        auto& agg = outcome.certificate;
        agg.pass = agg.pass && cert.pass;
        agg.eta_hat = std::min(agg.eta_hat, cert.eta_hat);
        agg.d_hat = std::max(agg.d_hat, cert.d_hat);
        agg.worst_stable_average =
            std::max(agg.worst_stable_average, cert.worst_stable_average);
        agg.worst_unstable_average =
            std::min(agg.worst_unstable_average, cert.worst_unstable_average);
        if (cert.pass) {
            outcome.constants.eta_A = std::max(outcome.constants.eta_A, one.constants.eta_A);
            outcome.constants.xi_A = std::max(outcome.constants.xi_A, one.constants.xi_A);
            outcome.constants.tail_bound =
                std::max(outcome.constants.tail_bound, one.constants.tail_bound);
            outcome.constants.tail_flagged =
                outcome.constants.tail_flagged || one.constants.tail_flagged;
            outcome.constants.horizon = one.constants.horizon;
        }
    }
    return outcome;
}

void execute_scenario(const Scenario& sc, Subcommand cmd, const std::string& out_dir) {
    const fs::path dir = out_dir.empty() ? fs::path(sc.output_dir) : fs::path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");

    std::vector<std::string> files;
    switch (cmd) {
        case Subcommand::Certify: run_certify(sc, dir, files); break;
        case Subcommand::Exponents: run_exponents(sc, dir, files); break;
        case Subcommand::Delta: run_delta(sc, dir, files); break;
        case Subcommand::Conjugate: run_conjugate(sc, dir, files); break;
    }

    json meta;
    meta["schema"] = "liao-run-meta-v1";
    const char* names[] = {"certify", "exponents", "delta", "conjugate"};
    meta.update(meta_block(sc, names[static_cast<int>(cmd)]));
    meta["files"] = files;
    write_file(dir / "run_meta.json", meta.dump(2) + "\n");
}

int run_scenario(const std::string& path, Subcommand cmd, const std::string& out_override,
                 std::optional<std::uint64_t> seed_override) {
    try {
        Scenario sc = load_scenario(path);
        if (seed_override) sc.seed = *seed_override;
        execute_scenario(sc, cmd, out_override);
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_frame_path_csv(const std::string& path, const FramePath& frames) {
    const int n = frames.ambient_dimension();
    const int m = frames.fiber_dimension();
    std::string csv = "t";
    for (int i = 1; i <= n; ++i) csv += ",base_" + std::to_string(i);
    for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= n; ++i)
            csv += ",col" + std::to_string(j) + "_" + std::to_string(i);
    csv += "\n";
    for (std::size_t k = 0; k < frames.times.size(); ++k) {
        csv += format_double(frames.times[k]);
        for (int i = 0; i < n; ++i) csv += "," + format_double(frames.base_states[k][i]);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i)
                csv += "," + format_double(frames.frames[k](i, j));
        csv += "\n";
    }
    write_file(path, csv);
}

} // namespace liao
