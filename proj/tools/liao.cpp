#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "liao/report.hpp"

namespace {

struct CommonArgs {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--scenario", args.scenario, "Scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "Output directory (default from the scenario)");
    cmd->add_option("--seed", args.seed, "Override the scenario seed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Hyperbolicity certification and time-preserving conjugacy "
        "construction for C1 vector fields"};
    app.require_subcommand(1);

    CommonArgs certify_args, exponents_args, delta_args, conjugate_args;
    add_common(app.add_subcommand("certify",
                                  "Uniformity report, hyperbolicity certificate and "
                                  "dichotomy constants"),
               certify_args);
    add_common(app.add_subcommand("exponents", "Transversal rate series as CSV"),
               exponents_args);
    add_common(app.add_subcommand("delta",
                                  "Bounded solution and Delta map of the scenario's "
                                  "standalone dichotomy block"),
               delta_args);
    add_common(app.add_subcommand("conjugate",
                                  "Conjugacy offsets onto the perturbation's invariant "
                                  "set, with verification reports"),
               conjugate_args);

    CLI11_PARSE(app, argc, argv);

    const auto run = [&](const char* name, const CommonArgs& args) {
        return liao::run_scenario(args.scenario, liao::parse_subcommand(name), args.out,
                                  args.seed);
    };
    if (app.got_subcommand("certify")) return run("certify", certify_args);
    if (app.got_subcommand("exponents")) return run("exponents", exponents_args);
    if (app.got_subcommand("delta")) return run("delta", delta_args);
    if (app.got_subcommand("conjugate")) return run("conjugate", conjugate_args);
    return 1;
}
