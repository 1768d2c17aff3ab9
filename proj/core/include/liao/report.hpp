#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "liao/conjugacy.hpp"
#include "liao/scenario.hpp"

namespace liao {

enum class Subcommand { Certify, Exponents, Delta, Conjugate };

Subcommand parse_subcommand(const std::string& name);

/// Per-sample certification aggregated over the scenario's sample set.
struct CertificationOutcome {
    UniformityReport uniformity;
    HyperbolicityCertificate certificate;
    DichotomyConstants constants;
};

CertificationOutcome certify_scenario(const Scenario& sc);

/// Executes one subcommand, writing the report files into out_dir.
/// Throws ValidationError for contract violations and Error subclasses for
/// numeric failures.
void execute_scenario(const Scenario& sc, Subcommand cmd, const std::string& out_dir);

/// CLI-facing wrapper with the exit-code contract: 0 success, 2 validation
/// failure, 3 numeric failure. Diagnostics go to stderr.
int run_scenario(const std::string& path, Subcommand cmd,
                 const std::string& out_override = "",
                 std::optional<std::uint64_t> seed_override = std::nullopt);

/// 17-significant-digit float formatting used by every CSV emitter.
std::string format_double(double v);

void write_frame_path_csv(const std::string& path, const FramePath& frames);

} // namespace liao
