#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phinv/io.hpp"

namespace phinv::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kModel = 3,
    kCapacity = 4,
    kConvergence = 5,
    kAdmissibility = 6,
};

/// Candidate invariant ψ for `verify` and `reduce`.
struct Candidate {
    std::string kind = "affine";  // affine | omegasq | file
    double a = 1.0;
    double c = 0.0;
    std::string path;
};

struct RunConfig {
    std::string model = "nn";
    int dim = 2;
    int n = 12;
    double offset = 0.5;
    std::optional<double> epsilon_e;  // absent: default_energy_tolerance
    std::optional<double> sigma_tol;  // absent: default_sigma_tol
    double eps0 = 1e-3;
    std::uint64_t seed = 42;
    int bumps = 10;
    std::string out = ".";
    unsigned threads = 1;
    std::size_t cap = 100'000'000;
    std::size_t dense_cap = 4096;
    int max_iterations = 2000;
    double kappa_max = 1e6;
    double margin = 0.05;
    std::vector<double> deltas{1e-8, 1e-6, 1e-4, 1e-2, 1.0};
    Candidate candidate;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    io::Json to_json() const;
};

/// Applies the keys of a JSON config object; unknown keys raise ConfigError.
void apply_config_json(RunConfig& cfg, const io::Json& j);

int cmd_dispersion(const RunConfig& cfg);
int cmd_nullspace(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_reduce(const RunConfig& cfg);

/// Parses argv, dispatches the subcommand and maps errors to exit codes.
int run(int argc, const char* const* argv);

}  // namespace phinv::cli
