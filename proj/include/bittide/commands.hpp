#pragma once

// Subcommand bodies of the `bittide` tool. Each returns the process exit
// code: 0 ok, 1 failed check or aborted run, 2 bad input.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace bittide {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitBadInput = 2 };

struct CliOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;  ///< output directory; stdout when absent (except run)
    std::optional<std::uint64_t> seed;
    bool discrete = false;
    bool continue_on_fault = false;
    bool strict = false;  ///< warnings become errors

    // verify
    std::size_t count = 100;
    std::size_t jobs = 1;
    std::size_t n_min = 2;
    std::size_t n_max = 8;

    // plotdata
    std::optional<std::filesystem::path> trace;
    std::string quantity = "omega";

    // gen-topology
    std::string kind = "random-strong";
    std::size_t n = 8;
    double fraction = 0.3;
    double k = 0.1;
};

/// Writes trace.csv, summary.json and the fully defaulted config.json into
/// --out (default: current directory).
int cmd_run(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_analyze(const CliOptions& options, std::ostream& out, std::ostream& err);
/// Battery, or all checks on the --config scenario.
int cmd_verify(const CliOptions& options, std::ostream& out, std::ostream& err);
int cmd_plotdata(const CliOptions& options, std::ostream& out, std::ostream& err);
/// Emits a runnable config with an explicit edge list.
int cmd_gen_topology(const CliOptions& options, std::ostream& out, std::ostream& err);

}  // namespace bittide
