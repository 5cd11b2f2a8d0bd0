#pragma once

// Machine-checkable verdicts for the convergence results, evaluated by
// simulation against the closed-form spectral predictions.

#include "bittide/dynamics.hpp"
#include "bittide/graph.hpp"
#include "bittide/params.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bittide {

struct Scenario {
    std::uint64_t seed = 0;
    std::string kind;  ///< topology kind label for reports
    Topology topology{1, {}};
    SystemParams params;
    Eigen::VectorXd theta0;
};

struct Tolerances {
    double algebraic = 1e-10;    ///< identities, relative
    double limit = 1e-8;         ///< finite-horizon limits
    double frequency_match = 1e-9;  ///< pre vs post reframe terminal frequency, relative
    double centering = 1e-6;     ///< terminal |beta - beta_off|, frames
    double infeasible_gap = 1e-3;  ///< negative control must stay at least this far off
    double efolds = 50.0;        ///< horizon = efolds / |Re lambda_2|
    std::size_t steps_per_phase = 200;
};

enum class Status { Pass, Fail, NotApplicable, Invalid, ExpectedFail };
std::string_view to_string(Status status);

struct Verdict {
    std::string check;
    Status status = Status::Invalid;
    double residual = 0.0;
    double tolerance = 0.0;
    std::string detail;

    bool ok() const noexcept {
        return status == Status::Pass || status == Status::NotApplicable || status == Status::ExpectedFail;
    }
};

/// beta_off - lambda in range(B^T) (least squares residual within tolerance).
bool offsets_feasible(const Network& network, double tolerance = 1e-10);

Verdict check_lemma_feasibility(const Scenario& scenario, const Tolerances& tol = {});
Verdict check_projector_limit(const Scenario& scenario, const Tolerances& tol = {},
                              std::optional<double> horizon = std::nullopt);
Verdict check_spectral_identities(const Scenario& scenario, const Tolerances& tol = {});
Verdict check_correction_limit(const Scenario& scenario, const Tolerances& tol = {});
Verdict check_beta_limit_pre(const Scenario& scenario, const Tolerances& tol = {});
Verdict check_reframe_fixed_point(const Scenario& scenario, const Tolerances& tol = {});
Verdict check_reframe_frequency(const Scenario& scenario, const Tolerances& tol = {});
/// For infeasible offsets the result is ExpectedFail when the terminal gap
/// exceeds tol.infeasible_gap, Fail otherwise.
Verdict check_reframe_centering(const Scenario& scenario, const Tolerances& tol = {});

std::vector<Verdict> run_all_checks(const Scenario& scenario, const Tolerances& tol = {});

struct BatterySettings {
    std::size_t count = 100;
    std::uint64_t seed = 1;
    std::size_t n_min = 2;
    std::size_t n_max = 8;
    double k_min = 0.05;
    double k_max = 1.0;
    double omega_min = 0.95;
    double omega_max = 1.05;
    /// Also run the infeasible-offset variant of every scenario.
    bool negative_control = true;
    std::size_t jobs = 1;
    Tolerances tol;
};

/// Deterministic random strongly connected scenario with feasible offsets
/// and q = 0.
Scenario generate_scenario(const BatterySettings& settings, std::uint64_t seed);

/// Same scenario with beta_off = B^T theta0 + lambda + e_1 (infeasible).
Scenario make_infeasible(const Scenario& scenario);

struct ScenarioResult {
    std::uint64_t seed;
    std::string kind;
    std::size_t n;
    std::size_t m;
    double k;
    bool defective;
    std::vector<Verdict> verdicts;
    std::optional<Verdict> negative_control;
};

struct CheckSummary {
    std::string check;
    std::size_t pass = 0, fail = 0, not_applicable = 0, invalid = 0, expected_fail = 0;
    double worst_residual = 0.0;
    double tolerance = 0.0;
};

struct BatteryReport {
    BatterySettings settings;
    std::vector<ScenarioResult> scenarios;  ///< sorted by generation index
    std::vector<CheckSummary> summary;
    std::size_t negative_total = 0;
    std::size_t negative_not_centered = 0;
    bool negative_control_passed = true;  ///< at least 90% stayed off-center
    std::size_t defective_count = 0;
    bool all_passed = true;
};

/// Runs every check over `settings.count` generated scenarios (parallel
/// across `settings.jobs` threads; the report does not depend on it).
BatteryReport run_battery(const BatterySettings& settings);

/// Summary and pass flag for an arbitrary list of scenario results.
void summarize(BatteryReport& report);

}  // namespace bittide
