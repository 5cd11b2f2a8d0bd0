#pragma once

// JSON reports: analysis (no simulation), run summary, battery.

#include "bittide/dynamics.hpp"
#include "bittide/framesim.hpp"
#include "bittide/scenario_config.hpp"
#include "bittide/verify.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bittide {

nlohmann::json to_json(const Eigen::VectorXd& v);
/// Complex values as [re, im] pairs.
nlohmann::json to_json(const Eigen::VectorXcd& v);
nlohmann::json to_json(const Verdict& verdict);

/// z, spectrum of A, omega_ss, pre-reframe beta_ss and the horizons.
nlohmann::json analysis_report(const Network& network, const ResolvedRun& run);

struct RunOutcome {
    SimTrace trace;
    std::vector<Fault> faults;  ///< discrete only
    bool discrete = false;
    bool aborted = false;
    double discrete_dt = 0.0;
};

/// Predicted vs simulated terminal values. `network` is null for k = 0
/// frame-level runs, which have no predictions.
nlohmann::json run_summary(const ScenarioConfig& config, const Network* network, const ResolvedRun& run,
                           const RunOutcome& outcome, const std::vector<std::string>& warnings);

nlohmann::json battery_report(const BatteryReport& report);

}  // namespace bittide
