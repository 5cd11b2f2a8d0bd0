#pragma once

// Scenario configuration file (JSON).
//
//   {
//     "topology": "bidirectional-ring" | "ring" | "complete" | "random-strong" | "explicit",
//     "n": 2, "edges": [[1, 2], [2, 1]], "seed": 0, "extra_edge_fraction": 0.0,
//     "k": 0.1, "omega_u": [1.00, 1.02],
//     "lambda": 10 | [...], "beta_off": "feasible" | [...], "theta0": [...], "q": [...],
//     "controller": "reframing" | "proportional",
//     "reframe": {"mode": "auto" | "fixed-time", "T1": ..., "epsilon": ..., "window": ..., "stagger": 0},
//     "integrator": {"method": "exact" | "rk4" | "euler", "dt": ..., "sample_stride": 1, "horizon": "auto" | ...},
//     "discrete": {"enabled": false, "control_period": 1, "quantization": 1, "capacity": 20,
//                  "dt": 0, "continue_on_fault": false}
//   }
//
// Only topology, n (or edges), k and omega_u are required. Unknown keys are
// rejected. Nodes and edges are 1-based.

#include "bittide/controller.hpp"
#include "bittide/dynamics.hpp"
#include "bittide/errors.hpp"
#include "bittide/framesim.hpp"
#include "bittide/graph.hpp"
#include "bittide/params.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bittide {

/// Parse or validation failure; the message starts with the key path.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct TopologySpec {
    std::string kind;  ///< generator kind or "explicit"
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< 1-based, explicit only
    std::uint64_t seed = 0;
    double extra_edge_fraction = 0.0;
};

struct ScenarioConfig {
    TopologySpec topology_spec;
    Topology topology{1, {}};
    SystemParams params;  ///< beta_off empty means feasible at start
    Eigen::VectorXd theta0;
    ControllerKind controller = ControllerKind::Reframing;
    ReframeSchedule schedule;
    bool T1_auto = false;  ///< fixed-time T1 left to 50 / |Re lambda_2|
    IntegratorSettings integrator;
    bool horizon_auto = true;
    bool discrete_enabled = false;
    DiscreteSettings discrete;
};

struct ParseOptions {
    std::optional<std::uint64_t> seed_override;  ///< replaces the topology seed
    bool force_discrete = false;
    bool continue_on_fault = false;
};

ScenarioConfig parse_config(const nlohmann::json& doc, const ParseOptions& options = {});
/// Reads and parses; unreadable files and JSON syntax errors are ConfigErrors.
ScenarioConfig parse_config_file(const std::filesystem::path& path, const ParseOptions& options = {});

/// Fully defaulted form; parse_config(emit_config(c)) reproduces c.
nlohmann::json emit_config(const ScenarioConfig& config);

Network build_network(const ScenarioConfig& config);

/// Fills the spectrum-dependent defaults (T1, horizon) for `network`.
struct ResolvedRun {
    ReframeSchedule schedule;
    IntegratorSettings integrator;
    DiscreteSettings discrete;
};
ResolvedRun resolve(const ScenarioConfig& config, const Network& network);
/// Without a network (k = 0 frame-level runs): every spectrum-dependent
/// setting must be explicit, otherwise ConfigError.
ResolvedRun resolve(const ScenarioConfig& config);

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace bittide
