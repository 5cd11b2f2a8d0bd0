#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace bittide {

class Topology;
struct IncidenceSet;

/// Parameterization of the closed loop
///   theta' = omega_u + c,  beta = B^T theta + lambda,  c = k D (beta - beta_off) + q.
struct SystemParams {
    double k = 0.0;             ///< proportional gain
    Eigen::VectorXd omega_u;    ///< uncontrolled frequencies, one per node
    Eigen::VectorXd lambda;     ///< link constants, one per edge
    /// Buffer offsets, one per edge. Empty means "feasible at start":
    /// materialized as B^T theta0 + lambda when the network is built.
    std::optional<Eigen::VectorXd> beta_off;
    Eigen::VectorXd q;          ///< controller frequency offset; zero if empty

    bool offsets_feasible_at_start() const noexcept { return !beta_off.has_value(); }
};

/// Checks dimensions and signs against the topology; throws ValidationError.
/// `allow_zero_gain` admits k = 0 (controller disabled, frame-level runs only).
void validate(const SystemParams& params, const Topology& topology, bool allow_zero_gain = false);

/// Non-fatal findings, e.g. negative explicit offsets.
std::vector<std::string> warnings(const SystemParams& params);

/// Copy of `params` with q defaulted to zero and beta_off materialized
/// (B^T theta0 + lambda when tagged feasible).
SystemParams materialize(const SystemParams& params, const IncidenceSet& inc,
                         const Eigen::VectorXd& theta0);

}  // namespace bittide
