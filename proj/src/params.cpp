#include "bittide/params.hpp"

#include "bittide/errors.hpp"
#include "bittide/graph.hpp"

#include <cmath>

namespace bittide {

namespace {

void require_size(const Eigen::VectorXd& v, std::size_t expected, const char* name, const char* per) {
    if (static_cast<std::size_t>(v.size()) != expected) {
        throw ValidationError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                              std::to_string(expected) + " (one per " + per + ")");
    }
    if (!v.allFinite()) throw ValidationError(std::string(name) + " contains non-finite values");
}

}  // namespace

void validate(const SystemParams& params, const Topology& topology, bool allow_zero_gain) {
    if (!std::isfinite(params.k) || params.k < 0.0 || (params.k == 0.0 && !allow_zero_gain)) {
        throw ValidationError("gain k must be positive, got " + std::to_string(params.k));
    }
    require_size(params.omega_u, topology.node_count(), "omega_u", "node");
    if ((params.omega_u.array() <= 0.0).any()) throw ValidationError("omega_u must be positive");
    require_size(params.lambda, topology.edge_count(), "lambda", "edge");
    if (params.beta_off) require_size(*params.beta_off, topology.edge_count(), "beta_off", "edge");
    if (params.q.size() != 0) require_size(params.q, topology.node_count(), "q", "node");
}

std::vector<std::string> warnings(const SystemParams& params) {
    std::vector<std::string> out;
    if (params.beta_off) {
        for (Eigen::Index e = 0; e < params.beta_off->size(); ++e) {
            if ((*params.beta_off)(e) < 0.0) {
                out.push_back("beta_off for edge " + std::to_string(e + 1) +
                              " is negative; physically suspect");
            }
        }
    }
    return out;
}

SystemParams materialize(const SystemParams& params, const IncidenceSet& inc,
                         const Eigen::VectorXd& theta0) {
    SystemParams out = params;
    if (out.q.size() == 0) out.q = Eigen::VectorXd::Zero(params.omega_u.size());
    if (!out.beta_off) out.beta_off = inc.B.transpose() * theta0 + params.lambda;
    return out;
}

}  // namespace bittide
