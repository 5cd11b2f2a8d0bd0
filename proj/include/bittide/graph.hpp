#pragma once

// Directed network topologies and their incidence matrices.
//
// Nodes are 0-based internally. Every external surface (config, CSV
// headers, error messages) uses 1-based node and edge numbers.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bittide {

struct Edge {
    std::size_t src;
    std::size_t dst;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed multigraph. Edge order is canonical: it fixes the column index
/// of every m-column matrix and the beta_* columns of every trace.
class Topology {
public:
    /// Throws ValidationError naming the offending edge (1-based) on an
    /// out-of-range endpoint or a self-loop.
    Topology(std::size_t n, std::vector<Edge> edges);

    /// Same, from 1-based (src, dst) pairs as they appear in config files.
    static Topology from_one_based(std::size_t n,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& edges);

    std::size_t node_count() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Edge& edge(std::size_t e) const { return edges_.at(e); }

    std::vector<std::size_t> in_degrees() const;
    std::size_t max_in_degree() const;
    /// Edge ids whose destination is `node`, in canonical order.
    std::vector<std::size_t> incoming_edges(std::size_t node) const;

    friend bool operator==(const Topology&, const Topology&) = default;

private:
    std::size_t n_;
    std::vector<Edge> edges_;
};

struct IncidenceSet {
    Eigen::MatrixXd S;  // source incidence, n x m
    Eigen::MatrixXd D;  // destination incidence, n x m
    Eigen::MatrixXd B;  // S - D
};

IncidenceSet build_incidence(const Topology& topology);

bool is_strongly_connected(const Topology& topology);

/// First node (0-based) that is not mutually reachable with node 0, if any.
std::optional<std::size_t> find_unreachable_node(const Topology& topology);

/// Strong connectivity of the off-diagonal sparsity pattern of a square
/// matrix (entry (i, j) != 0 means an arc i -> j). Diagonal is ignored.
bool is_irreducible(const Eigen::MatrixXd& matrix);

enum class TopologyKind { Ring, BidirectionalRing, Complete, RandomStrong };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

/// Strongly connected generated topology, deterministic in `seed`.
/// RandomStrong is a directed ring plus floor(fraction * n(n-2)) distinct
/// extra edges drawn from the non-ring ordered pairs.
Topology generate_topology(TopologyKind kind, std::size_t n, std::uint64_t seed,
                           double extra_edge_fraction = 0.0);

}  // namespace bittide
