#include "bittide/graph.hpp"

#include "bittide/errors.hpp"
#include "bittide/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace bittide {

Topology::Topology(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ == 0) throw ValidationError("topology must have at least one node");
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto& [src, dst] = edges_[e];
        std::ostringstream where;
        where << "edge " << e + 1 << " (" << src + 1 << "->" << dst + 1 << ")";
        if (src >= n_ || dst >= n_) {
            throw ValidationError(where.str() + ": node index out of range 1.." + std::to_string(n_));
        }
        if (src == dst) throw ValidationError(where.str() + ": self-loop");
    }
}

Topology Topology::from_one_based(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<Edge> converted;
    converted.reserve(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [src, dst] = edges[e];
        if (src == 0 || dst == 0) {
            throw ValidationError("edge " + std::to_string(e + 1) + " (" + std::to_string(src) + "->" +
                                  std::to_string(dst) + "): node indices are 1-based");
        }
        converted.push_back({src - 1, dst - 1});
    }
    return Topology(n, std::move(converted));
}

std::vector<std::size_t> Topology::in_degrees() const {
    std::vector<std::size_t> deg(n_, 0);
    for (const auto& e : edges_) ++deg[e.dst];
    return deg;
}

std::size_t Topology::max_in_degree() const {
    const auto deg = in_degrees();
    return *std::max_element(deg.begin(), deg.end());
}

std::vector<std::size_t> Topology::incoming_edges(std::size_t node) const {
    std::vector<std::size_t> ids;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edges_[e].dst == node) ids.push_back(e);
    }
    return ids;
}

IncidenceSet build_incidence(const Topology& topology) {
    const auto n = static_cast<Eigen::Index>(topology.node_count());
    const auto m = static_cast<Eigen::Index>(topology.edge_count());
    IncidenceSet inc{Eigen::MatrixXd::Zero(n, m), Eigen::MatrixXd::Zero(n, m), {}};
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto& edge = topology.edge(static_cast<std::size_t>(e));
        inc.S(static_cast<Eigen::Index>(edge.src), e) = 1.0;
        inc.D(static_cast<Eigen::Index>(edge.dst), e) = 1.0;
    }
    inc.B = inc.S - inc.D;
    return inc;
}

namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;

std::vector<bool> reachable_from(const Adjacency& adj, std::size_t start) {
    std::vector<bool> seen(adj.size(), false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return seen;
}

std::optional<std::size_t> first_unreachable(const Adjacency& fwd, const Adjacency& rev) {
    const auto down = reachable_from(fwd, 0);
    const auto up = reachable_from(rev, 0);
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        if (!down[i] || !up[i]) return i;
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::size_t> find_unreachable_node(const Topology& topology) {
    Adjacency fwd(topology.node_count()), rev(topology.node_count());
    for (const auto& e : topology.edges()) {
        fwd[e.src].push_back(e.dst);
        rev[e.dst].push_back(e.src);
    }
    return first_unreachable(fwd, rev);
}

bool is_strongly_connected(const Topology& topology) {
    return !find_unreachable_node(topology).has_value();
}

bool is_irreducible(const Eigen::MatrixXd& matrix) {
    const auto n = static_cast<std::size_t>(matrix.rows());
    if (n == 0 || matrix.cols() != matrix.rows()) return false;
    Adjacency fwd(n), rev(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) {
                fwd[i].push_back(j);
                rev[j].push_back(i);
            }
        }
    }
    return !first_unreachable(fwd, rev).has_value();
}

std::string_view to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::Ring: return "ring";
        case TopologyKind::BidirectionalRing: return "bidirectional-ring";
        case TopologyKind::Complete: return "complete";
        case TopologyKind::RandomStrong: return "random-strong";
    }
    return "?";
}

TopologyKind parse_topology_kind(std::string_view name) {
    for (auto kind : {TopologyKind::Ring, TopologyKind::BidirectionalRing, TopologyKind::Complete,
                      TopologyKind::RandomStrong}) {
        if (to_string(kind) == name) return kind;
    }
    throw ValidationError("unknown topology kind '" + std::string(name) + "'");
}

Topology generate_topology(TopologyKind kind, std::size_t n, std::uint64_t seed,
                           double extra_edge_fraction) {
    if (n < 2) throw ValidationError("generated topologies need n >= 2, got " + std::to_string(n));
    if (!(extra_edge_fraction >= 0.0 && extra_edge_fraction <= 1.0)) {
        throw ValidationError("extra-edge-fraction must lie in [0, 1]");
    }
    std::vector<Edge> edges;
    switch (kind) {
        case TopologyKind::Ring:
            for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
            break;
        case TopologyKind::BidirectionalRing:
            if (n == 2) {
                edges = {{0, 1}, {1, 0}};
                break;
            }
            for (std::size_t i = 0; i < n; ++i) {
                edges.push_back({i, (i + 1) % n});
                edges.push_back({(i + 1) % n, i});
            }
            break;
        case TopologyKind::Complete:
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j) edges.push_back({i, j});
                }
            }
            break;
        case TopologyKind::RandomStrong: {
            for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
            std::vector<Edge> candidates;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j && j != (i + 1) % n) candidates.push_back({i, j});
                }
            }
            const auto extra = static_cast<std::size_t>(
                std::floor(extra_edge_fraction * static_cast<double>(n * (n - 2))));
            Rng rng(seed);
            // partial Fisher-Yates: the first `extra` slots become the sample
            for (std::size_t i = 0; i < extra && i < candidates.size(); ++i) {
                const auto j = i + rng.index(candidates.size() - i);
                std::swap(candidates[i], candidates[j]);
                edges.push_back(candidates[i]);
            }
            break;
        }
    }
    return Topology(n, std::move(edges));
}

}  // namespace bittide
