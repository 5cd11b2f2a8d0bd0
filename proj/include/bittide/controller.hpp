#pragma once

// Per-node proportional and reframing controllers.
//
// A node controller sees only a NodeView: the occupancies of its own
// incoming buffers. It never receives global time, other nodes'
// occupancies, or the network matrices.

#include "bittide/graph.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace bittide {

struct IncomingMeasurement {
    std::size_t edge;   ///< canonical edge id (0-based)
    double occupancy;   ///< beta_{j->i}, frames
    double offset;      ///< beta_off for this buffer, frames
};

struct NodeView {
    std::size_t node;
    std::vector<IncomingMeasurement> incoming;
};

/// Builds the view of `node` from the full occupancy vector. This is the
/// measurement boundary: only edges terminating at `node` are copied.
NodeView make_node_view(const Topology& topology, std::size_t node, const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& beta_off);

/// k * sum over incoming (beta - beta_off) + q.
double proportional_correction(const NodeView& view, double k, double q = 0.0);

enum class Mode { PreReframe, PostReframe };

/// Local state of one node's reframing controller.
class NodeController {
public:
    NodeController(double k, double q) : k_(k), q_(q) {}

    double correction(const NodeView& view) const { return proportional_correction(view, k_, q_); }

    /// Freezes the current local correction into the offset: q := c_i(T1).
    /// Throws ControllerError if the node has already reframed.
    void reframe(double correction_at_T1);

    double offset() const noexcept { return q_; }
    Mode mode() const noexcept { return mode_; }

private:
    double k_;
    double q_;
    Mode mode_ = Mode::PreReframe;
};

enum class ControllerKind { Proportional, Reframing };

struct ReframeSchedule {
    enum class Trigger { FixedTime, Auto };

    Trigger trigger = Trigger::Auto;
    double T1 = 0.0;       ///< fixed-time reframe instant
    double epsilon = 0.0;  ///< auto: correction-stability threshold
    double window = 0.0;   ///< auto: look-back window
    /// Experiment: node i reframes at T1 + stagger * i / (n - 1) instead of
    /// a common T1 (fixed-time only). Behaviour is reported, not asserted.
    double stagger = 0.0;
};

/// Default auto-trigger settings: epsilon = 1e-9 ||omega_u||_inf and
/// window = 10 / (k * max in-degree).
ReframeSchedule default_auto_schedule(double k, const Eigen::VectorXd& omega_u, std::size_t max_in_degree);

struct CorrectionSample {
    double t;
    Eigen::VectorXd c;
};

/// True when the samples cover at least `window` of history and every
/// sample in the trailing window is within epsilon (inf-norm) of the last.
bool auto_reframe_trigger(std::span<const CorrectionSample> samples, double window, double epsilon);

}  // namespace bittide
