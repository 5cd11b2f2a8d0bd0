#pragma once

// Frame-accurate mode: integer frame counters on every elastic buffer,
// quantized occupancy measurements, node-local control periods, and hard
// buffer bounds once a buffer turns physical at reframe.
//
// Phases still evolve continuously underneath (theta_i' = omega_i with the
// correction held between control updates); only what the controller
// measures and what the buffers hold is integral.

#include "bittide/controller.hpp"
#include "bittide/dynamics.hpp"
#include "bittide/graph.hpp"
#include "bittide/params.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bittide {

/// Receive buffer of one link, tracked by read and write pointers.
/// Virtual buffers (before reframe) only count; physical buffers must keep
/// 0 <= occupancy <= capacity.
struct ElasticBuffer {
    std::size_t edge = 0;
    std::int64_t write_count = 0;
    std::int64_t read_count = 0;
    std::int64_t capacity = 0;
    bool is_virtual = true;

    std::int64_t occupancy() const noexcept { return write_count - read_count; }
};

enum class FaultDirection { Overflow, Underflow };
std::string_view to_string(FaultDirection direction);

struct Fault {
    std::size_t edge;  ///< 0-based
    double t;
    FaultDirection direction;
    std::int64_t occupancy;
};

class OverflowFault : public std::runtime_error {
public:
    explicit OverflowFault(const Fault& fault);
    const Fault& fault() const noexcept { return fault_; }

private:
    Fault fault_;
};

struct DiscreteSettings {
    std::int64_t control_period = 1;   ///< node-local cycles between controller updates
    std::int64_t quantization = 1;     ///< measurement unit in frames
    std::int64_t capacity = 20;        ///< physical buffer size in frames
    double dt = 0.0;                   ///< 0: pick 1 / (4 * max omega_u)
    double horizon = 0.0;
    std::size_t sample_stride = 1;
    bool continue_on_fault = false;
};

/// Settings check; throws ValidationError.
void validate(const DiscreteSettings& settings);

struct DiscreteTrace {
    SimTrace trace;  ///< beta columns hold integer occupancies
    std::vector<Fault> faults;
    bool aborted = false;
    double dt = 0.0;  ///< step actually used
};

/// Single-run simulator. Accepts k = 0 (controller disabled).
class FrameSimulator {
public:
    FrameSimulator(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0,
                   const DiscreteSettings& settings);

    /// Advances every phase by omega_i * dt, moves the frame counters, checks
    /// physical bounds, then lets nodes whose control boundary passed
    /// re-evaluate. Throws OverflowFault on the first bound violation unless
    /// continue_on_fault is set.
    void discrete_step(double dt);

    /// Freezes the held correction of the listed nodes into their offsets
    /// and turns their incoming buffers physical.
    void reframe(const std::vector<std::size_t>& nodes);

    double time() const noexcept { return t_; }
    const Eigen::VectorXd& theta() const noexcept { return theta_; }
    const Eigen::VectorXd& correction() const noexcept { return c_; }
    Eigen::VectorXd omega() const { return params_.omega_u + c_; }
    const std::vector<ElasticBuffer>& buffers() const noexcept { return buffers_; }
    Eigen::VectorXd occupancies() const;
    /// Quantized occupancy as the controllers see it.
    Eigen::VectorXd measured_occupancies() const;
    const std::vector<std::int64_t>& emitted_frames() const noexcept { return emitted_; }
    const std::vector<Fault>& faults() const noexcept { return faults_; }
    const SystemParams& params() const noexcept { return params_; }
    bool any_reframed() const noexcept { return any_reframed_; }
    Eigen::VectorXd offsets() const;

private:
    void evaluate_node(std::size_t node);
    void check_bounds();

    Topology topology_;
    SystemParams params_;
    DiscreteSettings settings_;
    double t_ = 0.0;
    Eigen::VectorXd theta_;
    Eigen::VectorXd c_;
    std::vector<NodeController> nodes_;
    std::vector<std::int64_t> emitted_;      // frames emitted per node since t = 0
    std::vector<std::int64_t> next_update_;  // emitted-frame count of each node's next control boundary
    std::vector<ElasticBuffer> buffers_;
    std::vector<std::int64_t> initial_write_;
    std::vector<bool> faulted_;
    std::vector<Fault> faults_;
    bool any_reframed_ = false;
};

/// Composes FrameSimulator with a reframe schedule. A fault either aborts
/// the run (trace ends at the fault) or, with continue_on_fault, is logged
/// once per edge.
DiscreteTrace run_discrete(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0,
                           ControllerKind controller, const ReframeSchedule& schedule,
                           const DiscreteSettings& settings);

/// First fault per edge, in time order. Empty iff every physical buffer
/// stayed within bounds.
std::vector<Fault> fault_report(const DiscreteTrace& trace);

/// Advisory: capacity below 2 * max |beta_ss - beta_off| predicted by the
/// continuous model (k > 0 only).
std::vector<std::string> capacity_warnings(const Network& network, const DiscreteSettings& settings);

}  // namespace bittide
