#pragma once

// Continuous-time closed loop
//   theta' = A theta + omega_u + q + r,  beta = B^T theta + lambda,  c = A theta + q + r
// and the simulation driver that composes it with the node controllers.

#include "bittide/controller.hpp"
#include "bittide/graph.hpp"
#include "bittide/params.hpp"
#include "bittide/spectral.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bittide {

enum class Integrator { Exact, Rk4, Euler };

std::string_view to_string(Integrator method);
Integrator parse_integrator(std::string_view name);
std::string_view to_string(Mode mode);

struct SimState {
    double t = 0.0;
    Eigen::VectorXd theta;  ///< phases in cycles; never wrapped
    Mode mode = Mode::PreReframe;
};

struct Observation {
    Eigen::VectorXd omega;
    Eigen::VectorXd c;
    Eigen::VectorXd beta;
};

struct InitResult {
    SimState state;
    SystemParams params;  ///< materialized: explicit beta_off, q defaulted
};

/// t = 0, pre-reframe. Feasible-at-start offsets become B^T theta0 + lambda.
InitResult init_state(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0);

/// Largest stable step for the explicit integrators: 1 / (k * max in-degree).
double explicit_step_bound(const ClosedLoopMatrix& clm);

/// Advances theta by dt under constant q. Throws StabilityError when an
/// explicit method exceeds explicit_step_bound().
SimState step(const SimState& state, const SystemParams& params, const ClosedLoopMatrix& clm, double dt,
              Integrator method = Integrator::Exact);

/// beta = B^T theta + lambda, c = A theta + q + r, omega = omega_u + c.
Observation observe(const SimState& state, const SystemParams& params, const ClosedLoopMatrix& clm,
                    const IncidenceSet& inc);

/// Exact affine flow over a fixed dt for a fixed drive v:
/// theta+ = e^{A dt} theta + (integral_0^dt e^{As} ds) v. The stable part is
/// read off one exponential of an augmented matrix; the consensus part is
/// exact in closed form.
class ExactPropagator {
public:
    ExactPropagator(const Eigen::MatrixXd& A, const Eigen::VectorXd& drive, double dt);
    Eigen::VectorXd operator()(const Eigen::VectorXd& theta) const;

private:
    Eigen::VectorXd z_;
    Eigen::MatrixXd transition_;  ///< e^{(A - mu W) dt}
    Eigen::VectorXd forced_;      ///< response to the drive off the consensus direction
    double drift_ = 0.0;          ///< z^T v dt
    double consensus_gain_ = 0.0; ///< 1 - e^{-mu dt}
};

/// Immutable bundle of a validated, strongly connected scenario.
class Network {
public:
    Network(Topology topology, const SystemParams& params, Eigen::VectorXd theta0);

    const Topology& topology() const noexcept { return topology_; }
    const IncidenceSet& incidence() const noexcept { return incidence_; }
    const SystemParams& params() const noexcept { return params_; }
    const ClosedLoopMatrix& closed_loop() const noexcept { return closed_loop_; }
    const SpectralData& spectral() const noexcept { return spectral_; }
    const Eigen::VectorXd& theta0() const noexcept { return theta0_; }
    const Eigen::VectorXd& beta_off() const { return *params_.beta_off; }

private:
    Topology topology_;
    IncidenceSet incidence_;
    SystemParams params_;
    Eigen::VectorXd theta0_;
    ClosedLoopMatrix closed_loop_;
    SpectralData spectral_;
};

struct IntegratorSettings {
    Integrator method = Integrator::Exact;
    double dt = 1.0;
    double horizon = 0.0;
    std::size_t sample_stride = 1;  ///< record every stride-th step (plus events and the end)
};

struct TraceSample {
    double t;
    Mode mode;
    Eigen::VectorXd theta;
    Eigen::VectorXd omega;
    Eigen::VectorXd c;
    Eigen::VectorXd beta;
};

struct SimTrace {
    std::vector<TraceSample> samples;
    /// First reframe instant, if any node reframed.
    std::optional<double> reframe_time;
    /// Per-node reframe instants (equal unless staggered).
    std::vector<std::optional<double>> node_reframe_times;
    /// Controller offsets after the run.
    Eigen::VectorXd final_q;
};

/// Runs the configured controller from init_state. Correction samples come
/// from the per-node controllers evaluated on their NodeViews; each reframe
/// instant is recorded twice (pre- then post-reframe).
SimTrace run(const Network& network, ControllerKind controller, const ReframeSchedule& schedule,
             const IntegratorSettings& settings);

}  // namespace bittide
