#include "bittide/dynamics.hpp"

#include "bittide/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace bittide {

std::string_view to_string(Integrator method) {
    switch (method) {
        case Integrator::Exact: return "exact";
        case Integrator::Rk4: return "rk4";
        case Integrator::Euler: return "euler";
    }
    return "?";
}

Integrator parse_integrator(std::string_view name) {
    for (auto m : {Integrator::Exact, Integrator::Rk4, Integrator::Euler}) {
        if (to_string(m) == name) return m;
    }
    throw ValidationError("unknown integrator '" + std::string(name) + "' (expected exact, rk4 or euler)");
}

std::string_view to_string(Mode mode) {
    return mode == Mode::PreReframe ? "pre-reframe" : "post-reframe";
}

InitResult init_state(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0) {
    validate(params, topology);
    if (static_cast<std::size_t>(theta0.size()) != topology.node_count()) {
        throw ValidationError("theta0 has " + std::to_string(theta0.size()) + " entries, expected " +
                              std::to_string(topology.node_count()));
    }
    const auto inc = build_incidence(topology);
    return {SimState{0.0, theta0, Mode::PreReframe}, materialize(params, inc, theta0)};
}

double explicit_step_bound(const ClosedLoopMatrix& clm) {
    // max in-degree is the largest |diagonal entry| divided by k
    const double max_in = (-clm.A.diagonal()).maxCoeff() / clm.k;
    return 1.0 / (clm.k * std::max(max_in, 1.0));
}

namespace {

Eigen::VectorXd drive_of(const SystemParams& params, const ClosedLoopMatrix& clm) {
    return params.omega_u + params.q + clm.r;
}

void check_explicit_step(const ClosedLoopMatrix& clm, double dt, Integrator method) {
    if (method == Integrator::Exact) return;
    const double bound = explicit_step_bound(clm);
    if (dt > bound) {
        std::ostringstream msg;
        msg.precision(17);
        msg << to_string(method) << " step dt=" << dt << " exceeds the stability bound 1/(k*max_in_degree)=" << bound;
        throw StabilityError(msg.str(), bound);
    }
}

Eigen::VectorXd explicit_advance(const Eigen::MatrixXd& A, const Eigen::VectorXd& drive,
                                 const Eigen::VectorXd& theta, double dt, Integrator method) {
    auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x + drive; };
    if (method == Integrator::Euler) return theta + dt * f(theta);
    const Eigen::VectorXd k1 = f(theta);
    const Eigen::VectorXd k2 = f(theta + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(theta + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(theta + dt * k3);
    return theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

ExactPropagator::ExactPropagator(const Eigen::MatrixXd& A, const Eigen::VectorXd& drive, double dt) {
    const auto n = A.rows();
    if (A.isZero(0.0)) {
        transition_ = Eigen::MatrixXd::Identity(n, n);
        forced_ = drive * dt;
        z_ = Eigen::VectorXd::Zero(n);
        return;
    }
    // Left null vector z (1^T z = 1) and W = 1 z^T. W commutes with A, so
    // e^{At} = e^{(A - mu W) t} + (1 - e^{-mu t}) W, and the shifted matrix is
    // Hurwitz. Exponentiating it instead of A keeps scaling-and-squaring
    // accurate when |A| dt is huge; the consensus drift is added in closed form.
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(A.transpose());
    z_ = lu.kernel().col(0);
    z_ /= z_.sum();
    const Eigen::MatrixXd W = Eigen::VectorXd::Ones(n) * z_.transpose();
    const double mu = A.diagonal().cwiseAbs().maxCoeff();
    drift_ = z_.dot(drive) * dt;
    consensus_gain_ = -std::expm1(-mu * dt);

    const Eigen::MatrixXd shifted = A - mu * W;
    const Eigen::VectorXd off_consensus = drive - W * drive;
    if (mu * dt <= 1.0) {
        Eigen::MatrixXd augmented = Eigen::MatrixXd::Zero(n + 1, n + 1);
        augmented.topLeftCorner(n, n) = shifted * dt;
        augmented.topRightCorner(n, 1) = off_consensus * dt;
        const Eigen::MatrixXd flow = augmented.exp();
        transition_ = flow.topLeftCorner(n, n);
        forced_ = flow.topRightCorner(n, 1);
    } else {
        // long steps: the augmented column loses ~2^squarings ulps, a solve does not
        transition_ = (shifted * dt).exp();
        forced_ = shifted.partialPivLu().solve(transition_ * off_consensus - off_consensus);
    }
}

Eigen::VectorXd ExactPropagator::operator()(const Eigen::VectorXd& theta) const {
    if (z_.isZero(0.0)) return theta + forced_;
    // rows of e^{At} sum to one: carry the common phase as a scalar
    const double common = theta.mean();
    const Eigen::VectorXd local = (theta.array() - common).matrix();
    const double shift = common + drift_ + consensus_gain_ * z_.dot(local);
    return ((transition_ * local + forced_).array() + shift).matrix();
}

SimState step(const SimState& state, const SystemParams& params, const ClosedLoopMatrix& clm, double dt,
              Integrator method) {
    if (!(dt > 0.0)) throw ValidationError("step needs dt > 0");
    check_explicit_step(clm, dt, method);
    SimState next = state;
    next.t = state.t + dt;
    const Eigen::VectorXd drive = drive_of(params, clm);
    if (method == Integrator::Exact) {
        next.theta = ExactPropagator(clm.A, drive, dt)(state.theta);
    } else {
        next.theta = explicit_advance(clm.A, drive, state.theta, dt, method);
    }
    return next;
}

Observation observe(const SimState& state, const SystemParams& params, const ClosedLoopMatrix& clm,
                    const IncidenceSet& inc) {
    Observation obs;
    obs.beta = inc.B.transpose() * state.theta + params.lambda;
    // A 1 = 0; centering first avoids cancellation when theta has drifted far
    const Eigen::VectorXd centered = (state.theta.array() - state.theta.mean()).matrix();
    obs.c = clm.A * centered + params.q + clm.r;
    obs.omega = params.omega_u + obs.c;
    return obs;
}

Network::Network(Topology topology, const SystemParams& params, Eigen::VectorXd theta0)
    : topology_(std::move(topology)), theta0_(std::move(theta0)) {
    if (auto bad = find_unreachable_node(topology_)) {
        throw ValidationError("topology is not strongly connected: node " + std::to_string(*bad + 1) +
                              " is not mutually reachable with node 1");
    }
    auto init = init_state(topology_, params, theta0_);
    incidence_ = build_incidence(topology_);
    params_ = std::move(init.params);
    closed_loop_ = build_closed_loop(incidence_, params_);
    spectral_ = metzler_eigenvector(closed_loop_);
}

namespace {

class Runner {
public:
    Runner(const Network& net, ControllerKind kind, const ReframeSchedule& schedule, const IntegratorSettings& settings)
        : net_(net), kind_(kind), schedule_(schedule), settings_(settings), params_(net.params()) {
        const auto n = net.topology().node_count();
        for (std::size_t i = 0; i < n; ++i) nodes_.emplace_back(params_.k, params_.q(static_cast<Eigen::Index>(i)));
        trace_.node_reframe_times.assign(n, std::nullopt);
        state_ = SimState{0.0, net.theta0(), Mode::PreReframe};
        if (kind_ == ControllerKind::Reframing && schedule_.trigger == ReframeSchedule::Trigger::FixedTime) {
            for (std::size_t i = 0; i < n; ++i) {
                const double offset =
                    n > 1 ? schedule_.stagger * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
                planned_[schedule_.T1 + offset].push_back(i);
            }
        }
    }

    SimTrace run() {
        record();
        fire_planned_up_to(0.0);
        if (auto_armed()) push_window();
        if (settings_.horizon == 0.0) return finish();
        for (std::size_t j = 1;; ++j) {
            const double t_next = std::min(static_cast<double>(j) * settings_.dt, settings_.horizon);
            const bool events = fire_planned_up_to(t_next);
            advance_to(t_next);
            bool paired = events && last_event_time_ == t_next;
            if (auto_armed()) {
                push_window();
                if (auto_reframe_trigger(window_, schedule_.window, schedule_.epsilon)) {
                    std::vector<std::size_t> all(nodes_.size());
                    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                    reframe(all);
                    paired = true;
                }
            }
            if (!paired && (j % settings_.sample_stride == 0 || t_next >= settings_.horizon)) record();
            if (t_next >= settings_.horizon) break;
        }
        return finish();
    }

private:
    bool auto_armed() const {
        return kind_ == ControllerKind::Reframing && schedule_.trigger == ReframeSchedule::Trigger::Auto &&
               !trace_.reframe_time;
    }

    Eigen::VectorXd node_corrections(const Eigen::VectorXd& beta) const {
        Eigen::VectorXd c(static_cast<Eigen::Index>(nodes_.size()));
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            c(static_cast<Eigen::Index>(i)) =
                nodes_[i].correction(make_node_view(net_.topology(), i, beta, net_.beta_off()));
        }
        return c;
    }

    Eigen::VectorXd current_beta() const {
        return net_.incidence().B.transpose() * state_.theta + params_.lambda;
    }

    void record() {
        TraceSample s;
        s.t = state_.t;
        s.mode = state_.mode;
        s.theta = state_.theta;
        s.beta = current_beta();
        s.c = node_corrections(s.beta);
        s.omega = params_.omega_u + s.c;
        trace_.samples.push_back(std::move(s));
    }

    void push_window() {
        window_.push_back({state_.t, node_corrections(current_beta())});
        while (window_.size() >= 2 && window_[1].t <= state_.t - schedule_.window) window_.erase(window_.begin());
    }

    void reframe(const std::vector<std::size_t>& which) {
        record();
        const Eigen::VectorXd c = node_corrections(current_beta());
        for (auto i : which) {
            nodes_[i].reframe(c(static_cast<Eigen::Index>(i)));
            params_.q(static_cast<Eigen::Index>(i)) = nodes_[i].offset();
            trace_.node_reframe_times[i] = state_.t;
        }
        if (!trace_.reframe_time) trace_.reframe_time = state_.t;
        state_.mode = Mode::PostReframe;
        last_event_time_ = state_.t;
        propagator_.reset();
        record();
    }

    bool fire_planned_up_to(double t) {
        bool fired = false;
        while (!planned_.empty() && planned_.begin()->first <= t) {
            const auto [when, which] = *planned_.begin();
            planned_.erase(planned_.begin());
            advance_to(when);
            reframe(which);
            fired = true;
        }
        return fired;
    }

    void advance_to(double target) {
        const double dt = target - state_.t;
        if (dt <= 0.0) return;
        const Eigen::VectorXd drive = drive_of(params_, net_.closed_loop());
        if (settings_.method == Integrator::Exact) {
            // regular grid steps differ from settings_.dt only by rounding of j * dt
            if (std::abs(dt - settings_.dt) <= 1e-9 * settings_.dt) {
                if (!propagator_) propagator_.emplace(net_.closed_loop().A, drive, dt);
                state_.theta = (*propagator_)(state_.theta);
            } else {
                state_.theta = ExactPropagator(net_.closed_loop().A, drive, dt)(state_.theta);
            }
        } else {
            state_.theta = explicit_advance(net_.closed_loop().A, drive, state_.theta, dt, settings_.method);
        }
        state_.t = target;
    }

    SimTrace finish() {
        trace_.final_q = params_.q;
        return std::move(trace_);
    }

    const Network& net_;
    ControllerKind kind_;
    ReframeSchedule schedule_;
    IntegratorSettings settings_;
    SystemParams params_;
    std::vector<NodeController> nodes_;
    SimState state_;
    SimTrace trace_;
    std::map<double, std::vector<std::size_t>> planned_;
    std::vector<CorrectionSample> window_;
    std::optional<ExactPropagator> propagator_;
    double last_event_time_ = -1.0;
};

}  // namespace

SimTrace run(const Network& network, ControllerKind controller, const ReframeSchedule& schedule,
             const IntegratorSettings& settings) {
    if (!(settings.horizon >= 0.0) || !std::isfinite(settings.horizon)) {
        throw ValidationError("horizon must be finite and >= 0");
    }
    if (!(settings.dt > 0.0)) throw ValidationError("integrator dt must be > 0");
    if (settings.sample_stride == 0) throw ValidationError("sample stride must be >= 1");
    check_explicit_step(network.closed_loop(), settings.dt, settings.method);
    if (controller == ControllerKind::Reframing) {
        if (schedule.trigger == ReframeSchedule::Trigger::FixedTime && !(schedule.T1 >= 0.0)) {
            throw ValidationError("reframe T1 must be >= 0");
        }
        if (schedule.trigger == ReframeSchedule::Trigger::Auto &&
            (!(schedule.epsilon > 0.0) || !(schedule.window > 0.0))) {
            throw ValidationError("auto reframe needs epsilon > 0 and window > 0");
        }
        if (schedule.stagger < 0.0) throw ValidationError("reframe stagger must be >= 0");
    }
    return Runner(network, controller, schedule, settings).run();
}

}  // namespace bittide
