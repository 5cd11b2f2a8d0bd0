#include "bittide/framesim.hpp"

#include "bittide/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace bittide {

std::string_view to_string(FaultDirection direction) {
    return direction == FaultDirection::Overflow ? "overflow" : "underflow";
}

namespace {

std::string describe(const Fault& f) {
    std::ostringstream out;
    out.precision(17);
    out << to_string(f.direction) << " on edge " << f.edge + 1 << " at t=" << f.t << " (occupancy " << f.occupancy
        << ")";
    return out.str();
}

std::int64_t floor_to_int(double x) { return static_cast<std::int64_t>(std::floor(x)); }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const auto q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

OverflowFault::OverflowFault(const Fault& fault) : std::runtime_error(describe(fault)), fault_(fault) {}

void validate(const DiscreteSettings& settings) {
    if (settings.control_period < 1) throw ValidationError("discrete.control_period must be >= 1 cycle");
    if (settings.quantization < 1) throw ValidationError("discrete.quantization must be >= 1 frame");
    if (settings.capacity < 1) throw ValidationError("discrete.capacity must be >= 1 frame");
    if (!(settings.dt >= 0.0)) throw ValidationError("discrete.dt must be >= 0");
    if (!(settings.horizon >= 0.0) || !std::isfinite(settings.horizon)) {
        throw ValidationError("horizon must be finite and >= 0");
    }
    if (settings.sample_stride == 0) throw ValidationError("sample stride must be >= 1");
}

FrameSimulator::FrameSimulator(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0,
                               const DiscreteSettings& settings)
    : topology_(topology), settings_(settings) {
    validate(params, topology, /*allow_zero_gain=*/true);
    validate(settings);
    if (static_cast<std::size_t>(theta0.size()) != topology.node_count()) {
        throw ValidationError("theta0 length does not match node count");
    }
    params_ = materialize(params, build_incidence(topology), theta0);
    theta_ = theta0;
    const auto n = topology.node_count();
    c_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) nodes_.emplace_back(params_.k, params_.q(static_cast<Eigen::Index>(i)));
    emitted_.assign(n, 0);
    next_update_.assign(n, settings.control_period);
    for (std::size_t e = 0; e < topology.edge_count(); ++e) {
        const auto& edge = topology.edge(e);
        ElasticBuffer buf;
        buf.edge = e;
        buf.write_count =
            floor_to_int(theta_(static_cast<Eigen::Index>(edge.src)) + params_.lambda(static_cast<Eigen::Index>(e)));
        buf.read_count = floor_to_int(theta_(static_cast<Eigen::Index>(edge.dst)));
        buf.capacity = settings.capacity;
        buffers_.push_back(buf);
        initial_write_.push_back(buf.write_count);
    }
    faulted_.assign(topology.edge_count(), false);
    for (std::size_t i = 0; i < n; ++i) evaluate_node(i);
}

Eigen::VectorXd FrameSimulator::occupancies() const {
    Eigen::VectorXd occ(static_cast<Eigen::Index>(buffers_.size()));
    for (std::size_t e = 0; e < buffers_.size(); ++e) {
        occ(static_cast<Eigen::Index>(e)) = static_cast<double>(buffers_[e].occupancy());
    }
    return occ;
}

Eigen::VectorXd FrameSimulator::measured_occupancies() const {
    Eigen::VectorXd occ(static_cast<Eigen::Index>(buffers_.size()));
    const auto u = settings_.quantization;
    for (std::size_t e = 0; e < buffers_.size(); ++e) {
        occ(static_cast<Eigen::Index>(e)) = static_cast<double>(u * floor_div(buffers_[e].occupancy(), u));
    }
    return occ;
}

Eigen::VectorXd FrameSimulator::offsets() const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(nodes_.size()));
    for (std::size_t i = 0; i < nodes_.size(); ++i) q(static_cast<Eigen::Index>(i)) = nodes_[i].offset();
    return q;
}

void FrameSimulator::evaluate_node(std::size_t node) {
    const auto view = make_node_view(topology_, node, measured_occupancies(), *params_.beta_off);
    c_(static_cast<Eigen::Index>(node)) = nodes_[node].correction(view);
}

void FrameSimulator::check_bounds() {
    for (auto& buf : buffers_) {
        if (buf.is_virtual || faulted_[buf.edge]) continue;
        const auto occ = buf.occupancy();
        if (occ >= 0 && occ <= buf.capacity) continue;
        const Fault fault{buf.edge, t_, occ < 0 ? FaultDirection::Underflow : FaultDirection::Overflow, occ};
        faulted_[buf.edge] = true;
        faults_.push_back(fault);
        if (!settings_.continue_on_fault) throw OverflowFault(fault);
    }
}

void FrameSimulator::discrete_step(double dt) {
    if (!(dt > 0.0)) throw ValidationError("discrete step needs dt > 0");
    const auto n = topology_.node_count();
    std::vector<std::int64_t> frames(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double before = theta_(idx);
        theta_(idx) += (params_.omega_u(idx) + c_(idx)) * dt;
        frames[i] = floor_to_int(theta_(idx)) - floor_to_int(before);
        emitted_[i] += frames[i];
    }
    for (auto& buf : buffers_) {
        const auto& edge = topology_.edge(buf.edge);
        buf.write_count += frames[edge.src];
        buf.read_count += frames[edge.dst];
        if (buf.write_count - initial_write_[buf.edge] != emitted_[edge.src]) {
            throw std::logic_error("frame conservation violated on edge " + std::to_string(buf.edge + 1));
        }
    }
    t_ += dt;
    check_bounds();
    for (std::size_t i = 0; i < n; ++i) {
        if (emitted_[i] < next_update_[i]) continue;
        evaluate_node(i);
        next_update_[i] = (floor_div(emitted_[i], settings_.control_period) + 1) * settings_.control_period;
    }
}

void FrameSimulator::reframe(const std::vector<std::size_t>& nodes) {
    for (auto i : nodes) {
        nodes_[i].reframe(c_(static_cast<Eigen::Index>(i)));
        for (auto e : topology_.incoming_edges(i)) buffers_[e].is_virtual = false;
    }
    any_reframed_ = true;
    check_bounds();
}

namespace {

class DiscreteRunner {
public:
    DiscreteRunner(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0,
                   ControllerKind kind, const ReframeSchedule& schedule, const DiscreteSettings& settings)
        : sim_(topology, params, theta0, settings), kind_(kind), schedule_(schedule), settings_(settings) {
        out_.dt = settings.dt > 0.0 ? settings.dt : 0.25 / params.omega_u.maxCoeff();
        const auto n = topology.node_count();
        out_.trace.node_reframe_times.assign(n, std::nullopt);
        if (kind_ == ControllerKind::Reframing && schedule_.trigger == ReframeSchedule::Trigger::FixedTime) {
            for (std::size_t i = 0; i < n; ++i) {
                const double offset =
                    n > 1 ? schedule_.stagger * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
                planned_[schedule_.T1 + offset].push_back(i);
            }
        }
    }

    DiscreteTrace run() {
        try {
            record();
            fire_planned_up_to(0.0);
            if (auto_armed()) push_window();
            if (settings_.horizon > 0.0) loop();
        } catch (const OverflowFault&) {
            out_.aborted = true;
            record();
        }
        out_.faults = sim_.faults();
        out_.trace.final_q = sim_.offsets();
        return std::move(out_);
    }

private:
    void loop() {
        for (std::size_t j = 1;; ++j) {
            const double t_next = std::min(static_cast<double>(j) * out_.dt, settings_.horizon);
            bool paired = fire_planned_up_to(t_next) && last_event_time_ == t_next;
            advance_to(t_next);
            if (auto_armed()) {
                push_window();
                if (auto_reframe_trigger(window_, schedule_.window, schedule_.epsilon)) {
                    std::vector<std::size_t> all(sim_.theta().size());
                    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                    reframe(all);
                    paired = true;
                }
            }
            if (!paired && (j % settings_.sample_stride == 0 || t_next >= settings_.horizon)) record();
            if (t_next >= settings_.horizon) break;
        }
    }

    bool auto_armed() const {
        return kind_ == ControllerKind::Reframing && schedule_.trigger == ReframeSchedule::Trigger::Auto &&
               !out_.trace.reframe_time;
    }

    void record() {
        TraceSample s;
        s.t = sim_.time();
        s.mode = sim_.any_reframed() ? Mode::PostReframe : Mode::PreReframe;
        s.theta = sim_.theta();
        s.c = sim_.correction();
        s.omega = sim_.omega();
        s.beta = sim_.occupancies();
        out_.trace.samples.push_back(std::move(s));
    }

    void push_window() {
        window_.push_back({sim_.time(), sim_.correction()});
        while (window_.size() >= 2 && window_[1].t <= sim_.time() - schedule_.window) window_.erase(window_.begin());
    }

    void reframe(const std::vector<std::size_t>& which) {
        record();
        const double t = sim_.time();
        for (auto i : which) out_.trace.node_reframe_times[i] = t;
        if (!out_.trace.reframe_time) out_.trace.reframe_time = t;
        last_event_time_ = t;
        sim_.reframe(which);
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
        const double dt = target - sim_.time();
        if (dt > 0.0) sim_.discrete_step(dt);
    }

    FrameSimulator sim_;
    ControllerKind kind_;
    ReframeSchedule schedule_;
    DiscreteSettings settings_;
    DiscreteTrace out_;
    std::map<double, std::vector<std::size_t>> planned_;
    std::vector<CorrectionSample> window_;
    double last_event_time_ = -1.0;
};

}  // namespace

DiscreteTrace run_discrete(const Topology& topology, const SystemParams& params, const Eigen::VectorXd& theta0,
                           ControllerKind controller, const ReframeSchedule& schedule,
                           const DiscreteSettings& settings) {
    validate(settings);
    if (settings.dt > 0.0 && settings.dt > 0.25 / params.omega_u.maxCoeff()) {
        throw ValidationError("discrete.dt must be <= 1/(4 max omega_u) so frame counts move by O(1) per step");
    }
    if (controller == ControllerKind::Reframing && schedule.trigger == ReframeSchedule::Trigger::Auto &&
        (!(schedule.epsilon > 0.0) || !(schedule.window > 0.0))) {
        throw ValidationError("auto reframe needs epsilon > 0 and window > 0");
    }
    return DiscreteRunner(topology, params, theta0, controller, schedule, settings).run();
}

std::vector<Fault> fault_report(const DiscreteTrace& trace) {
    std::vector<Fault> first;
    std::vector<bool> seen;
    for (const auto& f : trace.faults) {
        if (f.edge >= seen.size()) seen.resize(f.edge + 1, false);
        if (seen[f.edge]) continue;
        seen[f.edge] = true;
        first.push_back(f);
    }
    std::stable_sort(first.begin(), first.end(), [](const Fault& a, const Fault& b) { return a.t < b.t; });
    return first;
}

std::vector<std::string> capacity_warnings(const Network& network, const DiscreteSettings& settings) {
    const auto& p = network.params();
    const Eigen::VectorXd beta_ss =
        predict_beta_ss(network.spectral(), network.incidence(), network.closed_loop(), p, p.q);
    const double spread = (beta_ss - network.beta_off()).cwiseAbs().maxCoeff();
    std::vector<std::string> out;
    if (static_cast<double>(settings.capacity) < 2.0 * spread) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "capacity " << settings.capacity << " is below 2 * max |beta_ss - beta_off| = " << 2.0 * spread;
        out.push_back(msg.str());
    }
    // one measurement unit of error on every incoming edge can cancel the
    // node's own frequency; a stalled node stops updating its controller
    const auto& topo = network.topology();
    for (std::size_t i = 0; i < topo.node_count(); ++i) {
        const double dither = p.k * static_cast<double>(topo.incoming_edges(i).size() * settings.quantization);
        const double omega = p.omega_u(static_cast<Eigen::Index>(i));
        if (dither >= omega) {
            std::ostringstream msg;
            msg.precision(6);
            msg << "node " << i + 1 << ": quantization dither k * in-degree * quantization = " << dither
                << " reaches omega_u = " << omega << "; the node can stall";
            out.push_back(msg.str());
        }
    }
    return out;
}

}  // namespace bittide
