#include "bittide/controller.hpp"

#include "bittide/errors.hpp"

#include <algorithm>

namespace bittide {

NodeView make_node_view(const Topology& topology, std::size_t node, const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& beta_off) {
    NodeView view{node, {}};
    for (auto e : topology.incoming_edges(node)) {
        const auto idx = static_cast<Eigen::Index>(e);
        view.incoming.push_back({e, beta(idx), beta_off(idx)});
    }
    return view;
}

double proportional_correction(const NodeView& view, double k, double q) {
    double relative = 0.0;
    for (const auto& in : view.incoming) relative += in.occupancy - in.offset;
    return k * relative + q;
}

void NodeController::reframe(double correction_at_T1) {
    if (mode_ == Mode::PostReframe) throw ControllerError("node has already reframed; reframing happens once");
    q_ = correction_at_T1;
    mode_ = Mode::PostReframe;
}

ReframeSchedule default_auto_schedule(double k, const Eigen::VectorXd& omega_u, std::size_t max_in_degree) {
    ReframeSchedule s;
    s.trigger = ReframeSchedule::Trigger::Auto;
    s.epsilon = 1e-9 * omega_u.cwiseAbs().maxCoeff();
    s.window = 10.0 / (k * static_cast<double>(max_in_degree));
    return s;
}

bool auto_reframe_trigger(std::span<const CorrectionSample> samples, double window, double epsilon) {
    if (samples.empty()) return false;
    const auto& last = samples.back();
    if (samples.front().t > last.t - window) return false;
    double worst = 0.0;
    for (const auto& s : samples) {
        if (s.t < last.t - window) continue;
        worst = std::max(worst, (s.c - last.c).cwiseAbs().maxCoeff());
    }
    return worst <= epsilon;
}

}  // namespace bittide
