#include "bittide/report.hpp"

#include "bittide/spectral.hpp"

namespace bittide {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json to_json(const Eigen::VectorXcd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
    return out;
}

json to_json(const Verdict& v) {
    return {{"check", v.check},
            {"status", std::string(to_string(v.status))},
            {"residual", v.residual},
            {"tolerance", v.tolerance},
            {"detail", v.detail}};
}

json analysis_report(const Network& net, const ResolvedRun& run) {
    const auto& sd = net.spectral();
    const auto& params = net.params();
    const auto& clm = net.closed_loop();
    json out;
    out["n"] = net.topology().node_count();
    out["m"] = net.topology().edge_count();
    out["z"] = to_json(sd.z);
    out["spectrum"] = to_json(sd.eigenvalues);
    out["slowest_rate"] = sd.slowest_rate;
    out["defective"] = sd.defective;
    out["offsets_feasible"] = offsets_feasible(net);
    out["omega_ss"] = to_json(predict_omega_ss(sd, params, clm.r));
    out["correction_ss"] = to_json(correction_limit(sd, clm, params, params.q));
    out["beta_ss_pre"] = to_json(predict_beta_ss(sd, net.incidence(), clm, params, params.q));
    out["beta_off"] = to_json(net.beta_off());
    out["horizons"] = {{"convergence", sd.convergence_horizon()},
                       {"reframe_T1", run.schedule.T1},
                       {"run", run.integrator.horizon},
                       {"explicit_step_bound", explicit_step_bound(clm)}};
    return out;
}

json run_summary(const ScenarioConfig& config, const Network* net, const ResolvedRun& run,
                 const RunOutcome& outcome, const std::vector<std::string>& warnings) {
    json out;
    out["mode"] = outcome.discrete ? "discrete" : "continuous";
    out["controller"] = config.controller == ControllerKind::Reframing ? "reframing" : "proportional";
    out["horizon"] = run.integrator.horizon;
    out["samples"] = outcome.trace.samples.size();
    out["warnings"] = warnings;

    const bool reframed = outcome.trace.reframe_time.has_value();
    json sim;
    if (!outcome.trace.samples.empty()) {
        const auto& last = outcome.trace.samples.back();
        sim["t"] = last.t;
        sim["omega"] = to_json(last.omega);
        sim["c"] = to_json(last.c);
        sim["beta"] = to_json(last.beta);
    }
    sim["reframe_time"] = reframed ? json(*outcome.trace.reframe_time) : json(nullptr);
    json node_times = json::array();
    for (const auto& t : outcome.trace.node_reframe_times) node_times.push_back(t ? json(*t) : json(nullptr));
    sim["node_reframe_times"] = node_times;
    sim["final_q"] = to_json(outcome.trace.final_q);
    out["simulated"] = sim;

    if (net) {
        const auto& sd = net->spectral();
        const auto& params = net->params();
        const auto& clm = net->closed_loop();
        const Eigen::VectorXd omega_ss = predict_omega_ss(sd, params, clm.r);
        const Eigen::VectorXd beta_pre = predict_beta_ss(sd, net->incidence(), clm, params, params.q);
        json pred;
        pred["omega_ss"] = to_json(omega_ss);
        pred["beta_ss_pre"] = to_json(beta_pre);
        pred["beta_off"] = to_json(net->beta_off());
        pred["reframe_payload"] = to_json(correction_limit(sd, clm, params, params.q));
        pred["offsets_feasible"] = offsets_feasible(*net);
        out["predicted"] = pred;
        if (!outcome.trace.samples.empty()) {
            const auto& last = outcome.trace.samples.back();
            const Eigen::VectorXd& beta_target = reframed ? net->beta_off() : beta_pre;
            out["errors"] = {{"omega_vs_omega_ss", (last.omega - omega_ss).cwiseAbs().maxCoeff()},
                             {reframed ? "beta_vs_beta_off" : "beta_vs_beta_ss_pre",
                              (last.beta - beta_target).cwiseAbs().maxCoeff()}};
            if (reframed) {
                out["errors"]["payload_vs_prediction"] =
                    (outcome.trace.final_q - correction_limit(sd, clm, params, params.q)).cwiseAbs().maxCoeff();
            }
        }
    }
    if (outcome.discrete) {
        json faults = json::array();
        for (const auto& f : outcome.faults) {
            faults.push_back({{"edge", f.edge + 1},
                              {"t", f.t},
                              {"direction", std::string(to_string(f.direction))},
                              {"occupancy", f.occupancy}});
        }
        out["faults"] = faults;
        out["aborted"] = outcome.aborted;
        out["discrete_dt"] = outcome.discrete_dt;
        const auto& d = run.discrete;
        out["discrete_settings"] = {{"control_period", d.control_period},
                                    {"quantization", d.quantization},
                                    {"capacity", d.capacity},
                                    {"dt", outcome.discrete_dt},
                                    {"dt_source", d.dt > 0.0 ? "config" : "default 1 / (4 max omega_u)"},
                                    {"continue_on_fault", d.continue_on_fault},
                                    {"reframe_trigger", run.schedule.trigger == ReframeSchedule::Trigger::Auto
                                                            ? "auto"
                                                            : "fixed-time"}};
    }
    return out;
}

json battery_report(const BatteryReport& report) {
    json out;
    const auto& s = report.settings;
    out["settings"] = {{"count", s.count}, {"seed", s.seed},       {"n_min", s.n_min},
                       {"n_max", s.n_max}, {"k_min", s.k_min},     {"k_max", s.k_max},
                       {"omega_min", s.omega_min}, {"omega_max", s.omega_max},
                       {"negative_control", s.negative_control}};
    json summary = json::array();
    for (const auto& c : report.summary) {
        summary.push_back({{"check", c.check},
                           {"pass", c.pass},
                           {"fail", c.fail},
                           {"not_applicable", c.not_applicable},
                           {"invalid", c.invalid},
                           {"expected_fail", c.expected_fail},
                           {"worst_residual", c.worst_residual},
                           {"tolerance", c.tolerance}});
    }
    out["summary"] = summary;
    out["negative_control"] = {{"total", report.negative_total},
                               {"not_centered", report.negative_not_centered},
                               {"passed", report.negative_control_passed}};
    out["non_diagonalizable"] =
        report.defective_count > 0 ? json(report.defective_count) : json("not exercised");
    json scenarios = json::array();
    for (const auto& r : report.scenarios) {
        json verdicts = json::array();
        for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
        json entry = {{"seed", r.seed}, {"kind", r.kind}, {"n", r.n},          {"m", r.m},
                      {"k", r.k},       {"defective", r.defective}, {"verdicts", verdicts}};
        if (r.negative_control) entry["negative_control"] = to_json(*r.negative_control);
        scenarios.push_back(entry);
    }
    out["scenarios"] = scenarios;
    out["all_passed"] = report.all_passed;
    return out;
}

}  // namespace bittide
