#include "bittide/verify.hpp"

#include "bittide/errors.hpp"
#include "bittide/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

namespace bittide {

std::string_view to_string(Status status) {
    switch (status) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::NotApplicable: return "not-applicable";
        case Status::Invalid: return "invalid-scenario";
        case Status::ExpectedFail: return "expected-fail";
    }
    return "?";
}

namespace {

double inf_norm(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Verdict make(std::string check, double residual, double tolerance, std::string detail = {}) {
    Verdict v{std::move(check), residual <= tolerance ? Status::Pass : Status::Fail, residual, tolerance,
              std::move(detail)};
    return v;
}

/// Builds the network or reports the scenario as invalid.
template <typename Body>
Verdict with_network(const Scenario& s, std::string check, Body&& body) {
    try {
        const Network net(s.topology, s.params, s.theta0);
        return body(net);
    } catch (const ValidationError& e) {
        return Verdict{std::move(check), Status::Invalid, 0.0, 0.0, e.what()};
    } catch (const SpectralError& e) {
        return Verdict{std::move(check), Status::Invalid, 0.0, 0.0, e.what()};
    }
}

Network with_q(const Network& net, const Scenario& s, const Eigen::VectorXd& q) {
    SystemParams p = net.params();  // materialized offsets keep r unchanged
    p.q = q;
    return Network(s.topology, p, s.theta0);
}

IntegratorSettings phase_settings(double horizon, double phase, const Tolerances& tol) {
    return {Integrator::Exact, phase / static_cast<double>(tol.steps_per_phase), horizon, 1};
}

SimTrace simulate_proportional(const Network& net, const Tolerances& tol) {
    const double h = net.spectral().convergence_horizon(tol.efolds);
    return run(net, ControllerKind::Proportional, {}, phase_settings(h, h, tol));
}

SimTrace simulate_reframing(const Network& net, const Tolerances& tol) {
    const double h = net.spectral().convergence_horizon(tol.efolds);
    ReframeSchedule sched;
    sched.trigger = ReframeSchedule::Trigger::FixedTime;
    sched.T1 = h;
    return run(net, ControllerKind::Reframing, sched, phase_settings(2.0 * h, h, tol));
}

/// Index of the last pre-reframe sample (the first of the pair recorded at T1).
std::size_t reframe_index(const SimTrace& trace) {
    for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i) {
        if (trace.samples[i].mode == Mode::PreReframe && trace.samples[i + 1].mode == Mode::PostReframe) return i;
    }
    throw std::logic_error("trace has no reframe event");
}

std::string fmt(double x) {
    std::ostringstream out;
    out.precision(6);
    out << x;
    return out.str();
}

}  // namespace

bool offsets_feasible(const Network& net, double tolerance) {
    const Eigen::VectorXd target = net.beta_off() - net.params().lambda;
    const Eigen::MatrixXd Bt = net.incidence().B.transpose();
    const Eigen::VectorXd x = Bt.completeOrthogonalDecomposition().solve(target);
    const double scale = std::max(1.0, target.norm());
    return (Bt * x - target).norm() <= tolerance * scale;
}

Verdict check_lemma_feasibility(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "feasibility", [&](const Network& net) {
        const auto& clm = net.closed_loop();
        const double rnorm = clm.r.norm();
        double residual = 0.0;
        if (rnorm > 0.0) {
            const Eigen::VectorXd x = clm.A.completeOrthogonalDecomposition().solve(-clm.r);
            residual = (clm.A * x + clm.r).norm() / rnorm;
        }
        if (!offsets_feasible(net)) {
            return Verdict{"feasibility", Status::NotApplicable, residual, tol.algebraic,
                           "infeasible init; range residual " + fmt(residual)};
        }
        return make("feasibility", residual, tol.algebraic, "min ||Ax + r|| / ||r||");
    });
}

Verdict check_projector_limit(const Scenario& s, const Tolerances& tol, std::optional<double> horizon) {
    return with_network(s, "projector-limit", [&](const Network& net) {
        const auto& sd = net.spectral();
        const double h = horizon.value_or(sd.convergence_horizon(tol.efolds));
        const double gap = inf_norm(matrix_exponential(net.closed_loop().A, h) - sd.W);
        return make("projector-limit", gap, tol.limit, "||e^{A h} - 1 z^T||_inf at h=" + fmt(h));
    });
}

Verdict check_spectral_identities(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "spectral-identities", [&](const Network& net) {
        const auto& A = net.closed_loop().A;
        const auto& sd = net.spectral();
        const double scale = std::max(1.0, inf_norm(A));
        double worst = 0.0;
        std::string where = "z^T A";
        auto note = [&](double value, const char* label) {
            if (value > worst) {
                worst = value;
                where = label;
            }
        };
        note(inf_norm(sd.z.transpose() * A) / scale, "z^T A");
        note(std::abs(sd.z.sum() - 1.0), "1^T z");
        note(inf_norm(sd.W * sd.W - sd.W), "W^2 - W");
        note(inf_norm(sd.W * A) / scale, "W A");
        note(inf_norm(A * sd.W) / scale, "A W");
        note(inf_norm(A.rowwise().sum()) / scale, "A 1");
        const auto& G = sd.group_inverse;
        note(inf_norm(G * A - (Eigen::MatrixXd::Identity(A.rows(), A.cols()) - sd.W)) / std::max(1.0, inf_norm(G)) /
                 scale,
             "G A - (I - W)");
        const auto alt = group_inverse_from_stable_part(sd.stable);
        note(inf_norm(alt - G) / std::max(1.0, inf_norm(G)), "stable-part vs bordered group inverse");
        // z > 0 and e^{At} >= -1e-12 elementwise
        bool positive = (sd.z.array() > 0.0).all();
        for (double factor : {0.1, 1.0, 10.0}) {
            const Eigen::MatrixXd E = matrix_exponential(A, factor / sd.slowest_rate);
            note(inf_norm(E.rowwise().sum() - Eigen::VectorXd::Ones(A.rows())), "e^{At} row sums");
            if (E.minCoeff() < -1e-12) positive = false;
        }
        Verdict v = make("spectral-identities", worst, tol.algebraic, "worst: " + where);
        if (!positive) {
            v.status = Status::Fail;
            v.detail = "z or e^{At} has a negative entry";
        }
        return v;
    });
}

Verdict check_correction_limit(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "correction-limit", [&](const Network& net) {
        const auto n = net.params().omega_u.size();
        std::vector<Eigen::VectorXd> offsets{net.params().q};
        Rng rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd q(n);
            for (Eigen::Index j = 0; j < n; ++j) q(j) = rng.uniform(-0.01, 0.01);
            offsets.push_back(q);
        }
        double worst = 0.0;
        for (const auto& q : offsets) {
            const Network variant = with_q(net, s, q);
            const auto trace = simulate_proportional(variant, tol);
            const Eigen::VectorXd predicted =
                correction_limit(variant.spectral(), variant.closed_loop(), variant.params(), q);
            worst = std::max(worst, inf_norm(trace.samples.back().c - predicted));
        }
        const double scale = inf_norm(net.params().omega_u);
        return make("correction-limit", worst / scale, tol.limit, "||c(h) - F(q)|| / ||omega_u||, 4 offsets");
    });
}

Verdict check_beta_limit_pre(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "beta-limit-pre", [&](const Network& net) {
        const auto trace = simulate_proportional(net, tol);
        const auto& p = net.params();
        const Eigen::VectorXd predicted = predict_beta_ss(net.spectral(), net.incidence(), net.closed_loop(), p, p.q);
        return make("beta-limit-pre", inf_norm(trace.samples.back().beta - predicted), tol.limit,
                    "||beta(h) - beta_ss||_inf, frames");
    });
}

Verdict check_reframe_fixed_point(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "reframe-fixed-point", [&](const Network& net) {
        const auto& sd = net.spectral();
        const auto& clm = net.closed_loop();
        const auto& p = net.params();
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p.omega_u.size());
        const Eigen::VectorXd twice = correction_limit(sd, clm, p, correction_limit(sd, clm, p, zero));
        const Eigen::VectorXd expected = sd.W * p.omega_u - p.omega_u;
        const double gap = inf_norm(twice - expected);
        if (!offsets_feasible(net)) {
            return Verdict{"reframe-fixed-point", Status::NotApplicable, gap, tol.algebraic,
                           "infeasible init; ||W r|| = " + fmt(inf_norm(sd.W * clm.r))};
        }
        return make("reframe-fixed-point", gap, tol.algebraic, "||F(F(0)) - (W - I) omega_u||_inf");
    });
}

Verdict check_reframe_frequency(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "reframe-frequency", [&](const Network& net) {
        const auto trace = simulate_reframing(net, tol);
        const auto at = reframe_index(trace);
        const auto& pre = trace.samples[at];
        const auto& after = trace.samples[at + 1];
        const auto& terminal = trace.samples.back();
        const double scale = inf_norm(net.params().omega_u);
        const Eigen::VectorXd consensus = predict_omega_ss(net.spectral(), net.params());
        const double to_consensus = inf_norm(terminal.omega - consensus) / scale;
        const double pre_post = inf_norm(terminal.omega - pre.omega) / scale;
        // the frequency jump at T1 is the correction jump, i.e. the payload c(T1)
        const double jump_mismatch = inf_norm((after.omega - pre.omega) - pre.c) / scale;
        const std::string detail = "terminal vs 1 z^T omega_u: " + fmt(to_consensus) +
                                   "; pre vs post terminal: " + fmt(pre_post) + "; jump vs payload: " +
                                   fmt(jump_mismatch);
        if (!offsets_feasible(net)) {
            return Verdict{"reframe-frequency", Status::NotApplicable, to_consensus, tol.limit,
                           "infeasible init; " + detail};
        }
        Verdict v = make("reframe-frequency", to_consensus, tol.limit, detail);
        if (pre_post > tol.frequency_match || jump_mismatch > tol.algebraic) v.status = Status::Fail;
        return v;
    });
}

Verdict check_reframe_centering(const Scenario& s, const Tolerances& tol) {
    return with_network(s, "reframe-centering", [&](const Network& net) {
        const auto trace = simulate_reframing(net, tol);
        const double gap = inf_norm(trace.samples.back().beta - net.beta_off());
        if (!offsets_feasible(net)) {
            return Verdict{"reframe-centering", gap > tol.infeasible_gap ? Status::ExpectedFail : Status::Fail, gap,
                           tol.infeasible_gap, "infeasible init must not center; terminal gap " + fmt(gap)};
        }
        return make("reframe-centering", gap, tol.centering, "||beta(2h) - beta_off||_inf, frames");
    });
}

std::vector<Verdict> run_all_checks(const Scenario& s, const Tolerances& tol) {
    return {check_lemma_feasibility(s, tol), check_projector_limit(s, tol),   check_spectral_identities(s, tol),
            check_correction_limit(s, tol),  check_beta_limit_pre(s, tol),    check_reframe_fixed_point(s, tol),
            check_reframe_frequency(s, tol), check_reframe_centering(s, tol)};
}

Scenario generate_scenario(const BatterySettings& settings, std::uint64_t seed) {
    if (settings.n_min < 2 || settings.n_max < settings.n_min) throw ValidationError("battery needs 2 <= n_min <= n_max");
    Rng rng(seed);
    Scenario s;
    s.seed = seed;
    const auto n = settings.n_min + rng.index(settings.n_max - settings.n_min + 1);
    const double pick = rng.uniform();
    const auto topo_seed = rng.index(UINT64_MAX);
    if (pick < 0.7) {
        const double fraction = rng.uniform(0.0, 0.6);
        s.topology = generate_topology(TopologyKind::RandomStrong, n, topo_seed, fraction);
        s.kind = "random-strong";
    } else {
        const auto kind = pick < 0.8 ? TopologyKind::Ring
                          : pick < 0.9 ? TopologyKind::BidirectionalRing
                                       : TopologyKind::Complete;
        s.topology = generate_topology(kind, n, topo_seed);
        s.kind = std::string(to_string(kind));
    }
    const auto m = static_cast<Eigen::Index>(s.topology.edge_count());
    const auto nn = static_cast<Eigen::Index>(n);
    s.params.k = rng.uniform(settings.k_min, settings.k_max);
    s.params.omega_u.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i) s.params.omega_u(i) = rng.uniform(settings.omega_min, settings.omega_max);
    s.params.lambda.resize(m);
    for (Eigen::Index e = 0; e < m; ++e) s.params.lambda(e) = rng.uniform(5.0, 15.0);
    s.params.q = Eigen::VectorXd::Zero(nn);
    s.theta0.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i) s.theta0(i) = rng.uniform(-2.0, 2.0);
    return s;
}

Scenario make_infeasible(const Scenario& s) {
    Scenario out = s;
    const auto inc = build_incidence(s.topology);
    Eigen::VectorXd off = inc.B.transpose() * s.theta0 + s.params.lambda;
    off(0) += 1.0;
    out.params.beta_off = off;
    return out;
}

void summarize(BatteryReport& report) {
    std::map<std::string, CheckSummary> by_check;
    std::vector<std::string> order;
    report.defective_count = 0;
    report.negative_total = 0;
    report.negative_not_centered = 0;
    report.all_passed = true;
    for (const auto& r : report.scenarios) {
        if (r.defective) ++report.defective_count;
        for (const auto& v : r.verdicts) {
            auto [it, inserted] = by_check.try_emplace(v.check);
            if (inserted) order.push_back(v.check);
            auto& sum = it->second;
            sum.check = v.check;
            sum.tolerance = v.tolerance;
            switch (v.status) {
                case Status::Pass: ++sum.pass; break;
                case Status::Fail: ++sum.fail; break;
                case Status::NotApplicable: ++sum.not_applicable; break;
                case Status::Invalid: ++sum.invalid; break;
                case Status::ExpectedFail: ++sum.expected_fail; break;
            }
            if (v.status == Status::Pass || v.status == Status::Fail) {
                sum.worst_residual = std::max(sum.worst_residual, v.residual);
            }
            if (!v.ok()) report.all_passed = false;
        }
        if (r.negative_control) {
            ++report.negative_total;
            if (r.negative_control->status == Status::ExpectedFail) ++report.negative_not_centered;
        }
    }
    report.summary.clear();
    for (const auto& name : order) report.summary.push_back(by_check[name]);
    // at least 90% of the infeasible variants must stay off-center
    report.negative_control_passed = report.negative_not_centered * 10 >= report.negative_total * 9;
    if (!report.negative_control_passed) report.all_passed = false;
}

BatteryReport run_battery(const BatterySettings& settings) {
    BatteryReport report;
    report.settings = settings;
    report.scenarios.resize(settings.count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < settings.count; i = next.fetch_add(1)) {
            const auto s = generate_scenario(settings, settings.seed + i);
            ScenarioResult r{s.seed, s.kind, s.topology.node_count(), s.topology.edge_count(), s.params.k, false, {}, {}};
            r.verdicts = run_all_checks(s, settings.tol);
            try {
                r.defective = Network(s.topology, s.params, s.theta0).spectral().defective;
            } catch (const std::exception&) {
                r.defective = false;
            }
            if (settings.negative_control) r.negative_control = check_reframe_centering(make_infeasible(s), settings.tol);
            report.scenarios[i] = std::move(r);
        }
    };
    const auto jobs = std::max<std::size_t>(1, std::min(settings.jobs, settings.count));
    {
        std::vector<std::jthread> pool;
        for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
    }
    summarize(report);
    return report;
}

}  // namespace bittide
