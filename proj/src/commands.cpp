#include "bittide/commands.hpp"

#include "bittide/random.hpp"
#include "bittide/report.hpp"
#include "bittide/scenario_config.hpp"
#include "bittide/trace_io.hpp"
#include "bittide/verify.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace bittide {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct BadInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ScenarioConfig load(const CliOptions& options) {
    if (!options.config) throw BadInput("--config is required");
    ParseOptions po;
    po.seed_override = options.seed;
    po.force_discrete = options.discrete;
    po.continue_on_fault = options.continue_on_fault;
    return parse_config_file(*options.config, po);
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

/// Writes to <out>/<name> when --out is given, else to `stdout_stream`.
void emit(const CliOptions& options, const std::string& name, const std::string& content, std::ostream& stdout_stream) {
    if (options.out) write_file(*options.out / name, content);
    else stdout_stream << content;
}

bool strict_stop(const CliOptions& options, const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << (options.strict ? "error: " : "warning: ") << w << '\n';
    return options.strict && !warnings.empty();
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const BadInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const StabilityError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace

int cmd_run(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load(options);
        std::optional<Network> net;
        if (cfg.params.k > 0.0) net.emplace(build_network(cfg));
        const ResolvedRun run = net ? resolve(cfg, *net) : resolve(cfg);

        std::vector<std::string> warns = warnings(cfg.params);
        if (cfg.discrete_enabled && net) {
            for (auto& w : capacity_warnings(*net, run.discrete)) warns.push_back(std::move(w));
        }
        if (strict_stop(options, warns, err)) return int(kExitBadInput);

        RunOutcome outcome;
        if (cfg.discrete_enabled) {
            auto d = run_discrete(cfg.topology, cfg.params, cfg.theta0, cfg.controller, run.schedule, run.discrete);
            outcome.trace = std::move(d.trace);
            outcome.faults = fault_report(d);
            outcome.discrete = true;
            outcome.aborted = d.aborted;
            outcome.discrete_dt = d.dt;
        } else {
            outcome.trace = bittide::run(*net, cfg.controller, run.schedule, run.integrator);
        }

        const fs::path dir = options.out.value_or(fs::path("."));
        std::ostringstream csv;
        write_trace_csv(csv, cfg.topology, outcome.trace, outcome.discrete ? &outcome.faults : nullptr);
        write_file(dir / "trace.csv", csv.str());
        const json summary = run_summary(cfg, net ? &*net : nullptr, run, outcome, warns);
        write_file(dir / "summary.json", summary.dump(2) + "\n");
        write_file(dir / "config.json", emit_config(cfg).dump(2) + "\n");

        out << "wrote " << outcome.trace.samples.size() << " samples to " << (dir / "trace.csv").string() << '\n';
        if (outcome.trace.reframe_time) out << "reframe at t = " << format_number(*outcome.trace.reframe_time) << '\n';
        if (outcome.discrete) out << outcome.faults.size() << " fault(s)" << (outcome.aborted ? ", run aborted" : "") << '\n';
        return int(outcome.aborted ? kExitFailure : kExitOk);
    });
}

int cmd_analyze(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load(options);
        if (cfg.params.k <= 0.0) throw BadInput("k: analysis needs a positive gain");
        const Network net = build_network(cfg);
        const auto run = resolve(cfg, net);
        const auto warns = warnings(cfg.params);
        if (strict_stop(options, warns, err)) return int(kExitBadInput);
        emit(options, "analysis.json", analysis_report(net, run).dump(2) + "\n", out);
        return int(kExitOk);
    });
}

int cmd_verify(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        BatteryReport report;
        if (options.config) {
            const auto cfg = load(options);
            Scenario s{cfg.topology_spec.seed, cfg.topology_spec.kind, cfg.topology, cfg.params, cfg.theta0};
            if (strict_stop(options, warnings(cfg.params), err)) return int(kExitBadInput);
            report.settings.count = 1;
            report.settings.negative_control = false;
            ScenarioResult r{s.seed, s.kind, cfg.topology.node_count(), cfg.topology.edge_count(), cfg.params.k,
                             false, run_all_checks(s, report.settings.tol), std::nullopt};
            try {
                r.defective = build_network(cfg).spectral().defective;
            } catch (const std::exception&) {
            }
            report.scenarios.push_back(std::move(r));
            summarize(report);
        } else {
            BatterySettings bs;
            bs.count = options.count;
            bs.seed = options.seed.value_or(bs.seed);
            bs.jobs = std::max<std::size_t>(1, options.jobs);
            bs.n_min = options.n_min;
            bs.n_max = options.n_max;
            if (bs.n_min < 2 || bs.n_max < bs.n_min) throw BadInput("--n-min/--n-max: need 2 <= n-min <= n-max");
            report = run_battery(bs);
        }
        const json j = battery_report(report);
        std::ostream& text = options.out ? out : err;
        for (const auto& c : report.summary) {
            text << c.check << ": pass " << c.pass << ", fail " << c.fail << ", n/a " << c.not_applicable
                 << ", invalid " << c.invalid << ", expected-fail " << c.expected_fail << ", worst residual "
                 << format_number(c.worst_residual) << " (tol " << format_number(c.tolerance) << ")\n";
        }
        if (report.negative_total > 0) {
            text << "negative control: " << report.negative_not_centered << "/" << report.negative_total
                 << " not centered\n";
        }
        text << "non-diagonalizable scenarios: "
             << (report.defective_count ? std::to_string(report.defective_count) : std::string("not exercised"))
             << '\n';
        text << (report.all_passed ? "all checks passed" : "FAILED") << '\n';
        emit(options, "battery.json", j.dump(2) + "\n", out);
        return int(report.all_passed ? kExitOk : kExitFailure);
    });
}

int cmd_plotdata(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!options.trace) throw BadInput("--trace is required");
        const auto quantity = parse_plot_quantity(options.quantity);
        std::ifstream in(*options.trace);
        if (!in) throw BadInput("cannot open trace " + options.trace->string());
        const CsvTrace trace = read_trace_csv(in);
        std::optional<Eigen::VectorXd> beta_off;
        if (quantity == PlotQuantity::BetaRel && !trace.rows.empty()) {
            if (!options.config) throw BadInput("beta-rel needs --config to know the offsets");
            const auto cfg = load(options);
            beta_off = *materialize(cfg.params, build_incidence(cfg.topology), cfg.theta0).beta_off;
        }
        std::ostringstream data;
        write_plot_data(data, trace, quantity, beta_off ? &*beta_off : nullptr);
        emit(options, "plot_" + options.quantity + ".dat", data.str(), out);
        return int(kExitOk);
    });
}

int cmd_gen_topology(const CliOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const std::uint64_t seed = options.seed.value_or(0);
        const Topology topo = generate_topology(parse_topology_kind(options.kind), options.n, seed, options.fraction);
        if (!(options.k > 0.0)) throw BadInput("--k must be positive");
        Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
        json omega = json::array();
        for (std::size_t i = 0; i < topo.node_count(); ++i) omega.push_back(rng.uniform(0.95, 1.05));
        json edges = json::array();
        for (const auto& e : topo.edges()) edges.push_back({e.src + 1, e.dst + 1});
        const json cfg = {{"topology", "explicit"}, {"n", topo.node_count()}, {"edges", edges},
                          {"k", options.k},         {"omega_u", omega}};
        emit(options, "topology.json", cfg.dump(2) + "\n", out);
        return int(kExitOk);
    });
}

}  // namespace bittide
