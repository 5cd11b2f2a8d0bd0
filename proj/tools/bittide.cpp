#include "bittide/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace bittide;
    CLI::App app{"Continuous and frame-level simulator for bittide clock control"};
    app.require_subcommand(1);
    CliOptions o;
    std::uint64_t seed = 0;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "scenario config (JSON)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", seed, "override the topology / battery seed");
        sub->add_flag("--strict", o.strict, "treat warnings as errors");
    };

    auto* run = app.add_subcommand("run", "simulate a scenario, write trace.csv and summary.json");
    common(run);
    run->add_flag("--discrete", o.discrete, "frame-accurate mode");
    run->add_flag("--continue-on-fault", o.continue_on_fault, "log buffer faults instead of aborting");

    auto* analyze = app.add_subcommand("analyze", "closed-form predictions, no simulation");
    common(analyze);

    auto* verify = app.add_subcommand("verify", "run the check battery (or all checks on --config)");
    common(verify);
    verify->add_option("--count", o.count, "number of scenarios")->capture_default_str();
    verify->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    verify->add_option("--n-min", o.n_min, "smallest node count")->capture_default_str();
    verify->add_option("--n-max", o.n_max, "largest node count")->capture_default_str();

    auto* plot = app.add_subcommand("plotdata", "labeled series from a trace CSV");
    common(plot);
    plot->add_option("--trace", o.trace, "trace CSV")->required();
    plot->add_option("--quantity", o.quantity, "omega or beta-rel")->capture_default_str();

    auto* gen = app.add_subcommand("gen-topology", "emit a runnable config with an explicit edge list");
    common(gen);
    gen->add_option("--kind", o.kind, "ring, bidirectional-ring, complete, random-strong")->capture_default_str();
    gen->add_option("--n", o.n, "node count")->capture_default_str();
    gen->add_option("--fraction", o.fraction, "extra edge fraction (random-strong)")->capture_default_str();
    gen->add_option("--k", o.k, "gain written to the config")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitBadInput;
    }
    for (auto* sub : {run, analyze, verify, plot, gen}) {
        if (sub->parsed() && sub->count("--seed") > 0) o.seed = seed;
    }

    if (*run) return cmd_run(o, std::cout, std::cerr);
    if (*analyze) return cmd_analyze(o, std::cout, std::cerr);
    if (*verify) return cmd_verify(o, std::cout, std::cerr);
    if (*plot) return cmd_plotdata(o, std::cout, std::cerr);
    return cmd_gen_topology(o, std::cout, std::cerr);
}
