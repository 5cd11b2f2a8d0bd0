#include "bittide/commands.hpp"
#include "bittide/report.hpp"
#include "bittide/scenario_config.hpp"
#include "bittide/trace_io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <clocale>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace bittide;
using nlohmann::json;
using test::max_abs;
using test::vec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("bittide_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* kMinimal = R"({"topology": "bidirectional-ring", "n": 2, "k": 0.1, "omega_u": [1.00, 1.02]})";

std::string config_error(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

struct Run {
    int code;
    std::string out, err;
};

template <class F>
Run call(F f, const CliOptions& o) {
    std::ostringstream out, err;
    const int code = f(o, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults") {
    const auto c = parse_config(json::parse(kMinimal));
    CHECK(c.topology.edge_count() == 2);
    CHECK(max_abs(c.params.lambda - vec({10, 10})) == 0.0);
    CHECK_FALSE(c.params.beta_off.has_value());
    CHECK(max_abs(c.theta0) == 0.0);
    CHECK(max_abs(c.params.q) == 0.0);
    CHECK(c.integrator.method == Integrator::Exact);
    CHECK(c.integrator.dt == doctest::Approx(5.0));
    CHECK(c.horizon_auto);
    CHECK(c.controller == ControllerKind::Reframing);
    CHECK(c.schedule.trigger == ReframeSchedule::Trigger::Auto);
    CHECK(c.schedule.epsilon == doctest::Approx(1.02e-9));
    CHECK(c.schedule.window == doctest::Approx(100));
    CHECK_FALSE(c.discrete_enabled);

    const auto run = resolve(c, build_network(c));
    CHECK(run.schedule.T1 == doctest::Approx(250));
    CHECK(run.integrator.horizon == doctest::Approx(600));
}

TEST_CASE("config errors carry the key path") {
    auto doc = json::parse(kMinimal);
    doc["lamda"] = 3;
    CHECK(config_error(doc).rfind("lamda: unknown key", 0) == 0);

    doc = json::parse(kMinimal);
    doc.erase("k");
    CHECK(config_error(doc).rfind("k: missing", 0) == 0);

    doc = json::parse(kMinimal);
    doc["omega_u"] = "fast";
    CHECK(config_error(doc).rfind("omega_u:", 0) == 0);

    doc = json::parse(kMinimal);
    doc["omega_u"] = {1.0, "x"};
    CHECK(config_error(doc).rfind("omega_u[1]: expected a number", 0) == 0);

    doc = json::parse(kMinimal);
    doc["integrator"] = {{"dt", "big"}};
    CHECK(config_error(doc).rfind("integrator.dt:", 0) == 0);

    doc = json::parse(kMinimal);
    doc["reframe"] = {{"mode", "auto"}, {"T2", 3}};
    CHECK(config_error(doc).rfind("reframe.T2: unknown key", 0) == 0);

    doc = json::parse(kMinimal);
    doc["lambda"] = {1, 2, 3};
    CHECK(config_error(doc).find("lambda: has 3 entries, expected 2") == 0);

    doc = json::parse(kMinimal);
    doc["topology"] = "torus";
    CHECK(config_error(doc).rfind("topology:", 0) == 0);

    doc = json::parse(kMinimal);
    doc["k"] = 0;
    CHECK(config_error(doc).rfind("k:", 0) == 0);
}

TEST_CASE("explicit topology with a dangling node names it") {
    const auto doc = json::parse(
        R"({"topology": "explicit", "n": 3, "edges": [[1,2],[2,1],[3,1]], "k": 0.1, "omega_u": [1,1,1]})");
    const auto msg = config_error(doc);
    CHECK(msg.find("edges:") == 0);
    CHECK(msg.find("node 3") != std::string::npos);

    const auto self = json::parse(R"({"topology": "explicit", "n": 2, "edges": [[1,2],[2,2]], "k": 0.1, "omega_u": [1,1]})");
    CHECK(config_error(self).find("edge 2 (2->2)") != std::string::npos);
}

TEST_CASE("emit and re-parse round-trips") {
    const std::vector<std::string> docs = {
        kMinimal,
        R"({"topology": "random-strong", "n": 6, "seed": 9, "extra_edge_fraction": 0.4, "k": 0.3,
            "omega_u": [1, 1.01, 0.99, 1.02, 0.98, 1.0], "lambda": 7, "theta0": [0, 1, 2, 3, 4, 5],
            "controller": "proportional", "integrator": {"method": "rk4", "dt": 0.1, "horizon": 40, "sample_stride": 3}})",
        R"({"topology": "explicit", "n": 2, "edges": [[1,2],[2,1],[1,2]], "k": 0.2, "omega_u": [1, 1.01],
            "beta_off": [10, 11, 9], "q": [0.001, 0], "reframe": {"mode": "fixed-time", "T1": 12.5, "stagger": 1},
            "discrete": {"enabled": true, "capacity": 8, "quantization": 2, "control_period": 3, "dt": 0.1}})",
    };
    for (const auto& text : docs) {
        const auto a = parse_config(json::parse(text));
        const auto emitted = emit_config(a);
        const auto b = parse_config(emitted);
        CHECK(a == b);
        CHECK(emit_config(b) == emitted);
        CHECK(b.topology == a.topology);
        CHECK(b.params.omega_u == a.params.omega_u);
    }
}

TEST_CASE("parse options") {
    ParseOptions po;
    po.seed_override = 5;
    po.force_discrete = true;
    po.continue_on_fault = true;
    const auto c = parse_config(
        json::parse(R"({"topology": "random-strong", "n": 5, "seed": 1, "extra_edge_fraction": 0.5, "k": 0.1,
                        "omega_u": [1,1,1,1,1]})"),
        po);
    CHECK(c.topology_spec.seed == 5);
    CHECK(c.topology == generate_topology(TopologyKind::RandomStrong, 5, 5, 0.5));
    CHECK(c.discrete_enabled);
    CHECK(c.discrete.continue_on_fault);
    CHECK(c.schedule.trigger == ReframeSchedule::Trigger::FixedTime);
}

TEST_CASE("number formatting is locale independent and round-trips") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(10.0) == "10");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    const char* old = std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
    CHECK(format_number(1.5) == "1.5");
    if (old) std::setlocale(LC_NUMERIC, "C");
    for (double x : {1.0 / 3.0, 1e-17, 123456789.123456789, 9.9, -0.0}) {
        CHECK(std::stod(format_number(x)) == x);
    }
}

TEST_CASE("trace CSV write and read") {
    const auto net = test::e1_network();
    ReframeSchedule s;
    s.trigger = ReframeSchedule::Trigger::FixedTime;
    s.T1 = 20;
    const auto tr = run(net, ControllerKind::Reframing, s, {Integrator::Exact, 5.0, 40.0, 1});
    std::ostringstream out;
    std::vector<Fault> faults{{1, 3.5, FaultDirection::Overflow, 21}};
    write_trace_csv(out, net.topology(), tr, &faults);
    const auto text = out.str();
    CHECK(text.rfind("t,mode,omega_1,omega_2,c_1,c_2,beta_1,beta_2\n0,pre-reframe,", 0) == 0);
    CHECK(text.find("20,pre-reframe,") != std::string::npos);
    CHECK(text.find("20,post-reframe,") != std::string::npos);
    CHECK(text.find("# faults\nedge,t,direction,occupancy\n2,3.5,overflow,21\n") != std::string::npos);

    std::istringstream in(text);
    const auto back = read_trace_csv(in);
    CHECK(back.n == 2);
    CHECK(back.m == 2);
    REQUIRE(back.rows.size() == tr.samples.size());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        CHECK(back.rows[i].t == tr.samples[i].t);
        CHECK(back.rows[i].mode == tr.samples[i].mode);
        CHECK(back.rows[i].omega == tr.samples[i].omega);
        CHECK(back.rows[i].c == tr.samples[i].c);
        CHECK(back.rows[i].beta == tr.samples[i].beta);
    }
    CHECK(back.reframe_time() == std::optional<double>(20.0));
    REQUIRE(back.faults.size() == 1);
    CHECK(back.faults[0].edge == 1);
    CHECK(back.faults[0].direction == FaultDirection::Overflow);

    std::istringstream bad("t,mode,omega_1\n0,pre-reframe,x\n");
    CHECK_THROWS_AS(read_trace_csv(bad), ValidationError);
    std::istringstream empty("");
    CHECK(read_trace_csv(empty).rows.empty());
}

TEST_CASE("plot data format") {
    CsvTrace t;
    t.n = 2;
    t.m = 1;
    t.rows.push_back({0.0, Mode::PreReframe, vec({1, 2}), vec({0, 0}), vec({10})});
    t.rows.push_back({1.0, Mode::PreReframe, vec({1.5, 2}), vec({0, 0}), vec({11})});
    t.rows.push_back({1.0, Mode::PostReframe, vec({1.7, 2}), vec({0, 0}), vec({11})});
    std::ostringstream out;
    write_plot_data(out, t, PlotQuantity::Omega);
    CHECK(out.str() == "# marker reframe\n1\n\n# node 1\n0 1\n1 1.5\n1 1.7\n\n# node 2\n0 2\n1 2\n1 2\n");
    std::ostringstream rel;
    const Eigen::VectorXd off = vec({10.5});
    write_plot_data(rel, t, PlotQuantity::BetaRel, &off);
    std::istringstream in(rel.str());
    const auto pd = read_plot_data(in);
    CHECK(pd.reframe_marker == std::optional<double>(1.0));
    REQUIRE(pd.series.size() == 1);
    CHECK(pd.series[0].label == "edge 1");
    CHECK(pd.series[0].value == std::vector<double>{-0.5, 0.5, 0.5});
    CHECK_THROWS_AS(write_plot_data(rel, t, PlotQuantity::BetaRel), ValidationError);
    std::ostringstream none;
    write_plot_data(none, CsvTrace{}, PlotQuantity::Omega);
    CHECK(none.str().empty());
    CHECK_THROWS_AS(parse_plot_quantity("theta"), ValidationError);
}

TEST_CASE("cmd_run on E1 writes trace, summary and resolved config") {
    const auto dir = scratch("run_e1");
    CliOptions o;
    o.config = write(dir / "e1.json", kMinimal);
    o.out = dir / "out";
    const auto r = call(cmd_run, o);
    CHECK(r.code == 0);
    std::ifstream in(dir / "out" / "trace.csv");
    const auto trace = read_trace_csv(in);
    REQUIRE_FALSE(trace.rows.empty());
    const auto& last = trace.rows.back();
    CHECK(max_abs(last.omega - vec({1.01, 1.01})) <= 1e-9);
    CHECK(max_abs(last.beta - vec({10, 10})) <= 1e-6);
    CHECK(trace.reframe_time().has_value());
    CHECK(trace.faults.empty());
    CHECK(slurp(dir / "out" / "trace.csv").find("# faults") == std::string::npos);

    const auto summary = json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(summary["predicted"]["omega_ss"][0].get<double>() == doctest::Approx(1.01));
    CHECK(summary["predicted"]["beta_ss_pre"][1].get<double>() == doctest::Approx(10.1));
    CHECK(summary["errors"]["omega_vs_omega_ss"].get<double>() <= 1e-9);
    CHECK(summary["errors"]["beta_vs_beta_off"].get<double>() <= 1e-6);
    CHECK(summary["simulated"]["final_q"][0].get<double>() == doctest::Approx(0.01).epsilon(1e-7));

    const auto resolved = parse_config_file(dir / "out" / "config.json");
    CHECK(resolved == parse_config(json::parse(kMinimal)));
}

TEST_CASE("cmd_run is deterministic") {
    const auto dir = scratch("run_det");
    CliOptions o;
    o.config = write(dir / "cfg.json",
                     R"({"topology": "random-strong", "n": 7, "seed": 3, "extra_edge_fraction": 0.3, "k": 0.4,
                         "omega_u": [1.01, 0.99, 1.0, 1.03, 0.97, 1.02, 0.98], "theta0": [0, 0.5, 1, 1.5, 2, 2.5, 3]})");
    o.out = dir / "a";
    CHECK(call(cmd_run, o).code == 0);
    o.out = dir / "b";
    CHECK(call(cmd_run, o).code == 0);
    CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
    CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
}

TEST_CASE("cmd_run with uniform clocks gives constant rows") {
    const auto dir = scratch("run_uniform");
    CliOptions o;
    o.config = write(dir / "cfg.json", R"({"topology": "ring", "n": 4, "k": 0.2, "omega_u": [1, 1, 1, 1],
                                          "reframe": {"mode": "fixed-time", "T1": 10}, "integrator": {"horizon": 20}})");
    o.out = dir;
    CHECK(call(cmd_run, o).code == 0);
    std::ifstream in(dir / "trace.csv");
    const auto t = read_trace_csv(in);
    REQUIRE(t.rows.size() > 2);
    for (const auto& row : t.rows) {
        CHECK(row.omega == t.rows[0].omega);
        CHECK(row.c == t.rows[0].c);
        CHECK(row.beta == t.rows[0].beta);
    }
}

TEST_CASE("cmd_run discrete appends an empty fault log on success") {
    const auto dir = scratch("run_discrete");
    CliOptions o;
    o.config = write(dir / "e1.json", kMinimal);
    o.out = dir;
    o.discrete = true;
    const auto r = call(cmd_run, o);
    CHECK(r.code == 0);
    const auto text = slurp(dir / "trace.csv");
    CHECK(text.size() > 40);
    CHECK(text.substr(text.size() - 36) == "# faults\nedge,t,direction,occupancy\n");
    const auto summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["faults"].empty());
    CHECK(summary["mode"] == "discrete");
    const auto& ds = summary["discrete_settings"];
    CHECK(ds["capacity"] == 20);
    CHECK(ds["quantization"] == 1);
    CHECK(ds["reframe_trigger"] == "fixed-time");
    CHECK(ds["dt_source"].get<std::string>().rfind("default", 0) == 0);
}

TEST_CASE("cmd_run discrete with k = 0 aborts on a fault") {
    const auto dir = scratch("run_fault");
    CliOptions o;
    o.config = write(dir / "cfg.json", R"({"topology": "bidirectional-ring", "n": 2, "k": 0, "omega_u": [1.00, 1.02],
        "lambda": 1, "reframe": {"mode": "fixed-time", "T1": 0}, "integrator": {"horizon": 100},
        "discrete": {"enabled": true, "capacity": 1}})");
    o.out = dir / "abort";
    CHECK(call(cmd_run, o).code == kExitFailure);
    o.out = dir / "cont";
    o.continue_on_fault = true;
    CHECK(call(cmd_run, o).code == kExitOk);
    std::ifstream in(dir / "cont" / "trace.csv");
    const auto t = read_trace_csv(in);
    CHECK(t.faults.size() == 2);

    // k = 0 needs explicit spectrum-free settings
    o.config = write(dir / "auto.json", R"({"topology": "bidirectional-ring", "n": 2, "k": 0, "omega_u": [1, 1.02],
                                          "discrete": {"enabled": true}})");
    const auto r = call(cmd_run, o);
    CHECK(r.code == kExitBadInput);
    CHECK(r.err.find("integrator.horizon") != std::string::npos);
}

TEST_CASE("cmd_run strict mode promotes warnings") {
    const auto dir = scratch("run_strict");
    CliOptions o;
    o.config = write(dir / "cfg.json", R"({"topology": "bidirectional-ring", "n": 2, "k": 0.1, "omega_u": [1, 1.02],
                                          "beta_off": [-1, 21], "integrator": {"horizon": 10}})");
    o.out = dir;
    auto r = call(cmd_run, o);
    CHECK(r.code == 0);
    CHECK(r.err.find("warning: beta_off for edge 1 is negative") != std::string::npos);
    o.strict = true;
    r = call(cmd_run, o);
    CHECK(r.code == kExitBadInput);
}

TEST_CASE("cmd_run rejects bad input with exit code 2") {
    const auto dir = scratch("run_bad");
    CliOptions o;
    o.out = dir;
    CHECK(call(cmd_run, o).code == kExitBadInput);  // no --config
    o.config = write(dir / "corrupt.json", R"({"topology": "ring", "n": )");
    auto r = call(cmd_run, o);
    CHECK(r.code == kExitBadInput);
    CHECK(r.err.find("parse error") != std::string::npos);
    o.config = dir / "missing.json";
    CHECK(call(cmd_run, o).code == kExitBadInput);
    o.config = write(dir / "unstable.json", R"({"topology": "ring", "n": 3, "k": 1, "omega_u": [1, 1, 1],
                                             "integrator": {"method": "euler", "dt": 2, "horizon": 10}})");
    r = call(cmd_run, o);
    CHECK(r.code == kExitBadInput);
    CHECK(r.err.find("1") != std::string::npos);
}

TEST_CASE("cmd_analyze") {
    const auto dir = scratch("analyze");
    CliOptions o;
    o.config = write(dir / "e1.json", kMinimal);
    auto r = call(cmd_analyze, o);
    REQUIRE(r.code == 0);
    auto a = json::parse(r.out);
    CHECK(a["z"][0].get<double>() == doctest::Approx(0.5));
    CHECK(a["z"][1].get<double>() == doctest::Approx(0.5));
    CHECK(std::abs(a["spectrum"][0][0].get<double>()) < 1e-14);
    CHECK(a["spectrum"][1][0].get<double>() == doctest::Approx(-0.2));
    CHECK(std::abs(a["omega_ss"][0].get<double>() - 1.01) < 1e-12);
    CHECK(std::abs(a["beta_ss_pre"][0].get<double>() - 9.9) < 1e-12);
    CHECK(std::abs(a["beta_ss_pre"][1].get<double>() - 10.1) < 1e-12);
    CHECK(a["horizons"]["convergence"].get<double>() == doctest::Approx(250));

    o.config = write(dir / "ring.json", R"({"topology": "ring", "n": 3, "k": 1, "omega_u": [1, 1.01, 0.99]})");
    o.out = dir / "ring";
    REQUIRE(call(cmd_analyze, o).code == 0);
    a = json::parse(slurp(dir / "ring" / "analysis.json"));
    CHECK(a["spectrum"][1][0].get<double>() == doctest::Approx(-1.5));
    CHECK(std::abs(a["spectrum"][1][1].get<double>()) == doctest::Approx(0.8660254037844386));
    CHECK(a["spectrum"][2][0].get<double>() == doctest::Approx(-1.5));

    o.out.reset();
    o.config = write(dir / "uniform.json", R"({"topology": "bidirectional-ring", "n": 2, "k": 0.1, "omega_u": [1, 1],
                                             "beta_off": [12, 8]})");
    a = json::parse(call(cmd_analyze, o).out);
    CHECK(a["beta_ss_pre"][0].get<double>() == doctest::Approx(12));
    CHECK(a["beta_ss_pre"][1].get<double>() == doctest::Approx(8));
}

TEST_CASE("cmd_verify") {
    const auto dir = scratch("verify");
    CliOptions o;
    o.count = 10;
    o.seed = 77;
    o.jobs = 2;
    auto r = call(cmd_verify, o);
    CHECK(r.code == 0);
    const auto report = json::parse(r.out);
    CHECK(report["all_passed"] == true);
    CHECK(report["scenarios"].size() == 10);
    CHECK(report["scenarios"][0]["seed"] == 77);
    CHECK(report["summary"].size() == 8);
    CHECK(r.err.find("all checks passed") != std::string::npos);

    o.config = write(dir / "infeasible.json", R"({"topology": "bidirectional-ring", "n": 3, "k": 0.2,
                                                 "omega_u": [1, 1.01, 0.99], "beta_off": [11, 10, 10, 10, 10, 10]})");
    r = call(cmd_verify, o);
    CHECK(r.code == 0);
    const auto single = json::parse(r.out);
    bool saw_expected_fail = false;
    for (const auto& v : single["scenarios"][0]["verdicts"]) {
        if (v["check"] == "reframe-centering") saw_expected_fail = v["status"] == "expected-fail";
    }
    CHECK(saw_expected_fail);

    o.config = write(dir / "corrupt.json", "{");
    r = call(cmd_verify, o);
    CHECK(r.code == kExitBadInput);

    o.config.reset();
    o.n_min = 1;
    CHECK(call(cmd_verify, o).code == kExitBadInput);
}

TEST_CASE("cmd_plotdata") {
    const auto dir = scratch("plot");
    CliOptions o;
    o.config = write(dir / "e1.json", kMinimal);
    o.out = dir;
    REQUIRE(call(cmd_run, o).code == 0);

    CliOptions p;
    p.trace = dir / "trace.csv";
    auto r = call(cmd_plotdata, p);
    REQUIRE(r.code == 0);
    std::istringstream omega(r.out);
    const auto pd = read_plot_data(omega);
    REQUIRE(pd.reframe_marker.has_value());
    REQUIRE(pd.series.size() == 2);
    CHECK(pd.series[0].label == "node 1");
    CHECK(pd.series[0].value.front() == doctest::Approx(1.00));
    CHECK(pd.series[1].value.front() == doctest::Approx(1.02));

    p.quantity = "beta-rel";
    CHECK(call(cmd_plotdata, p).code == kExitBadInput);  // offsets unknown without the config
    p.config = dir / "e1.json";
    r = call(cmd_plotdata, p);
    REQUIRE(r.code == 0);
    std::istringstream rel(r.out);
    const auto br = read_plot_data(rel);
    REQUIRE(br.series.size() == 2);
    CHECK(br.series[1].label == "edge 2");
    CHECK(std::abs(br.series[0].value.back()) <= 1e-6);
    CHECK(std::abs(br.series[1].value.back()) <= 1e-6);

    CliOptions e;
    e.trace = write(dir / "empty.csv", "");
    e.out = dir / "empty_out";
    CHECK(call(cmd_plotdata, e).code == 0);
    CHECK(fs::exists(dir / "empty_out" / "plot_omega.dat"));
    CHECK(fs::file_size(dir / "empty_out" / "plot_omega.dat") == 0);

    e.trace = dir / "nope.csv";
    CHECK(call(cmd_plotdata, e).code == kExitBadInput);
    e.trace = dir / "trace.csv";
    e.quantity = "phase";
    CHECK(call(cmd_plotdata, e).code == kExitBadInput);
}

TEST_CASE("cmd_gen_topology emits a runnable config") {
    const auto dir = scratch("gen");
    CliOptions o;
    o.n = 8;
    o.seed = 42;
    o.fraction = 0.3;
    auto r = call(cmd_gen_topology, o);
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["topology"] == "explicit");
    CHECK(doc["edges"].size() == 22);
    const auto cfg = parse_config(doc);
    CHECK(cfg.topology == generate_topology(TopologyKind::RandomStrong, 8, 42, 0.3));
    CHECK(call(cmd_gen_topology, o).out == r.out);

    o.kind = "mesh";
    CHECK(call(cmd_gen_topology, o).code == kExitBadInput);
    o.kind = "ring";
    o.n = 1;
    CHECK(call(cmd_gen_topology, o).code == kExitBadInput);
}
