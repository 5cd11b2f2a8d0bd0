#include "bittide/scenario_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bittide {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) fail(join(path, key), "unknown key");
    }
}

const json* find(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
}

std::int64_t integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<std::int64_t>();
}

std::size_t count(const json& v, const std::string& path) {
    const auto x = integer(v, path);
    if (x < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::size_t>(x);
}

bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

Eigen::VectorXd vector(const json& v, const std::string& path, std::size_t expected, const char* per) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    if (v.size() != expected) {
        fail(path, "has " + std::to_string(v.size()) + " entries, expected " + std::to_string(expected) + " (one per " +
                       per + ")");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(expected));
    for (std::size_t i = 0; i < expected; ++i) {
        out(static_cast<Eigen::Index>(i)) = number(v[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
}

/// Scalar or per-element array.
Eigen::VectorXd scalar_or_vector(const json& v, const std::string& path, std::size_t expected, const char* per) {
    if (v.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(expected), number(v, path));
    return vector(v, path, expected, per);
}

json to_array(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

TopologySpec parse_topology(const json& doc, const ParseOptions& options) {
    TopologySpec spec;
    const auto* kind = find(doc, "topology");
    if (!kind) fail("topology", "missing required key");
    spec.kind = text(*kind, "topology");
    if (const auto* v = find(doc, "seed")) spec.seed = static_cast<std::uint64_t>(count(*v, "seed"));
    if (options.seed_override) spec.seed = *options.seed_override;
    if (const auto* v = find(doc, "extra_edge_fraction")) {
        spec.extra_edge_fraction = number(*v, "extra_edge_fraction");
    }
    const auto* n = find(doc, "n");
    if (spec.kind == "explicit") {
        const auto* edges = find(doc, "edges");
        if (!edges) fail("edges", "missing required key for an explicit topology");
        if (!edges->is_array()) fail("edges", "expected an array of [src, dst] pairs");
        for (std::size_t e = 0; e < edges->size(); ++e) {
            const auto path = "edges[" + std::to_string(e) + "]";
            const auto& pair = (*edges)[e];
            if (!pair.is_array() || pair.size() != 2) fail(path, "expected a [src, dst] pair");
            spec.edges.emplace_back(count(pair[0], path + "[0]"), count(pair[1], path + "[1]"));
        }
        if (!n) fail("n", "missing required key");
        spec.n = count(*n, "n");
    } else {
        if (find(doc, "edges")) fail("edges", "only allowed with topology 'explicit'");
        if (!n) fail("n", "missing required key");
        spec.n = count(*n, "n");
        try {
            (void)parse_topology_kind(spec.kind);
        } catch (const ValidationError& e) {
            fail("topology", e.what());
        }
    }
    return spec;
}

Topology build_topology(const TopologySpec& spec) {
    try {
        Topology topo = spec.kind == "explicit"
                            ? Topology::from_one_based(spec.n, spec.edges)
                            : generate_topology(parse_topology_kind(spec.kind), spec.n, spec.seed,
                                                spec.extra_edge_fraction);
        if (auto bad = find_unreachable_node(topo)) {
            fail(spec.kind == "explicit" ? "edges" : "topology",
                 "not strongly connected: node " + std::to_string(*bad + 1) +
                     " is not mutually reachable with node 1");
        }
        return topo;
    } catch (const ConfigError&) {
        throw;
    } catch (const ValidationError& e) {
        fail(spec.kind == "explicit" ? "edges" : "topology", e.what());
    }
}

}  // namespace

ScenarioConfig parse_config(const json& doc, const ParseOptions& options) {
    if (!doc.is_object()) fail("<root>", "expected a JSON object");
    reject_unknown(doc, "", {"topology", "n", "edges", "seed", "extra_edge_fraction", "k", "omega_u", "lambda",
                             "beta_off", "theta0", "q", "controller", "reframe", "integrator", "discrete"});
    ScenarioConfig cfg;
    cfg.topology_spec = parse_topology(doc, options);
    cfg.topology = build_topology(cfg.topology_spec);
    const auto n = cfg.topology.node_count();
    const auto m = cfg.topology.edge_count();

    // discrete block first: it decides whether k = 0 is admissible
    if (const auto* d = find(doc, "discrete")) {
        if (!d->is_object()) fail("discrete", "expected an object");
        reject_unknown(*d, "discrete",
                       {"enabled", "control_period", "quantization", "capacity", "dt", "continue_on_fault"});
        if (const auto* v = find(*d, "enabled")) cfg.discrete_enabled = boolean(*v, "discrete.enabled");
        if (const auto* v = find(*d, "control_period")) cfg.discrete.control_period = integer(*v, "discrete.control_period");
        if (const auto* v = find(*d, "quantization")) cfg.discrete.quantization = integer(*v, "discrete.quantization");
        if (const auto* v = find(*d, "capacity")) cfg.discrete.capacity = integer(*v, "discrete.capacity");
        if (const auto* v = find(*d, "dt")) cfg.discrete.dt = number(*v, "discrete.dt");
        if (const auto* v = find(*d, "continue_on_fault")) {
            cfg.discrete.continue_on_fault = boolean(*v, "discrete.continue_on_fault");
        }
    }
    if (options.force_discrete) cfg.discrete_enabled = true;
    if (options.continue_on_fault) cfg.discrete.continue_on_fault = true;
    try {
        validate(cfg.discrete);
    } catch (const ValidationError& e) {
        fail("discrete", e.what());
    }

    const auto* k = find(doc, "k");
    if (!k) fail("k", "missing required key");
    cfg.params.k = number(*k, "k");
    if (cfg.params.k < 0.0 || (cfg.params.k == 0.0 && !cfg.discrete_enabled)) {
        fail("k", "gain must be positive (k = 0 is only accepted in discrete mode)");
    }
    const auto* omega = find(doc, "omega_u");
    if (!omega) fail("omega_u", "missing required key");
    cfg.params.omega_u = vector(*omega, "omega_u", n, "node");
    if ((cfg.params.omega_u.array() <= 0.0).any()) fail("omega_u", "frequencies must be positive");
    cfg.params.lambda = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 10.0);
    if (const auto* v = find(doc, "lambda")) cfg.params.lambda = scalar_or_vector(*v, "lambda", m, "edge");
    if (const auto* v = find(doc, "beta_off")) {
        if (v->is_string()) {
            if (v->get<std::string>() != "feasible") fail("beta_off", "expected \"feasible\" or an array");
        } else {
            cfg.params.beta_off = vector(*v, "beta_off", m, "edge");
        }
    }
    cfg.theta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (const auto* v = find(doc, "theta0")) cfg.theta0 = vector(*v, "theta0", n, "node");
    cfg.params.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (const auto* v = find(doc, "q")) cfg.params.q = vector(*v, "q", n, "node");

    if (const auto* v = find(doc, "controller")) {
        const auto name = text(*v, "controller");
        if (name == "reframing") cfg.controller = ControllerKind::Reframing;
        else if (name == "proportional") cfg.controller = ControllerKind::Proportional;
        else fail("controller", "expected \"reframing\" or \"proportional\"");
    }

    const double kd = cfg.params.k * static_cast<double>(std::max<std::size_t>(1, cfg.topology.max_in_degree()));
    cfg.schedule.trigger = ReframeSchedule::Trigger::Auto;
    cfg.schedule.epsilon = 1e-9 * cfg.params.omega_u.cwiseAbs().maxCoeff();
    cfg.schedule.window = kd > 0.0 ? 10.0 / kd : 0.0;
    cfg.T1_auto = true;
    // quantized measurements keep c dithering, so the auto trigger would
    // never fire in frame-level runs; they default to a fixed T1
    if (cfg.discrete_enabled) cfg.schedule.trigger = ReframeSchedule::Trigger::FixedTime;
    if (const auto* r = find(doc, "reframe")) {
        if (!r->is_object()) fail("reframe", "expected an object");
        reject_unknown(*r, "reframe", {"mode", "T1", "epsilon", "window", "stagger"});
        if (const auto* v = find(*r, "mode")) {
            const auto mode = text(*v, "reframe.mode");
            if (mode == "auto") cfg.schedule.trigger = ReframeSchedule::Trigger::Auto;
            else if (mode == "fixed-time") cfg.schedule.trigger = ReframeSchedule::Trigger::FixedTime;
            else fail("reframe.mode", "expected \"auto\" or \"fixed-time\"");
        }
        if (const auto* v = find(*r, "T1")) {
            cfg.schedule.T1 = number(*v, "reframe.T1");
            if (cfg.schedule.T1 < 0.0) fail("reframe.T1", "must be >= 0");
            cfg.T1_auto = false;
        }
        if (const auto* v = find(*r, "epsilon")) {
            cfg.schedule.epsilon = number(*v, "reframe.epsilon");
            if (!(cfg.schedule.epsilon > 0.0)) fail("reframe.epsilon", "must be > 0");
        }
        if (const auto* v = find(*r, "window")) {
            cfg.schedule.window = number(*v, "reframe.window");
            if (!(cfg.schedule.window > 0.0)) fail("reframe.window", "must be > 0");
        }
        if (const auto* v = find(*r, "stagger")) {
            cfg.schedule.stagger = number(*v, "reframe.stagger");
            if (cfg.schedule.stagger < 0.0) fail("reframe.stagger", "must be >= 0");
        }
    }

    cfg.integrator.method = Integrator::Exact;
    cfg.integrator.dt = kd > 0.0 ? 0.5 / kd : 1.0;
    if (const auto* it = find(doc, "integrator")) {
        if (!it->is_object()) fail("integrator", "expected an object");
        reject_unknown(*it, "integrator", {"method", "dt", "sample_stride", "horizon"});
        if (const auto* v = find(*it, "method")) {
            try {
                cfg.integrator.method = parse_integrator(text(*v, "integrator.method"));
            } catch (const ValidationError& e) {
                fail("integrator.method", e.what());
            }
        }
        if (const auto* v = find(*it, "dt")) {
            cfg.integrator.dt = number(*v, "integrator.dt");
            if (!(cfg.integrator.dt > 0.0)) fail("integrator.dt", "must be > 0");
        }
        if (const auto* v = find(*it, "sample_stride")) {
            cfg.integrator.sample_stride = count(*v, "integrator.sample_stride");
            if (cfg.integrator.sample_stride == 0) fail("integrator.sample_stride", "must be >= 1");
        }
        if (const auto* v = find(*it, "horizon")) {
            if (v->is_string()) {
                if (v->get<std::string>() != "auto") fail("integrator.horizon", "expected \"auto\" or a number");
            } else {
                cfg.integrator.horizon = number(*v, "integrator.horizon");
                if (cfg.integrator.horizon < 0.0) fail("integrator.horizon", "must be >= 0");
                cfg.horizon_auto = false;
            }
        }
    }
    return cfg;
}

ScenarioConfig parse_config_file(const std::filesystem::path& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc, options);
}

json emit_config(const ScenarioConfig& c) {
    json doc;
    const auto& spec = c.topology_spec;
    doc["topology"] = spec.kind;
    doc["n"] = spec.n;
    if (spec.kind == "explicit") {
        json edges = json::array();
        for (const auto& [s, d] : spec.edges) edges.push_back({s, d});
        doc["edges"] = edges;
    } else {
        doc["seed"] = spec.seed;
        doc["extra_edge_fraction"] = spec.extra_edge_fraction;
    }
    doc["k"] = c.params.k;
    doc["omega_u"] = to_array(c.params.omega_u);
    doc["lambda"] = to_array(c.params.lambda);
    doc["beta_off"] = c.params.beta_off ? to_array(*c.params.beta_off) : json("feasible");
    doc["theta0"] = to_array(c.theta0);
    doc["q"] = to_array(c.params.q);
    doc["controller"] = c.controller == ControllerKind::Reframing ? "reframing" : "proportional";
    json reframe;
    reframe["mode"] = c.schedule.trigger == ReframeSchedule::Trigger::Auto ? "auto" : "fixed-time";
    if (!c.T1_auto) reframe["T1"] = c.schedule.T1;
    reframe["epsilon"] = c.schedule.epsilon;
    if (c.schedule.window > 0.0) reframe["window"] = c.schedule.window;
    reframe["stagger"] = c.schedule.stagger;
    doc["reframe"] = reframe;
    json integ;
    integ["method"] = std::string(to_string(c.integrator.method));
    integ["dt"] = c.integrator.dt;
    integ["sample_stride"] = c.integrator.sample_stride;
    integ["horizon"] = c.horizon_auto ? json("auto") : json(c.integrator.horizon);
    doc["integrator"] = integ;
    doc["discrete"] = {{"enabled", c.discrete_enabled},
                       {"control_period", c.discrete.control_period},
                       {"quantization", c.discrete.quantization},
                       {"capacity", c.discrete.capacity},
                       {"dt", c.discrete.dt},
                       {"continue_on_fault", c.discrete.continue_on_fault}};
    return doc;
}

Network build_network(const ScenarioConfig& config) {
    return Network(config.topology, config.params, config.theta0);
}

ResolvedRun resolve(const ScenarioConfig& config, const Network& network) {
    ResolvedRun out{config.schedule, config.integrator, config.discrete};
    const double settle = network.spectral().convergence_horizon();
    if (config.T1_auto) out.schedule.T1 = settle;
    if (config.horizon_auto) {
        if (config.controller == ControllerKind::Proportional) {
            out.integrator.horizon = settle;
        } else if (config.schedule.trigger == ReframeSchedule::Trigger::FixedTime) {
            out.integrator.horizon = out.schedule.T1 + out.schedule.stagger + settle;
        } else {
            out.integrator.horizon = 2.0 * settle + out.schedule.window;
        }
    }
    out.discrete.horizon = out.integrator.horizon;
    out.discrete.sample_stride = out.integrator.sample_stride;
    return out;
}

ResolvedRun resolve(const ScenarioConfig& config) {
    ResolvedRun out{config.schedule, config.integrator, config.discrete};
    if (config.horizon_auto) fail("integrator.horizon", "\"auto\" needs k > 0; give an explicit horizon");
    if (config.controller == ControllerKind::Reframing) {
        if (config.schedule.trigger == ReframeSchedule::Trigger::FixedTime && config.T1_auto) {
            fail("reframe.T1", "required when k = 0");
        }
        if (config.schedule.trigger == ReframeSchedule::Trigger::Auto && !(config.schedule.window > 0.0)) {
            fail("reframe.window", "required when k = 0");
        }
    }
    out.discrete.horizon = out.integrator.horizon;
    out.discrete.sample_stride = out.integrator.sample_stride;
    return out;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    return emit_config(a) == emit_config(b);
}

}  // namespace bittide
