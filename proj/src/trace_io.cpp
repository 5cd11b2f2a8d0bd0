#include "bittide/trace_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace bittide {

std::string format_number(double value) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

void put(std::ostream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_number(v(i));
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
    double x = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw ValidationError("trace line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
    }
    return x;
}

std::int64_t parse_int(std::string_view field, std::size_t line_no) {
    std::int64_t x = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw ValidationError("trace line " + std::to_string(line_no) + ": bad integer '" + std::string(field) + "'");
    }
    return x;
}

Mode parse_mode(std::string_view field, std::size_t line_no) {
    if (field == "pre-reframe") return Mode::PreReframe;
    if (field == "post-reframe") return Mode::PostReframe;
    throw ValidationError("trace line " + std::to_string(line_no) + ": bad mode '" + std::string(field) + "'");
}

std::size_t count_prefix(const std::vector<std::string_view>& header, std::string_view prefix, std::size_t from) {
    std::size_t n = 0;
    while (from + n < header.size() && header[from + n] == std::string(prefix) + std::to_string(n + 1)) ++n;
    return n;
}

}  // namespace

void write_trace_csv(std::ostream& out, const Topology& topology, const SimTrace& trace,
                     const std::vector<Fault>* faults) {
    const auto n = topology.node_count();
    const auto m = topology.edge_count();
    out << "t,mode";
    for (std::size_t i = 1; i <= n; ++i) out << ",omega_" << i;
    for (std::size_t i = 1; i <= n; ++i) out << ",c_" << i;
    for (std::size_t e = 1; e <= m; ++e) out << ",beta_" << e;
    out << '\n';
    for (const auto& s : trace.samples) {
        out << format_number(s.t) << ',' << to_string(s.mode);
        put(out, s.omega);
        put(out, s.c);
        put(out, s.beta);
        out << '\n';
    }
    if (faults) {
        out << "# faults\nedge,t,direction,occupancy\n";
        for (const auto& f : *faults) {
            out << f.edge + 1 << ',' << format_number(f.t) << ',' << to_string(f.direction) << ',' << f.occupancy
                << '\n';
        }
    }
}

std::optional<double> CsvTrace::reframe_time() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i - 1].mode == Mode::PreReframe && rows[i].mode == Mode::PostReframe) return rows[i].t;
    }
    return std::nullopt;
}

CsvTrace read_trace_csv(std::istream& in) {
    CsvTrace trace;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool in_faults = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "# faults") {
            in_faults = true;
            if (!std::getline(in, line)) break;
            ++line_no;
            continue;
        }
        const auto fields = split(line);
        if (in_faults) {
            if (fields.size() != 4) throw ValidationError("trace line " + std::to_string(line_no) + ": bad fault row");
            Fault f{};
            const auto edge = parse_int(fields[0], line_no);
            if (edge < 1) throw ValidationError("trace line " + std::to_string(line_no) + ": bad fault edge");
            f.edge = static_cast<std::size_t>(edge - 1);
            f.t = parse_double(fields[1], line_no);
            if (fields[2] == "overflow") f.direction = FaultDirection::Overflow;
            else if (fields[2] == "underflow") f.direction = FaultDirection::Underflow;
            else throw ValidationError("trace line " + std::to_string(line_no) + ": bad fault direction");
            f.occupancy = parse_int(fields[3], line_no);
            trace.faults.push_back(f);
            continue;
        }
        if (!header_seen) {
            if (fields.size() < 2 || fields[0] != "t" || fields[1] != "mode") {
                throw ValidationError("trace line 1: expected header starting with t,mode");
            }
            trace.n = count_prefix(fields, "omega_", 2);
            const auto nc = count_prefix(fields, "c_", 2 + trace.n);
            trace.m = count_prefix(fields, "beta_", 2 + 2 * trace.n);
            if (trace.n == 0 || nc != trace.n || fields.size() != 2 + 2 * trace.n + trace.m) {
                throw ValidationError("trace line 1: malformed header");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 2 + 2 * trace.n + trace.m) {
            throw ValidationError("trace line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(2 + 2 * trace.n + trace.m) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        CsvRow row{parse_double(fields[0], line_no), parse_mode(fields[1], line_no),
                   Eigen::VectorXd(static_cast<Eigen::Index>(trace.n)),
                   Eigen::VectorXd(static_cast<Eigen::Index>(trace.n)),
                   Eigen::VectorXd(static_cast<Eigen::Index>(trace.m))};
        std::size_t f = 2;
        for (std::size_t i = 0; i < trace.n; ++i) row.omega(static_cast<Eigen::Index>(i)) = parse_double(fields[f++], line_no);
        for (std::size_t i = 0; i < trace.n; ++i) row.c(static_cast<Eigen::Index>(i)) = parse_double(fields[f++], line_no);
        for (std::size_t e = 0; e < trace.m; ++e) row.beta(static_cast<Eigen::Index>(e)) = parse_double(fields[f++], line_no);
        trace.rows.push_back(std::move(row));
    }
    return trace;
}

PlotQuantity parse_plot_quantity(std::string_view name) {
    if (name == "omega") return PlotQuantity::Omega;
    if (name == "beta-rel") return PlotQuantity::BetaRel;
    throw ValidationError("unknown quantity '" + std::string(name) + "' (expected omega or beta-rel)");
}

void write_plot_data(std::ostream& out, const CsvTrace& trace, PlotQuantity quantity,
                     const Eigen::VectorXd* beta_off) {
    if (trace.rows.empty()) return;
    if (quantity == PlotQuantity::BetaRel) {
        if (!beta_off) throw ValidationError("beta-rel needs the offsets (pass the scenario config)");
        if (static_cast<std::size_t>(beta_off->size()) != trace.m) {
            throw ValidationError("beta_off has " + std::to_string(beta_off->size()) + " entries, trace has " +
                                  std::to_string(trace.m) + " edges");
        }
    }
    bool first = true;
    const auto separate = [&] {
        if (!first) out << '\n';
        first = false;
    };
    if (auto t1 = trace.reframe_time()) {
        separate();
        out << "# marker reframe\n" << format_number(*t1) << '\n';
    }
    const bool omega = quantity == PlotQuantity::Omega;
    const std::size_t series = omega ? trace.n : trace.m;
    for (std::size_t s = 0; s < series; ++s) {
        const auto idx = static_cast<Eigen::Index>(s);
        separate();
        out << (omega ? "# node " : "# edge ") << s + 1 << '\n';
        for (const auto& row : trace.rows) {
            const double v = omega ? row.omega(idx) : row.beta(idx) - (*beta_off)(idx);
            out << format_number(row.t) << ' ' << format_number(v) << '\n';
        }
    }
}

PlotData read_plot_data(std::istream& in) {
    PlotData data;
    std::string line;
    bool in_marker = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto label = line.substr(2);
            in_marker = label == "marker reframe";
            if (!in_marker) data.series.push_back({label, {}, {}});
            continue;
        }
        if (in_marker) {
            data.reframe_marker = parse_double(line, 0);
            continue;
        }
        if (data.series.empty()) throw ValidationError("plot data: values before the first label");
        const auto space = line.find(' ');
        if (space == std::string::npos) throw ValidationError("plot data: expected 't value', got '" + line + "'");
        const std::string_view view(line);
        data.series.back().t.push_back(parse_double(view.substr(0, space), 0));
        data.series.back().value.push_back(parse_double(view.substr(space + 1), 0));
    }
    return data;
}

}  // namespace bittide
