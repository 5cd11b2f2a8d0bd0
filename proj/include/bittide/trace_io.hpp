#pragma once

// Trace CSV and plot-data text formats.
//
// CSV: header `t,mode,omega_1..omega_n,c_1..c_n,beta_1..beta_m`, one row per
// sample, numbers with 17 significant digits and a dot decimal separator.
// Discrete runs append
//
//   # faults
//   edge,t,direction,occupancy
//   ...
//
// Plot data: an optional `# marker reframe` block holding the reframe time,
// then one `# node i` (or `# edge e`) block of "t value" lines per series.
// Blocks are separated by one blank line.

#include "bittide/dynamics.hpp"
#include "bittide/errors.hpp"
#include "bittide/framesim.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bittide {

/// 17 significant digits, dot decimal separator regardless of locale.
std::string format_number(double value);

void write_trace_csv(std::ostream& out, const Topology& topology, const SimTrace& trace,
                     const std::vector<Fault>* faults = nullptr);

struct CsvRow {
    double t;
    Mode mode;
    Eigen::VectorXd omega;
    Eigen::VectorXd c;
    Eigen::VectorXd beta;
};

struct CsvTrace {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<CsvRow> rows;
    std::vector<Fault> faults;

    /// Time of the first pre -> post mode change, if any.
    std::optional<double> reframe_time() const;
};

/// Throws ValidationError on malformed input. An empty stream is an empty trace.
CsvTrace read_trace_csv(std::istream& in);

enum class PlotQuantity { Omega, BetaRel };
PlotQuantity parse_plot_quantity(std::string_view name);

/// beta_off is required for BetaRel. An empty trace writes nothing.
void write_plot_data(std::ostream& out, const CsvTrace& trace, PlotQuantity quantity,
                     const Eigen::VectorXd* beta_off = nullptr);

struct PlotSeries {
    std::string label;  ///< e.g. "node 3"
    std::vector<double> t;
    std::vector<double> value;
};

struct PlotData {
    std::optional<double> reframe_marker;
    std::vector<PlotSeries> series;
};

PlotData read_plot_data(std::istream& in);

}  // namespace bittide
