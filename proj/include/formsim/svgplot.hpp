#pragma once

// Self-contained SVG line plots of run quantities, and the 2-D agent-path
// plot. No external assets; axes carry labels and units.

#include "formsim/csvio.hpp"
#include "formsim/engine.hpp"

#include <string>
#include <vector>

namespace formsim {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

std::string render_line_svg(const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, const std::vector<PlotSeries>& series,
                            bool equal_axes = false);

// quantity: one of ztilde, xi, eta_tilde, theta_tilde, u, V, trajectory2d.
// trajectory2d needs the in-memory records (positions are not in the CSV) and
// a two-dimensional workspace. Throws on unknown or unavailable quantities
// and on empty records.
void emit_plot(const std::vector<TrajectoryRecord>& records, const ClosedLoop& loop,
               const std::string& quantity, const std::string& path);

// Same quantities sourced from a CSV file written by write_csv; trajectory2d
// is rejected because positions are not part of the CSV contract.
void emit_plot_csv(const CsvTable& table, const std::string& quantity, const std::string& path);

}  // namespace formsim
