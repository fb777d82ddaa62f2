#pragma once

// CSV emission and ingestion for trajectory records. Columns are exactly
//   t, z_tilde[k][l], xi[i][l], eta_tilde[i][l] (followers, so i starts at 2),
//   theta_tilde[i][l], xi_tilde[i][l], V, znorm1, u[i][l], flips_total
// with blocks a mode lacks omitted entirely. Values print with 17 significant
// digits so a read-back reproduces the doubles bit for bit. Indices in
// headers are 1-based.

#include "formsim/controllers.hpp"
#include "formsim/engine.hpp"

#include <string>
#include <vector>

namespace formsim {

std::string csv_header(const StateLayout& layout, bool has_eta, bool has_theta, bool has_observer);

void write_csv(const std::vector<TrajectoryRecord>& records, const ClosedLoop& loop,
               const std::string& path);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace formsim
