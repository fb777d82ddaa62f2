#include "formsim/csvio.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace formsim {

namespace {

void append_block(std::string& header, const std::string& base, int index_1based, int dims) {
  for (int l = 1; l <= dims; ++l)
    header += "," + base + "[" + std::to_string(index_1based) + "][" + std::to_string(l) + "]";
}

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_header(const StateLayout& layout, bool has_eta, bool has_theta,
                       bool has_observer) {
  std::string h = "t";
  for (int k = 1; k <= layout.M; ++k) append_block(h, "z_tilde", k, layout.p);
  for (int i = 0; i < layout.N; ++i)
    append_block(h, "xi", i + 1, layout.xi_dim[static_cast<size_t>(i)]);
  if (has_eta)
    for (int i = 1; i < layout.N; ++i) append_block(h, "eta_tilde", i + 1, layout.q_v);
  if (has_theta)
    for (int i = 0; i < layout.N; ++i)
      append_block(h, "theta_tilde", i + 1, layout.theta_dim[static_cast<size_t>(i)]);
  if (has_observer)
    for (int i = 0; i < layout.N; ++i)
      append_block(h, "xi_tilde", i + 1, layout.xi_dim[static_cast<size_t>(i)]);
  h += ",V,znorm1";
  for (int i = 0; i < layout.N; ++i) append_block(h, "u", i + 1, layout.p);
  h += ",flips_total";
  return h;
}

void write_csv(const std::vector<TrajectoryRecord>& records, const ClosedLoop& loop,
               const std::string& path) {
  if (records.empty()) throw std::invalid_argument("write_csv: no records to write");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file '" + path + "'");

  out << csv_header(loop.layout, loop.has_eta(), loop.has_theta(), loop.has_observer()) << "\n";

  const auto append_vec = [](std::string& line, const Eigen::VectorXd& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      line += ',';
      line += fmt17(v(k));
    }
  };

  std::string line;
  for (const TrajectoryRecord& r : records) {
    line.clear();
    line += fmt17(r.t);
    append_vec(line, r.z_tilde);
    append_vec(line, r.xi);
    append_vec(line, r.eta_tilde);
    append_vec(line, r.theta_tilde);
    append_vec(line, r.xi_tilde);
    line += ',';
    line += fmt17(r.V);
    line += ',';
    line += fmt17(r.znorm1);
    append_vec(line, r.u);
    line += ',';
    line += std::to_string(r.flips_total);
    out << line << "\n";
  }
  if (!out) throw std::runtime_error("failed while writing CSV file '" + path + "'");
}

int CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read CSV file '" + path + "'");

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("CSV file '" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) table.columns.push_back(field);
  }
  if (table.columns.empty())
    throw std::runtime_error("CSV file '" + path + "' has an empty header");

  size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.columns.size());
    const char* c = line.c_str();
    while (true) {
      char* end = nullptr;
      row.push_back(std::strtod(c, &end));
      if (end == c)
        throw std::runtime_error("CSV file '" + path + "': non-numeric field in row " +
                                 std::to_string(row_number));
      c = end;
      if (*c == ',') {
        ++c;
      } else if (*c == '\0' || *c == '\r') {
        break;
      } else {
        throw std::runtime_error("CSV file '" + path + "': malformed row " +
                                 std::to_string(row_number));
      }
    }
    if (row.size() != table.columns.size())
      throw std::runtime_error("CSV file '" + path + "': row " + std::to_string(row_number) +
                               " has " + std::to_string(row.size()) + " fields, expected " +
                               std::to_string(table.columns.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace formsim
