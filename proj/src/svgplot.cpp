#include "formsim/svgplot.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace formsim {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
constexpr int kPaletteSize = 12;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;  // avoid "-0" and stray 1e-17 labels
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct QuantityInfo {
  std::string title;
  std::string ylabel;
  std::string prefix;  // CSV column prefix ("" for the scalar V)
};

QuantityInfo quantity_info(const std::string& q) {
  if (q == "ztilde") return {"relative-position errors", "z_tilde", "z_tilde["};
  if (q == "xi") return {"agent internal states", "xi", "xi["};
  if (q == "eta_tilde") return {"velocity-estimator errors", "eta_tilde", "eta_tilde["};
  if (q == "theta_tilde") return {"disturbance-estimator errors", "theta_tilde", "theta_tilde["};
  if (q == "u") return {"commanded inputs", "u", "u["};
  if (q == "V") return {"certificate value", "V", ""};
  if (q == "trajectory2d") return {"agent trajectories", "y", ""};
  throw std::invalid_argument("unknown plot quantity '" + q +
                              "' (expected ztilde, xi, eta_tilde, theta_tilde, u, V, or "
                              "trajectory2d)");
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot file '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("failed while writing plot file '" + path + "'");
}

}  // namespace

std::string render_line_svg(const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, const std::vector<PlotSeries>& series,
                            bool equal_axes) {
  if (series.empty()) throw std::invalid_argument("render_line_svg: no series to draw");

  const double width = 800, height = 480;
  const bool legend = series.size() > 1 && series.size() <= 14;
  const double ml = 70, mr = legend ? 170 : 24, mt = 44, mb = 52;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("render_line_svg: series '" + s.label +
                                  "' has mismatched x/y lengths");
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin))
    throw std::invalid_argument("render_line_svg: no finite data to draw");
  if (xmax - xmin < 1e-300) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-300) {
    const double pad = std::max(1.0, std::abs(ymin)) * 0.1;
    ymin -= pad;
    ymax += pad;
  }
  {
    const double dx = 0.02 * (xmax - xmin), dy = 0.05 * (ymax - ymin);
    xmin -= dx;
    xmax += dx;
    ymin -= dy;
    ymax += dy;
  }
  if (equal_axes) {
    const double sx = pw / (xmax - xmin), sy = ph / (ymax - ymin);
    if (sx < sy) {
      const double yr = ph / sx, yc = 0.5 * (ymin + ymax);
      ymin = yc - 0.5 * yr;
      ymax = yc + 0.5 * yr;
    } else if (sy < sx) {
      const double xr = pw / sy, xc = 0.5 * (xmin + xmax);
      xmin = xc - 0.5 * xr;
      xmax = xc + 0.5 * xr;
    }
  }

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  out << "<g font-family=\"DejaVu Sans, Helvetica, Arial, sans-serif\" fill=\"#222222\">\n";

  // grid and ticks
  const int nticks = 5;
  out << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (int i = 0; i <= nticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / nticks;
    const double yv = ymin + (ymax - ymin) * i / nticks;
    out << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px(xv))
        << "\" y2=\"" << num(mt + ph) << "\"/>\n";
    out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(ml + pw)
        << "\" y2=\"" << num(py(yv)) << "\"/>\n";
  }
  out << "</g>\n";
  if (ymin < 0.0 && ymax > 0.0)
    out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(ml + pw)
        << "\" y2=\"" << num(py(0)) << "\" stroke=\"#999999\" stroke-width=\"1\"/>\n";

  out << "<g font-size=\"11\">\n";
  for (int i = 0; i <= nticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / nticks;
    const double yv = ymin + (ymax - ymin) * i / nticks;
    out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(mt + ph + 16)
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    out << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  out << "</g>\n";

  // frame
  out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  // series
  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    std::string points;
    bool any = false;
    const auto flush = [&]() {
      if (!points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.3\" points=\"" << points << "\"/>\n";
        points.clear();
      }
    };
    double lastx = 0, lasty = 0;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      lastx = s.x[i];
      lasty = s.y[i];
      any = true;
      points += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    flush();
    if (equal_axes && any)
      out << "<circle cx=\"" << num(px(lastx)) << "\" cy=\"" << num(py(lasty))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }

  // legend
  if (legend) {
    const double lx = ml + pw + 14;
    double ly = mt + 8;
    out << "<g font-size=\"12\">\n";
    for (size_t si = 0; si < series.size(); ++si) {
      const char* color = kPalette[si % kPaletteSize];
      out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 22)
          << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly + 4) << "\">"
          << xml_escape(series[si].label) << "</text>\n";
      ly += 18;
    }
    out << "</g>\n";
  }

  // labels
  out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
         "font-weight=\"bold\">"
      << xml_escape(title) << "</text>\n";
  out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(height - 14)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(xlabel) << "</text>\n";
  out << "<text x=\"18\" y=\"" << num(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << num(mt + ph / 2) << ")\">" << xml_escape(ylabel) << "</text>\n";
  out << "</g>\n</svg>\n";
  return out.str();
}

void emit_plot(const std::vector<TrajectoryRecord>& records, const ClosedLoop& loop,
               const std::string& quantity, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("emit_plot: no records to plot");
  const QuantityInfo info = quantity_info(quantity);
  const StateLayout& L = loop.layout;

  std::vector<double> t;
  t.reserve(records.size());
  for (const TrajectoryRecord& r : records) t.push_back(r.t);

  std::vector<PlotSeries> series;
  const auto add_components =
      [&](const std::string& base,
          const std::function<const Eigen::VectorXd&(const TrajectoryRecord&)>& get,
          const std::vector<std::pair<int, int>>& agent_dims) {
        int at = 0;
        for (const auto& [index_1based, dims] : agent_dims) {
          for (int l = 1; l <= dims; ++l, ++at) {
            PlotSeries s;
            s.label = base + "[" + std::to_string(index_1based) + "][" + std::to_string(l) + "]";
            s.x = t;
            s.y.reserve(records.size());
            for (const TrajectoryRecord& r : records) s.y.push_back(get(r)(at));
            series.push_back(std::move(s));
          }
        }
      };

  std::string xlabel = "t [s]";
  bool equal = false;
  if (quantity == "ztilde") {
    std::vector<std::pair<int, int>> dims;
    for (int k = 1; k <= L.M; ++k) dims.emplace_back(k, L.p);
    add_components("z_tilde", [](const TrajectoryRecord& r) -> const Eigen::VectorXd& {
      return r.z_tilde;
    }, dims);
  } else if (quantity == "xi") {
    std::vector<std::pair<int, int>> dims;
    for (int i = 0; i < L.N; ++i) dims.emplace_back(i + 1, L.xi_dim[static_cast<size_t>(i)]);
    add_components("xi", [](const TrajectoryRecord& r) -> const Eigen::VectorXd& { return r.xi; },
                   dims);
  } else if (quantity == "eta_tilde") {
    if (!loop.has_eta())
      throw std::invalid_argument(
          "quantity 'eta_tilde' is not available: this controller mode runs no velocity "
          "estimator");
    std::vector<std::pair<int, int>> dims;
    for (int i = 1; i < L.N; ++i) dims.emplace_back(i + 1, L.q_v);
    add_components("eta_tilde", [](const TrajectoryRecord& r) -> const Eigen::VectorXd& {
      return r.eta_tilde;
    }, dims);
  } else if (quantity == "theta_tilde") {
    if (!loop.has_theta())
      throw std::invalid_argument(
          "quantity 'theta_tilde' is not available: this controller mode runs no disturbance "
          "model");
    std::vector<std::pair<int, int>> dims;
    for (int i = 0; i < L.N; ++i) dims.emplace_back(i + 1, L.theta_dim[static_cast<size_t>(i)]);
    add_components("theta_tilde", [](const TrajectoryRecord& r) -> const Eigen::VectorXd& {
      return r.theta_tilde;
    }, dims);
  } else if (quantity == "u") {
    std::vector<std::pair<int, int>> dims;
    for (int i = 0; i < L.N; ++i) dims.emplace_back(i + 1, L.p);
    add_components("u", [](const TrajectoryRecord& r) -> const Eigen::VectorXd& { return r.u; },
                   dims);
  } else if (quantity == "V") {
    PlotSeries s;
    s.label = "V";
    s.x = t;
    for (const TrajectoryRecord& r : records) s.y.push_back(r.V);
    series.push_back(std::move(s));
  } else if (quantity == "trajectory2d") {
    if (L.p != 2)
      throw std::invalid_argument("trajectory2d needs a two-dimensional workspace (p = 2)");
    equal = true;
    xlabel = "x";
    for (int i = 0; i < L.N; ++i) {
      PlotSeries s;
      s.label = "agent " + std::to_string(i + 1);
      s.x.reserve(records.size());
      s.y.reserve(records.size());
      for (const TrajectoryRecord& r : records) {
        s.x.push_back(r.x(2 * i));
        s.y.push_back(r.x(2 * i + 1));
      }
      series.push_back(std::move(s));
    }
  }

  write_text_file(path, render_line_svg(info.title, xlabel, info.ylabel, series, equal));
}

void emit_plot_csv(const CsvTable& table, const std::string& quantity, const std::string& path) {
  if (quantity == "trajectory2d")
    throw std::invalid_argument(
        "trajectory2d needs in-memory positions; it is not available from a CSV");
  const QuantityInfo info = quantity_info(quantity);
  if (table.rows.empty()) throw std::invalid_argument("the CSV has no data rows");
  const int t_col = table.column_index("t");
  if (t_col < 0) throw std::runtime_error("the CSV has no 't' column");

  std::vector<int> cols;
  if (quantity == "V") {
    const int c = table.column_index("V");
    if (c < 0) throw std::runtime_error("the CSV has no 'V' column");
    cols.push_back(c);
  } else {
    for (size_t c = 0; c < table.columns.size(); ++c)
      if (table.columns[c].rfind(info.prefix, 0) == 0) cols.push_back(static_cast<int>(c));
    if (cols.empty())
      throw std::runtime_error("the CSV has no '" + info.prefix +
                               "...]' columns (the run that wrote it omits this block)");
  }

  std::vector<double> t;
  t.reserve(table.rows.size());
  for (const auto& row : table.rows) t.push_back(row[static_cast<size_t>(t_col)]);

  std::vector<PlotSeries> series;
  for (int c : cols) {
    PlotSeries s;
    s.label = table.columns[static_cast<size_t>(c)];
    s.x = t;
    s.y.reserve(table.rows.size());
    for (const auto& row : table.rows) s.y.push_back(row[static_cast<size_t>(c)]);
    series.push_back(std::move(s));
  }

  write_text_file(path, render_line_svg(info.title, "t [s]", info.ylabel, series, false));
}

}  // namespace formsim
