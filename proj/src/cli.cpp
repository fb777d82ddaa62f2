#include "formsim/cli.hpp"

#include "formsim/csvio.hpp"
#include "formsim/engine.hpp"
#include "formsim/presets.hpp"
#include "formsim/scenario.hpp"
#include "formsim/svgplot.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace formsim {

namespace {

Scenario load_scenario_ref(const std::string& ref) {
  std::error_code ec;
  if (std::filesystem::exists(ref, ec)) return parse_scenario_file(ref);
  Scenario s;
  if (resolve_preset_ref(ref, s)) return s;
  throw std::runtime_error("no scenario file or built-in preset named '" + ref +
                           "' (try 'formsim presets list')");
}

std::string default_out_path(const Scenario& s) {
  const char* env = std::getenv("FORMSIM_OUT");
  std::string dir = (env && *env) ? env : ".";
  if (dir != ".") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
  }
  const std::string stem = s.name.empty() ? std::string("run") : s.name;
  return dir + "/" + stem + ".csv";
}

int print_validation_errors(const std::string& ref, const std::vector<std::string>& errs) {
  std::cerr << "invalid scenario '" << ref << "':\n";
  for (const std::string& e : errs) std::cerr << "  - " << e << "\n";
  return 1;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"simulator for binary-information formation control of passive agents"};
  app.name("formsim");
  app.require_subcommand(1);

  std::string v_ref;
  CLI::App* cmd_validate =
      app.add_subcommand("validate", "check a scenario file or built-in preset");
  cmd_validate->add_option("scenario", v_ref, "scenario JSON file or preset name")->required();

  std::string r_ref, r_sign_mode, r_scheme, r_out, r_plot;
  double r_dt = 0, r_tf = 0, r_eps = 0;
  int r_stride = 0;
  CLI::App* cmd_run = app.add_subcommand("run", "integrate a scenario and write the CSV log");
  cmd_run->add_option("scenario", r_ref, "scenario JSON file or preset name")->required();
  cmd_run->add_option("--dt", r_dt, "integration step override");
  cmd_run->add_option("--t-final", r_tf, "final time override");
  cmd_run->add_option("--sign-mode", r_sign_mode, "sign variant: strict, hysteresis, or smooth");
  cmd_run->add_option("--eps", r_eps, "regularization band override");
  cmd_run->add_option("--scheme", r_scheme, "integration scheme: euler or rk4");
  cmd_run->add_option("--out", r_out, "output CSV path (default: $FORMSIM_OUT/<name>.csv)");
  cmd_run->add_option("--output-stride", r_stride, "record every k-th step");
  cmd_run->add_option("--plot", r_plot,
                      "also render an SVG of this quantity next to the CSV (ztilde, xi, "
                      "eta_tilde, theta_tilde, u, V, trajectory2d)");

  std::string p_csv, p_quantity, p_out;
  CLI::App* cmd_plot = app.add_subcommand("plot", "render an SVG from a CSV written by 'run'");
  cmd_plot->add_option("csv", p_csv, "CSV file")->required();
  cmd_plot->add_option("--quantity", p_quantity,
                       "ztilde, xi, eta_tilde, theta_tilde, u, or V")->required();
  cmd_plot->add_option("--out", p_out, "output SVG path")->required();

  std::string pr_action, pr_dir = ".";
  CLI::App* cmd_presets = app.add_subcommand("presets", "list or dump the built-in scenarios");
  cmd_presets->add_option("action", pr_action, "'list' or 'dump'")
      ->required()
      ->check(CLI::IsMember({"list", "dump"}));
  cmd_presets->add_option("dir", pr_dir, "target directory for 'dump' (default: .)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_validate) {
      const Scenario s = load_scenario_ref(v_ref);
      const std::vector<std::string> errs = validate_scenario(s);
      if (!errs.empty()) return print_validation_errors(v_ref, errs);
      std::cout << "OK: scenario '" << (s.name.empty() ? v_ref : s.name) << "' is valid (mode "
                << to_string(s.mode) << ", " << s.graph.n_nodes << " agents, "
                << s.graph.n_edges() << " edges)\n";
      return 0;
    }

    if (*cmd_run) {
      Scenario s = load_scenario_ref(r_ref);
      if (cmd_run->count("--dt")) s.integration.dt = r_dt;
      if (cmd_run->count("--t-final")) s.integration.t_final = r_tf;
      if (cmd_run->count("--sign-mode"))
        s.sign_mode.variant = sign_variant_from_string(r_sign_mode);
      if (cmd_run->count("--eps")) s.sign_mode.eps = r_eps;
      if (cmd_run->count("--scheme")) s.integration.scheme = scheme_from_string(r_scheme);
      if (cmd_run->count("--output-stride")) s.integration.output_stride = r_stride;

      const std::vector<std::string> errs = validate_scenario(s);
      if (!errs.empty()) return print_validation_errors(r_ref, errs);

      const ClosedLoop loop = assemble_closed_loop(s);
      const RunResult result = run(loop, s);

      const std::string out = r_out.empty() ? default_out_path(s) : r_out;
      write_csv(result.records, loop, out);
      std::cout << summary_text(result.summary);
      std::cout << "wrote " << result.records.size() << " records to " << out << "\n";

      if (cmd_run->count("--plot")) {
        std::filesystem::path svg(out);
        svg.replace_extension("");
        const std::string svg_path = svg.string() + "_" + r_plot + ".svg";
        emit_plot(result.records, loop, r_plot, svg_path);
        std::cout << "wrote plot to " << svg_path << "\n";
      }
      return 0;
    }

    if (*cmd_plot) {
      const CsvTable table = read_csv(p_csv);
      emit_plot_csv(table, p_quantity, p_out);
      std::cout << "wrote plot to " << p_out << "\n";
      return 0;
    }

    if (*cmd_presets) {
      if (pr_action == "list") {
        for (const std::string& name : preset_names())
          std::printf("%-26s %s\n", name.c_str(), preset_description(name).c_str());
        return 0;
      }
      std::error_code ec;
      std::filesystem::create_directories(pr_dir, ec);
      for (const std::string& name : preset_names()) {
        const std::string path = pr_dir + "/" + name + ".json";
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write preset file '" + path + "'");
        f << serialize_scenario(make_preset(name));
        std::cout << "wrote " << path << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args);
}

}  // namespace formsim
