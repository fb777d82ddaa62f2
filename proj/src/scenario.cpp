#include "formsim/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace formsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& ctx, const std::string& message) {
  throw std::runtime_error(ctx + ": " + message);
}

const json& need(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) fail(ctx, "missing field '" + std::string(key) + "'");
  return j.at(key);
}

double need_number(const json& j, const char* key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number()) fail(ctx, "field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

int need_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number_integer()) fail(ctx, "field '" + std::string(key) + "' must be an integer");
  return v.get<int>();
}

std::string need_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_string()) fail(ctx, "field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

void flatten_into(const json& j, std::vector<double>& out, const std::string& ctx) {
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const json& e : j) flatten_into(e, out, ctx);
  } else {
    fail(ctx, "expected a (possibly nested) array of numbers");
  }
}

Eigen::VectorXd parse_vector(const json& j, const std::string& ctx) {
  std::vector<double> vals;
  flatten_into(j, vals, ctx);
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty()) fail(ctx, "expected a non-empty array of rows");
  const size_t cols = j.at(0).is_array() ? j.at(0).size() : 0;
  if (cols == 0) fail(ctx, "expected an array of non-empty rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < j.size(); ++r) {
    const json& row = j.at(r);
    if (!row.is_array() || row.size() != cols) fail(ctx, "rows must have equal length");
    for (size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number()) fail(ctx, "matrix entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
    }
  }
  return m;
}

ExoDecl parse_exo(const json& j, const std::string& ctx) {
  ExoDecl decl;
  decl.kind = need_string(j, "kind", ctx);
  if (decl.kind == "constant") {
    decl.value = parse_vector(need(j, "value", ctx), ctx + ".value");
  } else if (decl.kind == "harmonic") {
    const json& freqs = need(j, "frequencies", ctx);
    if (!freqs.is_array()) fail(ctx, "field 'frequencies' must be an array");
    for (const json& f : freqs) {
      if (!f.is_number()) fail(ctx, "frequencies must be numbers");
      decl.frequencies.push_back(f.get<double>());
    }
    const json& rows = need(j, "gain_rows", ctx);
    if (!rows.is_array()) fail(ctx, "field 'gain_rows' must be an array of [a, b] rows");
    for (const json& r : rows) {
      if (!r.is_array() || r.size() != 2 || !r.at(0).is_number() || !r.at(1).is_number())
        fail(ctx, "each gain row must be a pair of numbers");
      decl.gain_rows.push_back(Eigen::RowVector2d(r.at(0).get<double>(), r.at(1).get<double>()));
    }
    decl.w0 = parse_vector(need(j, "w0", ctx), ctx + ".w0");
  } else if (decl.kind == "mixed") {
    const json& ch = need(j, "channels", ctx);
    if (!ch.is_array()) fail(ctx, "field 'channels' must be an array of angular rates");
    for (const json& c : ch) {
      if (!c.is_number()) fail(ctx, "channels must be numbers");
      decl.channels.push_back(c.get<double>());
    }
    decl.gamma = parse_matrix(need(j, "gamma", ctx), ctx + ".gamma");
    decl.w0 = parse_vector(need(j, "w0", ctx), ctx + ".w0");
  } else {
    fail(ctx, "unknown generator kind '" + decl.kind +
                  "' (expected constant, harmonic, or mixed)");
  }
  return decl;
}

AgentDecl parse_agent(const json& j, const std::string& ctx) {
  AgentDecl decl;
  if (!j.is_object()) fail(ctx, "agent declarations must be objects");
  if (j.contains("kind")) decl.kind = need_string(j, "kind", ctx);
  if (j.contains("a")) decl.a = need_number(j, "a", ctx);
  if (j.contains("b")) decl.b = need_number(j, "b", ctx);
  return decl;
}

ordered_json exo_to_json(const ExoDecl& d) {
  ordered_json j;
  j["kind"] = d.kind;
  if (d.kind == "constant") {
    j["value"] = std::vector<double>(d.value.data(), d.value.data() + d.value.size());
  } else if (d.kind == "harmonic") {
    j["frequencies"] = d.frequencies;
    ordered_json rows = ordered_json::array();
    for (const auto& r : d.gain_rows) rows.push_back({r(0), r(1)});
    j["gain_rows"] = rows;
    j["w0"] = std::vector<double>(d.w0.data(), d.w0.data() + d.w0.size());
  } else if (d.kind == "mixed") {
    j["channels"] = d.channels;
    ordered_json g = ordered_json::array();
    for (Eigen::Index r = 0; r < d.gamma.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < d.gamma.cols(); ++c) row.push_back(d.gamma(r, c));
      g.push_back(row);
    }
    j["gamma"] = g;
    j["w0"] = std::vector<double>(d.w0.data(), d.w0.data() + d.w0.size());
  }
  return j;
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

ordered_json vector_rows_to_json(const Eigen::VectorXd& v, int p) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r * p < v.size(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < p && r * p + c < v.size(); ++c) row.push_back(v(r * p + c));
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> vec_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

std::string to_string(Scheme s) {
  return s == Scheme::euler ? "euler" : "rk4";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "euler") return Scheme::euler;
  if (name == "rk4") return Scheme::rk4;
  throw std::invalid_argument("unknown integration scheme '" + name +
                              "' (expected euler or rk4)");
}

AgentModel build_agent(const AgentDecl& decl, int p) {
  if (decl.kind != "linear_passive")
    throw std::invalid_argument("unknown agent kind '" + decl.kind +
                                "' (expected linear_passive)");
  return make_linear_passive_agent(p, decl.a, decl.b);
}

ExosystemSpec build_exosystem(const ExoDecl& decl, int p) {
  if (decl.kind == "constant") return make_constant(p, decl.value);
  if (decl.kind == "harmonic") return make_harmonic(decl.frequencies, decl.gain_rows, decl.w0);
  if (decl.kind == "mixed") return make_mixed(decl.channels, decl.gamma, decl.w0);
  throw std::invalid_argument("unknown generator kind '" + decl.kind +
                              "' (expected constant, harmonic, or mixed)");
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario parse error in " + origin + ": " + e.what());
  }
  const std::string ctx = origin;

  Scenario s;
  s.schema_version = need_int(j, "schema_version", ctx);
  if (s.schema_version != 1)
    fail(ctx, "unsupported schema_version " + std::to_string(s.schema_version) +
                  " (this build reads version 1)");
  if (j.contains("name")) s.name = need_string(j, "name", ctx);

  {
    const json& jg = need(j, "graph", ctx);
    const int n_nodes = need_int(jg, "n_nodes", ctx + ".graph");
    const json& je = need(jg, "edges", ctx + ".graph");
    if (!je.is_array()) fail(ctx + ".graph", "field 'edges' must be an array of [head, tail]");
    std::vector<std::pair<int, int>> edges;
    for (const json& e : je) {
      if (!e.is_array() || e.size() != 2 || !e.at(0).is_number_integer() ||
          !e.at(1).is_number_integer())
        fail(ctx + ".graph", "each edge must be a pair of 1-based node indices");
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    try {
      s.graph = make_graph(n_nodes, edges);
    } catch (const std::invalid_argument& e) {
      fail(ctx + ".graph", e.what());
    }
  }

  s.p = need_int(j, "p", ctx);
  s.z_star = parse_vector(need(j, "z_star", ctx), ctx + ".z_star");

  {
    const json& ja = need(j, "agents", ctx);
    if (ja.is_object()) {
      const AgentDecl decl = parse_agent(ja, ctx + ".agents");
      s.agents.assign(static_cast<size_t>(s.graph.n_nodes), decl);
    } else if (ja.is_array()) {
      for (size_t i = 0; i < ja.size(); ++i)
        s.agents.push_back(parse_agent(ja.at(i), ctx + ".agents[" + std::to_string(i) + "]"));
    } else {
      fail(ctx, "field 'agents' must be an object (uniform) or an array (per agent)");
    }
  }

  {
    const json& jc = need(j, "controller", ctx);
    const std::string mode = need_string(jc, "mode", ctx + ".controller");
    try {
      s.mode = controller_mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      fail(ctx + ".controller", e.what());
    }
    if (jc.contains("sign_mode")) {
      try {
        s.sign_mode.variant = sign_variant_from_string(need_string(jc, "sign_mode", ctx));
      } catch (const std::invalid_argument& e) {
        fail(ctx + ".controller", e.what());
      }
    }
    if (jc.contains("eps")) s.sign_mode.eps = need_number(jc, "eps", ctx + ".controller");
  }

  s.reference = parse_exo(need(j, "reference", ctx), ctx + ".reference");

  if (j.contains("disturbances")) {
    const json& jd = j.at("disturbances");
    if (jd.is_object()) {
      const ExoDecl decl = parse_exo(jd, ctx + ".disturbances");
      s.disturbances.assign(static_cast<size_t>(s.graph.n_nodes), decl);
    } else if (jd.is_array()) {
      for (size_t i = 0; i < jd.size(); ++i)
        s.disturbances.push_back(
            parse_exo(jd.at(i), ctx + ".disturbances[" + std::to_string(i) + "]"));
    } else {
      fail(ctx, "field 'disturbances' must be an object (uniform) or an array (per agent)");
    }
  }

  if (j.contains("observer")) {
    const json& jo = j.at("observer");
    const json& jh = need(jo, "H", ctx + ".observer");
    if (jh.is_number()) {
      s.observer.H = jh.get<double>() * Eigen::MatrixXd::Identity(s.p, s.p);
    } else {
      s.observer.H = parse_matrix(jh, ctx + ".observer.H");
    }
    if (jo.contains("G_d")) s.observer.G_d = parse_matrix(jo.at("G_d"), ctx + ".observer.G_d");
  }

  {
    const json& ji = need(j, "initial", ctx);
    s.x0 = parse_vector(need(ji, "x", ctx + ".initial"), ctx + ".initial.x");
    if (ji.contains("xi")) s.xi0 = parse_vector(ji.at("xi"), ctx + ".initial.xi");
    if (ji.contains("eta")) s.eta0 = parse_vector(ji.at("eta"), ctx + ".initial.eta");
    if (ji.contains("theta")) s.theta0 = parse_vector(ji.at("theta"), ctx + ".initial.theta");
    if (ji.contains("xi_hat"))
      s.xi_hat0 = parse_vector(ji.at("xi_hat"), ctx + ".initial.xi_hat");
  }

  if (j.contains("integration")) {
    const json& jn = j.at("integration");
    if (jn.contains("dt")) s.integration.dt = need_number(jn, "dt", ctx + ".integration");
    if (jn.contains("t_final"))
      s.integration.t_final = need_number(jn, "t_final", ctx + ".integration");
    if (jn.contains("scheme")) {
      try {
        s.integration.scheme = scheme_from_string(need_string(jn, "scheme", ctx));
      } catch (const std::invalid_argument& e) {
        fail(ctx + ".integration", e.what());
      }
    }
    if (jn.contains("output_stride"))
      s.integration.output_stride = need_int(jn, "output_stride", ctx + ".integration");
  }

  return s;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> errs;
  if (s.schema_version != 1)
    errs.push_back("unsupported schema_version " + std::to_string(s.schema_version));
  if (s.p < 1) errs.push_back("workspace dimension p must be at least 1");

  try {
    validate_graph(s.graph);
    if (!is_connected(s.graph)) errs.push_back("the interaction graph must be connected");
  } catch (const std::invalid_argument& e) {
    errs.push_back(e.what());
  }

  const Eigen::Index mp = static_cast<Eigen::Index>(s.graph.n_edges()) * s.p;
  if (s.p >= 1 && s.z_star.size() != mp)
    errs.push_back("z_star lists " + std::to_string(s.z_star.size()) + " values, expected M*p = " +
                   std::to_string(mp));
  if (static_cast<int>(s.agents.size()) != s.graph.n_nodes)
    errs.push_back("need one agent declaration per node (got " + std::to_string(s.agents.size()) +
                   " for " + std::to_string(s.graph.n_nodes) + " nodes)");
  for (size_t i = 0; i < s.agents.size(); ++i) {
    const AgentDecl& a = s.agents[i];
    if (a.kind != "linear_passive")
      errs.push_back("agent " + std::to_string(i + 1) + ": unknown kind '" + a.kind + "'");
    else if (!(a.a > 0.0) || !(a.b > 0.0))
      errs.push_back("agent " + std::to_string(i + 1) + ": gains must be positive");
  }
  if (s.sign_mode.variant != SignVariant::strict && !(s.sign_mode.eps > 0.0))
    errs.push_back("regularized sign modes need eps > 0");
  if (s.p >= 1 && s.x0.size() != static_cast<Eigen::Index>(s.graph.n_nodes) * s.p)
    errs.push_back("initial positions x must list N*p = " +
                   std::to_string(s.graph.n_nodes * s.p) + " values, got " +
                   std::to_string(s.x0.size()));
  if (!(s.integration.dt > 0.0)) errs.push_back("integration step dt must be positive");
  if (!(s.integration.t_final > 0.0)) errs.push_back("t_final must be positive");
  if (s.integration.output_stride < 1) errs.push_back("output_stride must be at least 1");

  if (!errs.empty()) return errs;

  try {
    const ClosedLoop loop = assemble_closed_loop(s);
    const StateLayout& L = loop.layout;
    int xi_total = 0;
    for (int d : L.xi_dim) xi_total += d;
    if (s.xi0.size() != 0 && s.xi0.size() != xi_total)
      errs.push_back("initial xi must list " + std::to_string(xi_total) + " values, got " +
                     std::to_string(s.xi0.size()));
    const int eta_total = loop.has_eta() ? (L.N - 1) * L.q_v : 0;
    if (s.eta0.size() != 0 && s.eta0.size() != eta_total)
      errs.push_back("initial eta must list " + std::to_string(eta_total) + " values, got " +
                     std::to_string(s.eta0.size()));
    int theta_total = 0;
    for (int d : L.theta_dim) theta_total += d;
    if (s.theta0.size() != 0 && s.theta0.size() != theta_total)
      errs.push_back("initial theta must list " + std::to_string(theta_total) + " values, got " +
                     std::to_string(s.theta0.size()));
    const int xihat_total = loop.has_observer() ? xi_total : 0;
    if (s.xi_hat0.size() != 0 && s.xi_hat0.size() != xihat_total)
      errs.push_back("initial xi_hat must list " + std::to_string(xihat_total) +
                     " values, got " + std::to_string(s.xi_hat0.size()));
  } catch (const std::exception& e) {
    errs.push_back(e.what());
  }
  return errs;
}

std::string serialize_scenario(const Scenario& s) {
  ordered_json j;
  j["schema_version"] = s.schema_version;
  if (!s.name.empty()) j["name"] = s.name;
  {
    ordered_json jg;
    jg["n_nodes"] = s.graph.n_nodes;
    ordered_json edges = ordered_json::array();
    for (const Edge& e : s.graph.edges) edges.push_back({e.head + 1, e.tail + 1});
    jg["edges"] = edges;
    j["graph"] = jg;
  }
  j["p"] = s.p;
  j["z_star"] = vector_rows_to_json(s.z_star, s.p);
  {
    ordered_json agents = ordered_json::array();
    for (const AgentDecl& a : s.agents) {
      ordered_json ja;
      ja["kind"] = a.kind;
      ja["a"] = a.a;
      ja["b"] = a.b;
      agents.push_back(ja);
    }
    j["agents"] = agents;
  }
  {
    ordered_json jc;
    jc["mode"] = to_string(s.mode);
    jc["sign_mode"] = to_string(s.sign_mode.variant);
    jc["eps"] = s.sign_mode.eps;
    j["controller"] = jc;
  }
  j["reference"] = exo_to_json(s.reference);
  if (!s.disturbances.empty()) {
    ordered_json jd = ordered_json::array();
    for (const ExoDecl& d : s.disturbances) jd.push_back(exo_to_json(d));
    j["disturbances"] = jd;
  }
  if (s.observer.H.size() > 0) {
    ordered_json jo;
    jo["H"] = matrix_to_json(s.observer.H);
    if (s.observer.G_d.size() > 0) jo["G_d"] = matrix_to_json(s.observer.G_d);
    j["observer"] = jo;
  }
  {
    ordered_json ji;
    ji["x"] = vector_rows_to_json(s.x0, s.p);
    if (s.xi0.size() > 0) ji["xi"] = vec_std(s.xi0);
    if (s.eta0.size() > 0) ji["eta"] = vec_std(s.eta0);
    if (s.theta0.size() > 0) ji["theta"] = vec_std(s.theta0);
    if (s.xi_hat0.size() > 0) ji["xi_hat"] = vec_std(s.xi_hat0);
    j["initial"] = ji;
  }
  {
    ordered_json jn;
    jn["dt"] = s.integration.dt;
    jn["t_final"] = s.integration.t_final;
    jn["scheme"] = to_string(s.integration.scheme);
    jn["output_stride"] = s.integration.output_stride;
    j["integration"] = jn;
  }
  return j.dump(2) + "\n";
}

}  // namespace formsim
