#include "formsim/presets.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace formsim {

namespace {

// Five-agent pentagon study: the reference interaction graph, formation
// targets, initial positions, and reference velocity shared by every preset.

Graph pentagon_graph() {
  return make_graph(5, {{2, 1}, {3, 2}, {4, 2}, {4, 3}, {5, 3}, {5, 4}});
}

// Spanning path kept for the harmonic-rejection study: the cycle-closing
// relative measurements are dropped so each edge target is reachable by a
// disturbance decoupling along a tree.
Graph path_graph() {
  return make_graph(5, {{2, 1}, {3, 2}, {4, 3}, {5, 4}});
}

Eigen::VectorXd pentagon_targets() {
  const double r3 = std::sqrt(3.0);
  Eigen::VectorXd z(12);
  z << 0, 2, 1, r3, 2, 0, 1, -r3, 1, -2 - r3, 0, -2;
  return z;
}

Eigen::VectorXd path_targets() {
  const double r3 = std::sqrt(3.0);
  Eigen::VectorXd z(8);
  z << 0, 2, 1, r3, 1, -r3, 0, -2;
  return z;
}

Eigen::VectorXd initial_positions() {
  Eigen::VectorXd x(10);
  x << 0.5, -0.5, 0.5, 1, 1, 0.5, 0.8, 0, 1.1, 0;
  return x;
}

ExoDecl constant_reference() {
  ExoDecl d;
  d.kind = "constant";
  d.value = Eigen::Vector2d(1.0, 1.0);
  return d;
}

Scenario base_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  s.graph = pentagon_graph();
  s.p = 2;
  s.z_star = pentagon_targets();
  s.agents.assign(5, AgentDecl{});
  s.reference = constant_reference();
  s.x0 = initial_positions();
  return s;
}

Scenario preset_pentagon_known_velocity() {
  Scenario s = base_scenario("pentagon_known_velocity");
  s.mode = ControllerMode::KnownVelocity;
  return s;
}

Scenario preset_pentagon_leader_follower() {
  Scenario s = base_scenario("pentagon_leader_follower");
  s.mode = ControllerMode::LeaderFollower;
  return s;
}

Scenario preset_case_one() {
  Scenario s = base_scenario("caseI");
  s.mode = ControllerMode::LeaderFollowerConstDist;
  for (int i = 1; i <= 5; ++i) {
    ExoDecl d;
    d.kind = "constant";
    d.value = Eigen::Vector2d(i, i + 3);
    s.disturbances.push_back(d);
  }
  return s;
}

Scenario preset_case_two() {
  Scenario s = base_scenario("caseII");
  s.graph = path_graph();
  s.z_star = path_targets();
  s.mode = ControllerMode::KnownVelHarmonicDist;
  const double omega[5] = {1.0, 2.0, 1.0, 0.5, 1.0};
  for (int i = 0; i < 5; ++i) {
    ExoDecl d;
    d.kind = "harmonic";
    d.frequencies = {omega[i], omega[i]};
    d.gain_rows = {Eigen::RowVector2d(0.5, 0.5), Eigen::RowVector2d(-0.5, 0.5)};
    d.w0 = 0.1 * Eigen::VectorXd::Ones(4);
    s.disturbances.push_back(d);
  }
  return s;
}

Scenario preset_observer_mixed() {
  Scenario s = base_scenario("observer_mixed");
  s.mode = ControllerMode::ObserverBased;
  s.agents.assign(5, AgentDecl{"linear_passive", 30.0, 10.0});
  ExoDecl d;
  d.kind = "mixed";
  d.channels = {0.0, 2.0, 0.0, 2.0};
  d.gamma.resize(2, 6);
  d.gamma << 0.5, 0.5, 0.5, 0, 0, 0,
             0, 0, 0, 0.5, -0.5, 0.5;
  d.w0 = 0.1 * Eigen::VectorXd::Ones(6);
  s.disturbances.assign(5, d);
  s.observer.H = 50.0 * Eigen::MatrixXd::Identity(2, 2);
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"pentagon_known_velocity", "pentagon_leader_follower", "caseI", "caseII",
          "observer_mixed"};
}

std::string preset_description(const std::string& name) {
  if (name == "pentagon_known_velocity")
    return "pentagon formation, constant reference velocity known to every agent";
  if (name == "pentagon_leader_follower")
    return "pentagon formation, reference known to agent 1 only; followers estimate it";
  if (name == "caseI")
    return "leader-follower pentagon with constant matched disturbances, compensated";
  if (name == "caseII")
    return "known-velocity path formation with harmonic matched disturbances, compensated";
  if (name == "observer_mixed")
    return "leader-follower pentagon, observer-based rejection of mixed (bias + harmonic) "
           "disturbances";
  throw std::invalid_argument("unknown preset '" + name + "' (try: pentagon_known_velocity, "
                              "pentagon_leader_follower, caseI, caseII, observer_mixed)");
}

Scenario make_preset(const std::string& name) {
  if (name == "pentagon_known_velocity") return preset_pentagon_known_velocity();
  if (name == "pentagon_leader_follower") return preset_pentagon_leader_follower();
  if (name == "caseI") return preset_case_one();
  if (name == "caseII") return preset_case_two();
  if (name == "observer_mixed") return preset_observer_mixed();
  throw std::invalid_argument("unknown preset '" + name + "' (try: pentagon_known_velocity, "
                              "pentagon_leader_follower, caseI, caseII, observer_mixed)");
}

bool resolve_preset_ref(const std::string& ref, Scenario& out) {
  std::error_code ec;
  if (std::filesystem::exists(ref, ec)) return false;  // real files win

  std::string name = ref;
  const std::string dir = "presets/";
  if (name.rfind(dir, 0) == 0) name = name.substr(dir.size());
  const std::string ext = ".json";
  if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
    name = name.substr(0, name.size() - ext.size());

  for (const std::string& known : preset_names()) {
    if (name == known) {
      out = make_preset(name);
      return true;
    }
  }
  return false;
}

}  // namespace formsim
