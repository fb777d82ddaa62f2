#pragma once

// Scenario schema: a declarative description of one closed-loop run (graph,
// formation, agents, controller mode, signal generators, initial conditions,
// integration settings), parsed from JSON with schema_version 1, validated
// with role-naming diagnostics, and serializable back to an identical file.

#include "formsim/controllers.hpp"
#include "formsim/graph.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace formsim {

enum class Scheme { euler, rk4 };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct AgentDecl {
  std::string kind = "linear_passive";
  double a = 1.0;
  double b = 1.0;
};

// Declarative exosystem: kind "constant" {value}, "harmonic" {frequencies,
// gain_rows, w0}, or "mixed" {channels, gamma, w0} where channels lists one
// angular rate per diagonal block (0 = constant channel, nonzero = rotation).
struct ExoDecl {
  std::string kind = "constant";
  Eigen::VectorXd value;                      // constant
  std::vector<double> frequencies;            // harmonic
  std::vector<Eigen::RowVector2d> gain_rows;  // harmonic
  std::vector<double> channels;               // mixed
  Eigen::MatrixXd gamma;                      // mixed
  Eigen::VectorXd w0;                         // harmonic/mixed
};

ExosystemSpec build_exosystem(const ExoDecl& decl, int p);

struct ObserverDecl {
  Eigen::MatrixXd H;    // p x p gain (a scalar in the file means that multiple of I_p)
  Eigen::MatrixXd G_d;  // optional injection gain; empty means Gamma_d^T
};

struct IntegrationDecl {
  double dt = 1e-3;
  double t_final = 30.0;
  Scheme scheme = Scheme::rk4;
  int output_stride = 10;
};

struct Scenario {
  int schema_version = 1;
  std::string name;
  Graph graph;
  int p = 0;
  Eigen::VectorXd z_star;           // M*p target relative positions
  std::vector<AgentDecl> agents;    // one per node
  ControllerMode mode = ControllerMode::KnownVelocity;
  SignMode sign_mode;
  ExoDecl reference;                // velocity generator
  std::vector<ExoDecl> disturbances;// one per node; empty when the mode has none
  ObserverDecl observer;            // ObserverBased only
  Eigen::VectorXd x0;               // required, N*p
  Eigen::VectorXd xi0, eta0, theta0, xi_hat0;  // empty = zeros
  IntegrationDecl integration;
};

// Parse + validate; throws std::runtime_error carrying every diagnostic.
Scenario parse_scenario_file(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<memory>");

// All validation diagnostics for the scenario (empty = valid). Each message
// names the violated requirement: graph connectivity, formation consistency,
// dimension coherence, or the structural hypothesis of the selected mode.
std::vector<std::string> validate_scenario(const Scenario& s);

// Serialization; serialize(parse(f)) re-parses to an identical structure.
std::string serialize_scenario(const Scenario& s);

AgentModel build_agent(const AgentDecl& decl, int p);

}  // namespace formsim
