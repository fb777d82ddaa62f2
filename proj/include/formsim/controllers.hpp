#pragma once

// Control laws: binary (sign-based) formation control with selectable
// boundary regularization, the internal-model velocity estimator for
// leader-follower tracking, the internal-model matched-disturbance
// compensator, and the observer-based redesign with its Lyapunov certificate.
//
// The discontinuous sign nonlinearity is executable in three variants:
//   strict        sign(0) = +1, output always in {-1, +1}
//   hysteresis(e) latched output in {-1, +1}; a component flips only when the
//                 input crosses the +-e band against the latch
//   smooth(e)     clamp(zeta/e, -1, +1); equals the strict sign for |zeta| >= e
// The regularized variants realize selections of the convexified (set-valued)
// sign at the switching surface.

#include "formsim/agents.hpp"
#include "formsim/exosystem.hpp"
#include "formsim/graph.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace formsim {

struct Scenario;

enum class SignVariant { strict, hysteresis, smooth };

struct SignMode {
  SignVariant variant = SignVariant::smooth;
  double eps = 1e-2;  // band width for hysteresis/smooth
};

struct HysteresisLatches {
  Eigen::VectorXd latch;  // per-component +-1
  bool initialized = false;
};

std::string to_string(SignVariant v);
SignVariant sign_variant_from_string(const std::string& name);

// Componentwise strict sign with sign(0) = +1.
Eigen::VectorXd strict_sign_vec(const Eigen::VectorXd& z);

// Componentwise sign under the given mode. Hysteresis requires `latches`
// (initialized on first use to the strict sign of the input); latches are
// updated only when `update` is true, so integrator stages can evaluate with
// frozen switching state. Throws on eps <= 0 for regularized modes.
Eigen::VectorXd sign_vec(const Eigen::VectorXd& z, const SignMode& mode,
                         HysteresisLatches* latches = nullptr, bool update = true);

// u = -(B kron I_p) sign_vec(z_tilde): each agent steers against the signs of
// its incident relative-position errors, one bit per axis per edge.
Eigen::VectorXd formation_control(const Graph& g, int p, const Eigen::VectorXd& z_tilde,
                                  const SignMode& mode, HysteresisLatches* latches = nullptr,
                                  bool update = true);

// Velocity internal model of a follower (agent_index is 0-based and must not
// be 0: the leading agent knows the reference and carries no estimator):
//   eta' = Phi eta + Gamma_v^T u_tilde,   v_ref = Gamma_v eta.
// Returns (eta', v_ref).
std::pair<Eigen::VectorXd, Eigen::VectorXd> velocity_im_rhs(int agent_index,
                                                            const Eigen::VectorXd& eta_i,
                                                            const Eigen::MatrixXd& Phi,
                                                            const Eigen::MatrixXd& Gamma_v,
                                                            const Eigen::VectorXd& u_tilde_i);

// Disturbance internal model (runs at every agent, the leading one included):
//   theta' = Phi_d theta + Gamma_d^T u_check,   d_hat = Gamma_d theta,
// and the commanded input is u = u_hat - d_hat. Returns (theta', d_hat).
std::pair<Eigen::VectorXd, Eigen::VectorXd> disturbance_im_rhs(const Eigen::VectorXd& theta_i,
                                                               const Eigen::MatrixXd& Phi_d,
                                                               const Eigen::MatrixXd& Gamma_d,
                                                               const Eigen::VectorXd& u_check_i);

// Observer for the disturbance-compensator coupling when the plant state is
// not measured: requires constant g and h(xi) = xi, and obeys
//   xi_hat' = f(y) + g (u + Gamma_d theta) + H (y - xi_hat),
// with the companion theta update driven by u_check = y - xi_hat.
Eigen::VectorXd observer_rhs(const AgentModel& model, const Eigen::VectorXd& xi_hat,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& theta, const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& Gamma_d);

// Quadratic certificate for the observer error dynamics in (xi_tilde,
// theta_tilde) coordinates, A = [[-H, -g Gamma_d], [G_d, Phi_d]]:
// P = P^T > 0 solving A^T P + P A = -2 diag(I_p, gamma I_q).
struct ObserverCertificate {
  Eigen::MatrixXd P;
  double gamma = 1.0;
  double residual = 0.0;  // ||A^T P + P A + 2 diag(I, gamma I)||
  double min_eig = 0.0;   // smallest eigenvalue of P
};

// Solves the certificate equation by Kronecker vectorization. gamma < 0 means
// "derive from this output map": gamma = max(1, ||Gamma_d^T Gamma_d||_2).
// Throws if A is not Hurwitz (naming the offending eigenvalue), if the
// residual exceeds 1e-8, or if P is not positive definite.
ObserverCertificate solve_observer_certificate(const Eigen::MatrixXd& H,
                                               const Eigen::MatrixXd& G_d,
                                               const Eigen::MatrixXd& Phi_d,
                                               const Eigen::MatrixXd& g,
                                               const Eigen::MatrixXd& Gamma_d,
                                               double gamma = -1.0);

enum class ControllerMode {
  KnownVelocity,          // reference velocity known to every agent
  LeaderFollower,         // reference known to agent 1 only; followers estimate it
  LeaderFollowerConstDist,// leader-follower plus constant-disturbance compensation
  KnownVelHarmonicDist,   // known velocity plus harmonic-disturbance compensation (tree graph)
  ObserverBased           // leader-follower plus observer-based disturbance compensation
};

std::string to_string(ControllerMode m);
ControllerMode controller_mode_from_string(const std::string& name);

// Offsets of the packed simulation state [x, xi, eta, theta, xi_hat].
// Absent blocks have offset -1 (or dimension 0).
struct StateLayout {
  int N = 0, M = 0, p = 0;
  int x_offset = 0;                        // length N*p
  std::vector<int> xi_offset, xi_dim;      // per agent
  std::vector<int> eta_offset;             // per agent; -1 for the leading agent or when absent
  int q_v = 0;                             // velocity-generator dimension
  std::vector<int> theta_offset, theta_dim;// per agent; -1/0 when absent
  std::vector<int> xihat_offset;           // per agent; -1 when absent
  int total = 0;
};

// The assembled closed loop: one vector-field evaluator over the packed state
// plus accessors for every derived error coordinate. Exogenous generator
// states are never integrated; their closed-form solutions enter through t.
struct ClosedLoop {
  ControllerMode mode = ControllerMode::KnownVelocity;
  SignMode sign_mode;
  Graph graph;
  int p = 0;
  Eigen::VectorXd z_star;
  std::vector<AgentModel> agents;
  ExosystemSpec reference;                  // velocity generator
  std::vector<ExosystemSpec> disturbances;  // per agent; empty when unused
  Eigen::MatrixXd H, G_d;                   // observer gains (ObserverBased)
  std::vector<ObserverCertificate> certificates;  // per agent (ObserverBased)
  double gamma = 1.0;
  StateLayout layout;

  bool has_eta() const {
    return mode == ControllerMode::LeaderFollower ||
           mode == ControllerMode::LeaderFollowerConstDist ||
           mode == ControllerMode::ObserverBased;
  }
  bool has_theta() const {
    return mode == ControllerMode::LeaderFollowerConstDist ||
           mode == ControllerMode::KnownVelHarmonicDist ||
           mode == ControllerMode::ObserverBased;
  }
  bool has_observer() const { return mode == ControllerMode::ObserverBased; }

  Eigen::VectorXd z_tilde_of(const Eigen::VectorXd& s) const;

  // Establish the initial hysteresis latch from the strict sign of z_tilde;
  // no-op in the other modes.
  void init_latches(const Eigen::VectorXd& s, HysteresisLatches& latches) const;
  // Once-per-step latch refresh from the current state (frozen during stages).
  void update_latches(const Eigen::VectorXd& s, HysteresisLatches& latches) const;

  // Full vector field at (t, s) with frozen switching state.
  Eigen::VectorXd rhs(double t, const Eigen::VectorXd& s, const HysteresisLatches& latches) const;

  // Commanded input per agent, stacked: u = u_hat - d_hat.
  Eigen::VectorXd command_u(const Eigen::VectorXd& s, const HysteresisLatches& latches) const;
  // Matched disturbance d(t) per agent, stacked (zero when unused).
  Eigen::VectorXd disturbance_of(double t) const;
  // Reference velocity fed to each agent's kinematic layer, stacked.
  Eigen::VectorXd v_ref_of(double t, const Eigen::VectorXd& s) const;

  // Error coordinates against the closed-form generator states; empty
  // vectors when the block is absent from the mode.
  Eigen::VectorXd eta_tilde_of(double t, const Eigen::VectorXd& s) const;
  Eigen::VectorXd theta_tilde_of(double t, const Eigen::VectorXd& s) const;
  Eigen::VectorXd xi_tilde_of(const Eigen::VectorXd& s) const;

  // Observer injection gain for agent i: the user-supplied G_d when present,
  // otherwise the default Gamma_d_i^T.
  Eigen::MatrixXd effective_G_d(int i) const;
};

// Builds the closed loop for a validated scenario, checking the structural
// hypotheses of the selected mode (skew generators, observability, tree graph
// for harmonic rejection with known velocity, dissipation domination and
// certificate existence for the observer path). Throws std::invalid_argument
// naming the violated hypothesis.
ClosedLoop assemble_closed_loop(const Scenario& scenario);

}  // namespace formsim
