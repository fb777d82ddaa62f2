#pragma once

// Strictly passive agent dynamics with storage/dissipation certificates.
// An AgentModel is a bag of pure callables (drift, input map, output map,
// storage, dissipation, storage gradient) plus capability flags used by the
// observer-based controller path. Models are immutable after construction and
// certified by sampling, not symbolically.

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace formsim {

struct AgentModel {
  int state_dim = 0;  // n
  int p = 0;          // input/output dimension

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;       // drift, R^n -> R^n
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g;       // input map, R^n -> R^{n x p}
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> h;       // output, R^n -> R^p
  std::function<double(const Eigen::VectorXd&)> S;                // storage, >= 0
  std::function<double(const Eigen::VectorXd&)> W;                // dissipation, >= 0
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_S;  // storage gradient

  // Capability flags consumed by the observer-based controller path.
  bool constant_g = false;                   // g(.) does not depend on the state
  bool output_is_state = false;              // h(xi) = xi
  bool dissipation_dominates_state = false;  // W(xi) >= ||xi||^2 on the sampled probes
};

// Linear strictly passive agent: xi' = -a xi + b u, y = xi, with storage
// S = xi'xi/(2b) and dissipation W = (a/b)||xi||^2, so the passivity
// inequality holds with equality. Requires a > 0, b > 0.
AgentModel make_linear_passive_agent(int p, double a, double b);

// f(xi) + g(xi) u, with dimension checks.
Eigen::VectorXd agent_rhs(const AgentModel& model, const Eigen::VectorXd& xi, const Eigen::VectorXd& u);

// Sampled certification: f(0)=0, h(0)=0, g(0) full column rank (tol 1e-10),
// S(0)=0 and S>0 on a sampled shell, W(0)=0 and W>=0 on the shell, and the
// passivity inequality grad_S.(f+gu) <= -W + y'u on a sampled (xi,u) grid to
// 1e-9. Throws std::invalid_argument naming the violating sample.
void validate_agent(const AgentModel& model);

struct AuditReport {
  double max_violation = 0.0;  // max over interior samples of S'_fd + W - y'u
  double t_worst = 0.0;        // sample time attaining the max
  double tol = 0.0;            // C*dt^2 + 1e-8
  bool pass = false;
};

// Finite-difference passivity audit along a uniformly sampled trajectory.
// u must be the input seen by the passive block (command plus any matched
// disturbance). The tolerance envelope C*dt^2 + 1e-8 uses a large C because a
// central difference of S across a switching instant of the control carries an
// O(dt * |slope jump|) error; away from switches the residual is O(dt^2).
// Throws std::invalid_argument on fewer than 3 samples or ragged inputs.
AuditReport passivity_audit(const AgentModel& model,
                            const std::vector<double>& t,
                            const std::vector<Eigen::VectorXd>& xi,
                            const std::vector<Eigen::VectorXd>& u,
                            const std::vector<Eigen::VectorXd>& y,
                            double curvature_constant = 6e6);

}  // namespace formsim
