#pragma once

// Fixed-step integration of the discontinuous closed loop with certificate
// monitoring, convergence detection, switching metrics, and passivity audits.
// z_tilde is always derived from x (single source of truth); exogenous
// generators are advanced in closed form, never by the scheme.

#include "formsim/controllers.hpp"
#include "formsim/scenario.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace formsim {

struct SimState {
  double t = 0.0;
  Eigen::VectorXd s;  // packed [x, xi, eta, theta, xi_hat] per StateLayout
  HysteresisLatches latches;
};

struct TrajectoryRecord {
  double t = 0.0;
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd xi;
  Eigen::VectorXd eta_tilde;   // empty when the mode has no velocity estimator
  Eigen::VectorXd theta_tilde; // empty when the mode has no disturbance model
  Eigen::VectorXd xi_tilde;    // empty when the mode has no observer
  Eigen::VectorXd x;           // positions (plotting only, not part of the CSV contract)
  double V = 0.0;              // mode-matched certificate value
  double znorm1 = 0.0;
  double xinorm2 = 0.0;
  Eigen::VectorXd u;           // commanded input per agent, stacked
  Eigen::VectorXi flips;       // cumulative strict-sign flips per z_tilde component
  long long flips_total = 0;
};

struct MonitorReport {
  double max_increment = 0.0;       // max over consecutive records of V(t+) - V(t)
  double first_violation_time = -1; // -1 when no increment exceeds tol
  double tol = 0.0;
  bool ok = true;
};

struct RunSummary {
  double t_final = 0.0;
  double z_tilde_inf = 0.0;   // final-time infinity norms (NaN when block absent)
  double xi_inf = 0.0;
  double eta_tilde_inf = 0.0;
  double theta_tilde_inf = 0.0;
  double xi_tilde_inf = 0.0;
  double position_band = 0.0;       // 2 eps + 10 dt
  double time_to_threshold = -1.0;  // first t with ||z_tilde||_inf inside the band
  double max_V_increment = 0.0;     // over every integration step (full resolution)
  long long total_flips = 0;
  double theta_sup_ratio = 0.0;     // sup_t ||theta_tilde||_2 / ||theta_tilde(0)||_2
  std::vector<AuditReport> audits;  // per-agent passivity audit at full resolution
  bool audits_pass = true;
};

struct RunResult {
  std::vector<TrajectoryRecord> records;
  RunSummary summary;
};

// One explicit step (latches frozen during stages; refresh them separately).
// Throws on non-finite results, reporting the last finite time.
SimState step(const ClosedLoop& loop, const SimState& state, double dt, Scheme scheme);

// Mode-matched certificate: the z_tilde potential (1-norm for the strict and
// hysteresis variants; its Huber-smoothed envelope, gradient equal to the
// saturated sign, for the smooth variant) plus agent storages, plus
// 0.5||eta_tilde||^2 when a velocity estimator runs, plus 0.5||theta_tilde||^2
// for the measured-state disturbance modes, or the P-quadratic in
// (xi_tilde, theta_tilde) on the observer path.
double lyapunov_value(const ClosedLoop& loop, double t, const Eigen::VectorXd& s);

// Per-step certificate tolerance: the smooth variant is differentiable (tiny
// slack), the strict variant admits O(dt) switching overshoot, hysteresis
// admits the full band excursion.
double lyapunov_tolerance(const SignMode& mode, double dt);

MonitorReport monitor_lyapunov(const std::vector<TrajectoryRecord>& records,
                               const SignMode& mode, double record_dt);

Eigen::VectorXd pack_initial_state(const ClosedLoop& loop, const Scenario& scenario);

TrajectoryRecord make_record(const ClosedLoop& loop, double t, const Eigen::VectorXd& s,
                             const HysteresisLatches& latches);

// Integrate the scenario end to end: records at the configured output stride
// (first and last steps always included), full-resolution certificate
// monitoring, switching counters, and per-agent passivity audits over the
// port input (command plus matched disturbance).
RunResult run(const Scenario& scenario);
RunResult run(const ClosedLoop& loop, const Scenario& scenario);

std::string summary_text(const RunSummary& summary);

}  // namespace formsim
