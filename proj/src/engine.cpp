#include "formsim/engine.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace formsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Huber envelope of |z| with corner eps: quadratic inside the band, affine
// outside, gradient equal to the saturated sign. This is the potential whose
// decrease the smooth variant certifies.
double huber_sum(const Eigen::VectorXd& z, double eps) {
  double v = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double a = std::abs(z(k));
    v += (a <= eps) ? a * a / (2.0 * eps) : a - 0.5 * eps;
  }
  return v;
}

}  // namespace

SimState step(const ClosedLoop& loop, const SimState& state, double dt, Scheme scheme) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const double t = state.t;
  const Eigen::VectorXd& s = state.s;

  SimState next;
  next.latches = state.latches;  // switching state stays frozen across the stages
  if (scheme == Scheme::euler) {
    next.s = s + dt * loop.rhs(t, s, state.latches);
  } else {
    const Eigen::VectorXd k1 = loop.rhs(t, s, state.latches);
    const Eigen::VectorXd k2 = loop.rhs(t + 0.5 * dt, s + 0.5 * dt * k1, state.latches);
    const Eigen::VectorXd k3 = loop.rhs(t + 0.5 * dt, s + 0.5 * dt * k2, state.latches);
    const Eigen::VectorXd k4 = loop.rhs(t + dt, s + dt * k3, state.latches);
    next.s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  next.t = t + dt;
  if (!next.s.allFinite())
    throw std::runtime_error("integration diverged: non-finite state after the step from t = " +
                             fmt(t) + " (reduce dt or soften the switching)");
  return next;
}

double lyapunov_value(const ClosedLoop& loop, double t, const Eigen::VectorXd& s) {
  const StateLayout& L = loop.layout;
  const Eigen::VectorXd z = loop.z_tilde_of(s);

  double v = (loop.sign_mode.variant == SignVariant::smooth)
                 ? huber_sum(z, loop.sign_mode.eps)
                 : z.lpNorm<1>();

  for (int i = 0; i < L.N; ++i)
    v += loop.agents[static_cast<size_t>(i)].S(s.segment(L.xi_offset[static_cast<size_t>(i)],
                                                         L.xi_dim[static_cast<size_t>(i)]));

  if (loop.has_eta()) v += 0.5 * loop.eta_tilde_of(t, s).squaredNorm();

  if (loop.has_observer()) {
    const Eigen::VectorXd xit = loop.xi_tilde_of(s);
    const Eigen::VectorXd tht = loop.theta_tilde_of(t, s);
    int xi_at = 0, th_at = 0;
    for (int i = 0; i < L.N; ++i) {
      const int n_i = L.xi_dim[static_cast<size_t>(i)];
      const int q_i = L.theta_dim[static_cast<size_t>(i)];
      Eigen::VectorXd e(n_i + q_i);
      e.head(n_i) = xit.segment(xi_at, n_i);
      e.tail(q_i) = tht.segment(th_at, q_i);
      v += 0.5 * e.dot(loop.certificates[static_cast<size_t>(i)].P * e);
      xi_at += n_i;
      th_at += q_i;
    }
  } else if (loop.has_theta()) {
    v += 0.5 * loop.theta_tilde_of(t, s).squaredNorm();
  }
  return v;
}

double lyapunov_tolerance(const SignMode& mode, double dt) {
  switch (mode.variant) {
    case SignVariant::smooth:
      return 1e-6;
    case SignVariant::strict:
      return 0.5 * dt;
    case SignVariant::hysteresis:
      return 4.0 * mode.eps + dt;
  }
  return 1e-6;
}

MonitorReport monitor_lyapunov(const std::vector<TrajectoryRecord>& records,
                               const SignMode& mode, double record_dt) {
  MonitorReport rep;
  rep.tol = lyapunov_tolerance(mode, record_dt);
  rep.max_increment = -std::numeric_limits<double>::infinity();
  if (records.size() < 2) {
    rep.max_increment = 0.0;
    return rep;
  }
  for (size_t k = 0; k + 1 < records.size(); ++k) {
    const double dv = records[k + 1].V - records[k].V;
    if (dv > rep.max_increment) rep.max_increment = dv;
    if (dv > rep.tol && rep.first_violation_time < 0) {
      rep.first_violation_time = records[k + 1].t;
      rep.ok = false;
    }
  }
  return rep;
}

Eigen::VectorXd pack_initial_state(const ClosedLoop& loop, const Scenario& scenario) {
  const StateLayout& L = loop.layout;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(L.total);

  const Eigen::Index np = static_cast<Eigen::Index>(L.N) * L.p;
  if (scenario.x0.size() != np)
    throw std::invalid_argument("initial positions x must list N*p = " + std::to_string(np) +
                                " values, got " + std::to_string(scenario.x0.size()));
  s.segment(L.x_offset, np) = scenario.x0;

  int xi_total = 0;
  for (int d : L.xi_dim) xi_total += d;
  if (scenario.xi0.size() != 0) {
    if (scenario.xi0.size() != xi_total)
      throw std::invalid_argument("initial xi must list " + std::to_string(xi_total) +
                                  " values, got " + std::to_string(scenario.xi0.size()));
    int at = 0;
    for (int i = 0; i < L.N; ++i) {
      const int d = L.xi_dim[static_cast<size_t>(i)];
      s.segment(L.xi_offset[static_cast<size_t>(i)], d) = scenario.xi0.segment(at, d);
      at += d;
    }
  }

  if (loop.has_eta() && scenario.eta0.size() != 0) {
    const int expected = (L.N - 1) * L.q_v;
    if (scenario.eta0.size() != expected)
      throw std::invalid_argument("initial eta must list " + std::to_string(expected) +
                                  " values (followers only), got " +
                                  std::to_string(scenario.eta0.size()));
    int at = 0;
    for (int i = 1; i < L.N; ++i) {
      s.segment(L.eta_offset[static_cast<size_t>(i)], L.q_v) = scenario.eta0.segment(at, L.q_v);
      at += L.q_v;
    }
  }

  if (loop.has_theta() && scenario.theta0.size() != 0) {
    int theta_total = 0;
    for (int d : L.theta_dim) theta_total += d;
    if (scenario.theta0.size() != theta_total)
      throw std::invalid_argument("initial theta must list " + std::to_string(theta_total) +
                                  " values, got " + std::to_string(scenario.theta0.size()));
    int at = 0;
    for (int i = 0; i < L.N; ++i) {
      const int d = L.theta_dim[static_cast<size_t>(i)];
      s.segment(L.theta_offset[static_cast<size_t>(i)], d) = scenario.theta0.segment(at, d);
      at += d;
    }
  }

  if (loop.has_observer() && scenario.xi_hat0.size() != 0) {
    if (scenario.xi_hat0.size() != xi_total)
      throw std::invalid_argument("initial xi_hat must list " + std::to_string(xi_total) +
                                  " values, got " + std::to_string(scenario.xi_hat0.size()));
    int at = 0;
    for (int i = 0; i < L.N; ++i) {
      const int d = L.xi_dim[static_cast<size_t>(i)];
      s.segment(L.xihat_offset[static_cast<size_t>(i)], d) = scenario.xi_hat0.segment(at, d);
      at += d;
    }
  }

  return s;
}

TrajectoryRecord make_record(const ClosedLoop& loop, double t, const Eigen::VectorXd& s,
                             const HysteresisLatches& latches) {
  const StateLayout& L = loop.layout;
  TrajectoryRecord r;
  r.t = t;
  r.z_tilde = loop.z_tilde_of(s);
  r.x = s.segment(L.x_offset, static_cast<Eigen::Index>(L.N) * L.p);

  int xi_total = 0;
  for (int d : L.xi_dim) xi_total += d;
  r.xi.resize(xi_total);
  int at = 0;
  for (int i = 0; i < L.N; ++i) {
    const int d = L.xi_dim[static_cast<size_t>(i)];
    r.xi.segment(at, d) = s.segment(L.xi_offset[static_cast<size_t>(i)], d);
    at += d;
  }

  r.eta_tilde = loop.eta_tilde_of(t, s);
  r.theta_tilde = loop.theta_tilde_of(t, s);
  r.xi_tilde = loop.xi_tilde_of(s);
  r.V = lyapunov_value(loop, t, s);
  r.znorm1 = r.z_tilde.lpNorm<1>();
  r.xinorm2 = r.xi.norm();
  r.u = loop.command_u(s, latches);
  r.flips = Eigen::VectorXi::Zero(r.z_tilde.size());
  r.flips_total = 0;
  return r;
}

RunResult run(const Scenario& scenario) {
  const ClosedLoop loop = assemble_closed_loop(scenario);
  return run(loop, scenario);
}

RunResult run(const ClosedLoop& loop, const Scenario& scenario) {
  const double dt = scenario.integration.dt;
  const double T = scenario.integration.t_final;
  const int stride = scenario.integration.output_stride;
  const Scheme scheme = scenario.integration.scheme;
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("run: dt and t_final must be positive");
  if (stride < 1) throw std::invalid_argument("run: output_stride must be at least 1");
  const long long nsteps = std::max<long long>(1, std::llround(T / dt));

  const StateLayout& L = loop.layout;
  SimState st;
  st.t = 0.0;
  st.s = pack_initial_state(loop, scenario);
  loop.init_latches(st.s, st.latches);

  const double eps_eff = (loop.sign_mode.variant == SignVariant::strict) ? 0.0 : loop.sign_mode.eps;
  const double band = 2.0 * eps_eff + 10.0 * dt;
  const double step_tol = lyapunov_tolerance(loop.sign_mode, dt);

  RunResult result;
  result.records.reserve(static_cast<size_t>(nsteps / stride + 2));

  Eigen::VectorXi flips = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(L.M) * L.p);
  Eigen::VectorXd prev_sign = strict_sign_vec(loop.z_tilde_of(st.s));

  const double theta0_norm =
      loop.has_theta() ? loop.theta_tilde_of(0.0, st.s).norm() : 0.0;
  double theta_sup = theta0_norm;

  double time_to_threshold = -1.0;
  if (loop.z_tilde_of(st.s).lpNorm<Eigen::Infinity>() <= band) time_to_threshold = 0.0;

  // Per-agent audit samples at full resolution: state, port input (command
  // plus matched disturbance), and output at every accepted step time.
  std::vector<double> audit_t;
  std::vector<std::vector<Eigen::VectorXd>> audit_xi(static_cast<size_t>(L.N)),
      audit_u(static_cast<size_t>(L.N)), audit_y(static_cast<size_t>(L.N));
  audit_t.reserve(static_cast<size_t>(nsteps) + 1);
  for (auto* arr : {&audit_xi, &audit_u, &audit_y})
    for (auto& v : *arr) v.reserve(static_cast<size_t>(nsteps) + 1);

  const auto sample_audit = [&](double t, const Eigen::VectorXd& s,
                                const HysteresisLatches& latches) {
    audit_t.push_back(t);
    const Eigen::VectorXd u = loop.command_u(s, latches);
    const Eigen::VectorXd d = loop.disturbance_of(t);
    for (int i = 0; i < L.N; ++i) {
      const size_t ui = static_cast<size_t>(i);
      const Eigen::VectorXd xi_i = s.segment(L.xi_offset[ui], L.xi_dim[ui]);
      audit_xi[ui].push_back(xi_i);
      audit_u[ui].push_back(u.segment(static_cast<Eigen::Index>(i) * L.p, L.p) +
                            d.segment(static_cast<Eigen::Index>(i) * L.p, L.p));
      audit_y[ui].push_back(loop.agents[ui].h(xi_i));
    }
  };

  double v_prev = lyapunov_value(loop, 0.0, st.s);
  double max_dv = -std::numeric_limits<double>::infinity();
  double first_violation = -1.0;

  result.records.push_back(make_record(loop, st.t, st.s, st.latches));

  for (long long k = 0; k < nsteps; ++k) {
    loop.update_latches(st.s, st.latches);
    sample_audit(st.t, st.s, st.latches);

    st = step(loop, st, dt, scheme);

    const Eigen::VectorXd z = loop.z_tilde_of(st.s);
    const double v_now = lyapunov_value(loop, st.t, st.s);
    const double dv = v_now - v_prev;
    if (dv > max_dv) max_dv = dv;
    if (dv > step_tol && first_violation < 0) first_violation = st.t;
    v_prev = v_now;

    const Eigen::VectorXd sgn = strict_sign_vec(z);
    for (Eigen::Index c = 0; c < sgn.size(); ++c)
      if (sgn(c) != prev_sign(c)) ++flips(c);
    prev_sign = sgn;

    if (time_to_threshold < 0 && z.lpNorm<Eigen::Infinity>() <= band) time_to_threshold = st.t;
    if (loop.has_theta()) {
      const double n = loop.theta_tilde_of(st.t, st.s).norm();
      if (n > theta_sup) theta_sup = n;
    }

    if ((k + 1) % stride == 0 || k + 1 == nsteps) {
      TrajectoryRecord rec = make_record(loop, st.t, st.s, st.latches);
      rec.flips = flips;
      rec.flips_total = flips.cast<long long>().sum();
      result.records.push_back(std::move(rec));
    }
  }
  sample_audit(st.t, st.s, st.latches);

  RunSummary& sum = result.summary;
  sum.t_final = st.t;
  {
    const TrajectoryRecord& last = result.records.back();
    sum.z_tilde_inf = last.z_tilde.lpNorm<Eigen::Infinity>();
    sum.xi_inf = last.xi.size() ? last.xi.lpNorm<Eigen::Infinity>() : kNaN;
    sum.eta_tilde_inf = last.eta_tilde.size() ? last.eta_tilde.lpNorm<Eigen::Infinity>() : kNaN;
    sum.theta_tilde_inf = last.theta_tilde.size() ? last.theta_tilde.lpNorm<Eigen::Infinity>() : kNaN;
    sum.xi_tilde_inf = last.xi_tilde.size() ? last.xi_tilde.lpNorm<Eigen::Infinity>() : kNaN;
  }
  sum.position_band = band;
  sum.time_to_threshold = time_to_threshold;
  sum.max_V_increment = max_dv;
  sum.total_flips = flips.cast<long long>().sum();
  if (loop.has_theta()) {
    if (theta0_norm > 0.0)
      sum.theta_sup_ratio = theta_sup / theta0_norm;
    else
      sum.theta_sup_ratio = (theta_sup > 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    sum.theta_sup_ratio = kNaN;
  }
  (void)first_violation;

  sum.audits_pass = true;
  for (int i = 0; i < L.N; ++i) {
    const size_t ui = static_cast<size_t>(i);
    sum.audits.push_back(
        passivity_audit(loop.agents[ui], audit_t, audit_xi[ui], audit_u[ui], audit_y[ui]));
    sum.audits_pass = sum.audits_pass && sum.audits.back().pass;
  }
  return result;
}

std::string summary_text(const RunSummary& summary) {
  std::ostringstream out;
  out << "final time t = " << fmt(summary.t_final) << " s\n";
  out << "  ||z_tilde||_inf     = " << fmt(summary.z_tilde_inf) << "\n";
  if (!std::isnan(summary.xi_inf))
    out << "  ||xi||_inf          = " << fmt(summary.xi_inf) << "\n";
  if (!std::isnan(summary.eta_tilde_inf))
    out << "  ||eta_tilde||_inf   = " << fmt(summary.eta_tilde_inf) << "\n";
  if (!std::isnan(summary.theta_tilde_inf))
    out << "  ||theta_tilde||_inf = " << fmt(summary.theta_tilde_inf) << "\n";
  if (!std::isnan(summary.xi_tilde_inf))
    out << "  ||xi_tilde||_inf    = " << fmt(summary.xi_tilde_inf) << "\n";
  if (summary.time_to_threshold >= 0.0)
    out << "convergence: ||z_tilde||_inf entered the band " << fmt(summary.position_band)
        << " at t = " << fmt(summary.time_to_threshold) << " s\n";
  else
    out << "convergence: ||z_tilde||_inf stayed outside the band " << fmt(summary.position_band)
        << "\n";
  out << "certificate: max single-step V increment = " << fmt(summary.max_V_increment) << "\n";
  out << "switching: total strict-sign flips of z_tilde = " << summary.total_flips << "\n";
  if (!std::isnan(summary.theta_sup_ratio))
    out << "disturbance estimator: sup||theta_tilde|| / ||theta_tilde(0)|| = "
        << fmt(summary.theta_sup_ratio) << "\n";
  double worst = 0.0, tol = 0.0;
  for (const AuditReport& a : summary.audits) {
    if (a.max_violation > worst) worst = a.max_violation;
    tol = a.tol;
  }
  if (!summary.audits.empty())
    out << "passivity audit: " << (summary.audits_pass ? "PASS" : "FAIL") << " (max residual "
        << fmt(worst) << ", tol " << fmt(tol) << ")\n";
  return out.str();
}

}  // namespace formsim
