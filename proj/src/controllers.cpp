#include "formsim/controllers.hpp"

#include "formsim/scenario.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <sstream>

namespace formsim {

std::string to_string(SignVariant v) {
  switch (v) {
    case SignVariant::strict: return "strict";
    case SignVariant::hysteresis: return "hysteresis";
    case SignVariant::smooth: return "smooth";
  }
  return "?";
}

SignVariant sign_variant_from_string(const std::string& name) {
  if (name == "strict") return SignVariant::strict;
  if (name == "hysteresis") return SignVariant::hysteresis;
  if (name == "smooth") return SignVariant::smooth;
  throw std::invalid_argument("unknown sign mode '" + name +
                              "' (expected strict, hysteresis, or smooth)");
}

std::string to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::KnownVelocity: return "known_velocity";
    case ControllerMode::LeaderFollower: return "leader_follower";
    case ControllerMode::LeaderFollowerConstDist: return "leader_follower_const_dist";
    case ControllerMode::KnownVelHarmonicDist: return "known_vel_harmonic_dist";
    case ControllerMode::ObserverBased: return "observer_based";
  }
  return "?";
}

ControllerMode controller_mode_from_string(const std::string& name) {
  if (name == "known_velocity") return ControllerMode::KnownVelocity;
  if (name == "leader_follower") return ControllerMode::LeaderFollower;
  if (name == "leader_follower_const_dist") return ControllerMode::LeaderFollowerConstDist;
  if (name == "known_vel_harmonic_dist") return ControllerMode::KnownVelHarmonicDist;
  if (name == "observer_based") return ControllerMode::ObserverBased;
  throw std::invalid_argument(
      "unknown controller mode '" + name +
      "' (expected known_velocity, leader_follower, leader_follower_const_dist, "
      "known_vel_harmonic_dist, or observer_based)");
}

Eigen::VectorXd strict_sign_vec(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Eigen::VectorXd sign_vec(const Eigen::VectorXd& z, const SignMode& mode,
                         HysteresisLatches* latches, bool update) {
  switch (mode.variant) {
    case SignVariant::strict:
      return strict_sign_vec(z);
    case SignVariant::smooth:
      if (!(mode.eps > 0.0)) throw std::invalid_argument("sign_vec: smooth mode needs eps > 0");
      return (z / mode.eps).cwiseMin(1.0).cwiseMax(-1.0);
    case SignVariant::hysteresis: {
      if (!(mode.eps > 0.0)) throw std::invalid_argument("sign_vec: hysteresis mode needs eps > 0");
      if (latches == nullptr)
        throw std::invalid_argument("sign_vec: hysteresis mode needs latch state");
      if (!latches->initialized || latches->latch.size() != z.size()) {
        latches->latch = strict_sign_vec(z);
        latches->initialized = true;
        return latches->latch;
      }
      if (update) {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          if (z(i) >= mode.eps)
            latches->latch(i) = 1.0;
          else if (z(i) <= -mode.eps)
            latches->latch(i) = -1.0;
        }
      }
      return latches->latch;
    }
  }
  throw std::logic_error("sign_vec: unhandled variant");
}

Eigen::VectorXd formation_control(const Graph& g, int p, const Eigen::VectorXd& z_tilde,
                                  const SignMode& mode, HysteresisLatches* latches, bool update) {
  if (z_tilde.size() != static_cast<Eigen::Index>(g.n_edges()) * p)
    throw std::invalid_argument("formation_control: z_tilde has length " +
                                std::to_string(z_tilde.size()) + ", expected M*p = " +
                                std::to_string(g.n_edges() * p));
  return -apply_B_kron(g, p, sign_vec(z_tilde, mode, latches, update));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> velocity_im_rhs(int agent_index,
                                                            const Eigen::VectorXd& eta_i,
                                                            const Eigen::MatrixXd& Phi,
                                                            const Eigen::MatrixXd& Gamma_v,
                                                            const Eigen::VectorXd& u_tilde_i) {
  if (agent_index == 0)
    throw std::invalid_argument(
        "velocity_im_rhs: the leading agent knows the reference velocity and carries no estimator");
  if (agent_index < 0) throw std::invalid_argument("velocity_im_rhs: negative agent index");
  const Eigen::Index q = Phi.rows();
  if (Phi.cols() != q || eta_i.size() != q || Gamma_v.cols() != q ||
      Gamma_v.rows() != u_tilde_i.size())
    throw std::invalid_argument("velocity_im_rhs: dimension mismatch");
  return {Phi * eta_i + Gamma_v.transpose() * u_tilde_i, Gamma_v * eta_i};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> disturbance_im_rhs(const Eigen::VectorXd& theta_i,
                                                               const Eigen::MatrixXd& Phi_d,
                                                               const Eigen::MatrixXd& Gamma_d,
                                                               const Eigen::VectorXd& u_check_i) {
  const Eigen::Index q = Phi_d.rows();
  if (Phi_d.cols() != q || theta_i.size() != q || Gamma_d.cols() != q ||
      Gamma_d.rows() != u_check_i.size())
    throw std::invalid_argument("disturbance_im_rhs: dimension mismatch");
  return {Phi_d * theta_i + Gamma_d.transpose() * u_check_i, Gamma_d * theta_i};
}

Eigen::VectorXd observer_rhs(const AgentModel& model, const Eigen::VectorXd& xi_hat,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& theta, const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& Gamma_d) {
  if (!model.constant_g || !model.output_is_state)
    throw std::invalid_argument(
        "observer_rhs: the observer path requires a constant input map and the passive output "
        "equal to the state");
  if (xi_hat.size() != model.state_dim || y.size() != model.p || u.size() != model.p ||
      theta.size() != Gamma_d.cols() || Gamma_d.rows() != model.p ||
      H.rows() != model.state_dim || H.cols() != model.state_dim)
    throw std::invalid_argument("observer_rhs: dimension mismatch");
  return model.f(y) + model.g(y) * (u + Gamma_d * theta) + H * (y - xi_hat);
}

ObserverCertificate solve_observer_certificate(const Eigen::MatrixXd& H,
                                               const Eigen::MatrixXd& G_d,
                                               const Eigen::MatrixXd& Phi_d,
                                               const Eigen::MatrixXd& g,
                                               const Eigen::MatrixXd& Gamma_d,
                                               double gamma) {
  const Eigen::Index p = H.rows();
  const Eigen::Index q = Phi_d.rows();
  if (H.cols() != p || g.rows() != p || g.cols() != p || Gamma_d.rows() != p ||
      Gamma_d.cols() != q || G_d.rows() != q || G_d.cols() != p || Phi_d.cols() != q)
    throw std::invalid_argument("observer certificate: dimension mismatch");

  if (gamma < 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Gamma_d);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    gamma = std::max(1.0, smax * smax);
  }

  const Eigen::Index n = p + q;
  Eigen::MatrixXd A(n, n);
  A.topLeftCorner(p, p) = -H;
  A.topRightCorner(p, q) = -g * Gamma_d;
  A.bottomLeftCorner(q, p) = G_d;
  A.bottomRightCorner(q, q) = Phi_d;

  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() > -1e-9) {
      std::ostringstream os;
      os << "observer certificate: error dynamics are not exponentially stable; eigenvalue "
         << lambda.real() << (lambda.imag() >= 0 ? "+" : "") << lambda.imag()
         << "i has nonnegative real part (adjust the observer gains)";
      throw std::invalid_argument(os.str());
    }
  }

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  Q.topLeftCorner(p, p) = 2.0 * Eigen::MatrixXd::Identity(p, p);
  Q.bottomRightCorner(q, q) = 2.0 * gamma * Eigen::MatrixXd::Identity(q, q);

  const Eigen::MatrixXd At = A.transpose();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd K = Eigen::kroneckerProduct(I, At).eval() + Eigen::kroneckerProduct(At, I).eval();
  Eigen::VectorXd rhsvec = -Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  Eigen::VectorXd pvec = K.partialPivLu().solve(rhsvec);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(pvec.data(), n, n);
  P = 0.5 * (P + P.transpose()).eval();

  ObserverCertificate cert;
  cert.P = P;
  cert.gamma = gamma;
  cert.residual = (At * P + P * A + Q).norm();
  if (cert.residual > 1e-8)
    throw std::invalid_argument("observer certificate: Lyapunov identity residual " +
                                std::to_string(cert.residual) + " exceeds 1e-8");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sa(P);
  cert.min_eig = sa.eigenvalues().minCoeff();
  if (!(cert.min_eig > 0.0))
    throw std::invalid_argument("observer certificate: P is not positive definite (lambda_min = " +
                                std::to_string(cert.min_eig) + ")");
  return cert;
}

namespace {

StateLayout build_layout(const ClosedLoop& loop) {
  StateLayout L;
  L.N = loop.graph.n_nodes;
  L.M = loop.graph.n_edges();
  L.p = loop.p;
  int off = 0;
  L.x_offset = off;
  off += L.N * L.p;
  for (int i = 0; i < L.N; ++i) {
    L.xi_offset.push_back(off);
    L.xi_dim.push_back(loop.agents[i].state_dim);
    off += loop.agents[i].state_dim;
  }
  L.q_v = loop.reference.q;
  for (int i = 0; i < L.N; ++i) {
    if (loop.has_eta() && i > 0) {
      L.eta_offset.push_back(off);
      off += L.q_v;
    } else {
      L.eta_offset.push_back(-1);
    }
  }
  for (int i = 0; i < L.N; ++i) {
    if (loop.has_theta()) {
      L.theta_offset.push_back(off);
      L.theta_dim.push_back(loop.disturbances[i].q);
      off += loop.disturbances[i].q;
    } else {
      L.theta_offset.push_back(-1);
      L.theta_dim.push_back(0);
    }
  }
  for (int i = 0; i < L.N; ++i) {
    if (loop.has_observer()) {
      L.xihat_offset.push_back(off);
      off += loop.agents[i].state_dim;
    } else {
      L.xihat_offset.push_back(-1);
    }
  }
  L.total = off;
  return L;
}

}  // namespace

Eigen::MatrixXd ClosedLoop::effective_G_d(int i) const {
  if (G_d.size() > 0) return G_d;
  return disturbances[i].Gamma.transpose();
}

Eigen::VectorXd ClosedLoop::z_tilde_of(const Eigen::VectorXd& s) const {
  return apply_BT_kron(graph, p, s.segment(layout.x_offset, layout.N * layout.p)) - z_star;
}

void ClosedLoop::init_latches(const Eigen::VectorXd& s, HysteresisLatches& latches) const {
  if (sign_mode.variant != SignVariant::hysteresis || latches.initialized) return;
  latches.latch = strict_sign_vec(z_tilde_of(s));
  latches.initialized = true;
}

void ClosedLoop::update_latches(const Eigen::VectorXd& s, HysteresisLatches& latches) const {
  if (sign_mode.variant != SignVariant::hysteresis) return;
  sign_vec(z_tilde_of(s), sign_mode, &latches, true);
}

Eigen::VectorXd ClosedLoop::rhs(double t, const Eigen::VectorXd& s,
                                const HysteresisLatches& latches) const {
  const StateLayout& L = layout;
  if (s.size() != L.total)
    throw std::invalid_argument("closed loop: state has length " + std::to_string(s.size()) +
                                ", expected " + std::to_string(L.total));
  const Eigen::VectorXd zt = z_tilde_of(s);
  HysteresisLatches frozen = latches;  // stages never mutate switching state
  const Eigen::VectorXd u_hat = formation_control(graph, p, zt, sign_mode, &frozen, false);

  Eigen::VectorXd ds = Eigen::VectorXd::Zero(L.total);
  const Eigen::VectorXd vref = v_ref_of(t, s);

  for (int i = 0; i < L.N; ++i) {
    const AgentModel& model = agents[i];
    const auto xi_i = s.segment(L.xi_offset[i], L.xi_dim[i]);
    const Eigen::VectorXd y_i = model.h(xi_i);

    // Kinematic layer: x_i' = y_i + v_ref_i.
    ds.segment(L.x_offset + i * p, p) = y_i + vref.segment(i * p, p);

    // Commanded input u_i = u_hat_i - d_hat_i; the port sees u_i + d_i.
    Eigen::VectorXd u_i = u_hat.segment(i * p, p);
    Eigen::VectorXd port = u_i;
    if (has_theta()) {
      const auto theta_i = s.segment(L.theta_offset[i], L.theta_dim[i]);
      const Eigen::VectorXd d_hat = disturbances[i].Gamma * theta_i;
      u_i -= d_hat;
      port = u_i + exo_output(disturbances[i], t);
    }
    ds.segment(L.xi_offset[i], L.xi_dim[i]) = agent_rhs(model, xi_i, port);

    // Velocity internal model of the followers, driven by the agent's own
    // formation-control term.
    if (has_eta() && i > 0) {
      auto [deta, vr] = velocity_im_rhs(i, s.segment(L.eta_offset[i], L.q_v), reference.Phi,
                                        reference.Gamma, u_hat.segment(i * p, p));
      (void)vr;
      ds.segment(L.eta_offset[i], L.q_v) = deta;
    }

    // Disturbance internal model, coupled through u_check = y (measured
    // state) or y - xi_hat (observer path).
    if (has_theta()) {
      const auto theta_i = s.segment(L.theta_offset[i], L.theta_dim[i]);
      if (has_observer()) {
        const auto xihat_i = s.segment(L.xihat_offset[i], L.xi_dim[i]);
        const Eigen::VectorXd u_check = y_i - xihat_i;
        ds.segment(L.theta_offset[i], L.theta_dim[i]) =
            disturbances[i].Phi * theta_i + effective_G_d(i) * u_check;
        ds.segment(L.xihat_offset[i], L.xi_dim[i]) =
            observer_rhs(model, xihat_i, y_i, u_i, theta_i, H, disturbances[i].Gamma);
      } else {
        ds.segment(L.theta_offset[i], L.theta_dim[i]) =
            disturbance_im_rhs(theta_i, disturbances[i].Phi, disturbances[i].Gamma, y_i).first;
      }
    }
  }
  return ds;
}

Eigen::VectorXd ClosedLoop::command_u(const Eigen::VectorXd& s,
                                      const HysteresisLatches& latches) const {
  const StateLayout& L = layout;
  HysteresisLatches frozen = latches;
  Eigen::VectorXd u = formation_control(graph, p, z_tilde_of(s), sign_mode, &frozen, false);
  if (has_theta())
    for (int i = 0; i < L.N; ++i)
      u.segment(i * p, p) -=
          disturbances[i].Gamma * s.segment(L.theta_offset[i], L.theta_dim[i]);
  return u;
}

Eigen::VectorXd ClosedLoop::disturbance_of(double t) const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(layout.N * p);
  if (has_theta())
    for (int i = 0; i < layout.N; ++i) d.segment(i * p, p) = exo_output(disturbances[i], t);
  return d;
}

Eigen::VectorXd ClosedLoop::v_ref_of(double t, const Eigen::VectorXd& s) const {
  const StateLayout& L = layout;
  Eigen::VectorXd vref(L.N * p);
  const Eigen::VectorXd vstar = exo_output(reference, t);
  for (int i = 0; i < L.N; ++i) {
    if (has_eta() && i > 0)
      vref.segment(i * p, p) = reference.Gamma * s.segment(L.eta_offset[i], L.q_v);
    else
      vref.segment(i * p, p) = vstar;
  }
  return vref;
}

Eigen::VectorXd ClosedLoop::eta_tilde_of(double t, const Eigen::VectorXd& s) const {
  if (!has_eta()) return Eigen::VectorXd();
  const StateLayout& L = layout;
  const Eigen::VectorXd wv = exo_state(reference, t);
  Eigen::VectorXd out((L.N - 1) * L.q_v);
  for (int i = 1; i < L.N; ++i)
    out.segment((i - 1) * L.q_v, L.q_v) = s.segment(L.eta_offset[i], L.q_v) - wv;
  return out;
}

Eigen::VectorXd ClosedLoop::theta_tilde_of(double t, const Eigen::VectorXd& s) const {
  if (!has_theta()) return Eigen::VectorXd();
  const StateLayout& L = layout;
  int total = 0;
  for (int i = 0; i < L.N; ++i) total += L.theta_dim[i];
  Eigen::VectorXd out(total);
  int off = 0;
  for (int i = 0; i < L.N; ++i) {
    out.segment(off, L.theta_dim[i]) =
        s.segment(L.theta_offset[i], L.theta_dim[i]) - exo_state(disturbances[i], t);
    off += L.theta_dim[i];
  }
  return out;
}

Eigen::VectorXd ClosedLoop::xi_tilde_of(const Eigen::VectorXd& s) const {
  if (!has_observer()) return Eigen::VectorXd();
  const StateLayout& L = layout;
  int total = 0;
  for (int i = 0; i < L.N; ++i) total += L.xi_dim[i];
  Eigen::VectorXd out(total);
  int off = 0;
  for (int i = 0; i < L.N; ++i) {
    out.segment(off, L.xi_dim[i]) = agents[i].h(s.segment(L.xi_offset[i], L.xi_dim[i])) -
                                    s.segment(L.xihat_offset[i], L.xi_dim[i]);
    off += L.xi_dim[i];
  }
  return out;
}

ClosedLoop assemble_closed_loop(const Scenario& sc) {
  ClosedLoop loop;
  loop.mode = sc.mode;
  loop.sign_mode = sc.sign_mode;
  loop.graph = sc.graph;
  loop.p = sc.p;
  loop.z_star = sc.z_star;

  validate_graph(sc.graph);
  if (!is_connected(sc.graph))
    throw std::invalid_argument("closed loop: the interaction graph must be connected");
  if (sc.p < 1) throw std::invalid_argument("closed loop: workspace dimension must be at least 1");

  FormationSpec formation{sc.p, sc.z_star};
  const ConsistencyResult consistency = check_formation_consistency(sc.graph, formation);
  if (!consistency.consistent)
    throw std::invalid_argument(
        "closed loop: the target formation is not realizable (cycle sums do not close; "
        "least-squares residual " +
        std::to_string(consistency.residual) + ")");

  const int N = sc.graph.n_nodes;
  if (static_cast<int>(sc.agents.size()) != N)
    throw std::invalid_argument("closed loop: need one agent declaration per node");
  for (const AgentDecl& decl : sc.agents) loop.agents.push_back(build_agent(decl, sc.p));

  loop.reference = build_exosystem(sc.reference, sc.p);
  if (loop.reference.p != sc.p)
    throw std::invalid_argument(
        "closed loop: the reference generator output dimension must match the workspace dimension");
  const bool needs_constant_ref = sc.mode == ControllerMode::KnownVelocity ||
                                  sc.mode == ControllerMode::KnownVelHarmonicDist;
  if (needs_constant_ref && sc.reference.kind != "constant")
    throw std::invalid_argument(
        "closed loop: this mode assumes a constant reference velocity known to every agent");
  if (loop.has_eta() && !is_observable(loop.reference.Gamma, loop.reference.Phi))
    throw std::invalid_argument(
        "closed loop: the reference generator must be observable from its output map");

  if (loop.has_theta()) {
    if (static_cast<int>(sc.disturbances.size()) != N)
      throw std::invalid_argument(
          "closed loop: this mode needs one disturbance generator per agent");
    for (int i = 0; i < N; ++i) {
      ExosystemSpec d = build_exosystem(sc.disturbances[i], sc.p);
      if (d.p != sc.p)
        throw std::invalid_argument("closed loop: disturbance generator " + std::to_string(i + 1) +
                                    " output dimension must match the workspace dimension");
      if (!is_observable(d.Gamma, d.Phi))
        throw std::invalid_argument("closed loop: disturbance generator " + std::to_string(i + 1) +
                                    " must be observable from its output map");
      loop.disturbances.push_back(std::move(d));
    }
  }

  if (sc.mode == ControllerMode::KnownVelHarmonicDist && !is_tree(sc.graph))
    throw std::invalid_argument(
        "closed loop: harmonic disturbance rejection with a known reference requires an acyclic "
        "(tree) interaction graph");

  if (loop.has_observer()) {
    for (int i = 0; i < N; ++i) {
      const AgentModel& m = loop.agents[i];
      if (!m.constant_g || !m.output_is_state)
        throw std::invalid_argument(
            "closed loop: the observer path requires agents with a constant input map and the "
            "passive output equal to the state");
      if (!m.dissipation_dominates_state)
        throw std::invalid_argument(
            "closed loop: the observer path requires each agent's dissipation to dominate the "
            "squared state norm (for the linear agent, damping gain at least the input gain)");
    }
    if (sc.observer.H.size() == 0)
      throw std::invalid_argument("closed loop: the observer path requires a gain H");
    if (sc.observer.H.rows() != sc.p || sc.observer.H.cols() != sc.p)
      throw std::invalid_argument("closed loop: observer gain H must be " + std::to_string(sc.p) +
                                  " x " + std::to_string(sc.p));
    loop.H = sc.observer.H;
    loop.G_d = sc.observer.G_d;
    if (loop.G_d.size() > 0)
      for (int i = 0; i < N; ++i)
        if (loop.G_d.rows() != loop.disturbances[i].q || loop.G_d.cols() != sc.p)
          throw std::invalid_argument(
              "closed loop: observer injection gain G_d must be q x p for every agent's "
              "disturbance generator");

    loop.gamma = 1.0;
    for (int i = 0; i < N; ++i) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(loop.disturbances[i].Gamma);
      const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
      loop.gamma = std::max(loop.gamma, smax * smax);
    }
    for (int i = 0; i < N; ++i)
      loop.certificates.push_back(solve_observer_certificate(
          loop.H, loop.effective_G_d(i), loop.disturbances[i].Phi,
          loop.agents[i].g(Eigen::VectorXd::Zero(loop.agents[i].state_dim)),
          loop.disturbances[i].Gamma, loop.gamma));
  }

  loop.layout = build_layout(loop);
  return loop;
}

}  // namespace formsim
