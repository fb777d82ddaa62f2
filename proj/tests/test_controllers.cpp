#include <doctest.h>

#include "formsim/controllers.hpp"
#include "formsim/scenario.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace formsim;

namespace {

Scenario two_agent_scalar_scenario() {
  Scenario s;
  s.name = "pair";
  s.graph = make_graph(2, {{2, 1}});
  s.p = 1;
  s.z_star = Eigen::VectorXd::Ones(1);
  s.agents.assign(2, AgentDecl{});
  s.mode = ControllerMode::LeaderFollower;
  s.sign_mode.variant = SignVariant::strict;
  s.reference.kind = "constant";
  s.reference.value = Eigen::VectorXd::Constant(1, 0.5);
  s.x0 = Eigen::Vector2d(0.0, 0.7);
  return s;
}

Scenario pentagon_scenario(ControllerMode mode) {
  const double r3 = std::sqrt(3.0);
  Scenario s;
  s.name = "pentagon";
  s.graph = make_graph(5, {{2, 1}, {3, 2}, {4, 2}, {4, 3}, {5, 3}, {5, 4}});
  s.p = 2;
  s.z_star.resize(12);
  s.z_star << 0, 2, 1, r3, 2, 0, 1, -r3, 1, -2 - r3, 0, -2;
  s.agents.assign(5, AgentDecl{});
  s.mode = mode;
  s.reference.kind = "constant";
  s.reference.value = Eigen::Vector2d(1, 1);
  s.x0.resize(10);
  s.x0 << 0.5, -0.5, 0.5, 1, 1, 0.5, 0.8, 0, 1.1, 0;
  return s;
}

}  // namespace

TEST_CASE("sign variants: strict literal, smooth ramp, hysteresis latching") {
  Eigen::Vector3d z(0.0, -0.3, 2.0);
  const Eigen::VectorXd s = strict_sign_vec(z);
  CHECK(s(0) == 1.0);
  CHECK(s(1) == -1.0);
  CHECK(s(2) == 1.0);

  SignMode smooth{SignVariant::smooth, 0.1};
  Eigen::VectorXd in(1);
  in << 0.05;
  CHECK(sign_vec(in, smooth)(0) == doctest::Approx(0.5).epsilon(1e-12));
  in << 0.25;
  CHECK(sign_vec(in, smooth)(0) == 1.0);
  in << -0.25;
  CHECK(sign_vec(in, smooth)(0) == -1.0);

  SignMode hyst{SignVariant::hysteresis, 0.1};
  HysteresisLatches latches;
  in << 0.05;  // first touch: latch takes the strict sign of the input
  CHECK(sign_vec(in, hyst, &latches)(0) == 1.0);
  in << -0.05;  // inside the band: the latch holds
  CHECK(sign_vec(in, hyst, &latches)(0) == 1.0);
  in << -0.15;  // crosses the band: flips
  CHECK(sign_vec(in, hyst, &latches)(0) == -1.0);
  in << 0.05;  // back inside: holds the new latch
  CHECK(sign_vec(in, hyst, &latches)(0) == -1.0);

  // frozen evaluation does not move the latch
  in << 0.15;
  CHECK(sign_vec(in, hyst, &latches, false)(0) == -1.0);
  CHECK(sign_vec(in, hyst, &latches, true)(0) == 1.0);

  CHECK_THROWS_AS((void)sign_vec(in, SignMode{SignVariant::smooth, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)sign_vec(in, hyst, nullptr), std::invalid_argument);
}

TEST_CASE("smooth sign converges pointwise to the strict sign as the band shrinks") {
  Eigen::Vector3d z(0.4, -1e-3, 2.0);
  for (double eps : {1e-1, 1e-2, 1e-4, 1e-8}) {
    const Eigen::VectorXd out = sign_vec(z, SignMode{SignVariant::smooth, eps});
    if (eps < 1e-3) CHECK((out - strict_sign_vec(z)).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("formation control is the negated incidence scatter of the edge signs") {
  const Graph g = make_graph(3, {{2, 1}, {3, 2}});
  const int p = 1;
  Eigen::Vector2d z(0.5, -0.2);
  const Eigen::VectorXd u = formation_control(g, p, z, SignMode{SignVariant::strict, 0});
  // signs (+1, -1); u = -B s with B columns (+1 at head, -1 at tail)
  CHECK(u(0) == 1.0);    // tail of edge 1: +s_1
  CHECK(u(1) == -2.0);   // head of edge 1, tail of edge 2: -s_1 + s_2 = -1 - 1
  CHECK(u(2) == 1.0);    // head of edge 2: -s_2
}

TEST_CASE("strict-mode control is scale and orientation invariant") {
  const Graph g = make_graph(5, {{2, 1}, {3, 2}, {4, 2}, {4, 3}, {5, 3}, {5, 4}});
  std::mt19937 rng(23);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd z(12);
  for (Eigen::Index i = 0; i < 12; ++i) z(i) = gauss(rng);
  const SignMode strict{SignVariant::strict, 0};

  const Eigen::VectorXd u = formation_control(g, 2, z, strict);
  for (double alpha : {0.5, 3.0, 1e6}) {
    CHECK((formation_control(g, 2, alpha * z, strict) - u).lpNorm<Eigen::Infinity>() == 0.0);
  }

  // reversing an edge's orientation flips its z component and its incidence
  // column; the commanded input is unchanged
  Graph flipped = g;
  std::swap(flipped.edges[2].head, flipped.edges[2].tail);
  Eigen::VectorXd z_flipped = z;
  z_flipped.segment(4, 2) = -z.segment(4, 2);
  CHECK((formation_control(flipped, 2, z_flipped, strict) - u).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("velocity internal model: leader exclusion and error-energy identity") {
  Eigen::MatrixXd Phi(2, 2);
  Phi << 0, 1, -1, 0;
  Eigen::MatrixXd Gamma(1, 2);
  Gamma << 1, 0;

  CHECK_THROWS_WITH_AS((void)velocity_im_rhs(0, Eigen::Vector2d(0, 0), Phi, Gamma,
                                             Eigen::VectorXd::Zero(1)),
                       doctest::Contains("leading agent"), std::invalid_argument);

  std::mt19937 rng(3);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Vector2d eta(gauss(rng), gauss(rng)), w(gauss(rng), gauss(rng));
    Eigen::VectorXd ut(1);
    ut << gauss(rng);
    const auto [eta_dot, v_ref] = velocity_im_rhs(1, eta, Phi, Gamma, ut);
    // d/dt (1/2)||eta - w||^2 = (eta - w)'(eta_dot - Phi w) = u~' Gamma (eta - w)
    const double lhs = (eta - w).dot(eta_dot - Phi * w);
    const double rhs = ut.dot(Gamma * (eta - w));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
    CHECK((v_ref - Gamma * eta).lpNorm<Eigen::Infinity>() <= 1e-15);
  }
}

TEST_CASE("disturbance internal model literal") {
  Eigen::MatrixXd Phi(2, 2);
  Phi << 0, 1, -1, 0;
  Eigen::MatrixXd Gamma(1, 2);
  Gamma << 1, 0;
  Eigen::Vector2d theta(0.2, -0.4);
  Eigen::VectorXd uc(1);
  uc << 0.3;
  const auto [theta_dot, d_hat] = disturbance_im_rhs(theta, Phi, Gamma, uc);
  CHECK((theta_dot - Eigen::Vector2d(-0.1, -0.2)).lpNorm<Eigen::Infinity>() <= 1e-15);
  CHECK(d_hat(0) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("observer right-hand side literal") {
  const AgentModel m = make_linear_passive_agent(1, 2.0, 1.0);
  Eigen::VectorXd xi_hat(1), y(1), u(1), theta(1);
  Eigen::MatrixXd H(1, 1), Gamma_d(1, 1);
  xi_hat << 0.5;
  y << 1.0;
  u << -1.0;
  theta << 0.3;
  H << 4.0;
  Gamma_d << 2.0;
  // f(y) + g (u + Gamma_d theta) + H (y - xi_hat) = -2 + (-0.4) + 2 = -0.4
  const Eigen::VectorXd out = observer_rhs(m, xi_hat, y, u, theta, H, Gamma_d);
  CHECK(out(0) == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("observer certificate: frozen scalar oracle P = [[2,1],[1,3]]") {
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const ObserverCertificate cert =
      solve_observer_certificate(one, one, Eigen::MatrixXd::Zero(1, 1), one, one, 1.0);
  Eigen::MatrixXd expect(2, 2);
  expect << 2, 1, 1, 3;
  CHECK((cert.P - expect).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK(cert.residual <= 1e-8);
  CHECK(cert.min_eig > 0.0);
  CHECK(cert.gamma == 1.0);
}

TEST_CASE("observer certificate: stability gate") {
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  for (double k : {0.5, 2.0}) {
    CHECK_NOTHROW((void)solve_observer_certificate(k * one, one, Eigen::MatrixXd::Zero(1, 1),
                                                   one, one, 1.0));
  }
  CHECK_THROWS_WITH_AS((void)solve_observer_certificate(-1.0 * one, one,
                                                        Eigen::MatrixXd::Zero(1, 1), one, one,
                                                        1.0),
                       doctest::Contains("not exponentially stable"), std::invalid_argument);
}

TEST_CASE("observer certificate for the bundled mixed-disturbance gains") {
  Eigen::MatrixXd Gamma(2, 6);
  Gamma << 0.5, 0.5, 0.5, 0, 0, 0,
           0, 0, 0, 0.5, -0.5, 0.5;
  const ExosystemSpec dist = make_mixed({0.0, 2.0, 0.0, 2.0}, Gamma,
                                        0.1 * Eigen::VectorXd::Ones(6));
  const Eigen::MatrixXd H = 50.0 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd g = 10.0 * Eigen::MatrixXd::Identity(2, 2);
  // gamma derived from the output map: max(1, sigma_max^2) = max(1, 0.75) = 1
  const ObserverCertificate cert =
      solve_observer_certificate(H, Gamma.transpose(), dist.Phi, g, Gamma, -1.0);
  CHECK(cert.gamma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.residual <= 1e-8);
  CHECK(cert.min_eig == doctest::Approx(0.02006).epsilon(1e-2));
  CHECK((cert.P - cert.P.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);

  // the certified matrix is only barely stable: slowest eigenvalue near -0.05
  Eigen::MatrixXd A(8, 8);
  A.setZero();
  A.topLeftCorner(2, 2) = -H;
  A.topRightCorner(2, 6) = -g * Gamma;
  A.bottomLeftCorner(6, 2) = Gamma.transpose();
  A.bottomRightCorner(6, 6) = dist.Phi;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(A);
  CHECK(eig.eigenvalues().real().maxCoeff() == doctest::Approx(-0.05009).epsilon(1e-2));
}

TEST_CASE("controller mode and sign variant names round-trip") {
  for (ControllerMode m :
       {ControllerMode::KnownVelocity, ControllerMode::LeaderFollower,
        ControllerMode::LeaderFollowerConstDist, ControllerMode::KnownVelHarmonicDist,
        ControllerMode::ObserverBased}) {
    CHECK(controller_mode_from_string(to_string(m)) == m);
  }
  for (SignVariant v : {SignVariant::strict, SignVariant::hysteresis, SignVariant::smooth}) {
    CHECK(sign_variant_from_string(to_string(v)) == v);
  }
  CHECK_THROWS_AS((void)controller_mode_from_string("nonsense"), std::invalid_argument);
  CHECK_THROWS_AS((void)sign_variant_from_string("nonsense"), std::invalid_argument);
}

TEST_CASE("leader-follower pair: the full vector field matches a hand assembly") {
  const Scenario sc = two_agent_scalar_scenario();
  const ClosedLoop loop = assemble_closed_loop(sc);
  CHECK(loop.layout.total == 5);  // x(2), xi(2), eta(1)

  Eigen::VectorXd s(5);
  s << 0.0, 0.7, 0.2, -0.1, 0.3;  // x, xi, eta_2
  HysteresisLatches latches;
  const Eigen::VectorXd f = loop.rhs(0.0, s, latches);

  // z~ = (0.7 - 0) - 1 = -0.3, strict sign -1, u_hat = (-1, +1):
  //   x1' = xi_1 + v* = 0.7          (the leading agent knows the reference)
  //   x2' = xi_2 + eta_2 = 0.2       (the follower uses its estimate)
  //   xi_1' = -xi_1 + u_1 = -1.2
  //   xi_2' = -xi_2 + u_2 = 1.1
  //   eta_2' = u_hat_2 = 1
  Eigen::VectorXd expect(5);
  expect << 0.7, 0.2, -1.2, 1.1, 1.0;
  CHECK((f - expect).lpNorm<Eigen::Infinity>() <= 1e-12);

  // derived-coordinate accessors
  CHECK(loop.z_tilde_of(s)(0) == doctest::Approx(-0.3).epsilon(1e-14));
  CHECK(loop.eta_tilde_of(0.0, s)(0) == doctest::Approx(0.3 - 0.5).epsilon(1e-14));
  CHECK(loop.theta_tilde_of(0.0, s).size() == 0);
  CHECK(loop.xi_tilde_of(s).size() == 0);
  CHECK(loop.command_u(s, latches)(0) == doctest::Approx(-1.0));
  CHECK(loop.command_u(s, latches)(1) == doctest::Approx(1.0));
}

TEST_CASE("known-velocity mode at the target formation") {
  Scenario sc = pentagon_scenario(ControllerMode::KnownVelocity);
  // start exactly on the reference pentagon so z~ = 0
  sc.x0.resize(10);
  sc.x0 << 0, 0, 0, 2, 1, 2 + std::sqrt(3.0), 2, 2, 2, 0;

  SUBCASE("smooth variant: zero error gives zero command, pure drift at v*") {
    sc.sign_mode = SignMode{SignVariant::smooth, 1e-2};
    const ClosedLoop loop = assemble_closed_loop(sc);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(loop.layout.total);
    s.head(10) = sc.x0;
    HysteresisLatches latches;
    const Eigen::VectorXd f = loop.rhs(0.0, s, latches);
    for (int i = 0; i < 5; ++i) {
      CHECK(f(2 * i) == doctest::Approx(1.0));      // x_i' = v*
      CHECK(f(2 * i + 1) == doctest::Approx(1.0));
    }
    CHECK(f.segment(10, 10).lpNorm<Eigen::Infinity>() == 0.0);  // xi' = 0
  }

  SUBCASE("strict variant: sign(0) = +1 drives xi but leaves z~ stationary") {
    sc.sign_mode = SignMode{SignVariant::strict, 0};
    const ClosedLoop loop = assemble_closed_loop(sc);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(loop.layout.total);
    s.head(10) = sc.x0;
    HysteresisLatches latches;
    const Eigen::VectorXd f = loop.rhs(0.0, s, latches);
    // z~' = (B' kron I) x' = (B' kron I)(1 kron v*) = 0
    CHECK(apply_BT_kron(loop.graph, 2, Eigen::VectorXd(f.head(10)))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
    // xi' = b u_hat = -(B kron I) 1
    const Eigen::VectorXd expected_xidot =
        -apply_B_kron(loop.graph, 2, Eigen::VectorXd::Ones(12));
    CHECK((f.segment(10, 10) - expected_xidot).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("assembly enforces the structural hypotheses by role") {
  SUBCASE("harmonic rejection with a known reference needs a tree") {
    Scenario sc = pentagon_scenario(ControllerMode::KnownVelHarmonicDist);
    for (int i = 0; i < 5; ++i) {
      ExoDecl d;
      d.kind = "harmonic";
      d.frequencies = {1.0, 1.0};
      d.gain_rows = {Eigen::RowVector2d(0.5, 0.5), Eigen::RowVector2d(-0.5, 0.5)};
      d.w0 = 0.1 * Eigen::VectorXd::Ones(4);
      sc.disturbances.push_back(d);
    }
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("tree"),
                         std::invalid_argument);
  }

  SUBCASE("unrealizable formations are refused") {
    Scenario sc = pentagon_scenario(ControllerMode::KnownVelocity);
    sc.z_star(2) += 0.1;  // edge 1 is a bridge; edge 2 sits in a cycle
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("realizable"),
                         std::invalid_argument);
  }

  SUBCASE("the known-velocity modes insist on a constant reference") {
    Scenario sc = pentagon_scenario(ControllerMode::KnownVelocity);
    sc.reference.kind = "harmonic";
    sc.reference.frequencies = {1.0, 1.0};
    sc.reference.gain_rows = {Eigen::RowVector2d(1, 0), Eigen::RowVector2d(0, 1)};
    sc.reference.w0 = Eigen::VectorXd::Ones(4);
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("constant"),
                         std::invalid_argument);
  }

  SUBCASE("disconnected graphs are refused") {
    Scenario sc = two_agent_scalar_scenario();
    sc.graph.edges.clear();
    sc.z_star.resize(0);
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("connected"),
                         std::invalid_argument);
  }

  SUBCASE("the observer path needs its gain and dominant dissipation") {
    Scenario sc = pentagon_scenario(ControllerMode::ObserverBased);
    ExoDecl d;
    d.kind = "constant";
    d.value = Eigen::Vector2d(1, 0);
    sc.disturbances.assign(5, d);
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("gain H"),
                         std::invalid_argument);

    sc.observer.H = 50.0 * Eigen::MatrixXd::Identity(2, 2);
    sc.agents.assign(5, AgentDecl{"linear_passive", 0.5, 1.0});  // a/b < 1
    CHECK_THROWS_WITH_AS((void)assemble_closed_loop(sc), doctest::Contains("dissipation"),
                         std::invalid_argument);
  }
}

TEST_CASE("user-supplied observer injection gain overrides the default") {
  Scenario sc = pentagon_scenario(ControllerMode::ObserverBased);
  sc.agents.assign(5, AgentDecl{"linear_passive", 30.0, 10.0});
  ExoDecl d;
  d.kind = "constant";
  d.value = Eigen::Vector2d(1, 0);
  sc.disturbances.assign(5, d);
  sc.observer.H = 50.0 * Eigen::MatrixXd::Identity(2, 2);

  const ClosedLoop def = assemble_closed_loop(sc);
  CHECK((def.effective_G_d(0) - def.disturbances[0].Gamma.transpose())
            .lpNorm<Eigen::Infinity>() == 0.0);

  sc.observer.G_d = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  const ClosedLoop user = assemble_closed_loop(sc);
  CHECK((user.effective_G_d(0) - 0.5 * Eigen::MatrixXd::Identity(2, 2))
            .lpNorm<Eigen::Infinity>() == 0.0);
}
