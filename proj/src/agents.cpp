#include "formsim/agents.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace formsim {

namespace {

std::string vec_str(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "(" << v.transpose() << ")";
  return os.str();
}

// Deterministic probe set: signed coordinate axes plus fixed pseudo-random
// directions, each at several radii.
std::vector<Eigen::VectorXd> shell_samples(int dim) {
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937 rng(12345u);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd d(dim);
    for (int i = 0; i < dim; ++i) d(i) = gauss(rng);
    if (d.norm() > 1e-12) dirs.push_back(d / d.norm());
  }
  std::vector<Eigen::VectorXd> out;
  for (double r : {0.5, 1.0, 2.0})
    for (const auto& d : dirs) out.push_back(r * d);
  return out;
}

}  // namespace

Eigen::VectorXd agent_rhs(const AgentModel& model, const Eigen::VectorXd& xi,
                          const Eigen::VectorXd& u) {
  if (xi.size() != model.state_dim)
    throw std::invalid_argument("agent_rhs: state has length " + std::to_string(xi.size()) +
                                ", expected " + std::to_string(model.state_dim));
  if (u.size() != model.p)
    throw std::invalid_argument("agent_rhs: input has length " + std::to_string(u.size()) +
                                ", expected " + std::to_string(model.p));
  return model.f(xi) + model.g(xi) * u;
}

void validate_agent(const AgentModel& model) {
  if (model.state_dim < 1 || model.p < 1)
    throw std::invalid_argument("agent: state_dim and p must be at least 1");
  if (!model.f || !model.g || !model.h || !model.S || !model.W || !model.grad_S)
    throw std::invalid_argument("agent: all of f, g, h, S, W, grad_S must be provided");

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.state_dim);
  if (model.f(zero).norm() > 1e-12)
    throw std::invalid_argument("agent: f(0) must vanish, got " + vec_str(model.f(zero)));
  if (model.h(zero).norm() > 1e-12)
    throw std::invalid_argument("agent: h(0) must vanish, got " + vec_str(model.h(zero)));
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(model.g(zero));
    const Eigen::VectorXd& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-10 * sv(0)) ++rank;
    if (rank != model.p)
      throw std::invalid_argument("agent: g(0) must have full column rank " +
                                  std::to_string(model.p) + ", sampled rank is " +
                                  std::to_string(rank));
  }
  if (std::abs(model.S(zero)) > 1e-12)
    throw std::invalid_argument("agent: S(0) must vanish, got " + std::to_string(model.S(zero)));
  if (std::abs(model.W(zero)) > 1e-12)
    throw std::invalid_argument("agent: W(0) must vanish, got " + std::to_string(model.W(zero)));

  const auto xis = shell_samples(model.state_dim);
  for (const auto& xi : xis) {
    if (model.S(xi) <= 0.0)
      throw std::invalid_argument("agent: storage must be positive away from the origin; S" +
                                  vec_str(xi) + " = " + std::to_string(model.S(xi)));
    if (model.W(xi) <= 0.0)
      throw std::invalid_argument("agent: dissipation must be positive away from the origin; W" +
                                  vec_str(xi) + " = " + std::to_string(model.W(xi)));
  }

  // Passivity inequality grad_S . (f + g u) <= -W + y'u on a sampled grid.
  std::vector<Eigen::VectorXd> us;
  us.push_back(Eigen::VectorXd::Zero(model.p));
  for (const auto& d : shell_samples(model.p)) us.push_back(d);
  std::vector<Eigen::VectorXd> probes = xis;
  probes.push_back(zero);
  for (const auto& xi : probes)
    for (const auto& u : us) {
      const double supply = model.h(xi).dot(u);
      const double decay = model.grad_S(xi).dot(model.f(xi) + model.g(xi) * u);
      const double violation = decay + model.W(xi) - supply;
      if (violation > 1e-9)
        throw std::invalid_argument("agent: passivity inequality violated by " +
                                    std::to_string(violation) + " at xi = " + vec_str(xi) +
                                    ", u = " + vec_str(u));
    }
}

AgentModel make_linear_passive_agent(int p, double a, double b) {
  if (p < 1) throw std::invalid_argument("linear agent: dimension must be at least 1");
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("linear agent: gains must be positive (a = " + std::to_string(a) +
                                ", b = " + std::to_string(b) + ")");
  AgentModel m;
  m.state_dim = p;
  m.p = p;
  m.f = [a](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return -a * xi; };
  m.g = [b, p](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return b * Eigen::MatrixXd::Identity(p, p);
  };
  m.h = [](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return xi; };
  m.S = [b](const Eigen::VectorXd& xi) { return xi.squaredNorm() / (2.0 * b); };
  m.W = [a, b](const Eigen::VectorXd& xi) { return (a / b) * xi.squaredNorm(); };
  m.grad_S = [b](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return xi / b; };
  m.constant_g = true;
  m.output_is_state = true;
  m.dissipation_dominates_state = (a / b >= 1.0);
  validate_agent(m);
  return m;
}

AuditReport passivity_audit(const AgentModel& model,
                            const std::vector<double>& t,
                            const std::vector<Eigen::VectorXd>& xi,
                            const std::vector<Eigen::VectorXd>& u,
                            const std::vector<Eigen::VectorXd>& y,
                            double curvature_constant) {
  const size_t n = t.size();
  if (n < 3) throw std::invalid_argument("passivity_audit: need at least 3 samples");
  if (xi.size() != n || u.size() != n || y.size() != n)
    throw std::invalid_argument("passivity_audit: sample arrays must have equal length");
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw std::invalid_argument("passivity_audit: time grid must increase");
  for (size_t k = 1; k < n; ++k)
    if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::invalid_argument("passivity_audit: time grid must be uniform");

  std::vector<double> S(n);
  for (size_t k = 0; k < n; ++k) S[k] = model.S(xi[k]);

  AuditReport report;
  report.tol = curvature_constant * dt * dt + 1e-8;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (size_t k = 1; k + 1 < n; ++k) {
    const double S_fd = (S[k + 1] - S[k - 1]) / (2.0 * dt);
    const double residual = S_fd + model.W(xi[k]) - y[k].dot(u[k]);
    if (residual > report.max_violation) {
      report.max_violation = residual;
      report.t_worst = t[k];
    }
  }
  report.pass = report.max_violation <= report.tol;
  return report;
}

}  // namespace formsim
