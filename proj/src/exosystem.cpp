#include "formsim/exosystem.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>
#include <string>

namespace formsim {

namespace {

void check_skew(const Eigen::MatrixXd& Phi) {
  if (Phi.rows() != Phi.cols()) throw std::invalid_argument("exosystem: Phi must be square");
  const double defect = (Phi.transpose() + Phi).norm();
  if (defect > 1e-12)
    throw std::invalid_argument("exosystem: Phi must be skew-symmetric (defect " +
                                std::to_string(defect) + ")");
}

void check_common(const ExosystemSpec& spec) {
  if (spec.p <= 0 || spec.q < 0) throw std::invalid_argument("exosystem: bad dimensions");
  if (spec.Gamma.rows() != spec.p || spec.Gamma.cols() != spec.q)
    throw std::invalid_argument("exosystem: Gamma must be p x q");
  if (spec.w0.size() != spec.q)
    throw std::invalid_argument("exosystem: w0 must have length q = " + std::to_string(spec.q));
}

}  // namespace

ExosystemSpec make_constant(int p, const Eigen::VectorXd& value) {
  if (p < 1) throw std::invalid_argument("exosystem: output dimension must be at least 1");
  if (value.size() != p)
    throw std::invalid_argument("exosystem: constant value must have length p = " + std::to_string(p));
  ExosystemSpec spec;
  spec.q = p;
  spec.p = p;
  spec.Phi = Eigen::MatrixXd::Zero(p, p);
  spec.Gamma = Eigen::MatrixXd::Identity(p, p);
  spec.w0 = value;
  for (int i = 0; i < p; ++i) spec.blocks.push_back(ExoBlock{i, 1, 0.0});
  return spec;
}

ExosystemSpec make_harmonic(const std::vector<double>& frequencies,
                            const std::vector<Eigen::RowVector2d>& gain_rows,
                            const Eigen::VectorXd& w0) {
  const int n = static_cast<int>(frequencies.size());
  if (n == 0) throw std::invalid_argument("exosystem: harmonic spec needs at least one frequency");
  if (static_cast<int>(gain_rows.size()) != n)
    throw std::invalid_argument("exosystem: need one output row per frequency");
  if (w0.size() != 2 * n)
    throw std::invalid_argument("exosystem: harmonic w0 must have length " + std::to_string(2 * n));
  ExosystemSpec spec;
  spec.q = 2 * n;
  spec.p = n;
  spec.Phi = Eigen::MatrixXd::Zero(spec.q, spec.q);
  spec.Gamma = Eigen::MatrixXd::Zero(spec.p, spec.q);
  spec.w0 = w0;
  for (int l = 0; l < n; ++l) {
    if (frequencies[l] == 0.0)
      throw std::invalid_argument("exosystem: harmonic frequency " + std::to_string(l + 1) +
                                  " is zero; use a constant or mixed spec for constant channels");
    if (gain_rows[l].norm() == 0.0)
      throw std::invalid_argument("exosystem: output row " + std::to_string(l + 1) +
                                  " is zero, the harmonic pair would be unobservable");
    spec.Phi(2 * l, 2 * l + 1) = frequencies[l];
    spec.Phi(2 * l + 1, 2 * l) = -frequencies[l];
    spec.Gamma.block(l, 2 * l, 1, 2) = gain_rows[l];
    spec.blocks.push_back(ExoBlock{2 * l, 2, frequencies[l]});
  }
  return spec;
}

ExosystemSpec make_mixed(const std::vector<double>& channel_omegas,
                         const Eigen::MatrixXd& Gamma,
                         const Eigen::VectorXd& w0) {
  if (channel_omegas.empty()) throw std::invalid_argument("exosystem: mixed spec needs channels");
  ExosystemSpec spec;
  int q = 0;
  for (double omega : channel_omegas) {
    const int size = omega == 0.0 ? 1 : 2;
    spec.blocks.push_back(ExoBlock{q, size, omega});
    q += size;
  }
  spec.q = q;
  spec.p = static_cast<int>(Gamma.rows());
  spec.Phi = Eigen::MatrixXd::Zero(q, q);
  for (const ExoBlock& b : spec.blocks)
    if (b.size == 2) {
      spec.Phi(b.offset, b.offset + 1) = b.omega;
      spec.Phi(b.offset + 1, b.offset) = -b.omega;
    }
  spec.Gamma = Gamma;
  spec.w0 = w0;
  check_common(spec);
  return spec;
}

ExosystemSpec make_exosystem(const Eigen::MatrixXd& Phi,
                             const Eigen::MatrixXd& Gamma,
                             const Eigen::VectorXd& w0) {
  check_skew(Phi);
  ExosystemSpec spec;
  spec.q = static_cast<int>(Phi.rows());
  spec.p = static_cast<int>(Gamma.rows());
  spec.Phi = Phi;
  spec.Gamma = Gamma;
  spec.w0 = w0;
  check_common(spec);
  return spec;
}

Eigen::VectorXd exo_state(const ExosystemSpec& spec, double t) {
  if (spec.q == 0) return Eigen::VectorXd();
  if (spec.has_block_form()) {
    Eigen::VectorXd w = spec.w0;
    for (const ExoBlock& b : spec.blocks)
      if (b.size == 2) {
        const double c = std::cos(b.omega * t), s = std::sin(b.omega * t);
        const double w1 = spec.w0(b.offset), w2 = spec.w0(b.offset + 1);
        w(b.offset) = c * w1 + s * w2;
        w(b.offset + 1) = -s * w1 + c * w2;
      }
    return w;
  }
  return expm(spec.Phi * t) * spec.w0;
}

Eigen::VectorXd exo_output(const ExosystemSpec& spec, double t) {
  return spec.Gamma * exo_state(spec, t);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> exo_solution(const ExosystemSpec& spec, double t) {
  Eigen::VectorXd w = exo_state(spec, t);
  return {w, spec.Gamma * w};
}

bool is_observable(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Phi) {
  if (Phi.rows() != Phi.cols() || Gamma.cols() != Phi.rows())
    throw std::invalid_argument("is_observable: Gamma must be p x q and Phi q x q");
  const int q = static_cast<int>(Phi.rows());
  const int p = static_cast<int>(Gamma.rows());
  if (q == 0) return true;
  Eigen::MatrixXd obs(p * q, q);
  Eigen::MatrixXd block = Gamma;
  for (int k = 0; k < q; ++k) {
    obs.block(k * p, 0, p, q) = block;
    block = block * Phi;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(obs);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return false;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  return rank == q;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("expm: matrix must be square");
  return A.exp();
}

}  // namespace formsim
