#pragma once

// Signal generators for reference velocities and matched disturbances:
// autonomous linear systems w' = Phi w, output Gamma w, with skew-symmetric
// Phi. Solutions are evaluated in closed form (constant channels and 2x2
// rotation blocks) so long-horizon runs carry no generator drift; a dense
// matrix-exponential fallback covers skew Phi without recognized block
// structure.

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace formsim {

// One diagonal block of Phi: size 1 with omega == 0 (constant channel) or
// size 2 with omega != 0 (rotation [[0, omega], [-omega, 0]]).
struct ExoBlock {
  int offset = 0;
  int size = 1;
  double omega = 0.0;
};

struct ExosystemSpec {
  int q = 0;  // state dimension
  int p = 0;  // output dimension
  Eigen::MatrixXd Phi;    // q x q, skew-symmetric
  Eigen::MatrixXd Gamma;  // p x q output map
  Eigen::VectorXd w0;     // initial generator state
  std::vector<ExoBlock> blocks;  // empty: dense expm fallback

  bool has_block_form() const { return !blocks.empty(); }
};

// Phi = 0, Gamma = I_p, w0 = value: emits the constant signal `value`.
ExosystemSpec make_constant(int p, const Eigen::VectorXd& value);

// Phi = block-diag of [[0, w_l], [-w_l, 0]], Gamma = block-diag of the given
// 1x2 rows; all frequencies and all rows must be nonzero (otherwise the pair
// would not be observable). w0 has length 2 * frequencies.size().
ExosystemSpec make_harmonic(const std::vector<double>& frequencies,
                            const std::vector<Eigen::RowVector2d>& gain_rows,
                            const Eigen::VectorXd& w0);

// Block-diagonal concatenation of constant channels (omega 0 -> 1x1 zero
// block) and rotation blocks (omega != 0 -> 2x2), with a caller-supplied
// dense output map. Used for mixed constant-plus-harmonic signals.
ExosystemSpec make_mixed(const std::vector<double>& channel_omegas,
                         const Eigen::MatrixXd& Gamma,
                         const Eigen::VectorXd& w0);

// General constructor: validates skew-symmetry (tol 1e-12) and dimensions,
// leaves the block list empty so evaluation uses the dense expm fallback.
ExosystemSpec make_exosystem(const Eigen::MatrixXd& Phi,
                             const Eigen::MatrixXd& Gamma,
                             const Eigen::VectorXd& w0);

// Generator state w(t) = e^{Phi t} w0 and output Gamma w(t).
Eigen::VectorXd exo_state(const ExosystemSpec& spec, double t);
Eigen::VectorXd exo_output(const ExosystemSpec& spec, double t);
std::pair<Eigen::VectorXd, Eigen::VectorXd> exo_solution(const ExosystemSpec& spec, double t);

// Rank of [Gamma; Gamma Phi; ...; Gamma Phi^{q-1}] equals q, rank taken from
// singular values with relative tolerance 1e-10.
bool is_observable(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Phi);

// Dense matrix exponential by scaling and squaring with a Pade core,
// accurate to ~1e-10 relative for the moderate norms used here.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

}  // namespace formsim
