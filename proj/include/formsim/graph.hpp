#pragma once

// Oriented-graph incidence algebra. The incidence matrix B is N x M with one
// +1 (edge head) and one -1 (edge tail) per column; the stacked relative
// position along edge k is z_k = x_head(k) - x_tail(k), i.e. z = (B^T (x) I_p) x.
// The Kronecker-structured operators are applied edge-wise, never materialized.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace formsim {

struct Edge {
  int head = 0;  // node index with the +1 entry, 0-based
  int tail = 0;  // node index with the -1 entry, 0-based
};

struct Graph {
  int n_nodes = 0;
  std::vector<Edge> edges;

  int n_edges() const { return static_cast<int>(edges.size()); }
};

// Throws std::invalid_argument on self-loops or out-of-range node indices.
void validate_graph(const Graph& g);

// Builds a Graph from 1-based (head, tail) pairs as they appear in scenario
// files. Validates.
Graph make_graph(int n_nodes, const std::vector<std::pair<int, int>>& edges_one_based);

// Dense N x M incidence matrix with entries in {-1, 0, +1}.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> build_incidence(const Graph& g) {
  validate_graph(g);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> B =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.n_nodes, g.n_edges());
  for (int k = 0; k < g.n_edges(); ++k) {
    B(g.edges[k].head, k) = Scalar(1);
    B(g.edges[k].tail, k) = Scalar(-1);
  }
  return B;
}

bool is_connected(const Graph& g);

// True iff the connected graph has no cycles (M = N - 1, equivalently B^T B
// nonsingular). Throws std::invalid_argument for disconnected graphs.
bool is_tree(const Graph& g);

// z = (B^T (x) I_p) x, computed edge-wise: z_k = x_head(k) - x_tail(k).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_BT_kron(
    const Graph& g, int p, const Eigen::MatrixBase<Derived>& x) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  if (x.size() != static_cast<Eigen::Index>(g.n_nodes) * p)
    throw std::invalid_argument("apply_BT_kron: x has length " + std::to_string(x.size()) +
                                ", expected N*p = " + std::to_string(g.n_nodes * p));
  Vec z(static_cast<Eigen::Index>(g.n_edges()) * p);
  for (int k = 0; k < g.n_edges(); ++k)
    z.segment(k * p, p) = x.segment(g.edges[k].head * p, p) - x.segment(g.edges[k].tail * p, p);
  return z;
}

// (B (x) I_p) w, computed by scatter-add over edges.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_B_kron(
    const Graph& g, int p, const Eigen::MatrixBase<Derived>& w) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  if (w.size() != static_cast<Eigen::Index>(g.n_edges()) * p)
    throw std::invalid_argument("apply_B_kron: w has length " + std::to_string(w.size()) +
                                ", expected M*p = " + std::to_string(g.n_edges() * p));
  Vec out = Vec::Zero(static_cast<Eigen::Index>(g.n_nodes) * p);
  for (int k = 0; k < g.n_edges(); ++k) {
    out.segment(g.edges[k].head * p, p) += w.segment(k * p, p);
    out.segment(g.edges[k].tail * p, p) -= w.segment(k * p, p);
  }
  return out;
}

// Desired relative positions z_k^* for each edge, stacked edge-major (M*p).
struct FormationSpec {
  int p = 0;
  Eigen::VectorXd z_star;  // length M*p

  Eigen::VectorXd z_k(int k) const { return z_star.segment(k * p, p); }
};

struct ConsistencyResult {
  bool consistent = false;
  Eigen::VectorXd witness_x;  // least-squares x* with (B^T (x) I_p) x* = z*
  double residual = 0.0;
};

// A formation is realizable iff z* lies in range(B^T (x) I_p): cycle sums must
// close. Residual tolerance 1e-9 * (1 + ||z*||).
ConsistencyResult check_formation_consistency(const Graph& g, const FormationSpec& spec);

}  // namespace formsim
