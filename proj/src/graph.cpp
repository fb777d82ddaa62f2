#include "formsim/graph.hpp"

#include <Eigen/QR>

#include <queue>

namespace formsim {

void validate_graph(const Graph& g) {
  if (g.n_nodes <= 0) throw std::invalid_argument("graph: n_nodes must be positive");
  for (int k = 0; k < g.n_edges(); ++k) {
    const Edge& e = g.edges[k];
    if (e.head < 0 || e.head >= g.n_nodes || e.tail < 0 || e.tail >= g.n_nodes)
      throw std::invalid_argument("graph: edge " + std::to_string(k + 1) +
                                  " references a node outside [1, " + std::to_string(g.n_nodes) + "]");
    if (e.head == e.tail)
      throw std::invalid_argument("graph: edge " + std::to_string(k + 1) + " is a self-loop");
  }
}

Graph make_graph(int n_nodes, const std::vector<std::pair<int, int>>& edges_one_based) {
  Graph g;
  g.n_nodes = n_nodes;
  g.edges.reserve(edges_one_based.size());
  for (const auto& [head, tail] : edges_one_based) g.edges.push_back(Edge{head - 1, tail - 1});
  validate_graph(g);
  return g;
}

bool is_connected(const Graph& g) {
  validate_graph(g);
  if (g.n_nodes == 1) return true;
  std::vector<std::vector<int>> adj(g.n_nodes);
  for (const Edge& e : g.edges) {
    adj[e.head].push_back(e.tail);
    adj[e.tail].push_back(e.head);
  }
  std::vector<char> seen(g.n_nodes, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        q.push(w);
      }
  }
  return reached == g.n_nodes;
}

bool is_tree(const Graph& g) {
  if (!is_connected(g))
    throw std::invalid_argument("is_tree: graph is disconnected; the property is defined for connected graphs");
  return g.n_edges() == g.n_nodes - 1;
}

ConsistencyResult check_formation_consistency(const Graph& g, const FormationSpec& spec) {
  validate_graph(g);
  if (spec.p <= 0) throw std::invalid_argument("formation: p must be positive");
  if (spec.z_star.size() != static_cast<Eigen::Index>(g.n_edges()) * spec.p)
    throw std::invalid_argument("formation: z_star has length " + std::to_string(spec.z_star.size()) +
                                ", expected M*p = " + std::to_string(g.n_edges() * spec.p));
  // Solve (B^T (x) I_p) x = z* in the least-squares sense on the dense matrix;
  // sizes here are configuration-scale (N*p), not simulation-scale.
  const int Np = g.n_nodes * spec.p;
  const int Mp = g.n_edges() * spec.p;
  Eigen::MatrixXd BTk = Eigen::MatrixXd::Zero(Mp, Np);
  for (int k = 0; k < g.n_edges(); ++k)
    for (int l = 0; l < spec.p; ++l) {
      BTk(k * spec.p + l, g.edges[k].head * spec.p + l) = 1.0;
      BTk(k * spec.p + l, g.edges[k].tail * spec.p + l) = -1.0;
    }
  ConsistencyResult r;
  r.witness_x = BTk.colPivHouseholderQr().solve(spec.z_star);
  r.residual = (BTk * r.witness_x - spec.z_star).norm();
  r.consistent = r.residual <= 1e-9 * (1.0 + spec.z_star.norm());
  return r;
}

}  // namespace formsim
