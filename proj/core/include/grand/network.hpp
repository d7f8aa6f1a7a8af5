#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace grand {

// Undirected edge between 1-based nodes, stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  friend bool operator==(const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }
  friend bool operator<(const Edge& a, const Edge& b) {
    return a.i < b.i || (a.i == b.i && a.j < b.j);
  }
};

class disconnected_graph_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simple connected undirected graph on nodes 1..n. Edges are deduplicated
// and kept in lexicographic order; construction rejects self-loops,
// out-of-range endpoints and disconnected topologies.
class Graph {
 public:
  Graph(int n, std::vector<Edge> edges);

  int node_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  int degree(int node) const { return static_cast<int>(adjacency_[check(node)].size()); }
  int max_degree() const { return max_degree_; }
  // sorted neighbor list, 1-based
  const std::vector<int>& neighbors(int node) const { return adjacency_[check(node)]; }
  bool adjacent(int a, int b) const;

 private:
  int check(int node) const;

  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;  // index 0 unused
  int max_degree_ = 0;
};

// Samples G(n, p) edge by edge in lexicographic pair order from a dedicated
// generator; a disconnected draw is retried with seed+1, up to 1000 attempts.
Graph generate_erdos_renyi(int n, double p, std::uint64_t seed);

// Text round trip: first line "n m", then one "i j" line per edge in
// lexicographic order.
std::string to_edge_list(const Graph& g);
Graph parse_edge_list(const std::string& text);
Graph load_edge_list(const std::string& path);
void save_edge_list(const Graph& g, const std::string& path);

// Symmetric doubly-stochastic mixing matrix built from degrees:
// Z_ij = 1/(deg_max + 1) on edges, Z_ii = 1 - deg(i)/(deg_max + 1).
// gamma is the second-largest eigenvalue magnitude; gamma < 1 iff connected.
struct ConsensusMatrix {
  Eigen::MatrixXd Z;
  double gamma = 0.0;
};

ConsensusMatrix build_consensus_matrix(const Graph& g);

// (I_n - Z) Kronecker I_d; positive semidefinite with kernel spanned by
// consensus directions 1_n (x) e_r.
Eigen::MatrixXd build_weight_matrix(const ConsensusMatrix& zm, int block_dim);

// Oriented node-edge incidence: column for edge {i,j} (i<j) has +1 at i and
// -1 at j. Columns follow the graph's edge order.
struct IncidenceMatrix {
  Eigen::MatrixXd E;
  std::vector<Edge> edge_order;
};

IncidenceMatrix build_incidence(const Graph& g);

// Smallest nonzero singular value; values below tol count as zero.
double smallest_nonzero_singular_value(const Eigen::MatrixXd& M, double tol = 1e-10);

}  // namespace grand
