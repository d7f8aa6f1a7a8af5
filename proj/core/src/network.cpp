#include "grand/network.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "grand/rng.hpp"

namespace grand {

namespace {

bool connected(int n, const std::vector<std::vector<int>>& adjacency) {
  if (n <= 0) return false;
  std::vector<char> seen(static_cast<size_t>(n) + 1, 0);
  std::vector<int> stack{1};
  seen[1] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  return visited == n;
}

}  // namespace

Graph::Graph(int n, std::vector<Edge> edges) : n_(n) {
  if (n < 2) throw std::invalid_argument("Graph: need at least 2 nodes");
  for (auto& e : edges) {
    if (e.i == e.j) throw std::invalid_argument("Graph: self-loop");
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i < 1 || e.j > n) throw std::invalid_argument("Graph: endpoint out of range");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adjacency_.assign(static_cast<size_t>(n_) + 1, {});
  for (const auto& e : edges_) {
    adjacency_[e.i].push_back(e.j);
    adjacency_[e.j].push_back(e.i);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  for (int v = 1; v <= n_; ++v) max_degree_ = std::max(max_degree_, degree(v));

  if (!connected(n_, adjacency_)) throw disconnected_graph_error("Graph: not connected");
}

int Graph::check(int node) const {
  if (node < 1 || node > n_) throw std::out_of_range("Graph: node out of range");
  return node;
}

bool Graph::adjacent(int a, int b) const {
  const auto& nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), check(b));
}

Graph generate_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_erdos_renyi: n must be >= 2");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("generate_erdos_renyi: p must be in (0, 1]");
  if (p == 0.0) throw disconnected_graph_error("generate_erdos_renyi: p = 0 cannot produce a connected graph");

  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(seed + static_cast<std::uint64_t>(attempt));
    std::vector<Edge> edges;
    for (int i = 1; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j)
        if (rng.uniform() < p) edges.push_back({i, j});
    try {
      return Graph(n, std::move(edges));
    } catch (const disconnected_graph_error&) {
      // resample with the next seed
    }
  }
  throw disconnected_graph_error("generate_erdos_renyi: no connected draw in 1000 attempts");
}

std::string to_edge_list(const Graph& g) {
  std::ostringstream out;
  out << g.node_count() << ' ' << g.edge_count() << '\n';
  for (const auto& e : g.edges()) out << e.i << ' ' << e.j << '\n';
  return out.str();
}

Graph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  int n = 0, m = 0;
  if (!(in >> n >> m)) throw std::invalid_argument("parse_edge_list: malformed header");
  std::vector<Edge> edges;
  edges.reserve(static_cast<size_t>(std::max(m, 0)));
  for (int k = 0; k < m; ++k) {
    Edge e;
    if (!(in >> e.i >> e.j)) throw std::invalid_argument("parse_edge_list: truncated edge list");
    edges.push_back(e);
  }
  return Graph(n, std::move(edges));
}

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_edge_list: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str());
}

void save_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_edge_list: cannot open " + path);
  out << to_edge_list(g);
}

ConsensusMatrix build_consensus_matrix(const Graph& g) {
  const int n = g.node_count();
  const double w = 1.0 / (g.max_degree() + 1.0);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    Z(e.i - 1, e.j - 1) = w;
    Z(e.j - 1, e.i - 1) = w;
  }
  for (int v = 1; v <= n; ++v) Z(v - 1, v - 1) = 1.0 - g.degree(v) * w;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z);
  if (es.info() != Eigen::Success) throw std::runtime_error("build_consensus_matrix: eigensolver failed");
  const auto& ev = es.eigenvalues();  // ascending
  double gamma = std::max(std::abs(ev(0)), std::abs(ev(n - 2)));
  return {std::move(Z), gamma};
}

Eigen::MatrixXd build_weight_matrix(const ConsensusMatrix& zm, int block_dim) {
  if (block_dim < 1) throw std::invalid_argument("build_weight_matrix: block_dim must be >= 1");
  const int n = static_cast<int>(zm.Z.rows());
  Eigen::MatrixXd base = Eigen::MatrixXd::Identity(n, n) - zm.Z;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n * block_dim, n * block_dim);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (base(r, c) != 0.0)
        W.block(r * block_dim, c * block_dim, block_dim, block_dim) =
            base(r, c) * Eigen::MatrixXd::Identity(block_dim, block_dim);
  return W;
}

IncidenceMatrix build_incidence(const Graph& g) {
  const int n = g.node_count();
  const int m = g.edge_count();
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, m);
  for (int c = 0; c < m; ++c) {
    const Edge& e = g.edges()[static_cast<size_t>(c)];
    E(e.i - 1, c) = 1.0;
    E(e.j - 1, c) = -1.0;
  }
  return {std::move(E), g.edges()};
}

double smallest_nonzero_singular_value(const Eigen::MatrixXd& M, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  double best = -1.0;
  for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
    double s = svd.singularValues()(k);
    if (s > tol && (best < 0.0 || s < best)) best = s;
  }
  if (best < 0.0) throw std::runtime_error("smallest_nonzero_singular_value: matrix is numerically zero");
  return best;
}

}  // namespace grand
