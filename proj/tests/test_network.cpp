#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "grand/network.hpp"

using namespace grand;

namespace {

Graph path3() { return Graph(3, {{1, 2}, {2, 3}}); }
Graph triangle() { return Graph(3, {{1, 2}, {1, 3}, {2, 3}}); }

}  // namespace

TEST_SUITE("network") {

TEST_CASE("construction normalizes and validates edges") {
  Graph g(3, {{2, 1}, {3, 2}, {1, 2}});  // reversed + duplicate
  CHECK(g.edge_count() == 2);
  CHECK(g.edges()[0] == Edge{1, 2});
  CHECK(g.edges()[1] == Edge{2, 3});
  CHECK(g.adjacent(1, 2));
  CHECK(g.adjacent(2, 1));
  CHECK_FALSE(g.adjacent(1, 3));

  CHECK_THROWS_AS(Graph(3, {{1, 1}, {1, 2}, {2, 3}}), std::invalid_argument);  // self loop
  CHECK_THROWS_AS(Graph(3, {{1, 4}, {1, 2}, {2, 3}}), std::invalid_argument);  // out of range
  CHECK_THROWS_AS(Graph(4, {{1, 2}, {3, 4}}), disconnected_graph_error);
}

TEST_CASE("degrees and neighbor lists") {
  Graph g = path3();
  CHECK(g.degree(1) == 1);
  CHECK(g.degree(2) == 2);
  CHECK(g.max_degree() == 2);
  CHECK(g.neighbors(2) == std::vector<int>{1, 3});
}

TEST_CASE("erdos renyi draws are deterministic, connected and can retry") {
  Graph a = generate_erdos_renyi(10, 0.7, 7);
  Graph b = generate_erdos_renyi(10, 0.7, 7);
  CHECK(a.edges() == b.edges());
  // low p makes disconnected draws likely, so this walks the retry path
  Graph c = generate_erdos_renyi(12, 0.18, 3);
  CHECK(c.node_count() == 12);
  for (int v = 1; v <= 12; ++v) CHECK(c.degree(v) >= 1);
}

TEST_CASE("edge list round trip") {
  Graph g = generate_erdos_renyi(8, 0.5, 11);
  std::string text = to_edge_list(g);
  Graph back = parse_edge_list(text);
  CHECK(back.node_count() == g.node_count());
  CHECK(back.edges() == g.edges());

  auto path = std::filesystem::temp_directory_path() / "grand_edges_test.txt";
  save_edge_list(g, path.string());
  Graph loaded = load_edge_list(path.string());
  CHECK(loaded.edges() == g.edges());
  std::filesystem::remove(path);

  CHECK_THROWS(parse_edge_list("not a graph"));
  CHECK_THROWS(load_edge_list("/nonexistent/grand_edges.txt"));
}

TEST_CASE("consensus matrix on the 3-path matches the degree formula") {
  ConsensusMatrix zm = build_consensus_matrix(path3());
  Eigen::MatrixXd expected(3, 3);
  double w = 1.0 / 3.0;  // 1/(deg_max + 1)
  expected << 1 - w, w, 0,
              w, 1 - 2 * w, w,
              0, w, 1 - w;
  CHECK((zm.Z - expected).cwiseAbs().maxCoeff() < 1e-15);
  // eigenvalues of this Z are {1, 2/3, 0}
  CHECK(zm.gamma == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("consensus matrix rows sum to one and stay symmetric") {
  Graph g = generate_erdos_renyi(9, 0.5, 5);
  ConsensusMatrix zm = build_consensus_matrix(g);
  CHECK((zm.Z - zm.Z.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::VectorXd rows = zm.Z.rowwise().sum();
  CHECK((rows.array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(zm.gamma < 1.0);
  CHECK(zm.gamma > 0.0);
  // sparsity follows the graph
  for (int i = 1; i <= 9; ++i)
    for (int j = i + 1; j <= 9; ++j)
      CHECK((zm.Z(i - 1, j - 1) != 0.0) == g.adjacent(i, j));
}

TEST_CASE("weight matrix kernel is exactly the consensus subspace") {
  ConsensusMatrix zm = build_consensus_matrix(path3());
  const int d = 2;
  Eigen::MatrixXd W = build_weight_matrix(zm, d);
  CHECK(W.rows() == 6);
  CHECK((W - W.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  // consensus directions vanish
  for (int r = 0; r < d; ++r) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
    for (int i = 0; i < 3; ++i) v(i * d + r) = 1.0;
    CHECK((W * v).norm() < 1e-14);
  }
  // smallest nonzero singular value of I - Z is 1 - 2/3
  CHECK(smallest_nonzero_singular_value(W) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);  // PSD
}

TEST_CASE("incidence matrix orientation and Laplacian identity") {
  IncidenceMatrix inc = build_incidence(triangle());
  Eigen::MatrixXd expected(3, 3);
  // columns in lexicographic edge order {1,2}, {1,3}, {2,3}
  expected << 1, 1, 0,
              -1, 0, 1,
              0, -1, -1;
  CHECK((inc.E - expected).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(inc.edge_order.size() == 3);
  CHECK(inc.edge_order[0] == Edge{1, 2});

  // E E' = Laplacian = D - A
  Eigen::MatrixXd lap = inc.E * inc.E.transpose();
  Eigen::MatrixXd expected_lap(3, 3);
  expected_lap << 2, -1, -1,
                  -1, 2, -1,
                  -1, -1, 2;
  CHECK((lap - expected_lap).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inc.E.colwise().sum().array() == 0.0).all());
}

TEST_CASE("smallest nonzero singular value skips the null space") {
  Eigen::MatrixXd M(2, 3);
  M << 1, 0, 0,
       0, 0, 0;  // rank 1
  CHECK(smallest_nonzero_singular_value(M) == doctest::Approx(1.0));
  IncidenceMatrix inc = build_incidence(path3());
  // path Laplacian eigenvalues {0, 1, 3}; sigma+_min(E) = 1
  CHECK(smallest_nonzero_singular_value(inc.E) == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
