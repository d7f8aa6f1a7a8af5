#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "grand/audit.hpp"
#include "grand/harness.hpp"
#include "grand/objectives.hpp"
#include "grand/rng.hpp"

using namespace grand;

TEST_SUITE("objectives") {

TEST_CASE("quadratic oracle value, gradient, hessian") {
  Eigen::MatrixXd H(2, 2);
  H << 2, 1,
       1, 3;
  Eigen::VectorXd c(2);
  c << -1, 4;
  QuadraticOracle q(H, c, 5.0);
  Eigen::VectorXd x(2);
  x << 1, -2;
  // x'Hx/2 = (2 - 2 - 2 + 12)/2 = 5; c'x = -9
  CHECK(q.value(x) == doctest::Approx(1.0).epsilon(1e-15));
  Eigen::VectorXd g = q.gradient(x);
  CHECK(g(0) == doctest::Approx(-1.0));  // 2 - 2 - 1
  CHECK(g(1) == doctest::Approx(-1.0));  // 1 - 6 + 4
  CHECK((q.hessian(x) - H).cwiseAbs().maxCoeff() == 0.0);
  // declared curvature equals the eigenvalue range of H
  CHECK(q.strong_convexity() == doctest::Approx(2.5 - std::sqrt(1.25)).epsilon(1e-12));
  CHECK(q.smoothness() == doctest::Approx(2.5 + std::sqrt(1.25)).epsilon(1e-12));
}

TEST_CASE("quadratic agent sum reproduces the centralized ridge objective") {
  Rng rng(3);
  const int n_agents = 4, per = 6, d = 3;
  double lambda = 0.7;
  std::vector<Eigen::MatrixXd> thetas;
  std::vector<Eigen::VectorXd> vs;
  Eigen::MatrixXd full(n_agents * per, d);
  Eigen::VectorXd full_v(n_agents * per);
  for (int i = 0; i < n_agents; ++i) {
    Eigen::MatrixXd t(per, d);
    Eigen::VectorXd v(per);
    for (int r = 0; r < per; ++r) {
      for (int cidx = 0; cidx < d; ++cidx) t(r, cidx) = rng.normal();
      v(r) = rng.normal();
    }
    full.middleRows(i * per, per) = t;
    full_v.segment(i * per, per) = v;
    thetas.push_back(t);
    vs.push_back(v);
  }
  Eigen::VectorXd w(d);
  w << 0.5, -1.0, 2.0;
  double sum = 0.0;
  for (int i = 0; i < n_agents; ++i)
    sum += quadratic_agent(thetas[static_cast<size_t>(i)], vs[static_cast<size_t>(i)], lambda,
                           n_agents * per, n_agents)->value(w);
  double central = (full * w - full_v).squaredNorm() / (2.0 * n_agents * per) +
                   lambda * w.squaredNorm() / 2.0;
  CHECK(sum == doctest::Approx(central).epsilon(1e-12));
}

TEST_CASE("logistic oracle derivatives pass finite differences") {
  Rng rng(5);
  Eigen::MatrixXd theta(12, 3);
  Eigen::VectorXd v(12);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 3; ++c) theta(r, c) = rng.normal();
    v(r) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  LogisticOracle f(theta, v, 0.1, 12, 2);
  Rng probe(99);
  CHECK(fd_gradient_error(f, probe) < 1e-6);
  Rng probe2(100);
  CHECK(fd_hessian_error(f, probe2) < 1e-4);
  // hessian curvature stays inside the declared envelope at random points
  Rng pts(101);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd w(3);
    for (int i = 0; i < 3; ++i) w(i) = pts.normal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.hessian(w));
    CHECK(es.eigenvalues().minCoeff() >= f.strong_convexity() - 1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= f.smoothness() + 1e-12);
  }
}

TEST_CASE("edge cost is the squared affine loss") {
  auto f = edge_cost(2.0, 1.0);
  Eigen::VectorXd x(1);
  x << 1.0;
  CHECK(f->value(x) == doctest::Approx(0.5));          // (2 - 1)^2 / 2
  CHECK(f->gradient(x)(0) == doctest::Approx(2.0));    // 2 (2 - 1)
  CHECK(f->hessian(x)(0, 0) == doctest::Approx(4.0));  // h^2
  CHECK(f->strong_convexity() == doctest::Approx(4.0));
  CHECK(f->smoothness() == doctest::Approx(4.0));
  CHECK_THROWS(edge_cost(0.0, 1.0));
}

TEST_CASE("smoothed l1 behaves like |y| away from the origin") {
  SmoothedL1Oracle r(10.0, 3);
  Eigen::VectorXd y(3);
  y << 2.0, -3.0, 0.0;
  // each summand tends to |y_r| for large a|y_r|; at 0 it is 2 log(2) / a
  double expected = 2.0 + 3.0 + 2.0 * std::log(2.0) / 10.0;
  CHECK(r.value(y) == doctest::Approx(expected).epsilon(1e-8));
  Eigen::VectorXd g = r.gradient(y);
  CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-8));   // tanh(10) ~ 1
  CHECK(g(1) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(g(2) == doctest::Approx(0.0));
  Eigen::MatrixXd h = r.hessian(y);
  CHECK(h(2, 2) == doctest::Approx(5.0));  // a/2 at the origin
  CHECK(h(0, 1) == 0.0);                   // separable
  Rng probe(7);
  CHECK(fd_gradient_error(r, probe) < 1e-6);
  CHECK(r.smoothness() == doctest::Approx(5.0));
}

TEST_CASE("scale oracle multiplies everything") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  auto base = std::make_shared<QuadraticOracle>(H, Eigen::VectorXd::Ones(2), 1.0);
  auto scaled = scale_oracle(base, 3.0);
  Eigen::VectorXd x(2);
  x << 1, 2;
  CHECK(scaled->value(x) == doctest::Approx(3.0 * base->value(x)));
  CHECK((scaled->gradient(x) - 3.0 * base->gradient(x)).norm() == 0.0);
  CHECK((scaled->hessian(x) - 3.0 * base->hessian(x)).norm() == 0.0);
  CHECK(scaled->strong_convexity() == doctest::Approx(3.0));
  CHECK(scaled->smoothness() == doctest::Approx(3.0));
  CHECK_THROWS(scale_oracle(base, 0.0));
}

TEST_CASE("quadratic conjugate satisfies the Fenchel identity") {
  // for f(w) = w'Uw/2 + u'w, f*(s) = (s-u)'U^{-1}(s-u)/2 and
  // f(w) + f*(s) = s'w exactly at s = grad f(w)
  Eigen::MatrixXd U(2, 2);
  U << 3, 1,
       1, 2;
  Eigen::VectorXd u(2);
  u << -1, 0.5;
  QuadraticOracle f(U, u, 0.0);
  auto conj = quadratic_conjugate(U, u);
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd w(2);
    w << rng.normal(), rng.normal();
    Eigen::VectorXd s = f.gradient(w);
    CHECK(f.value(w) + conj->value(s) == doctest::Approx(s.dot(w)).epsilon(1e-12));
  }
  // conjugate curvature is the inverse spectrum
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U);
  CHECK(conj->smoothness() == doctest::Approx(1.0 / es.eigenvalues().minCoeff()).epsilon(1e-12));
  CHECK(conj->strong_convexity() ==
        doctest::Approx(1.0 / es.eigenvalues().maxCoeff()).epsilon(1e-12));
}

TEST_CASE("power four oracle matches hand values and finite differences") {
  Eigen::VectorXd b(2);
  b << 1.0, -2.0;
  PowerFourOracle f(b, 0.5);
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  // ||x||_4^2 = sqrt(1 + 1) = sqrt(2); eps term 0.5; b'x = -1
  CHECK(f.value(x) == doctest::Approx(std::sqrt(2.0) / 2.0 + 0.5 - 1.0).epsilon(1e-14));
  Rng probe(13);
  CHECK(fd_gradient_error(f, probe) < 1e-6);
  Rng probe2(14);
  CHECK(fd_hessian_error(f, probe2) < 1e-4);
  CHECK(f.strong_convexity() == doctest::Approx(0.5));
  CHECK(f.smoothness() == doctest::Approx(3.5));
}

TEST_CASE("consensus problem stacks agents blockwise") {
  ConsensusMatrix zm = build_consensus_matrix(Graph(2, {{1, 2}}));
  Eigen::MatrixXd H1 = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd H2 = 2.0 * Eigen::MatrixXd::Identity(1, 1);
  auto f1 = std::make_shared<QuadraticOracle>(H1, Eigen::VectorXd::Zero(1), 0.0);
  auto f2 = std::make_shared<QuadraticOracle>(H2, -Eigen::VectorXd::Ones(1), 0.0);
  ConsensusProblem prob = make_consensus_problem({f1, f2}, zm, 0.0);
  CHECK(prob.n_agents() == 2);
  CHECK(prob.agent_dim == 1);
  CHECK(prob.stacked_dim() == 2);
  CHECK(prob.m_dc == doctest::Approx(1.0));
  CHECK(prob.ell_dc == doctest::Approx(2.0));

  Eigen::VectorXd x(2);
  x << 3.0, -1.0;
  CHECK(prob.sum_values(x) == doctest::Approx(4.5 + (1.0 + 1.0)));
  Eigen::VectorXd g = prob.sum_gradients(x);
  CHECK(g(0) == doctest::Approx(3.0));
  CHECK(g(1) == doctest::Approx(-3.0));  // 2(-1) - 1
  Eigen::MatrixXd bh = prob.block_hessian(x);
  CHECK(bh(0, 0) == doctest::Approx(1.0));
  CHECK(bh(1, 1) == doctest::Approx(2.0));
  CHECK(bh(0, 1) == 0.0);
  // cached weight matrix is (I - Z) (x) I_d
  CHECK((prob.W - build_weight_matrix(zm, 1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(make_consensus_problem({f1, f2}, build_consensus_matrix(Graph(3, {{1, 2}, {2, 3}})), 0.0));
}

TEST_CASE("network flow problem caches curvature and incidence norms") {
  IncidenceMatrix inc = build_incidence(Graph(3, {{1, 2}, {1, 3}, {2, 3}}));
  std::vector<SmoothOraclePtr> costs = {edge_cost(1.0, 0.0), edge_cost(2.0, 0.0),
                                        edge_cost(3.0, 1.0)};
  Eigen::VectorXd pi = make_supply(Eigen::VectorXd::Ones(3));
  NetworkFlowProblem prob = make_network_flow_problem(costs, inc, pi);
  CHECK(prob.n_nodes() == 3);
  CHECK(prob.n_edges() == 3);
  CHECK(prob.m_nf == doctest::Approx(1.0));
  CHECK(prob.ell_nf == doctest::Approx(9.0));
  CHECK(prob.e_norm == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));  // K3 Laplacian max eig 3
  CHECK(pi.sum() == doctest::Approx(0.0));
  // supply must balance
  CHECK_THROWS(make_network_flow_problem(costs, inc, Eigen::VectorXd::Ones(3)));
}

TEST_CASE("feature dual agents encode the conjugate pair") {
  // one agent, trivial graph checks the H, c assembly:
  // g(x) = r*(-Theta'x) + phi*(x)/n with quadratic r, phi
  Eigen::MatrixXd theta(2, 1);
  theta << 1.0, 2.0;
  Eigen::MatrixXd U = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd u(2);
  u << 1.0, -1.0;
  Eigen::MatrixXd V = 3.0 * Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.5);
  ConsensusMatrix zm = build_consensus_matrix(Graph(2, {{1, 2}}));
  ConsensusProblem prob = feature_dual_build({theta, theta}, U, u, {V, V}, {v, v}, zm, 0.0);
  REQUIRE(prob.n_agents() == 2);
  // r*(w) = (w - v)'V^{-1}(w - v)/2 at w = -Theta'x, phi*(x)/n added
  Eigen::VectorXd x(2);
  x << 0.3, -0.2;
  double r_star = std::pow(-theta.col(0).dot(x) - 0.5, 2) / (2.0 * 3.0);
  double phi_star = (x - u).squaredNorm() / (2.0 * 2.0) / 2.0;
  CHECK(prob.agents[0]->value(x) == doctest::Approx(r_star + phi_star).epsilon(1e-12));
}

}  // TEST_SUITE
