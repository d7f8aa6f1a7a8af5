#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "grand/minimax_oracle.hpp"
#include "grand/newton_local.hpp"
#include "grand/objectives.hpp"

using namespace grand;

namespace {

// quadratic saddle with a dense exact solution to compare against
struct QuadSaddle {
  MinimaxOraclePtr L;
  Eigen::MatrixXd Hx, Hy, W, K;  // K = [Hx W'; W -Hy]
  Eigen::VectorXd cx, cy, zstar, z0;
};

QuadSaddle quad_saddle() {
  QuadSaddle q;
  q.Hx.resize(3, 3);
  q.Hx << 4, 1, 0,
          1, 3, 1,
          0, 1, 5;
  q.Hy.resize(2, 2);
  q.Hy << 2.0, 0.5,
          0.5, 1.5;
  q.W.resize(2, 3);
  q.W << 1.0, -2.0, 0.5,
         0.3, 0.8, -1.2;
  q.cx.resize(3);
  q.cx << 1.0, -2.0, 0.5;
  q.cy.resize(2);
  q.cy << -1.0, 0.7;
  auto f = std::make_shared<QuadraticOracle>(q.Hx, q.cx);
  auto g = std::make_shared<QuadraticOracle>(q.Hy, q.cy);
  q.L = structured_lagrangian(make_structured_minimax(f, g, q.W));

  q.K.setZero(5, 5);
  q.K.topLeftCorner(3, 3) = q.Hx;
  q.K.topRightCorner(3, 2) = q.W.transpose();
  q.K.bottomLeftCorner(2, 3) = q.W;
  q.K.bottomRightCorner(2, 2) = -q.Hy;
  Eigen::VectorXd rhs(5);
  rhs.head(3) = -q.cx;
  rhs.tail(2) = q.cy;
  q.zstar = q.K.fullPivLu().solve(rhs);

  q.z0.resize(5);
  q.z0 << 1.0, -0.5, 2.0, 0.3, -1.2;
  return q;
}

}  // namespace

TEST_SUITE("newton_local") {

TEST_CASE("x-side map zeroes the primal gradient") {
  QuadSaddle q = quad_saddle();
  auto [x1, y1] = map_X(*q.L, q.z0.head(3), q.z0.tail(2));
  CHECK(q.L->grad_x(x1, y1).norm() < 1e-12);
  CHECK((y1 - q.z0.tail(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("y-side map matches the dense dual-curvature solve") {
  QuadSaddle q = quad_saddle();
  Eigen::VectorXd x = q.z0.head(3), y = q.z0.tail(2);
  auto [x1, y1] = map_Y(*q.L, x, y);
  Eigen::MatrixXd N = q.W * q.Hx.ldlt().solve(q.W.transpose()) + q.Hy;
  Eigen::VectorXd expected = y + N.fullPivLu().solve(q.L->grad_y(x, y));
  CHECK((y1 - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((x1 - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the alternating round lands the dual on its optimum") {
  QuadSaddle q = quad_saddle();
  auto [x1, y1] = alt_nda_step(*q.L, q.z0.head(3), q.z0.tail(2));
  CHECK((y1 - q.zstar.tail(2)).cwiseAbs().maxCoeff() < 1e-10);
  // one more round fixes the primal too
  auto [x2, y2] = alt_nda_step(*q.L, x1, y1);
  CHECK(q.L->grad_x(x2, y2).norm() < 1e-10);
  CHECK(q.L->grad_y(x2, y2).norm() < 1e-10);
}

TEST_CASE("multistep refinement reaches the saddle in one call") {
  QuadSaddle q = quad_saddle();
  for (int J : {1, 3}) {
    auto [x1, y1] = multistep_uj(*q.L, q.z0.head(3), q.z0.tail(2), J);
    CHECK((x1 - q.zstar.head(3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((y1 - q.zstar.tail(2)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(multistep_uj(*q.L, q.z0.head(3), q.z0.tail(2), 0), std::invalid_argument);
}

TEST_CASE("schur factorization solves the full second-order system") {
  QuadSaddle q = quad_saddle();
  SchurFactorization::reset_constructed_count();
  SchurFactorization fac(*q.L, q.z0.head(3), q.z0.tail(2));
  CHECK(SchurFactorization::constructed_count() == 1);

  Eigen::VectorXd g(5);
  g << 0.7, -1.1, 0.2, 1.5, -0.4;
  auto [dx, dy] = fac.solve(g.head(3), g.tail(2));
  Eigen::VectorXd dense = q.K.fullPivLu().solve(g);
  CHECK((dx - dense.head(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dy - dense.tail(2)).cwiseAbs().maxCoeff() < 1e-12);
  // solving twice reuses the stored factors
  fac.solve(g.head(3), g.tail(2));
  CHECK(SchurFactorization::constructed_count() == 1);
}

TEST_CASE("lambda operator stacks both gradient blocks") {
  QuadSaddle q = quad_saddle();
  Eigen::VectorXd lam = lambda_op(*q.L, q.z0);
  CHECK((lam.head(3) - q.L->grad_x(q.z0.head(3), q.z0.tail(2))).cwiseAbs().maxCoeff() == 0.0);
  CHECK((lam.tail(2) - q.L->grad_y(q.z0.head(3), q.z0.tail(2))).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lambda_op(*q.L, q.zstar).norm() < 1e-12);
}

TEST_CASE("full newton solves quadratic saddles in one step") {
  QuadSaddle q = quad_saddle();
  Eigen::VectorXd z1 = full_newton_step(*q.L, q.z0);
  CHECK((z1 - q.zstar).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the cubic corrector reuses a single factorization") {
  QuadSaddle q = quad_saddle();
  SchurFactorization::reset_constructed_count();
  Eigen::VectorXd z1 = cubic_step(*q.L, q.z0);
  CHECK(SchurFactorization::constructed_count() == 1);
  CHECK((z1 - q.zstar).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((z1 - full_newton_step(*q.L, q.z0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("optimistic update follows the two-point formula") {
  QuadSaddle q = quad_saddle();
  Eigen::VectorXd zp(5);
  zp << -0.2, 0.9, 0.1, -0.7, 0.4;
  auto gvec = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd out(5);
    out.head(3) = q.L->grad_x(z.head(3), z.tail(2));
    out.tail(2) = -q.L->grad_y(z.head(3), z.tail(2));
    return out;
  };
  Eigen::VectorXd expected = q.z0 - 0.2 * gvec(q.z0) + 0.1 * gvec(zp);
  Eigen::VectorXd got = ogda_step(*q.L, q.z0, zp, 0.1);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("run_local records the distance column and stops on it") {
  QuadSaddle q = quad_saddle();
  LocalRunOptions opts;
  opts.max_iters = 10;
  opts.rel_tol = 1e-6;
  opts.reference = q.zstar;
  RunTrace tr = run_local(*q.L, LocalMethod::FullNewton, q.z0.head(3), q.z0.tail(2), opts);
  CHECK(tr.converged);
  CHECK(tr.iterations() == 1);
  REQUIRE(tr.extra_names.size() == 1);
  CHECK(tr.extra_names[0] == "err");
  CHECK(tr.extra_cols[0].front() == doctest::Approx((q.z0 - q.zstar).norm()).epsilon(1e-14));
  CHECK(tr.extra_cols[0].back() < 1e-9);

  LocalRunOptions gopts;
  gopts.max_iters = 10;
  gopts.grad_tol = 1e-10;
  RunTrace tg = run_local(*q.L, LocalMethod::FullNewton, q.z0.head(3), q.z0.tail(2), gopts);
  CHECK(tg.converged);
  CHECK(tg.iterations() == 1);
  CHECK(tg.extra_names.empty());
}

TEST_CASE("run_local flags divergence and honors the iteration cap") {
  QuadSaddle q = quad_saddle();
  LocalRunOptions wild;
  wild.max_iters = 200;
  wild.eta = 1e3;
  RunTrace tw = run_local(*q.L, LocalMethod::Ogda, q.z0.head(3), q.z0.tail(2), wild);
  CHECK(tw.diverged);
  CHECK_FALSE(tw.converged);

  LocalRunOptions capped;
  capped.max_iters = 3;
  capped.eta = 1e-4;
  RunTrace tc = run_local(*q.L, LocalMethod::Ogda, q.z0.head(3), q.z0.tail(2), capped);
  CHECK_FALSE(tc.converged);
  CHECK(tc.iterations() == 3);
  CHECK(tc.rows.size() == 4);
}

TEST_CASE("rate order separates linear from quadratic decay") {
  std::vector<double> linear;
  for (int k = 0; k < 20; ++k) linear.push_back(std::pow(0.5, k));
  auto lo = rate_order(linear);
  REQUIRE(lo.has_value());
  CHECK(*lo == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> quadratic;
  for (int k = 0; k < 6; ++k) quadratic.push_back(std::pow(0.5, std::pow(2.0, k)));
  auto qo = rate_order(quadratic);
  REQUIRE(qo.has_value());
  CHECK(*qo == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rate order refuses unresolvable sequences") {
  CHECK_FALSE(rate_order({1.0, 0.5, 0.25}).has_value());
  CHECK_FALSE(rate_order({1.0, 2.0, 4.0, 8.0, 16.0}).has_value());
  CHECK_FALSE(rate_order({1.0, 1.0, 1.0, 1.0, 1.0}).has_value());
  // entries at the floor truncate the usable prefix
  CHECK_FALSE(rate_order({0.5, 0.25, 1e-20, 0.125, 0.0625, 0.03125}).has_value());
}

}  // TEST_SUITE
