#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "grand/dish.hpp"
#include "grand/engine.hpp"
#include "grand/harness.hpp"
#include "grand/minimax_oracle.hpp"
#include "grand/network.hpp"
#include "grand/objectives.hpp"
#include "grand/rng.hpp"

using namespace grand;

namespace {

// two agents on one edge: f1 = x^2/2, f2 = x^2; Z is the 2x2 averaging matrix
ConsensusProblem two_agent_line(double mu) {
  Eigen::MatrixXd h1(1, 1), h2(1, 1);
  h1 << 1.0;
  h2 << 2.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(1);
  std::vector<SmoothOraclePtr> agents{std::make_shared<QuadraticOracle>(h1, c),
                                      std::make_shared<QuadraticOracle>(h2, c)};
  Graph g(2, {{1, 2}});
  return make_consensus_problem(std::move(agents), build_consensus_matrix(g), mu);
}

DishState two_agent_state() {
  Eigen::VectorXd x(2), y(2);
  x << 2.0, -1.0;
  y << 0.5, -0.5;
  DishState st = DishState::from_stacked(x, y, 2, 1);
  return st;
}

}  // namespace

TEST_SUITE("dish") {

TEST_CASE("schedule streams are deterministic and deep-copied") {
  AgentSchedule a = AgentSchedule::switch_uniform(11);
  AgentSchedule b = AgentSchedule::switch_uniform(11);
  std::vector<UpdateMode> seq;
  for (long k = 0; k < 300; ++k) {
    UpdateMode ma = a.advance(k);
    CHECK(ma == b.advance(k));
    seq.push_back(ma);
  }
  // a copy taken mid-stream keeps its own generator state
  AgentSchedule c = AgentSchedule::switch_uniform(11);
  for (long k = 0; k < 100; ++k) c.advance(k);
  AgentSchedule d(c);
  for (long k = 100; k < 300; ++k) {
    CHECK(c.advance(k) == seq[static_cast<size_t>(k)]);
    CHECK(d.advance(k) == seq[static_cast<size_t>(k)]);
  }
}

TEST_CASE("initial mode is a fair coin from the schedule's own stream") {
  for (std::uint64_t seed : {1, 2, 3, 7, 42, 99}) {
    Rng mirror(seed);
    UpdateMode expected = mirror.uniform() < 0.5 ? UpdateMode::Gradient : UpdateMode::Newton;
    CHECK(AgentSchedule::switch_uniform(seed).current() == expected);
    Rng mirror2(seed);
    UpdateMode expected2 = mirror2.uniform() < 0.5 ? UpdateMode::Gradient : UpdateMode::Newton;
    CHECK(AgentSchedule::switch_lognormal(seed).current() == expected2);
  }
}

TEST_CASE("rounds must advance one at a time") {
  AgentSchedule s = AgentSchedule::switch_uniform(5);
  s.advance(0);
  CHECK_THROWS_AS(s.advance(2), std::logic_error);
  AgentSchedule t = AgentSchedule::always_gradient();
  CHECK_THROWS_AS(t.advance(1), std::logic_error);
}

TEST_CASE("uniform switching dwells inside the declared bounds") {
  AgentSchedule s = AgentSchedule::switch_uniform(13, 5, 50);
  UpdateMode prev = s.current();
  long last_flip = 0;
  int flips = 0;
  for (long k = 0; k < 3000; ++k) {
    UpdateMode m = s.advance(k);
    if (m != prev) {
      long gap = k - last_flip;
      if (flips > 0) {
        CHECK(gap >= 5);
        CHECK(gap <= 50);
      } else {
        // first dwell is measured from round zero
        CHECK(k >= 5);
        CHECK(k <= 50);
      }
      last_flip = k;
      prev = m;
      ++flips;
    }
  }
  CHECK(flips > 20);
}

TEST_CASE("lognormal holding times include the offset") {
  AgentSchedule s = AgentSchedule::switch_lognormal(21, 2.0, 2.0, 30);
  UpdateMode prev = s.current();
  long last_flip = 0;
  int flips = 0;
  for (long k = 0; k < 5000; ++k) {
    UpdateMode m = s.advance(k);
    if (m != prev) {
      CHECK(k - last_flip >= 30);
      last_flip = k;
      prev = m;
      ++flips;
    }
  }
  CHECK(flips >= 2);
}

TEST_CASE("first-newton split pins the leading agents") {
  auto scheds = schedules_first_newton(5, 2);
  REQUIRE(scheds.size() == 5);
  for (long k = 0; k < 10; ++k)
    for (int i = 0; i < 5; ++i)
      CHECK(scheds[static_cast<size_t>(i)].advance(k) ==
            (i < 2 ? UpdateMode::Newton : UpdateMode::Gradient));
  CHECK_THROWS_AS(schedules_first_newton(3, 4), std::invalid_argument);
}

TEST_CASE("scaling choice inverts the shifted local curvature") {
  Eigen::MatrixXd H(2, 2);
  H << 2, 1,
       1, 3;
  QuadraticOracle f(H, Eigen::VectorXd::Zero(2));
  Eigen::VectorXd x = Eigen::VectorXd::Ones(2);

  auto [pg, qg] = scaling_choice(UpdateMode::Gradient, f, x, 0.7);
  CHECK((pg - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((qg - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

  auto [pn, qn] = scaling_choice(UpdateMode::Newton, f, x, 0.7);
  Eigen::MatrixXd shifted = H + 0.7 * Eigen::MatrixXd::Identity(2, 2);
  CHECK((qn - shifted).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pn * shifted - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((pn - pn.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-agent round, gradient modes, by hand") {
  ConsensusProblem prob = two_agent_line(0.0);
  CHECK(prob.zm.Z(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prob.zm.Z(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  auto scheds = schedules_all_gradient(2);
  DishState st = two_agent_state();
  auto res = dish_round(prob, st, scheds, DishStepsizes::uniform(2, 0.2, 0.3), false);

  // mixing: W x = (1.5, -1.5), W y = (0.5, -0.5); grads (2, -2) + dual mix
  CHECK(res.state.x[0](0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(res.state.x[1](0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(res.state.y[0](0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(res.state.y[1](0) == doctest::Approx(-0.95).epsilon(1e-15));
  CHECK(res.grad_x_norm == doctest::Approx(2.5 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(res.grad_y_norm == doctest::Approx(1.5 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(res.state.k == 1);
}

TEST_CASE("newton agent applies its local inverse, scaled or unit") {
  ConsensusProblem prob = two_agent_line(0.0);
  DishState st = two_agent_state();
  DishStepsizes steps = DishStepsizes::uniform(2, 0.2, 0.3);
  std::vector<AgentSchedule> scheds{AgentSchedule::always_gradient(),
                                    AgentSchedule::always_newton()};

  auto scaled = dish_round(prob, st, scheds, steps, false);
  CHECK(scaled.state.x[0](0) == doctest::Approx(1.5).epsilon(1e-15));
  // agent 2: P = 1/2, grad = -2.5, so x2 - 0.2 * (-1.25)
  CHECK(scaled.state.x[1](0) == doctest::Approx(-0.75).epsilon(1e-15));
  // Q = 2, mix = -1.5, so y2 + 0.3 * (-3)
  CHECK(scaled.state.y[1](0) == doctest::Approx(-1.4).epsilon(1e-15));

  std::vector<AgentSchedule> scheds2{AgentSchedule::always_gradient(),
                                     AgentSchedule::always_newton()};
  auto unit = dish_round(prob, st, scheds2, steps, true);
  CHECK(unit.state.x[1](0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(unit.state.y[1](0) == doctest::Approx(-1.4).epsilon(1e-15));
}

TEST_CASE("augmented penalty enters the dual mixing term") {
  ConsensusProblem prob = two_agent_line(0.5);
  DishState st = two_agent_state();
  auto scheds = schedules_all_gradient(2);
  auto res = dish_round(prob, st, scheds, DishStepsizes::uniform(2, 0.2, 0.3), false);

  // y + mu x = (1.5, -1), mixed to (1.25, -1.25); grads (3.25, -3.25)
  CHECK(res.state.x[0](0) == doctest::Approx(1.35).epsilon(1e-15));
  CHECK(res.state.x[1](0) == doctest::Approx(-0.35).epsilon(1e-15));
  // the primal mixing feeding y is unchanged by mu
  CHECK(res.state.y[0](0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(res.state.y[1](0) == doctest::Approx(-0.95).epsilon(1e-15));

  // and the newton scaling shifts by mu
  auto [pn, qn] = scaling_choice(UpdateMode::Newton, *prob.agents[1], st.x[1], 0.5);
  CHECK(qn(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(pn(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("a round reads only direct neighbors") {
  // path 1-2-3: agent 1 must not see agent 3's state
  Graph g(3, {{1, 2}, {2, 3}});
  std::vector<SmoothOraclePtr> agents;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd h(1, 1);
    h << 1.0 + i;
    agents.push_back(std::make_shared<QuadraticOracle>(h, Eigen::VectorXd::Zero(1)));
  }
  ConsensusProblem prob = make_consensus_problem(std::move(agents), build_consensus_matrix(g), 0.0);

  Eigen::VectorXd x(3), y(3);
  x << 1.0, -2.0, 0.5;
  y << 0.3, 0.1, -0.4;
  DishState sa = DishState::from_stacked(x, y, 3, 1);
  Eigen::VectorXd xb = x, yb = y;
  xb(2) = 5.0;
  yb(2) = 2.0;
  DishState sb = DishState::from_stacked(xb, yb, 3, 1);

  DishStepsizes steps = DishStepsizes::uniform(3, 0.1, 0.2);
  auto scheds_a = schedules_all_gradient(3);
  auto scheds_b = schedules_all_gradient(3);
  auto ra = dish_round(prob, sa, scheds_a, steps, false);
  auto rb = dish_round(prob, sb, scheds_b, steps, false);

  CHECK(ra.state.x[0](0) == rb.state.x[0](0));
  CHECK(ra.state.y[0](0) == rb.state.y[0](0));
  // the perturbation does reach agent 2
  CHECK(ra.state.x[1](0) != rb.state.x[1](0));
}

TEST_CASE("relative error averages per-agent distances") {
  Eigen::VectorXd omega(1), x0(2), x(2);
  omega << 3.0;
  x0 << 0.0, 0.0;
  x << 3.0, 3.0;
  CHECK(relative_error(x, omega, x0) == 0.0);
  x << 4.0, 2.0;
  CHECK(relative_error(x, omega, x0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Eigen::VectorXd at_target(2);
  at_target << 3.0, 3.0;
  CHECK_THROWS_AS(relative_error(x, omega, at_target), std::invalid_argument);
}

TEST_CASE("stacked state round trips") {
  Rng rng(4);
  Eigen::VectorXd x(6), y(6);
  for (int r = 0; r < 6; ++r) {
    x(r) = rng.normal();
    y(r) = rng.normal();
  }
  DishState st = DishState::from_stacked(x, y, 3, 2);
  REQUIRE(st.x.size() == 3);
  CHECK((st.stack_x() - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((st.stack_y() - y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.x[1](0) == x(2));
  CHECK_THROWS_AS(DishState::from_stacked(x, y, 4, 2), std::invalid_argument);
}

TEST_CASE("newton rounds reach the consensus optimum") {
  GeneratedConsensus gc = gen_setup1(7);
  DishRunOptions opts;
  opts.steps = DishStepsizes::uniform(10, 1.0, 0.3);
  opts.rel_error_tol = 1e-6;
  opts.max_iters = 4000;
  RunTrace tr = run_dish(gc.prob, schedules_all_newton(10), gc.omega_star, opts);
  CHECK(tr.converged);
  CHECK_FALSE(tr.diverged);
  CHECK(tr.last_in_column("rel_error") <= 1e-6);
  CHECK(tr.iterations() >= 80);
  CHECK(tr.iterations() <= 150);
  // the recorded columns line up with the rows
  REQUIRE(tr.extra_names.size() == 1);
  CHECK(tr.extra_names[0] == "rel_error");
  CHECK(tr.extra_cols[0].size() == tr.rows.size());
  CHECK(tr.rows.front().iter == 0);
  CHECK(tr.extra_cols[0].front() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the stacked descent-ascent rule reproduces the rounds") {
  Graph g(3, {{1, 2}, {2, 3}});
  Rng rng(17);
  std::vector<SmoothOraclePtr> agents;
  const int d = 2;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd M(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) M(r, c) = rng.normal();
    Eigen::MatrixXd H = M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd c(d);
    for (int r = 0; r < d; ++r) c(r) = rng.normal();
    agents.push_back(std::make_shared<QuadraticOracle>(H, c));
  }
  ConsensusProblem prob = make_consensus_problem(std::move(agents), build_consensus_matrix(g), 0.7);
  auto L = dc_lagrangian(prob);

  DishStepsizes steps{Eigen::VectorXd(3), Eigen::VectorXd(3)};
  steps.a << 0.1, 0.2, 0.3;
  steps.b << 0.25, 0.15, 0.35;
  std::vector<AgentSchedule> scheds{AgentSchedule::always_newton(), AgentSchedule::always_gradient(),
                                    AgentSchedule::always_newton()};

  Eigen::VectorXd x0(6), y0(6);
  for (int r = 0; r < 6; ++r) {
    x0(r) = rng.normal();
    y0(r) = rng.normal();
  }

  for (bool unit : {false, true}) {
    auto round_scheds = scheds;
    DishState st = DishState::from_stacked(x0, y0, 3, d);
    auto rule = dish_direction_rule(prob, scheds, steps, unit);
    IterateState zs{x0, y0, 0};
    for (long k = 0; k < 6; ++k) {
      auto res = dish_round(prob, st, round_scheds, steps, unit);
      st = res.state;
      zs = grand_step(*L, *rule, zs, 1.0, 1.0, false);
      CHECK((st.stack_x() - zs.x).lpNorm<Eigen::Infinity>() < 1e-12);
      CHECK((st.stack_y() - zs.y).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("rule certificates cover the per-mode envelopes") {
  ConsensusProblem prob = two_agent_line(0.0);
  auto L = dc_lagrangian(prob);
  std::vector<AgentSchedule> scheds{AgentSchedule::always_gradient(),
                                    AgentSchedule::always_newton()};
  auto rule = dish_direction_rule(prob, scheds, DishStepsizes::uniform(2, 0.2, 0.3), false);
  CHECK(rule->name() == "dish");
  DirectionCertificates c = rule->certificates(*L);
  // gradient agent scales by (0.2, 0.3); newton agent by (0.2/2, 0.3*2)
  CHECK(c.Gamma_s == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(c.gamma_s == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(c.Gamma_t == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(c.gamma_t == doctest::Approx(0.15).epsilon(1e-15));
}

TEST_CASE("randomized equivalence sweep stays at solver precision") {
  CHECK(dish_equivalence_check(11, 20, 0.05, 0.07) < 1e-12);
}

}  // TEST_SUITE
