#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "grand/direction.hpp"
#include "grand/engine.hpp"
#include "grand/objectives.hpp"
#include "grand/rng.hpp"
#include "grand/trace.hpp"

namespace grand {

enum class UpdateMode { Gradient, Newton };

// Per-agent mode policy. Switch policies draw a fresh holding interval each
// time one expires; the initial mode is a fair coin from the same stream.
class AgentSchedule {
 public:
  static AgentSchedule always_gradient();
  static AgentSchedule always_newton();
  static AgentSchedule fixed(UpdateMode mode);
  // holding times uniform on {lo, ..., hi} rounds
  static AgentSchedule switch_uniform(std::uint64_t seed, int lo = 5, int hi = 50);
  // holding times round(exp(N(mean, sd^2))) + offset rounds
  static AgentSchedule switch_lognormal(std::uint64_t seed, double mean = 2.0, double sd = 2.0,
                                        int offset = 30);

  AgentSchedule(const AgentSchedule& other);
  AgentSchedule& operator=(const AgentSchedule& other);
  AgentSchedule(AgentSchedule&&) = default;
  AgentSchedule& operator=(AgentSchedule&&) = default;

  // Mode for round k; must be called with k = 0, 1, 2, ... in order.
  UpdateMode advance(long k);
  UpdateMode current() const { return mode_; }
  bool switching() const { return kind_ == Kind::Uniform || kind_ == Kind::Lognormal; }

 private:
  enum class Kind { Fixed, Uniform, Lognormal };
  AgentSchedule(Kind kind, UpdateMode mode, std::uint64_t seed);

  void seed_stream(std::uint64_t seed);
  long draw_interval();

  Kind kind_;
  UpdateMode mode_;
  std::unique_ptr<Rng> rng_;
  long next_switch_ = -1;
  long expected_k_ = 0;
  int lo_ = 5, hi_ = 50;
  double mean_ = 2.0, sd_ = 2.0;
  int offset_ = 30;
};

std::vector<AgentSchedule> schedules_all_gradient(int n);
std::vector<AgentSchedule> schedules_all_newton(int n);
// first `count` agents run Newton-type updates, the rest gradient-type
std::vector<AgentSchedule> schedules_first_newton(int n, int count);
std::vector<AgentSchedule> schedules_switch_uniform(int n, std::uint64_t seed);
std::vector<AgentSchedule> schedules_switch_lognormal(int n, std::uint64_t seed);

// Local scaling pair for one agent: gradient mode (I, I); Newton mode
// ((hess f_i + mu I)^{-1}, hess f_i + mu I).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> scaling_choice(UpdateMode mode, const SmoothOracle& f,
                                                           const Eigen::VectorXd& x_i, double mu);

struct DishState {
  std::vector<Eigen::VectorXd> x, y;
  long k = 0;

  Eigen::VectorXd stack_x() const;
  Eigen::VectorXd stack_y() const;
  static DishState from_stacked(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n, int d);
};

struct DishStepsizes {
  Eigen::VectorXd a;  // per-agent primal
  Eigen::VectorXd b;  // per-agent dual
  static DishStepsizes uniform(int n, double a, double b);
};

struct DishRoundResult {
  DishState state;
  double grad_x_norm = 0.0;  // stacked primal direction pre-scaling
  double grad_y_norm = 0.0;
};

// One synchronized round: every agent reads only its own and its neighbors'
// round-k values, all writes land in the returned state.
DishRoundResult dish_round(const ConsensusProblem& prob, const DishState& state,
                           std::vector<AgentSchedule>& schedules, const DishStepsizes& steps,
                           bool newton_unit_primal_step = false);

// ||x - 1 (x) omega*|| / ||x0 - 1 (x) omega*||
double relative_error(const Eigen::VectorXd& stacked_x, const Eigen::VectorXd& omega_star,
                      const Eigen::VectorXd& stacked_x0);

struct DishRunOptions {
  DishStepsizes steps;
  long max_iters = 10000;
  double rel_error_tol = 0.0;     // 0 disables
  double grad_tol = 0.0;          // on ||grad_x|| + ||grad_y||; 0 disables
  bool newton_unit_primal_step = true;
  Eigen::VectorXd x0;             // stacked; empty => zero
};

// Simulates rounds from y = 0 and records rel_error against omega_star.
RunTrace run_dish(const ConsensusProblem& prob, std::vector<AgentSchedule> schedules,
                  const Eigen::VectorXd& omega_star, const DishRunOptions& opts);

// The same update written as one scaled descent-ascent rule on the stacked
// saddle function; certificates come from the per-mode eigenvalue envelopes.
std::unique_ptr<DirectionRule> dish_direction_rule(const ConsensusProblem& prob,
                                                   std::vector<AgentSchedule> schedules,
                                                   const DishStepsizes& steps,
                                                   bool newton_unit_primal_step = false);

// Largest deviation over `trials` random quadratic instances between one
// all-gradient round with uniform stepsizes and one plain descent-ascent step
// on the stacked saddle function.
double dish_equivalence_check(std::uint64_t seed, int trials, double alpha, double beta);

}  // namespace grand
