#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "grand/dish.hpp"
#include "grand/objectives.hpp"
#include "grand/trace.hpp"

namespace grand {

// Mode assignment per edge, in the incidence edge order. Switching entries
// partition the edge set anew each round.
struct EdgeModeMap {
  std::vector<AgentSchedule> schedules;

  static EdgeModeMap all_gradient(int m);
  static EdgeModeMap all_newton(int m);
  // first `count` edges (lexicographic edge order) run Newton-type updates
  static EdgeModeMap first_newton(int m, int count);
  static EdgeModeMap switching(int m, std::uint64_t seed);

  int edge_count() const { return static_cast<int>(schedules.size()); }
  std::vector<UpdateMode> advance(long k);
};

// Edge flows in incidence edge order, node potentials, and the per-edge /
// per-node stepsizes the rounds use.
struct FlowState {
  Eigen::VectorXd x;  // |E|
  Eigen::VectorXd y;  // n
  Eigen::VectorXd a;  // per-edge primal stepsizes
  Eigen::VectorXd b;  // per-node dual stepsizes
  long k = 0;

  static FlowState zeros(const NetworkFlowProblem& prob, double a, double b);
};

// Scaling values for one round: p_e = 1 for gradient edges, 1/f''_e for
// Newton edges; q_i inverts the mixed per-node curvature sum
//   #(gradient edges at i) + sum over Newton edges at i of 1/f''_e.
std::pair<Eigen::VectorXd, Eigen::VectorXd> netflow_scalings(const NetworkFlowProblem& prob,
                                                             const Eigen::VectorXd& x,
                                                             const std::vector<UpdateMode>& modes);

// Diagonal of E (hess f)^{-1} E': [D]_ii = sum over incident edges of 1/f''_e.
Eigen::VectorXd diag_dual_hessian(const NetworkFlowProblem& prob, const Eigen::VectorXd& x);

// ||Ex - pi||
double feasibility_residual(const NetworkFlowProblem& prob, const Eigen::VectorXd& x);

// Center a raw supply vector so it sums to zero.
Eigen::VectorXd make_supply(const Eigen::VectorXd& raw);

// One synchronized round: every edge reads its endpoints' potentials, every
// node reads its incident flows; all writes land in the returned state.
FlowState netflow_round(const NetworkFlowProblem& prob, const FlowState& state, EdgeModeMap& modes);

struct NetflowRunOptions {
  double a = 0.1;
  double b = 0.1;
  long max_iters = 100000;
  double grad_tol = 0.0;  // on the full Lagrangian gradient norm; 0 disables
  // edges pinned to Newton mode take a_e = 1 (their scaling already carries
  // the curvature); switching edges keep `a` since their mode varies per round
  bool newton_unit_primal_step = true;
};

// Simulates rounds from zeros; extra trace columns feas_residual and
// lagrangian_grad_norm.
RunTrace run_netflow(const NetworkFlowProblem& prob, EdgeModeMap modes,
                     const NetflowRunOptions& opts);

// The same update as one scaled rule on the flow Lagrangian; certificates
// from eigenvalue envelopes over the modes each edge can visit.
std::unique_ptr<DirectionRule> netflow_direction_rule(const NetworkFlowProblem& prob,
                                                      EdgeModeMap modes, double a, double b);

// Exact saddle point for quadratic edge costs via one linear solve of the
// stacked optimality system; y is the minimum-norm representative.
std::pair<Eigen::VectorXd, Eigen::VectorXd> netflow_kkt_reference(const NetworkFlowProblem& prob);

}  // namespace grand
