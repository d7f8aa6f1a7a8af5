#include "grand/netflow.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "grand/engine.hpp"
#include "grand/minimax_oracle.hpp"

namespace grand {

EdgeModeMap EdgeModeMap::all_gradient(int m) {
  return {schedules_all_gradient(m)};
}

EdgeModeMap EdgeModeMap::all_newton(int m) {
  return {schedules_all_newton(m)};
}

EdgeModeMap EdgeModeMap::first_newton(int m, int count) {
  return {schedules_first_newton(m, count)};
}

EdgeModeMap EdgeModeMap::switching(int m, std::uint64_t seed) {
  return {schedules_switch_uniform(m, seed)};
}

std::vector<UpdateMode> EdgeModeMap::advance(long k) {
  std::vector<UpdateMode> out(schedules.size());
  for (size_t e = 0; e < schedules.size(); ++e) out[e] = schedules[e].advance(k);
  return out;
}

FlowState FlowState::zeros(const NetworkFlowProblem& prob, double a, double b) {
  FlowState st;
  st.x = Eigen::VectorXd::Zero(prob.n_edges());
  st.y = Eigen::VectorXd::Zero(prob.n_nodes());
  st.a = Eigen::VectorXd::Constant(prob.n_edges(), a);
  st.b = Eigen::VectorXd::Constant(prob.n_nodes(), b);
  return st;
}

namespace {

double edge_curvature(const NetworkFlowProblem& prob, const Eigen::VectorXd& x, int e) {
  Eigen::VectorXd xe(1);
  xe(0) = x(e);
  double h = prob.costs[static_cast<size_t>(e)]->hessian(xe)(0, 0);
  if (!(h > 0.0)) throw std::runtime_error("netflow: edge cost lost positive curvature");
  return h;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> netflow_scalings(const NetworkFlowProblem& prob,
                                                             const Eigen::VectorXd& x,
                                                             const std::vector<UpdateMode>& modes) {
  const int m = prob.n_edges();
  const int n = prob.n_nodes();
  if (static_cast<int>(modes.size()) != m || x.size() != m)
    throw std::invalid_argument("netflow_scalings: size mismatch");

  Eigen::VectorXd p(m);
  Eigen::VectorXd denom = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < m; ++e) {
    const Edge& ed = prob.inc.edge_order[static_cast<size_t>(e)];
    if (modes[static_cast<size_t>(e)] == UpdateMode::Gradient) {
      p(e) = 1.0;
      denom(ed.i - 1) += 1.0;
      denom(ed.j - 1) += 1.0;
    } else {
      double inv = 1.0 / edge_curvature(prob, x, e);
      p(e) = inv;
      denom(ed.i - 1) += inv;
      denom(ed.j - 1) += inv;
    }
  }
  // connected graph => every node has degree >= 1 => denom > 0
  return {std::move(p), denom.cwiseInverse()};
}

Eigen::VectorXd diag_dual_hessian(const NetworkFlowProblem& prob, const Eigen::VectorXd& x) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(prob.n_nodes());
  for (int e = 0; e < prob.n_edges(); ++e) {
    const Edge& ed = prob.inc.edge_order[static_cast<size_t>(e)];
    double inv = 1.0 / edge_curvature(prob, x, e);
    d(ed.i - 1) += inv;
    d(ed.j - 1) += inv;
  }
  return d;
}

double feasibility_residual(const NetworkFlowProblem& prob, const Eigen::VectorXd& x) {
  return (prob.inc.E * x - prob.pi).norm();
}

Eigen::VectorXd make_supply(const Eigen::VectorXd& raw) {
  return raw.array() - raw.sum() / static_cast<double>(raw.size());
}

FlowState netflow_round(const NetworkFlowProblem& prob, const FlowState& state,
                        EdgeModeMap& modes) {
  const int m = prob.n_edges();
  const int n = prob.n_nodes();
  if (state.x.size() != m || state.y.size() != n || state.a.size() != m || state.b.size() != n)
    throw std::invalid_argument("netflow_round: state sizes disagree with problem");
  std::vector<UpdateMode> now = modes.advance(state.k);
  auto [p, q] = netflow_scalings(prob, state.x, now);

  FlowState out = state;
  out.k = state.k + 1;
  Eigen::VectorXd imbalance = -prob.pi;
  for (int e = 0; e < m; ++e) {
    const Edge& ed = prob.inc.edge_order[static_cast<size_t>(e)];
    Eigen::VectorXd xe(1);
    xe(0) = state.x(e);
    double grad = prob.costs[static_cast<size_t>(e)]->gradient(xe)(0) + state.y(ed.i - 1) -
                  state.y(ed.j - 1);
    out.x(e) = state.x(e) - state.a(e) * p(e) * grad;
    imbalance(ed.i - 1) += state.x(e);
    imbalance(ed.j - 1) -= state.x(e);
  }
  out.y = state.y + (state.b.array() * q.array() * imbalance.array()).matrix();
  if (!out.x.allFinite() || !out.y.allFinite())
    throw divergence_error("netflow_round: non-finite iterate", {state.x, state.y, state.k});
  return out;
}

RunTrace run_netflow(const NetworkFlowProblem& prob, EdgeModeMap modes,
                     const NetflowRunOptions& opts) {
  auto oracle = nf_lagrangian(prob);
  FlowState st = FlowState::zeros(prob, opts.a, opts.b);
  if (opts.newton_unit_primal_step) {
    for (int e = 0; e < prob.n_edges(); ++e) {
      const AgentSchedule& s = modes.schedules[static_cast<size_t>(e)];
      if (!s.switching() && s.current() == UpdateMode::Newton) st.a(e) = 1.0;
    }
  }

  RunTrace trace;
  trace.add_extra_column("feas_residual");
  trace.add_extra_column("lagrangian_grad_norm");

  while (true) {
    Eigen::VectorXd gx = oracle->grad_x(st.x, st.y);
    Eigen::VectorXd gy = oracle->grad_y(st.x, st.y);
    double gxn = gx.norm(), gyn = gy.norm();
    double lnorm = std::sqrt(gxn * gxn + gyn * gyn);

    TraceRow row;
    row.iter = st.k;
    row.grad_x_norm = gxn;
    row.grad_y_norm = gyn;
    trace.rows.push_back(row);
    trace.extra_cols[0].push_back(gyn);  // feasibility residual is ||Ex - pi||
    trace.extra_cols[1].push_back(lnorm);

    if (opts.grad_tol > 0.0 && lnorm <= opts.grad_tol) {
      trace.converged = true;
      break;
    }
    if (st.k >= opts.max_iters) break;
    try {
      st = netflow_round(prob, st, modes);
    } catch (const divergence_error&) {
      trace.diverged = true;
      break;
    }
  }
  trace.final_x = st.x;
  trace.final_y = st.y;
  return trace;
}

namespace {

struct NetflowRuleState {
  NetworkFlowProblem prob;
  EdgeModeMap modes;
  double a, b;
  long cached_k = -1;
  std::vector<UpdateMode> now;

  void refresh(long k) {
    if (k == cached_k) return;
    if (cached_k != -1 && k != cached_k + 1)
      throw std::logic_error("netflow_direction_rule: iterations must advance one at a time");
    now = modes.advance(k);
    cached_k = k;
  }
};

}  // namespace

std::unique_ptr<DirectionRule> netflow_direction_rule(const NetworkFlowProblem& prob,
                                                      EdgeModeMap modes, double a, double b) {
  const int m = prob.n_edges();
  const int n = prob.n_nodes();
  if (modes.edge_count() != m) throw std::invalid_argument("netflow_direction_rule: mode count");

  // primal envelope over the modes each edge can visit
  double p_lo = std::numeric_limits<double>::infinity(), p_hi = 0.0;
  std::vector<double> contrib_lo(static_cast<size_t>(m)), contrib_hi(static_cast<size_t>(m));
  for (int e = 0; e < m; ++e) {
    const auto& f = *prob.costs[static_cast<size_t>(e)];
    bool can_grad = true, can_newton = true;
    if (!modes.schedules[static_cast<size_t>(e)].switching()) {
      can_grad = modes.schedules[static_cast<size_t>(e)].current() == UpdateMode::Gradient;
      can_newton = !can_grad;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    if (can_grad) {
      lo = std::min(lo, 1.0);
      hi = std::max(hi, 1.0);
    }
    if (can_newton) {
      lo = std::min(lo, 1.0 / f.smoothness());
      hi = std::max(hi, 1.0 / f.strong_convexity());
    }
    p_lo = std::min(p_lo, a * lo);
    p_hi = std::max(p_hi, a * hi);
    contrib_lo[static_cast<size_t>(e)] = lo;
    contrib_hi[static_cast<size_t>(e)] = hi;
  }
  // dual envelope: q_i inverts a sum of per-edge contributions
  Eigen::VectorXd den_lo = Eigen::VectorXd::Zero(n), den_hi = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < m; ++e) {
    const Edge& ed = prob.inc.edge_order[static_cast<size_t>(e)];
    den_lo(ed.i - 1) += contrib_lo[static_cast<size_t>(e)];
    den_lo(ed.j - 1) += contrib_lo[static_cast<size_t>(e)];
    den_hi(ed.i - 1) += contrib_hi[static_cast<size_t>(e)];
    den_hi(ed.j - 1) += contrib_hi[static_cast<size_t>(e)];
  }
  double q_lo = std::numeric_limits<double>::infinity(), q_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    q_lo = std::min(q_lo, b / den_hi(i));
    q_hi = std::max(q_hi, b / den_lo(i));
  }

  DirectionCertificates certs;
  certs.Gamma_s = p_hi;
  certs.gamma_s = p_lo * p_lo / p_hi;
  certs.Gamma_t = q_hi;
  certs.gamma_t = q_lo * q_lo / q_hi;

  auto rs = std::make_shared<NetflowRuleState>(
      NetflowRuleState{prob, std::move(modes), a, b, -1, {}});

  MatrixProvider P = [rs](const MinimaxOracle&, const Eigen::VectorXd& x, const Eigen::VectorXd&,
                          long k) {
    rs->refresh(k);
    auto pq = netflow_scalings(rs->prob, x, rs->now);
    return Eigen::MatrixXd((rs->a * pq.first).asDiagonal());
  };
  MatrixProvider Q = [rs](const MinimaxOracle&, const Eigen::VectorXd& x, const Eigen::VectorXd&,
                          long k) {
    rs->refresh(k);
    auto pq = netflow_scalings(rs->prob, x, rs->now);
    return Eigen::MatrixXd((rs->b * pq.second).asDiagonal());
  };
  return scaled_rule(std::move(P), std::move(Q), certs, "netflow");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> netflow_kkt_reference(const NetworkFlowProblem& prob) {
  const int m = prob.n_edges();
  const int n = prob.n_nodes();
  Eigen::VectorXd h2(m), c(m);
  Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1), one1 = Eigen::VectorXd::Ones(1);
  for (int e = 0; e < m; ++e) {
    const auto& f = *prob.costs[static_cast<size_t>(e)];
    h2(e) = f.hessian(zero1)(0, 0);
    c(e) = f.gradient(zero1)(0);
    if (std::abs(f.gradient(one1)(0) - (h2(e) + c(e))) > 1e-8)
      throw std::invalid_argument("netflow_kkt_reference: edge costs must be quadratic");
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + n, m + n);
  A.topLeftCorner(m, m) = h2.asDiagonal();
  A.topRightCorner(m, n) = prob.inc.E.transpose();
  A.bottomLeftCorner(n, m) = prob.inc.E;
  Eigen::VectorXd rhs(m + n);
  rhs.head(m) = -c;
  rhs.tail(n) = prob.pi;
  Eigen::VectorXd sol = A.completeOrthogonalDecomposition().solve(rhs);
  return {sol.head(m), sol.tail(n)};
}

}  // namespace grand
