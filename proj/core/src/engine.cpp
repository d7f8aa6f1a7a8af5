#include "grand/engine.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <limits>

namespace grand {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

struct StepPieces {
  Eigen::VectorXd s, t;
  Eigen::VectorXd gy_for_t;  // gradient the ascent direction was computed against
};

IterateState step_impl(const MinimaxOracle& oracle, DirectionRule& rule, const IterateState& st,
                       double alpha, double beta, bool alternating, StepPieces* pieces) {
  Eigen::VectorXd s = rule.descent(oracle, st.x, st.y, st.k);
  Eigen::VectorXd xp = st.x - alpha * s;
  if (!finite(xp)) throw divergence_error("grand_step: non-finite primal iterate", st);
  const Eigen::VectorXd& t_point = alternating ? xp : st.x;
  Eigen::VectorXd t = rule.ascent(oracle, t_point, st.y, st.k);
  Eigen::VectorXd yp = st.y + beta * t;
  if (!finite(yp)) throw divergence_error("grand_step: non-finite dual iterate", st);
  if (pieces) {
    pieces->gy_for_t = oracle.grad_y(t_point, st.y);
    pieces->s = std::move(s);
    pieces->t = std::move(t);
  }
  return {std::move(xp), std::move(yp), st.k + 1};
}

}  // namespace

IterateState grand_step(const MinimaxOracle& oracle, DirectionRule& rule, const IterateState& state,
                        double alpha, double beta, bool alternating) {
  return step_impl(oracle, rule, state, alpha, beta, alternating, nullptr);
}

Eigen::VectorXd inner_minimize(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                               const InnerSolveOptions& opts, const Eigen::VectorXd* warm) {
  Eigen::VectorXd x = warm ? *warm : Eigen::VectorXd::Zero(oracle.dim_x());
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd g = oracle.grad_x(x, y);
    if (g.norm() <= opts.tol) return x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(oracle.hess_xx(x, y));
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("inner_minimize: hessian factorization failed");
    Eigen::VectorXd dx = ldlt.solve(g);
    double gd = g.dot(dx);
    if (!(gd > 0.0)) throw std::runtime_error("inner_minimize: non-descent Newton direction");
    double f0 = oracle.value(x, y);
    double step = 1.0;
    bool accepted = false;
    while (step > 1e-14) {
      Eigen::VectorXd cand = x - step * dx;
      if (oracle.value(cand, y) <= f0 - opts.sufficient_decrease * step * gd) {
        x = std::move(cand);
        accepted = true;
        break;
      }
      // near the minimizer the true decrease hides below value roundoff and
      // the test above reads noise; the full step still counts if it provably
      // shrinks the gradient
      if (step == 1.0 && oracle.grad_x(cand, y).norm() <= 0.9 * g.norm()) {
        x = std::move(cand);
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) throw std::runtime_error("inner_minimize: line search stalled");
  }
  if (oracle.grad_x(x, y).norm() <= opts.tol) return x;
  throw std::runtime_error("inner_minimize: did not reach tolerance");
}

double psi_value(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                 const InnerSolveOptions& opts, const Eigen::VectorXd* warm) {
  return oracle.value(inner_minimize(oracle, y, opts, warm), y);
}

Eigen::VectorXd psi_grad(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                         const InnerSolveOptions& opts, const Eigen::VectorXd* warm) {
  return oracle.grad_y(inner_minimize(oracle, y, opts, warm), y);
}

double TheoremConstants::beta_bound(double alpha) const {
  double by_psi = c1 / (3.0 * ell_psi * certs.Gamma_t * certs.Gamma_t);
  double by_alpha = alpha * certs.gamma_s * m_x * m_x * c1 /
                    (3.0 * ell_yx * ell_yx * iota * (3.0 * c2 + 2.0 * c1));
  return std::min(by_psi, by_alpha);
}

double TheoremConstants::beta_pl_cap(double p_psi) const {
  return (3.0 * iota + c1) / (2.0 * iota * p_psi * c1);
}

double TheoremConstants::delta(double alpha, double beta, double p_psi) const {
  double by_dual = 2.0 * beta * iota * p_psi * c1 / (3.0 * iota + c1);
  double by_primal = 2.0 * alpha * certs.gamma_s * m_x / 3.0;
  return std::min(by_dual, by_primal);
}

TheoremConstants theorem_constants(const HessianConstants& hc, const DirectionCertificates& certs,
                                   bool alternating) {
  certs.validate();
  if (hc.m_x <= 0.0) throw std::invalid_argument("theorem_constants: m_x must be positive");
  TheoremConstants tc;
  tc.certs = certs;
  tc.alternating = alternating;
  tc.m_x = hc.m_x;
  tc.ell_yx = hc.ell_yx;
  tc.ell_psi = hc.ell_yy + hc.ell_yx * hc.ell_xy / hc.m_x;

  const double Gt = certs.Gamma_t, gt = certs.gamma_t;
  if (gt < Gt) {
    tc.nu = 1.0 / std::cbrt(1.0 - (gt / Gt) * (gt / Gt)) - 1.0;
    tc.c1 = (Gt * Gt / (2.0 * gt)) * (tc.nu / (1.0 + tc.nu));
    tc.c2 = (Gt * Gt / (2.0 * gt)) * ((1.0 / (1.0 + tc.nu) + 1.0 + tc.nu) / tc.nu);
  } else {
    tc.nu = 0.0;
    tc.c1 = tc.c2 = Gt * Gt / (2.0 * gt);
  }

  double yy_term = hc.ell_yy > 0.0 ? tc.c1 * hc.ell_yy / (3.0 * tc.ell_psi) : 0.0;
  tc.iota = alternating ? 2.0 * Gt + yy_term : 2.0 * Gt + Gt * Gt + yy_term;

  double coupling = tc.ell_psi > 0.0 ? tc.c1 * hc.ell_yx * hc.ell_yx / (tc.ell_psi * Gt * Gt) : 0.0;
  tc.alpha_max = 2.0 * certs.gamma_s / (certs.Gamma_s * certs.Gamma_s * (3.0 * hc.ell_xx + coupling));
  tc.beta_max = tc.beta_bound(tc.alpha_max);
  return tc;
}

LyapunovSample lyapunov(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& y, double alpha, double beta,
                        const TheoremConstants& tc, double xi_psi, const InnerSolveOptions& inner,
                        const Eigen::VectorXd* warm) {
  Eigen::VectorXd xs = inner_minimize(oracle, y, inner, warm);
  LyapunovSample out;
  out.psi = oracle.value(xs, y);
  out.psi_grad_norm = oracle.grad_y(xs, y).norm();
  out.delta_x = oracle.value(x, y) - out.psi;
  if (out.delta_x < -1e-10)
    throw std::runtime_error("lyapunov: negative primal gap, inner minimizer unreliable");
  out.delta_x = std::max(out.delta_x, 0.0);
  out.delta_y = xi_psi - out.psi;
  out.upsilon = beta * tc.iota * out.psi_grad_norm * out.psi_grad_norm +
                (2.0 * alpha * tc.certs.gamma_s * tc.m_x / 3.0) * out.delta_x;
  out.delta_big = (3.0 * tc.iota / tc.c1) * out.delta_y + out.delta_x;
  return out;
}

RunTrace run(const MinimaxOracle& oracle, DirectionRule& rule, Eigen::VectorXd x0,
             Eigen::VectorXd y0, const RunOptions& opts) {
  RunTrace trace;
  DirectionCertificates certs = rule.certificates(oracle);
  certs.validate();

  const bool need_diag = opts.diagnostics || opts.certified;
  TheoremConstants tc;
  if (need_diag) tc = theorem_constants(oracle.constants(), certs, opts.alternating);
  double delta = 0.0;
  bool check_contraction = false;
  if (opts.certified && opts.p_psi) {
    delta = tc.delta(opts.alpha, opts.beta, *opts.p_psi);
    check_contraction = true;
  }

  const double sqrt_gs = std::sqrt(certs.gamma_s * certs.Gamma_s);
  const double sqrt_gt = std::sqrt(certs.gamma_t * certs.Gamma_t);

  IterateState st{std::move(x0), std::move(y0), 0};
  const bool have_ref = opts.reference.size() > 0;
  if (have_ref && opts.reference.size() != st.x.size() + st.y.size())
    throw std::invalid_argument("run: reference size must match stacked (x; y)");
  if (have_ref) trace.add_extra_column("rel_error");
  double err0 = 0.0;
  Eigen::VectorXd inner_warm;
  bool have_warm = false;
  double xi_run = 0.0;
  bool xi_init = false;
  double prev_delta_big = 0.0;
  bool have_prev_delta = false;
  double upsilon_sum = 0.0;
  double delta0 = 0.0;
  double wall_ms = 0.0;

  while (true) {
    auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd gx = oracle.grad_x(st.x, st.y);
    Eigen::VectorXd gy = oracle.grad_y(st.x, st.y);

    TraceRow row;
    row.iter = st.k;
    row.grad_x_norm = gx.norm();
    row.grad_y_norm = gy.norm();
    row.wall_ms = wall_ms;

    if (need_diag) {
      Eigen::VectorXd xs = inner_minimize(oracle, st.y, {}, have_warm ? &inner_warm : nullptr);
      LyapunovSample ls;
      ls.psi = oracle.value(xs, st.y);
      ls.psi_grad_norm = oracle.grad_y(xs, st.y).norm();
      ls.delta_x = oracle.value(st.x, st.y) - ls.psi;
      if (ls.delta_x < -1e-10)
        throw std::runtime_error("run: negative primal gap, inner minimizer unreliable");
      ls.delta_x = std::max(ls.delta_x, 0.0);
      if (opts.xi_psi) {
        ls.delta_y = *opts.xi_psi - ls.psi;
      } else {
        if (!xi_init) {
          xi_run = ls.psi;
          xi_init = true;
        } else {
          xi_run = std::max(xi_run, ls.psi);
        }
        ls.delta_y = xi_run - ls.psi;
      }
      ls.upsilon = opts.beta * tc.iota * ls.psi_grad_norm * ls.psi_grad_norm +
                   (2.0 * opts.alpha * tc.certs.gamma_s * tc.m_x / 3.0) * ls.delta_x;
      ls.delta_big = (3.0 * tc.iota / tc.c1) * ls.delta_y + ls.delta_x;
      inner_warm = std::move(xs);
      have_warm = true;
      row.psi_grad_norm = ls.psi_grad_norm;
      row.delta_x = ls.delta_x;
      row.delta_y = ls.delta_y;
      row.upsilon = ls.upsilon;
      row.delta_big = ls.delta_big;

      if (st.k == 0) delta0 = ls.delta_big;
      if (opts.certified) {
        if (check_contraction && have_prev_delta) {
          if (ls.delta_big > (1.0 - delta) * prev_delta_big + opts.assert_slack) {
            if (opts.alternating)
              ++trace.certified_warnings;
            else
              ++trace.certified_violations;
          }
        }
        prev_delta_big = ls.delta_big;
        have_prev_delta = true;
        // prefix K covers steps 0..K-1, so the check excludes this row's sample
        if (st.k > 0 && upsilon_sum > delta0 + static_cast<double>(st.k) * opts.assert_slack)
          ++trace.prefix_bound_violations;
        upsilon_sum += ls.upsilon;
      }
    }
    trace.rows.push_back(row);

    double rel = std::numeric_limits<double>::quiet_NaN();
    if (have_ref) {
      double err = std::sqrt((st.x - opts.reference.head(st.x.size())).squaredNorm() +
                             (st.y - opts.reference.tail(st.y.size())).squaredNorm());
      if (st.k == 0) err0 = err;
      rel = err0 > 0.0 ? err / err0 : 0.0;
      trace.extra_cols.back().push_back(rel);
    }

    double gsum = row.grad_x_norm + row.grad_y_norm;
    if (opts.stop.grad_tol > 0.0 && gsum <= opts.stop.grad_tol) {
      trace.converged = true;
      break;
    }
    if (have_ref && opts.rel_tol > 0.0 && rel <= opts.rel_tol) {
      trace.converged = true;
      break;
    }
    if (st.k >= opts.stop.max_iters) break;

    StepPieces pieces;
    IterateState next;
    try {
      next = step_impl(oracle, rule, st, opts.alpha, opts.beta, opts.alternating, &pieces);
    } catch (const divergence_error&) {
      trace.diverged = true;
      break;
    }

    if (opts.audit) {
      // angle checks compare squared norms directly: squaring a rounded norm
      // inflates the right side by ~2 eps ||s||^2, a false positive at the
      // gradient scales the flow problems reach
      if (pieces.s.norm() + opts.audit_slack < sqrt_gs * row.grad_x_norm)
        ++trace.audit_violations;
      if (pieces.s.dot(gx) + opts.audit_slack < pieces.s.squaredNorm() / certs.Gamma_s)
        ++trace.audit_violations;
      if (pieces.t.norm() + opts.audit_slack < sqrt_gt * pieces.gy_for_t.norm())
        ++trace.audit_violations;
      if (pieces.t.dot(pieces.gy_for_t) + opts.audit_slack < pieces.t.squaredNorm() / certs.Gamma_t)
        ++trace.audit_violations;
    }

    st = std::move(next);
    if (opts.record_timing) {
      wall_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  }

  trace.regularized_steps = rule.regularized_count();
  trace.final_x = std::move(st.x);
  trace.final_y = std::move(st.y);
  return trace;
}

double pl_constant_dc(const ConsensusProblem& prob) {
  return (1.0 - prob.zm.gamma) / (prob.ell_dc + 2.0 * prob.mu);
}

double pl_constant_nf(const NetworkFlowProblem& prob) {
  return smallest_nonzero_singular_value(prob.inc.E) / prob.ell_nf;
}

double pl_constant_structured_gh(const StructuredMinimax& sm, double m_h) {
  double inv_ell = 1.0 / sm.f->smoothness();
  if (m_h >= inv_ell)
    throw std::invalid_argument("pl_constant_structured_gh: m_h must be below 1/ell_xx");
  return smallest_nonzero_singular_value(sm.W) * (inv_ell - m_h);
}

double pl_constant_structured_fullrank(const StructuredMinimax& sm, double m_g) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sm.W);
  Eigen::Index rows = sm.W.rows();
  if (svd.singularValues().size() < rows || svd.singularValues()(rows - 1) <= 1e-10)
    throw std::invalid_argument("pl_constant_structured_fullrank: W must have full row rank");
  double smin = svd.singularValues()(rows - 1);
  double p = smin * smin / sm.f->smoothness() - m_g;
  if (p <= 0.0) throw std::invalid_argument("pl_constant_structured_fullrank: nonpositive constant");
  return p;
}

}  // namespace grand
