#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "grand/direction.hpp"
#include "grand/minimax_oracle.hpp"
#include "grand/trace.hpp"

namespace grand {

struct IterateState {
  Eigen::VectorXd x, y;
  long k = 0;
};

class divergence_error : public std::runtime_error {
 public:
  divergence_error(std::string what, IterateState last)
      : std::runtime_error(std::move(what)), last_finite(std::move(last)) {}
  IterateState last_finite;
};

// One descent-ascent step:
//   x+ = x - alpha s,  y+ = y + beta t
// with t computed at (x, y) in simultaneous mode and at (x+, y) in
// alternating mode. Non-finite results raise divergence_error carrying the
// incoming state.
IterateState grand_step(const MinimaxOracle& oracle, DirectionRule& rule, const IterateState& state,
                        double alpha, double beta, bool alternating = false);

struct InnerSolveOptions {
  double tol = 1e-10;   // gradient norm target
  int max_iters = 200;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
};

// argmin_x L(x, y) by damped Newton with backtracking; one exact step for
// quadratic-in-x oracles. warm, when given, seeds the iteration.
Eigen::VectorXd inner_minimize(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                               const InnerSolveOptions& opts = {},
                               const Eigen::VectorXd* warm = nullptr);

double psi_value(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                 const InnerSolveOptions& opts = {}, const Eigen::VectorXd* warm = nullptr);

Eigen::VectorXd psi_grad(const MinimaxOracle& oracle, const Eigen::VectorXd& y,
                         const InnerSolveOptions& opts = {}, const Eigen::VectorXd* warm = nullptr);

// Stepsize bounds and contraction constants derived from the declared
// curvature and direction certificates.
struct TheoremConstants {
  double nu = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double ell_psi = 0.0;
  double iota = 0.0;
  double alpha_max = 0.0;
  double beta_max = 0.0;   // evaluated at alpha = alpha_max
  bool alternating = false;
  DirectionCertificates certs;
  double m_x = 0.0;        // curvature inputs echoed for downstream formulas
  double ell_yx = 0.0;

  double beta_bound(double alpha) const;
  // extra cap required for the linear-rate regime
  double beta_pl_cap(double p_psi) const;
  // per-step contraction rate given a PL constant for psi
  double delta(double alpha, double beta, double p_psi) const;
};

TheoremConstants theorem_constants(const HessianConstants& hc, const DirectionCertificates& certs,
                                   bool alternating = false);

struct LyapunovSample {
  double psi = 0.0;
  double psi_grad_norm = 0.0;
  double delta_x = 0.0;   // L(x,y) - psi(y)
  double delta_y = 0.0;   // xi_psi - psi(y)
  double upsilon = 0.0;   // beta iota ||grad psi||^2 + (2 alpha gamma_s m_x / 3) delta_x
  double delta_big = 0.0; // (3 iota / c1) delta_y + delta_x
};

LyapunovSample lyapunov(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& y, double alpha, double beta,
                        const TheoremConstants& tc, double xi_psi,
                        const InnerSolveOptions& inner = {}, const Eigen::VectorXd* warm = nullptr);

struct StopRule {
  long max_iters = 1000;
  double grad_tol = 0.0;  // on ||grad_x|| + ||grad_y||
};

struct RunOptions {
  double alpha = 0.0;
  double beta = 0.0;
  bool alternating = false;
  StopRule stop;
  bool diagnostics = false;           // fill psi/delta/upsilon columns
  bool certified = false;             // assert per-step contraction and prefix averages
  std::optional<double> p_psi;        // PL constant; absent => no contraction assertions
  std::optional<double> xi_psi;       // max of psi; absent => running max
  bool audit = false;                 // empirical certificate checks each step
  bool record_timing = false;         // wall_ms stays 0 unless enabled (keeps CSV reproducible)
  double assert_slack = 1e-12;
  double audit_slack = 1e-10;
  Eigen::VectorXd reference;          // stacked (x*; y*); enables the rel_error column
  double rel_tol = 0.0;               // stop on ||z - z*|| / ||z0 - z*||; 0 disables
};

RunTrace run(const MinimaxOracle& oracle, DirectionRule& rule, Eigen::VectorXd x0,
             Eigen::VectorXd y0, const RunOptions& opts);

// PL constants of psi for the supported problem families.
double pl_constant_dc(const ConsensusProblem& prob);
double pl_constant_nf(const NetworkFlowProblem& prob);
// g(y) = h(W'y) with h m_h-smooth concave part subtracted; see builders.
double pl_constant_structured_gh(const StructuredMinimax& sm, double m_h);
// W full row rank, g m_g-smooth.
double pl_constant_structured_fullrank(const StructuredMinimax& sm, double m_g);

}  // namespace grand
