#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "grand/minimax_oracle.hpp"
#include "grand/trace.hpp"

namespace grand {

// x-side Newton map: (x, y) -> (x - hess_xx^{-1} grad_x, y).
std::pair<Eigen::VectorXd, Eigen::VectorXd> map_X(const MinimaxOracle& oracle,
                                                  const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& y);

// y-side map through the dual curvature: (x, y) -> (x, y + N^{-1} grad_y).
// N is solved with full pivoting; it need not be definite, only nonsingular.
std::pair<Eigen::VectorXd, Eigen::VectorXd> map_Y(const MinimaxOracle& oracle,
                                                  const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& y);

// One alternating Newton round: Y after X.
std::pair<Eigen::VectorXd, Eigen::VectorXd> alt_nda_step(const MinimaxOracle& oracle,
                                                         const Eigen::VectorXd& x,
                                                         const Eigen::VectorXd& y);

// X, then Y, then J further X refinements (J >= 1).
std::pair<Eigen::VectorXd, Eigen::VectorXd> multistep_uj(const MinimaxOracle& oracle,
                                                         const Eigen::VectorXd& x,
                                                         const Eigen::VectorXd& y, int J);

// Block factorization of the full second-derivative matrix
//   [hess_xx  hess_xy]
//   [hess_yx  hess_yy]
// held as an LDLT of hess_xx plus an LU of N = hess_yx hess_xx^{-1} hess_xy
// - hess_yy. Construction counts toward a global factorization counter so
// reuse can be asserted in tests.
class SchurFactorization {
 public:
  SchurFactorization(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y);

  // solves [hess] (dx; dy) = (gx; gy)
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve(const Eigen::VectorXd& gx,
                                                    const Eigen::VectorXd& gy) const;

  static long constructed_count();
  static void reset_constructed_count();

 private:
  Eigen::LDLT<Eigen::MatrixXd> hxx_;
  Eigen::MatrixXd hxy_;
  Eigen::PartialPivLU<Eigen::MatrixXd> n_;
};

// Stacked gradient (grad_x; grad_y) used as the root-finding residual.
Eigen::VectorXd lambda_op(const MinimaxOracle& oracle, const Eigen::VectorXd& z);

// z+ = z - solve(hess(z), lambda(z)); one factorization, one solve.
Eigen::VectorXd full_newton_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z);

// Half step with the same factorization reused for the corrector:
//   w  = z - solve(hess(z), lambda(z))
//   z+ = w - solve(hess(z), lambda(w))
// Exactly one factorization per call.
Eigen::VectorXd cubic_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z);

// Optimistic update with g(z) = (grad_x; -grad_y):
// z+ = z - 2 eta g(z) + eta g(z_prev). Pass z_prev = z for the first step.
Eigen::VectorXd ogda_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& z_prev, double eta);

enum class LocalMethod { AltGda, AltNda, MultistepUj, FullNewton, Cubic, Ogda };

struct LocalRunOptions {
  long max_iters = 200;
  double grad_tol = 0.0;         // on ||(grad_x; grad_y)||; 0 disables
  double rel_tol = 0.0;          // on err/err0 when a reference is given; 0 disables
  int uj_steps = 1;              // J for MultistepUj
  double eta = 0.1;              // Ogda stepsize
  double alpha = 0.1, beta = 0.1;  // AltGda stepsizes
  Eigen::VectorXd reference;     // optional z*; enables the err column
};

// Iterates one local method from (x0; y0); rows carry gradient norms and,
// when a reference is given, the extra column err = ||z - z*||.
RunTrace run_local(const MinimaxOracle& oracle, LocalMethod method, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& y0, const LocalRunOptions& opts);

// Median of log(e_{k+1}/e_k) / log(e_k/e_{k-1}) over the last (up to five)
// strictly decreasing triples above the floor; empty when fewer than four
// entries resolve above the floor.
std::optional<double> rate_order(const std::vector<double>& errors,
                                 double floor = 100.0 * std::numeric_limits<double>::epsilon());

}  // namespace grand
