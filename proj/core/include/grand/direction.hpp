#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "grand/minimax_oracle.hpp"

namespace grand {

// Certified cone bounds for descent/ascent directions: with g the relevant
// gradient block, a direction u must satisfy
//   ||u|| >= sqrt(gamma Gamma) ||g||   and   u'g >= ||u||^2 / Gamma.
struct DirectionCertificates {
  double gamma_s = 1.0;
  double Gamma_s = 1.0;
  double gamma_t = 1.0;
  double Gamma_t = 1.0;
  void validate() const;
};

// Schur-style dual curvature N = H_yx H_xx^{-1} H_xy - H_yy evaluated at (x, y).
Eigen::MatrixXd n_operator(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y);

// Produces the descent direction s (against grad_x) and ascent direction t
// (along grad_y). Rules may be stateful across iterations of one run (mode
// schedules); a rule instance must not be shared between concurrent runs.
class DirectionRule {
 public:
  virtual ~DirectionRule() = default;

  virtual Eigen::VectorXd descent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y, long k) = 0;
  virtual Eigen::VectorXd ascent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y, long k) = 0;
  virtual DirectionCertificates certificates(const MinimaxOracle& oracle) const = 0;
  virtual std::string name() const = 0;
  // curvature solves that needed a positivity shift so far
  virtual long regularized_count() const { return 0; }
};

std::pair<Eigen::VectorXd, Eigen::VectorXd> direction(DirectionRule& rule,
                                                      const MinimaxOracle& oracle,
                                                      const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& y, long k = 0);

// s = grad_x, t = grad_y; all certificates are 1.
std::unique_ptr<DirectionRule> gradient_rule();

// s = P(x,y,k) grad_x, t = Q(x,y,k) grad_y with caller-declared eigenvalue
// envelopes sqrt(gamma Gamma) I <= P <= Gamma I (same for Q).
using MatrixProvider = std::function<Eigen::MatrixXd(const MinimaxOracle&, const Eigen::VectorXd&,
                                                     const Eigen::VectorXd&, long)>;
std::unique_ptr<DirectionRule> scaled_rule(MatrixProvider P, MatrixProvider Q,
                                           DirectionCertificates certs,
                                           std::string name = "scaled");

// s = hess_xx^{-1} grad_x, t = N^{-1} grad_y. When the smallest eigenvalue of
// N falls below pd_floor the solve shifts N by reg_shift and the step is
// counted. varrho is the declared lower curvature bound of N used for the
// ascent certificates.
struct NewtonRuleOptions {
  double varrho = 1e-8;
  double pd_floor = 1e-10;
  double reg_shift = 1e-8;
};
std::unique_ptr<DirectionRule> newton_rule(NewtonRuleOptions opts = {});

}  // namespace grand
