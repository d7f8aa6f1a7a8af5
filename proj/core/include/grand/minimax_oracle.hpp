#pragma once

#include <Eigen/Dense>
#include <memory>

#include "grand/objectives.hpp"

namespace grand {

// Declared curvature bounds of a saddle function: strong convexity in x,
// block Lipschitz constants of the gradient.
struct HessianConstants {
  double m_x = 0.0;
  double ell_xx = 0.0;
  double ell_xy = 0.0;
  double ell_yx = 0.0;
  double ell_yy = 0.0;
};

// Smooth L(x, y), strongly convex in x, concave in y.
class MinimaxOracle {
 public:
  virtual ~MinimaxOracle() = default;

  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;

  virtual double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::VectorXd grad_x(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::VectorXd grad_y(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::MatrixXd hess_xx(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::MatrixXd hess_xy(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::MatrixXd hess_yy(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const = 0;
  virtual Eigen::MatrixXd hess_yx(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return hess_xy(x, y).transpose();
  }

  virtual HessianConstants constants() const = 0;
};

using MinimaxOraclePtr = std::shared_ptr<const MinimaxOracle>;

// L(x, y) = sum_i f_i(x_i) + y'Wx + mu x'Wx/2 on stacked variables.
MinimaxOraclePtr dc_lagrangian(ConsensusProblem prob);

// L(x, y) = sum_e f_e(x_e) + y'(Ex - pi).
MinimaxOraclePtr nf_lagrangian(NetworkFlowProblem prob);

// L(x, y) = f(x) + y'Wx - g(y).
MinimaxOraclePtr structured_lagrangian(StructuredMinimax sm);

}  // namespace grand
