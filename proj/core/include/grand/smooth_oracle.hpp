#pragma once

#include <Eigen/Dense>
#include <memory>

namespace grand {

// Twice-differentiable function with declared curvature bounds
// m*I <= hessian(x) <= ell*I (m may be 0 for merely convex pieces).
class SmoothOracle {
 public:
  virtual ~SmoothOracle() = default;

  virtual int dim() const = 0;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const = 0;

  virtual double strong_convexity() const = 0;  // m
  virtual double smoothness() const = 0;        // ell
};

using SmoothOraclePtr = std::shared_ptr<const SmoothOracle>;

}  // namespace grand
