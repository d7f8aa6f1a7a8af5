#pragma once

#include <Eigen/Dense>
#include <functional>

#include "grand/minimax_oracle.hpp"
#include "grand/rng.hpp"
#include "grand/smooth_oracle.hpp"

namespace grand {

// Central finite differences with h = 1e-6 (1 + ||point||).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point);
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point);

// Largest relative deviation between analytic and finite-difference
// derivatives over `trials` random points with entries from N(0,1).
double fd_gradient_error(const SmoothOracle& f, Rng& rng, int trials = 10);
double fd_hessian_error(const SmoothOracle& f, Rng& rng, int trials = 10);

// Same audits on the saddle oracle's blocks.
double fd_minimax_gradient_error(const MinimaxOracle& L, Rng& rng, int trials = 5);
double fd_minimax_hessian_error(const MinimaxOracle& L, Rng& rng, int trials = 3);

}  // namespace grand
