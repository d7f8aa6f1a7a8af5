#pragma once

#include <Eigen/Dense>
#include <vector>

#include "grand/network.hpp"
#include "grand/smooth_oracle.hpp"

namespace grand {

// value = x'Hx/2 + c'x + c0 with H symmetric PSD.
class QuadraticOracle final : public SmoothOracle {
 public:
  QuadraticOracle(Eigen::MatrixXd H, Eigen::VectorXd c, double c0 = 0.0);

  int dim() const override { return static_cast<int>(c_.size()); }
  double value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd&) const override { return H_; }
  double strong_convexity() const override { return m_; }
  double smoothness() const override { return ell_; }

  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& c() const { return c_; }

 private:
  Eigen::MatrixXd H_;
  Eigen::VectorXd c_;
  double c0_;
  double m_, ell_;
};

// Local ridge least squares ||Theta w - v||^2 / (2 N_total) + lambda ||w||^2 / (2 n_agents).
// The 1/N_total and lambda/n_agents splits make the agent sum equal the
// global objective exactly.
SmoothOraclePtr quadratic_agent(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& v,
                                double lambda, int N_total, int n_agents);

// Local regularized logistic loss with labels in {0,1}:
// sum_s [log(1+exp(z_s)) - v_s z_s] / N_total + lambda ||w||^2 / (2 n_agents),
// z = Theta w. Declared m = lambda/n_agents, ell = sigma_max(Theta'Theta)/(4 N_total) + lambda/n_agents.
class LogisticOracle final : public SmoothOracle {
 public:
  LogisticOracle(Eigen::MatrixXd Theta, Eigen::VectorXd v, double lambda, int N_total, int n_agents);

  int dim() const override { return static_cast<int>(Theta_.cols()); }
  double value(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& w) const override;
  double strong_convexity() const override { return m_; }
  double smoothness() const override { return ell_; }

 private:
  Eigen::MatrixXd Theta_;
  Eigen::VectorXd v_;
  double inv_total_, reg_;
  double m_, ell_;
};

SmoothOraclePtr logistic_agent(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& v,
                               double lambda, int N_total, int n_agents);

// Scalar edge cost (h x - v)^2 / 2; h must be nonzero so the cost is
// strongly convex with m = ell = h^2.
SmoothOraclePtr edge_cost(double h, double v);

// Separable softplus pair sum_r [log(1+exp(a y_r)) + log(1+exp(-a y_r))] / a.
// Gradient component tanh(a y_r / 2), hessian diagonal (a/2) sech^2(a y_r / 2);
// smooth surrogate for |y_r| with ell = a/2, m = 0.
class SmoothedL1Oracle final : public SmoothOracle {
 public:
  SmoothedL1Oracle(double a, int dim);

  int dim() const override { return dim_; }
  double value(const Eigen::VectorXd& y) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& y) const override;
  double strong_convexity() const override { return 0.0; }
  double smoothness() const override { return a_ / 2.0; }

 private:
  double a_;
  int dim_;
};

SmoothOraclePtr smoothed_l1(double a, int dim);

// c * f for c > 0.
SmoothOraclePtr scale_oracle(SmoothOraclePtr f, double c);

// Convex conjugate of omega'U omega/2 + u'omega for U PD:
// f*(lambda) = (lambda - u)' U^{-1} (lambda - u) / 2.
SmoothOraclePtr quadratic_conjugate(const Eigen::MatrixXd& U, const Eigen::VectorXd& u);

// ||x||_4^2 / 2 + eps ||x||^2 / 2 + b'x where ||x||_4^2 = sqrt(sum x_r^4).
// The quartic head is convex with hessian bounded by 3I; eps keeps the
// whole thing strongly convex near the origin where the head degenerates.
class PowerFourOracle final : public SmoothOracle {
 public:
  PowerFourOracle(Eigen::VectorXd b, double eps);

  int dim() const override { return static_cast<int>(b_.size()); }
  double value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;
  double strong_convexity() const override { return eps_; }
  double smoothness() const override { return 3.0 + eps_; }

 private:
  Eigen::VectorXd b_;
  double eps_;
};

// ---- problem containers ----------------------------------------------------

// min over consensus of sum_i f_i; the saddle form couples a stacked primal
// x in R^{n d} with multipliers y in R^{n d} through W = (I - Z) (x) I_d.
struct ConsensusProblem {
  std::vector<SmoothOraclePtr> agents;
  ConsensusMatrix zm;
  double mu = 0.0;
  int agent_dim = 0;
  Eigen::MatrixXd W;     // cached weight matrix
  double m_dc = 0.0;     // min_i m_i
  double ell_dc = 0.0;   // max_i ell_i

  int n_agents() const { return static_cast<int>(agents.size()); }
  int stacked_dim() const { return n_agents() * agent_dim; }

  double sum_values(const Eigen::VectorXd& stacked) const;
  Eigen::VectorXd sum_gradients(const Eigen::VectorXd& stacked) const;
  Eigen::MatrixXd block_hessian(const Eigen::VectorXd& stacked) const;
};

ConsensusProblem make_consensus_problem(std::vector<SmoothOraclePtr> agents,
                                        ConsensusMatrix zm, double mu);

// min_x f(x) s.t. E x = pi over a connected graph's incidence matrix, with
// separable per-edge costs.
struct NetworkFlowProblem {
  std::vector<SmoothOraclePtr> costs;  // one scalar oracle per edge
  IncidenceMatrix inc;
  Eigen::VectorXd pi;
  double m_nf = 0.0;
  double ell_nf = 0.0;
  double e_norm = 0.0;  // sigma_max(E)

  int n_nodes() const { return static_cast<int>(inc.E.rows()); }
  int n_edges() const { return static_cast<int>(inc.E.cols()); }
};

NetworkFlowProblem make_network_flow_problem(std::vector<SmoothOraclePtr> costs,
                                             IncidenceMatrix inc, Eigen::VectorXd pi);

// L(x, y) = f(x) + y'Wx - g(y); g may be null (treated as zero).
struct StructuredMinimax {
  SmoothOraclePtr f;
  SmoothOraclePtr g;        // may be null
  Eigen::MatrixXd W;        // dim_y rows, dim_x cols
  double w_norm = 0.0;      // sigma_max(W)
};

StructuredMinimax make_structured_minimax(SmoothOraclePtr f, SmoothOraclePtr g, Eigen::MatrixXd W);

// Consensus-form dual of feature-partitioned quadratic regression: agent i
// holds g_i(x_i) = r_i*(-Theta_i' x_i) + phi*(x_i)/n with quadratic
// penalties r_i(w) = w'V_i w/2 + v_i'w and phi(w) = w'U w/2 + u'w.
ConsensusProblem feature_dual_build(const std::vector<Eigen::MatrixXd>& Thetas,
                                    const Eigen::MatrixXd& U, const Eigen::VectorXd& u,
                                    const std::vector<Eigen::MatrixXd>& Vs,
                                    const std::vector<Eigen::VectorXd>& vs,
                                    ConsensusMatrix zm, double mu);

}  // namespace grand
