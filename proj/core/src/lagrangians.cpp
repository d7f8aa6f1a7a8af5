#include <stdexcept>

#include "grand/minimax_oracle.hpp"

namespace grand {

namespace {

void check_pair(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int dx, int dy, const char* who) {
  if (x.size() != dx || y.size() != dy)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

class DcLagrangian final : public MinimaxOracle {
 public:
  explicit DcLagrangian(ConsensusProblem prob) : p_(std::move(prob)) {}

  int dim_x() const override { return p_.stacked_dim(); }
  int dim_y() const override { return p_.stacked_dim(); }

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "DcLagrangian");
    Eigen::VectorXd Wx = p_.W * x;
    return p_.sum_values(x) + y.dot(Wx) + 0.5 * p_.mu * x.dot(Wx);
  }

  Eigen::VectorXd grad_x(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "DcLagrangian");
    return p_.sum_gradients(x) + p_.W * (y + p_.mu * x);
  }

  Eigen::VectorXd grad_y(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "DcLagrangian");
    return p_.W * x;
  }

  Eigen::MatrixXd hess_xx(const Eigen::VectorXd& x, const Eigen::VectorXd&) const override {
    return p_.block_hessian(x) + p_.mu * p_.W;
  }

  Eigen::MatrixXd hess_xy(const Eigen::VectorXd&, const Eigen::VectorXd&) const override { return p_.W; }

  Eigen::MatrixXd hess_yy(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Zero(dim_y(), dim_y());
  }

  HessianConstants constants() const override {
    return {p_.m_dc, p_.ell_dc + 2.0 * p_.mu, 2.0, 2.0, 0.0};
  }

  const ConsensusProblem& problem() const { return p_; }

 private:
  ConsensusProblem p_;
};

class NfLagrangian final : public MinimaxOracle {
 public:
  explicit NfLagrangian(NetworkFlowProblem prob) : p_(std::move(prob)) {}

  int dim_x() const override { return p_.n_edges(); }
  int dim_y() const override { return p_.n_nodes(); }

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "NfLagrangian");
    double acc = 0.0;
    Eigen::VectorXd xe(1);
    for (int e = 0; e < p_.n_edges(); ++e) {
      xe(0) = x(e);
      acc += p_.costs[static_cast<size_t>(e)]->value(xe);
    }
    return acc + y.dot(p_.inc.E * x - p_.pi);
  }

  Eigen::VectorXd grad_x(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "NfLagrangian");
    Eigen::VectorXd g(dim_x());
    Eigen::VectorXd xe(1);
    for (int e = 0; e < p_.n_edges(); ++e) {
      xe(0) = x(e);
      g(e) = p_.costs[static_cast<size_t>(e)]->gradient(xe)(0);
    }
    return g + p_.inc.E.transpose() * y;
  }

  Eigen::VectorXd grad_y(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "NfLagrangian");
    return p_.inc.E * x - p_.pi;
  }

  Eigen::MatrixXd hess_xx(const Eigen::VectorXd& x, const Eigen::VectorXd&) const override {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim_x(), dim_x());
    Eigen::VectorXd xe(1);
    for (int e = 0; e < p_.n_edges(); ++e) {
      xe(0) = x(e);
      H(e, e) = p_.costs[static_cast<size_t>(e)]->hessian(xe)(0, 0);
    }
    return H;
  }

  Eigen::MatrixXd hess_xy(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    return p_.inc.E.transpose();
  }

  Eigen::MatrixXd hess_yy(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Zero(dim_y(), dim_y());
  }

  HessianConstants constants() const override {
    return {p_.m_nf, p_.ell_nf, p_.e_norm, p_.e_norm, 0.0};
  }

  const NetworkFlowProblem& problem() const { return p_; }

 private:
  NetworkFlowProblem p_;
};

class StructuredLagrangian final : public MinimaxOracle {
 public:
  explicit StructuredLagrangian(StructuredMinimax sm) : s_(std::move(sm)) {}

  int dim_x() const override { return s_.f->dim(); }
  int dim_y() const override { return static_cast<int>(s_.W.rows()); }

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "StructuredLagrangian");
    double v = s_.f->value(x) + y.dot(s_.W * x);
    if (s_.g) v -= s_.g->value(y);
    return v;
  }

  Eigen::VectorXd grad_x(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "StructuredLagrangian");
    return s_.f->gradient(x) + s_.W.transpose() * y;
  }

  Eigen::VectorXd grad_y(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override {
    check_pair(x, y, dim_x(), dim_y(), "StructuredLagrangian");
    Eigen::VectorXd g = s_.W * x;
    if (s_.g) g -= s_.g->gradient(y);
    return g;
  }

  Eigen::MatrixXd hess_xx(const Eigen::VectorXd& x, const Eigen::VectorXd&) const override {
    return s_.f->hessian(x);
  }

  Eigen::MatrixXd hess_xy(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
    return s_.W.transpose();
  }

  Eigen::MatrixXd hess_yy(const Eigen::VectorXd&, const Eigen::VectorXd& y) const override {
    if (s_.g) return -s_.g->hessian(y);
    return Eigen::MatrixXd::Zero(dim_y(), dim_y());
  }

  HessianConstants constants() const override {
    double ell_yy = s_.g ? s_.g->smoothness() : 0.0;
    return {s_.f->strong_convexity(), s_.f->smoothness(), s_.w_norm, s_.w_norm, ell_yy};
  }

 private:
  StructuredMinimax s_;
};

}  // namespace

MinimaxOraclePtr dc_lagrangian(ConsensusProblem prob) {
  return std::make_shared<DcLagrangian>(std::move(prob));
}

MinimaxOraclePtr nf_lagrangian(NetworkFlowProblem prob) {
  return std::make_shared<NfLagrangian>(std::move(prob));
}

MinimaxOraclePtr structured_lagrangian(StructuredMinimax sm) {
  return std::make_shared<StructuredLagrangian>(std::move(sm));
}

}  // namespace grand
