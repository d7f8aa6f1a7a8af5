#include "grand/direction.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace grand {

void DirectionCertificates::validate() const {
  if (gamma_s <= 0.0 || Gamma_s <= 0.0 || gamma_t <= 0.0 || Gamma_t <= 0.0)
    throw std::invalid_argument("DirectionCertificates: bounds must be positive");
  if (gamma_s > Gamma_s + 1e-15 || gamma_t > Gamma_t + 1e-15)
    throw std::invalid_argument("DirectionCertificates: gamma must not exceed Gamma");
}

Eigen::MatrixXd n_operator(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
  Eigen::MatrixXd Hxx = oracle.hess_xx(x, y);
  Eigen::MatrixXd Hxy = oracle.hess_xy(x, y);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Hxx);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("n_operator: hess_xx factorization failed");
  return oracle.hess_yx(x, y) * ldlt.solve(Hxy) - oracle.hess_yy(x, y);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> direction(DirectionRule& rule,
                                                      const MinimaxOracle& oracle,
                                                      const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& y, long k) {
  return {rule.descent(oracle, x, y, k), rule.ascent(oracle, x, y, k)};
}

namespace {

class GradientRule final : public DirectionRule {
 public:
  Eigen::VectorXd descent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, long) override {
    return oracle.grad_x(x, y);
  }
  Eigen::VectorXd ascent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, long) override {
    return oracle.grad_y(x, y);
  }
  DirectionCertificates certificates(const MinimaxOracle&) const override {
    return {1.0, 1.0, 1.0, 1.0};
  }
  std::string name() const override { return "gradient"; }
};

class ScaledRule final : public DirectionRule {
 public:
  ScaledRule(MatrixProvider P, MatrixProvider Q, DirectionCertificates certs, std::string name)
      : P_(std::move(P)), Q_(std::move(Q)), certs_(certs), name_(std::move(name)) {
    certs_.validate();
    if (!P_ || !Q_) throw std::invalid_argument("scaled_rule: providers required");
  }
  Eigen::VectorXd descent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, long k) override {
    return P_(oracle, x, y, k) * oracle.grad_x(x, y);
  }
  Eigen::VectorXd ascent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, long k) override {
    return Q_(oracle, x, y, k) * oracle.grad_y(x, y);
  }
  DirectionCertificates certificates(const MinimaxOracle&) const override { return certs_; }
  std::string name() const override { return name_; }

 private:
  MatrixProvider P_, Q_;
  DirectionCertificates certs_;
  std::string name_;
};

class NewtonRule final : public DirectionRule {
 public:
  explicit NewtonRule(NewtonRuleOptions opts) : opts_(opts) {
    if (opts.varrho <= 0.0) throw std::invalid_argument("newton_rule: varrho must be positive");
  }

  Eigen::VectorXd descent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, long) override {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(oracle.hess_xx(x, y));
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("newton_rule: hess_xx solve failed");
    return ldlt.solve(oracle.grad_x(x, y));
  }

  Eigen::VectorXd ascent(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, long) override {
    Eigen::MatrixXd N = n_operator(oracle, x, y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (N + N.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("newton_rule: eigensolver failed");
    if (es.eigenvalues()(0) < opts_.pd_floor) {
      N += opts_.reg_shift * Eigen::MatrixXd::Identity(N.rows(), N.cols());
      ++regularized_;
    }
    return N.partialPivLu().solve(oracle.grad_y(x, y));
  }

  DirectionCertificates certificates(const MinimaxOracle& oracle) const override {
    HessianConstants hc = oracle.constants();
    double ell_psi = hc.ell_yy + hc.ell_yx * hc.ell_xy / hc.m_x;
    DirectionCertificates c;
    c.Gamma_s = 1.0 / hc.m_x;
    c.gamma_s = hc.m_x / (hc.ell_xx * hc.ell_xx);  // sqrt(gamma Gamma) = 1/ell_xx
    c.Gamma_t = 1.0 / opts_.varrho;
    c.gamma_t = opts_.varrho / (ell_psi * ell_psi);  // sqrt(gamma Gamma) = 1/ell_psi
    return c;
  }

  std::string name() const override { return "newton"; }
  long regularized_count() const override { return regularized_; }

 private:
  NewtonRuleOptions opts_;
  long regularized_ = 0;
};

}  // namespace

std::unique_ptr<DirectionRule> gradient_rule() { return std::make_unique<GradientRule>(); }

std::unique_ptr<DirectionRule> scaled_rule(MatrixProvider P, MatrixProvider Q,
                                           DirectionCertificates certs, std::string name) {
  return std::make_unique<ScaledRule>(std::move(P), std::move(Q), certs, std::move(name));
}

std::unique_ptr<DirectionRule> newton_rule(NewtonRuleOptions opts) {
  return std::make_unique<NewtonRule>(opts);
}

}  // namespace grand
