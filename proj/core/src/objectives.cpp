#include "grand/objectives.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace grand {

namespace {

// log(1 + exp(z)) without overflow
double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dim(const Eigen::VectorXd& x, int d, const char* who) {
  if (x.size() != d) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

std::pair<double, double> symmetric_extremes(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return {es.eigenvalues()(0), es.eigenvalues()(S.rows() - 1)};
}

}  // namespace

QuadraticOracle::QuadraticOracle(Eigen::MatrixXd H, Eigen::VectorXd c, double c0)
    : H_(std::move(H)), c_(std::move(c)), c0_(c0) {
  if (H_.rows() != H_.cols() || H_.rows() != c_.size())
    throw std::invalid_argument("QuadraticOracle: shape mismatch");
  if (!H_.isApprox(H_.transpose(), 1e-12)) throw std::invalid_argument("QuadraticOracle: H not symmetric");
  auto [lo, hi] = symmetric_extremes(H_);
  if (lo < -1e-10) throw std::invalid_argument("QuadraticOracle: H not positive semidefinite");
  m_ = std::max(lo, 0.0);
  ell_ = hi;
}

double QuadraticOracle::value(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "QuadraticOracle");
  return 0.5 * x.dot(H_ * x) + c_.dot(x) + c0_;
}

Eigen::VectorXd QuadraticOracle::gradient(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "QuadraticOracle");
  return H_ * x + c_;
}

SmoothOraclePtr quadratic_agent(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& v,
                                double lambda, int N_total, int n_agents) {
  if (Theta.rows() != v.size()) throw std::invalid_argument("quadratic_agent: sample count mismatch");
  if (N_total <= 0 || n_agents <= 0) throw std::invalid_argument("quadratic_agent: bad counts");
  const int d = static_cast<int>(Theta.cols());
  Eigen::MatrixXd gram = Theta.transpose() * Theta;
  Eigen::MatrixXd H = gram / N_total + (lambda / n_agents) * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd c = -(Theta.transpose() * v) / N_total;
  double c0 = 0.5 * v.squaredNorm() / N_total;
  return std::make_shared<QuadraticOracle>(std::move(H), std::move(c), c0);
}

LogisticOracle::LogisticOracle(Eigen::MatrixXd Theta, Eigen::VectorXd v, double lambda,
                               int N_total, int n_agents)
    : Theta_(std::move(Theta)), v_(std::move(v)) {
  if (Theta_.rows() != v_.size()) throw std::invalid_argument("LogisticOracle: sample count mismatch");
  if (N_total <= 0 || n_agents <= 0) throw std::invalid_argument("LogisticOracle: bad counts");
  for (Eigen::Index s = 0; s < v_.size(); ++s)
    if (v_(s) != 0.0 && v_(s) != 1.0) throw std::invalid_argument("LogisticOracle: labels must be 0/1");
  inv_total_ = 1.0 / N_total;
  reg_ = lambda / n_agents;
  auto [lo, hi] = symmetric_extremes(Theta_.transpose() * Theta_);
  (void)lo;
  m_ = reg_;
  ell_ = hi * inv_total_ / 4.0 + reg_;
}

double LogisticOracle::value(const Eigen::VectorXd& w) const {
  check_dim(w, dim(), "LogisticOracle");
  Eigen::VectorXd z = Theta_ * w;
  double acc = 0.0;
  for (Eigen::Index s = 0; s < z.size(); ++s) acc += log1pexp(z(s)) - v_(s) * z(s);
  return acc * inv_total_ + 0.5 * reg_ * w.squaredNorm();
}

Eigen::VectorXd LogisticOracle::gradient(const Eigen::VectorXd& w) const {
  check_dim(w, dim(), "LogisticOracle");
  Eigen::VectorXd z = Theta_ * w;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index s = 0; s < z.size(); ++s) r(s) = sigmoid(z(s)) - v_(s);
  return Theta_.transpose() * r * inv_total_ + reg_ * w;
}

Eigen::MatrixXd LogisticOracle::hessian(const Eigen::VectorXd& w) const {
  check_dim(w, dim(), "LogisticOracle");
  Eigen::VectorXd z = Theta_ * w;
  Eigen::VectorXd d(z.size());
  for (Eigen::Index s = 0; s < z.size(); ++s) {
    double h = sigmoid(z(s));
    d(s) = h * (1.0 - h);
  }
  return Theta_.transpose() * d.asDiagonal() * Theta_ * inv_total_ +
         reg_ * Eigen::MatrixXd::Identity(dim(), dim());
}

SmoothOraclePtr logistic_agent(const Eigen::MatrixXd& Theta, const Eigen::VectorXd& v,
                               double lambda, int N_total, int n_agents) {
  return std::make_shared<LogisticOracle>(Theta, v, lambda, N_total, n_agents);
}

SmoothOraclePtr edge_cost(double h, double v) {
  if (h == 0.0) throw std::invalid_argument("edge_cost: h must be nonzero");
  Eigen::MatrixXd H(1, 1);
  H(0, 0) = h * h;
  Eigen::VectorXd c(1);
  c(0) = -h * v;
  return std::make_shared<QuadraticOracle>(std::move(H), std::move(c), 0.5 * v * v);
}

SmoothedL1Oracle::SmoothedL1Oracle(double a, int dim) : a_(a), dim_(dim) {
  if (a <= 0.0) throw std::invalid_argument("SmoothedL1Oracle: a must be positive");
  if (dim < 1) throw std::invalid_argument("SmoothedL1Oracle: dim must be >= 1");
}

double SmoothedL1Oracle::value(const Eigen::VectorXd& y) const {
  check_dim(y, dim_, "SmoothedL1Oracle");
  double acc = 0.0;
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    double u = std::abs(a_ * y(r));
    // log(1+e^u) + log(1+e^-u) = u + 2 log(1+e^-u)
    acc += u + 2.0 * std::log1p(std::exp(-u));
  }
  return acc / a_;
}

Eigen::VectorXd SmoothedL1Oracle::gradient(const Eigen::VectorXd& y) const {
  check_dim(y, dim_, "SmoothedL1Oracle");
  Eigen::VectorXd g(y.size());
  for (Eigen::Index r = 0; r < y.size(); ++r) g(r) = std::tanh(0.5 * a_ * y(r));
  return g;
}

Eigen::MatrixXd SmoothedL1Oracle::hessian(const Eigen::VectorXd& y) const {
  check_dim(y, dim_, "SmoothedL1Oracle");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim_, dim_);
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    double c = std::cosh(std::min(0.5 * a_ * std::abs(y(r)), 350.0));
    H(r, r) = 0.5 * a_ / (c * c);
  }
  return H;
}

SmoothOraclePtr smoothed_l1(double a, int dim) { return std::make_shared<SmoothedL1Oracle>(a, dim); }

namespace {

class ScaledOracle final : public SmoothOracle {
 public:
  ScaledOracle(SmoothOraclePtr f, double c) : f_(std::move(f)), c_(c) {
    if (!f_) throw std::invalid_argument("scale_oracle: null oracle");
    if (c <= 0.0) throw std::invalid_argument("scale_oracle: scale must be positive");
  }
  int dim() const override { return f_->dim(); }
  double value(const Eigen::VectorXd& x) const override { return c_ * f_->value(x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return c_ * f_->gradient(x); }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override { return c_ * f_->hessian(x); }
  double strong_convexity() const override { return c_ * f_->strong_convexity(); }
  double smoothness() const override { return c_ * f_->smoothness(); }

 private:
  SmoothOraclePtr f_;
  double c_;
};

}  // namespace

SmoothOraclePtr scale_oracle(SmoothOraclePtr f, double c) {
  return std::make_shared<ScaledOracle>(std::move(f), c);
}

SmoothOraclePtr quadratic_conjugate(const Eigen::MatrixXd& U, const Eigen::VectorXd& u) {
  if (U.rows() != U.cols() || U.rows() != u.size())
    throw std::invalid_argument("quadratic_conjugate: shape mismatch");
  auto [lo, hi] = symmetric_extremes(0.5 * (U + U.transpose()));
  (void)hi;
  if (lo <= 0.0) throw std::invalid_argument("quadratic_conjugate: U must be positive definite");
  Eigen::MatrixXd Uinv = U.ldlt().solve(Eigen::MatrixXd::Identity(U.rows(), U.cols()));
  Uinv = 0.5 * (Uinv + Uinv.transpose());
  Eigen::VectorXd c = -Uinv * u;
  double c0 = 0.5 * u.dot(Uinv * u);
  return std::make_shared<QuadraticOracle>(std::move(Uinv), std::move(c), c0);
}

PowerFourOracle::PowerFourOracle(Eigen::VectorXd b, double eps) : b_(std::move(b)), eps_(eps) {
  if (eps <= 0.0) throw std::invalid_argument("PowerFourOracle: eps must be positive");
}

double PowerFourOracle::value(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "PowerFourOracle");
  double s = x.array().square().square().sum();
  return 0.5 * std::sqrt(s) + 0.5 * eps_ * x.squaredNorm() + b_.dot(x);
}

Eigen::VectorXd PowerFourOracle::gradient(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "PowerFourOracle");
  double s = x.array().square().square().sum();
  Eigen::VectorXd g = eps_ * x + b_;
  if (s > 0.0) g += (x.array().cube() / std::sqrt(s)).matrix();
  return g;
}

Eigen::MatrixXd PowerFourOracle::hessian(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "PowerFourOracle");
  const int d = dim();
  Eigen::MatrixXd H = eps_ * Eigen::MatrixXd::Identity(d, d);
  double s = x.array().square().square().sum();
  if (s > 0.0) {
    Eigen::VectorXd cube = x.array().cube().matrix();
    double rs = std::sqrt(s);
    H += (3.0 / rs) * Eigen::MatrixXd(x.array().square().matrix().asDiagonal());
    H -= (2.0 / (s * rs)) * (cube * cube.transpose());
  }
  return H;
}

double ConsensusProblem::sum_values(const Eigen::VectorXd& stacked) const {
  double acc = 0.0;
  for (int i = 0; i < n_agents(); ++i)
    acc += agents[static_cast<size_t>(i)]->value(stacked.segment(i * agent_dim, agent_dim));
  return acc;
}

Eigen::VectorXd ConsensusProblem::sum_gradients(const Eigen::VectorXd& stacked) const {
  Eigen::VectorXd g(stacked_dim());
  for (int i = 0; i < n_agents(); ++i)
    g.segment(i * agent_dim, agent_dim) =
        agents[static_cast<size_t>(i)]->gradient(stacked.segment(i * agent_dim, agent_dim));
  return g;
}

Eigen::MatrixXd ConsensusProblem::block_hessian(const Eigen::VectorXd& stacked) const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(stacked_dim(), stacked_dim());
  for (int i = 0; i < n_agents(); ++i)
    H.block(i * agent_dim, i * agent_dim, agent_dim, agent_dim) =
        agents[static_cast<size_t>(i)]->hessian(stacked.segment(i * agent_dim, agent_dim));
  return H;
}

ConsensusProblem make_consensus_problem(std::vector<SmoothOraclePtr> agents, ConsensusMatrix zm,
                                        double mu) {
  if (agents.empty()) throw std::invalid_argument("make_consensus_problem: no agents");
  if (mu < 0.0) throw std::invalid_argument("make_consensus_problem: mu must be >= 0");
  if (static_cast<Eigen::Index>(agents.size()) != zm.Z.rows())
    throw std::invalid_argument("make_consensus_problem: agent count != consensus matrix size");
  const int d = agents.front()->dim();
  double m = agents.front()->strong_convexity();
  double ell = agents.front()->smoothness();
  for (const auto& a : agents) {
    if (!a) throw std::invalid_argument("make_consensus_problem: null agent");
    if (a->dim() != d) throw std::invalid_argument("make_consensus_problem: agents disagree on dimension");
    m = std::min(m, a->strong_convexity());
    ell = std::max(ell, a->smoothness());
  }
  if (m <= 0.0) throw std::invalid_argument("make_consensus_problem: agents must be strongly convex");
  ConsensusProblem p;
  p.W = build_weight_matrix(zm, d);
  p.agents = std::move(agents);
  p.zm = std::move(zm);
  p.mu = mu;
  p.agent_dim = d;
  p.m_dc = m;
  p.ell_dc = ell;
  return p;
}

NetworkFlowProblem make_network_flow_problem(std::vector<SmoothOraclePtr> costs,
                                             IncidenceMatrix inc, Eigen::VectorXd pi) {
  if (static_cast<Eigen::Index>(costs.size()) != inc.E.cols())
    throw std::invalid_argument("make_network_flow_problem: one cost per edge required");
  if (pi.size() != inc.E.rows())
    throw std::invalid_argument("make_network_flow_problem: supply size != node count");
  if (std::abs(pi.sum()) > 1e-10)
    throw std::invalid_argument("make_network_flow_problem: supplies must balance to zero");
  double m = costs.front()->strong_convexity();
  double ell = costs.front()->smoothness();
  for (const auto& c : costs) {
    if (!c || c->dim() != 1)
      throw std::invalid_argument("make_network_flow_problem: costs must be scalar oracles");
    m = std::min(m, c->strong_convexity());
    ell = std::max(ell, c->smoothness());
  }
  if (m <= 0.0) throw std::invalid_argument("make_network_flow_problem: costs must be strongly convex");
  NetworkFlowProblem p;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(inc.E);
  p.e_norm = svd.singularValues()(0);
  p.costs = std::move(costs);
  p.inc = std::move(inc);
  p.pi = std::move(pi);
  p.m_nf = m;
  p.ell_nf = ell;
  return p;
}

StructuredMinimax make_structured_minimax(SmoothOraclePtr f, SmoothOraclePtr g, Eigen::MatrixXd W) {
  if (!f) throw std::invalid_argument("make_structured_minimax: f required");
  if (W.cols() != f->dim()) throw std::invalid_argument("make_structured_minimax: W cols != dim f");
  if (g && W.rows() != g->dim()) throw std::invalid_argument("make_structured_minimax: W rows != dim g");
  if (f->strong_convexity() <= 0.0)
    throw std::invalid_argument("make_structured_minimax: f must be strongly convex");
  StructuredMinimax sm;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
  sm.w_norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  sm.f = std::move(f);
  sm.g = std::move(g);
  sm.W = std::move(W);
  return sm;
}

ConsensusProblem feature_dual_build(const std::vector<Eigen::MatrixXd>& Thetas,
                                    const Eigen::MatrixXd& U, const Eigen::VectorXd& u,
                                    const std::vector<Eigen::MatrixXd>& Vs,
                                    const std::vector<Eigen::VectorXd>& vs,
                                    ConsensusMatrix zm, double mu) {
  const size_t n = Thetas.size();
  if (n == 0 || Vs.size() != n || vs.size() != n)
    throw std::invalid_argument("feature_dual_build: per-agent inputs must align");
  const Eigen::Index N = U.rows();
  std::vector<SmoothOraclePtr> agents;
  agents.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXd& Th = Thetas[i];  // N rows, d_i cols
    if (Th.rows() != N) throw std::invalid_argument("feature_dual_build: Theta row count != dim U");
    auto rstar = std::dynamic_pointer_cast<const QuadraticOracle>(quadratic_conjugate(Vs[i], vs[i]));
    auto phistar = std::dynamic_pointer_cast<const QuadraticOracle>(quadratic_conjugate(U, u));
    // g_i(x) = r_i*(-Theta_i' x) + phi*(x)/n, both pieces quadratic, so fold
    // the composition into one quadratic oracle.
    Eigen::MatrixXd Vinv = rstar->H();
    Eigen::VectorXd cr = rstar->c();
    double c0r = rstar->value(Eigen::VectorXd::Zero(Vinv.rows()));
    Eigen::MatrixXd H = Th * Vinv * Th.transpose() + phistar->H() / static_cast<double>(n);
    Eigen::VectorXd c = -Th * cr + phistar->c() / static_cast<double>(n);
    double c0 = c0r + phistar->value(Eigen::VectorXd::Zero(N)) / static_cast<double>(n);
    agents.push_back(std::make_shared<QuadraticOracle>(0.5 * (H + H.transpose()), std::move(c), c0));
  }
  return make_consensus_problem(std::move(agents), std::move(zm), mu);
}

}  // namespace grand
