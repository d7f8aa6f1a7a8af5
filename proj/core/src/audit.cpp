#include "grand/audit.hpp"

#include <algorithm>
#include <cmath>

namespace grand {

namespace {

double fd_step(const Eigen::VectorXd& point) { return 1e-6 * (1.0 + point.norm()); }

Eigen::VectorXd random_vec(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

double rel_err(double num, double scale) { return num / std::max(scale, 1.0); }

}  // namespace

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point) {
  const double h = fd_step(point);
  Eigen::VectorXd g(point.size());
  Eigen::VectorXd p = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    p(i) = point(i) + h;
    double up = f(p);
    p(i) = point(i) - h;
    double dn = f(p);
    p(i) = point(i);
    g(i) = (up - dn) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point) {
  const double h = fd_step(point);
  Eigen::VectorXd p = point;
  p(0) = point(0) + h;
  Eigen::VectorXd probe = f(p);
  p(0) = point(0);
  Eigen::MatrixXd J(probe.size(), point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    p(i) = point(i) + h;
    Eigen::VectorXd up = f(p);
    p(i) = point(i) - h;
    Eigen::VectorXd dn = f(p);
    p(i) = point(i);
    J.col(i) = (up - dn) / (2.0 * h);
  }
  return J;
}

double fd_gradient_error(const SmoothOracle& f, Rng& rng, int trials) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd x = random_vec(rng, f.dim());
    Eigen::VectorXd ga = f.gradient(x);
    Eigen::VectorXd gn = fd_gradient([&](const Eigen::VectorXd& p) { return f.value(p); }, x);
    worst = std::max(worst, rel_err((ga - gn).norm(), ga.norm()));
  }
  return worst;
}

double fd_hessian_error(const SmoothOracle& f, Rng& rng, int trials) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd x = random_vec(rng, f.dim());
    Eigen::MatrixXd Ha = f.hessian(x);
    Eigen::MatrixXd Hn = fd_jacobian([&](const Eigen::VectorXd& p) { return f.gradient(p); }, x);
    worst = std::max(worst, rel_err((Ha - Hn).norm(), Ha.norm()));
  }
  return worst;
}

double fd_minimax_gradient_error(const MinimaxOracle& L, Rng& rng, int trials) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd x = random_vec(rng, L.dim_x());
    Eigen::VectorXd y = random_vec(rng, L.dim_y());
    Eigen::VectorXd gx = L.grad_x(x, y);
    Eigen::VectorXd gy = L.grad_y(x, y);
    Eigen::VectorXd nx = fd_gradient([&](const Eigen::VectorXd& p) { return L.value(p, y); }, x);
    Eigen::VectorXd ny = fd_gradient([&](const Eigen::VectorXd& p) { return L.value(x, p); }, y);
    worst = std::max(worst, rel_err((gx - nx).norm(), gx.norm()));
    worst = std::max(worst, rel_err((gy - ny).norm(), gy.norm()));
  }
  return worst;
}

double fd_minimax_hessian_error(const MinimaxOracle& L, Rng& rng, int trials) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd x = random_vec(rng, L.dim_x());
    Eigen::VectorXd y = random_vec(rng, L.dim_y());
    Eigen::MatrixXd xx = fd_jacobian([&](const Eigen::VectorXd& p) { return L.grad_x(p, y); }, x);
    Eigen::MatrixXd xy = fd_jacobian([&](const Eigen::VectorXd& p) { return L.grad_x(x, p); }, y);
    Eigen::MatrixXd yy = fd_jacobian([&](const Eigen::VectorXd& p) { return L.grad_y(x, p); }, y);
    worst = std::max(worst, rel_err((L.hess_xx(x, y) - xx).norm(), xx.norm()));
    worst = std::max(worst, rel_err((L.hess_xy(x, y) - xy).norm(), xy.norm()));
    worst = std::max(worst, rel_err((L.hess_yy(x, y) - yy).norm(), yy.norm()));
    Eigen::MatrixXd yx = fd_jacobian([&](const Eigen::VectorXd& p) { return L.grad_y(p, y); }, x);
    worst = std::max(worst, rel_err((L.hess_yx(x, y) - yx).norm(), yx.norm()));
  }
  return worst;
}

}  // namespace grand
