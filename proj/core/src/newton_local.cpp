#include "grand/newton_local.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "grand/direction.hpp"
#include "grand/engine.hpp"

namespace grand {

namespace {

std::atomic<long> g_schur_constructions{0};

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* who) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error(std::string(who) + ": factorization failed");
  return ldlt.solve(b);
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> map_X(const MinimaxOracle& oracle,
                                                  const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& y) {
  Eigen::VectorXd step = solve_spd(oracle.hess_xx(x, y), oracle.grad_x(x, y), "map_X");
  return {x - step, y};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> map_Y(const MinimaxOracle& oracle,
                                                  const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& y) {
  Eigen::MatrixXd N = n_operator(oracle, x, y);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(N);
  if (!lu.isInvertible()) throw std::runtime_error("map_Y: dual curvature is singular here");
  return {x, y + lu.solve(oracle.grad_y(x, y))};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> alt_nda_step(const MinimaxOracle& oracle,
                                                         const Eigen::VectorXd& x,
                                                         const Eigen::VectorXd& y) {
  auto [x1, y0] = map_X(oracle, x, y);
  return map_Y(oracle, x1, y0);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> multistep_uj(const MinimaxOracle& oracle,
                                                         const Eigen::VectorXd& x,
                                                         const Eigen::VectorXd& y, int J) {
  if (J < 1) throw std::invalid_argument("multistep_uj: J must be >= 1");
  auto [xc, yc] = alt_nda_step(oracle, x, y);
  for (int j = 0; j < J; ++j) std::tie(xc, yc) = map_X(oracle, xc, yc);
  return {xc, yc};
}

SchurFactorization::SchurFactorization(const MinimaxOracle& oracle, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y)
    : hxx_(oracle.hess_xx(x, y)), hxy_(oracle.hess_xy(x, y)) {
  if (hxx_.info() != Eigen::Success)
    throw std::runtime_error("SchurFactorization: x block factorization failed");
  Eigen::MatrixXd N = oracle.hess_yx(x, y) * hxx_.solve(hxy_) - oracle.hess_yy(x, y);
  n_.compute(N);
  g_schur_constructions.fetch_add(1, std::memory_order_relaxed);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SchurFactorization::solve(
    const Eigen::VectorXd& gx, const Eigen::VectorXd& gy) const {
  Eigen::VectorXd w = hxx_.solve(gx);
  Eigen::VectorXd dy = n_.solve(hxy_.transpose() * w - gy);
  Eigen::VectorXd dx = w - hxx_.solve(hxy_ * dy);
  return {std::move(dx), std::move(dy)};
}

long SchurFactorization::constructed_count() { return g_schur_constructions.load(); }

void SchurFactorization::reset_constructed_count() { g_schur_constructions.store(0); }

Eigen::VectorXd lambda_op(const MinimaxOracle& oracle, const Eigen::VectorXd& z) {
  const int dx = oracle.dim_x();
  Eigen::VectorXd out(z.size());
  out.head(dx) = oracle.grad_x(z.head(dx), z.tail(z.size() - dx));
  out.tail(z.size() - dx) = oracle.grad_y(z.head(dx), z.tail(z.size() - dx));
  return out;
}

namespace {

Eigen::VectorXd apply_schur(const SchurFactorization& fac, const MinimaxOracle& oracle,
                            const Eigen::VectorXd& z, const Eigen::VectorXd& at) {
  const int dx = oracle.dim_x();
  auto [sx, sy] = fac.solve(at.head(dx), at.tail(at.size() - dx));
  Eigen::VectorXd out(z.size());
  out.head(dx) = z.head(dx) - sx;
  out.tail(z.size() - dx) = z.tail(z.size() - dx) - sy;
  return out;
}

}  // namespace

Eigen::VectorXd full_newton_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z) {
  const int dx = oracle.dim_x();
  SchurFactorization fac(oracle, z.head(dx), z.tail(z.size() - dx));
  return apply_schur(fac, oracle, z, lambda_op(oracle, z));
}

Eigen::VectorXd cubic_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z) {
  const int dx = oracle.dim_x();
  SchurFactorization fac(oracle, z.head(dx), z.tail(z.size() - dx));
  Eigen::VectorXd half = apply_schur(fac, oracle, z, lambda_op(oracle, z));
  return apply_schur(fac, oracle, half, lambda_op(oracle, half));
}

Eigen::VectorXd ogda_step(const MinimaxOracle& oracle, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& z_prev, double eta) {
  const int dx = oracle.dim_x();
  auto g = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd out(w.size());
    out.head(dx) = oracle.grad_x(w.head(dx), w.tail(w.size() - dx));
    out.tail(w.size() - dx) = -oracle.grad_y(w.head(dx), w.tail(w.size() - dx));
    return out;
  };
  return z - 2.0 * eta * g(z) + eta * g(z_prev);
}

RunTrace run_local(const MinimaxOracle& oracle, LocalMethod method, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& y0, const LocalRunOptions& opts) {
  const int dx = oracle.dim_x();
  const int dy = oracle.dim_y();
  Eigen::VectorXd z(dx + dy);
  z.head(dx) = x0;
  z.tail(dy) = y0;
  Eigen::VectorXd z_prev = z;

  RunTrace trace;
  bool have_ref = opts.reference.size() > 0;
  if (have_ref) {
    if (opts.reference.size() != dx + dy) throw std::invalid_argument("run_local: reference size");
    trace.add_extra_column("err");
  }

  long k = 0;
  double err0 = 0.0;
  while (true) {
    Eigen::VectorXd gx = oracle.grad_x(z.head(dx), z.tail(dy));
    Eigen::VectorXd gy = oracle.grad_y(z.head(dx), z.tail(dy));
    TraceRow row;
    row.iter = k;
    row.grad_x_norm = gx.norm();
    row.grad_y_norm = gy.norm();
    trace.rows.push_back(row);
    double err = 0.0;
    if (have_ref) {
      err = (z - opts.reference).norm();
      if (k == 0) err0 = err;
      trace.extra_cols[0].push_back(err);
    }

    double gnorm = std::sqrt(gx.squaredNorm() + gy.squaredNorm());
    if (opts.grad_tol > 0.0 && gnorm <= opts.grad_tol) {
      trace.converged = true;
      break;
    }
    if (have_ref && opts.rel_tol > 0.0 && err0 > 0.0 && err / err0 <= opts.rel_tol) {
      trace.converged = true;
      break;
    }
    if (k >= opts.max_iters) break;

    Eigen::VectorXd znext;
    try {
      switch (method) {
        case LocalMethod::AltGda: {
          Eigen::VectorXd xp = z.head(dx) - opts.alpha * gx;
          Eigen::VectorXd yp = z.tail(dy) + opts.beta * oracle.grad_y(xp, z.tail(dy));
          znext.resize(dx + dy);
          znext.head(dx) = xp;
          znext.tail(dy) = yp;
          break;
        }
        case LocalMethod::AltNda: {
          auto [xp, yp] = alt_nda_step(oracle, z.head(dx), z.tail(dy));
          znext.resize(dx + dy);
          znext.head(dx) = xp;
          znext.tail(dy) = yp;
          break;
        }
        case LocalMethod::MultistepUj: {
          auto [xp, yp] = multistep_uj(oracle, z.head(dx), z.tail(dy), opts.uj_steps);
          znext.resize(dx + dy);
          znext.head(dx) = xp;
          znext.tail(dy) = yp;
          break;
        }
        case LocalMethod::FullNewton:
          znext = full_newton_step(oracle, z);
          break;
        case LocalMethod::Cubic:
          znext = cubic_step(oracle, z);
          break;
        case LocalMethod::Ogda:
          znext = ogda_step(oracle, z, z_prev, opts.eta);
          break;
      }
    } catch (const std::runtime_error&) {
      trace.diverged = true;
      break;
    }
    if (!znext.allFinite()) {
      trace.diverged = true;
      break;
    }
    z_prev = z;
    z = std::move(znext);
    ++k;
  }

  trace.final_x = z.head(dx);
  trace.final_y = z.tail(dy);
  return trace;
}

std::optional<double> rate_order(const std::vector<double>& errors, double floor) {
  std::vector<double> usable;
  for (double e : errors) {
    if (!(e > floor) || !std::isfinite(e)) break;  // truncate at resolution loss
    usable.push_back(e);
  }
  if (usable.size() < 4) return std::nullopt;

  std::vector<double> orders;
  for (size_t k = 1; k + 1 < usable.size(); ++k) {
    double prev = usable[k - 1], cur = usable[k], next = usable[k + 1];
    if (!(prev > cur && cur > next)) continue;  // only strictly decreasing triples
    double den = std::log(cur / prev);
    double num = std::log(next / cur);
    if (std::abs(den) < 1e-12) continue;
    orders.push_back(num / den);
  }
  if (orders.size() < 2) return std::nullopt;
  if (orders.size() > 5) orders.erase(orders.begin(), orders.end() - 5);
  std::sort(orders.begin(), orders.end());
  size_t mid = orders.size() / 2;
  if (orders.size() % 2 == 1) return orders[mid];
  return 0.5 * (orders[mid - 1] + orders[mid]);
}

}  // namespace grand
