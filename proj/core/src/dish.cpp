#include "grand/dish.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "grand/minimax_oracle.hpp"

namespace grand {

AgentSchedule::AgentSchedule(Kind kind, UpdateMode mode, std::uint64_t seed)
    : kind_(kind), mode_(mode) {
  (void)seed;
}

AgentSchedule::AgentSchedule(const AgentSchedule& other)
    : kind_(other.kind_),
      mode_(other.mode_),
      rng_(other.rng_ ? std::make_unique<Rng>(*other.rng_) : nullptr),
      next_switch_(other.next_switch_),
      expected_k_(other.expected_k_),
      lo_(other.lo_),
      hi_(other.hi_),
      mean_(other.mean_),
      sd_(other.sd_),
      offset_(other.offset_) {}

AgentSchedule& AgentSchedule::operator=(const AgentSchedule& other) {
  if (this != &other) {
    AgentSchedule tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

AgentSchedule AgentSchedule::always_gradient() {
  return AgentSchedule(Kind::Fixed, UpdateMode::Gradient, 0);
}

AgentSchedule AgentSchedule::always_newton() {
  return AgentSchedule(Kind::Fixed, UpdateMode::Newton, 0);
}

AgentSchedule AgentSchedule::fixed(UpdateMode mode) { return AgentSchedule(Kind::Fixed, mode, 0); }

AgentSchedule AgentSchedule::switch_uniform(std::uint64_t seed, int lo, int hi) {
  if (lo < 1 || hi < lo) throw std::invalid_argument("switch_uniform: bad holding bounds");
  AgentSchedule s(Kind::Uniform, UpdateMode::Gradient, seed);
  s.lo_ = lo;
  s.hi_ = hi;
  s.seed_stream(seed);
  return s;
}

AgentSchedule AgentSchedule::switch_lognormal(std::uint64_t seed, double mean, double sd,
                                              int offset) {
  AgentSchedule s(Kind::Lognormal, UpdateMode::Gradient, seed);
  s.mean_ = mean;
  s.sd_ = sd;
  s.offset_ = offset;
  s.seed_stream(seed);
  return s;
}

void AgentSchedule::seed_stream(std::uint64_t seed) {
  rng_ = std::make_unique<Rng>(seed);
  mode_ = rng_->uniform() < 0.5 ? UpdateMode::Gradient : UpdateMode::Newton;
  next_switch_ = draw_interval();
}

long AgentSchedule::draw_interval() {
  if (kind_ == Kind::Uniform) return rng_->uniform_int(lo_, hi_);
  if (kind_ == Kind::Lognormal) {
    long t = std::lround(std::exp(rng_->normal(mean_, sd_))) + offset_;
    return std::max(t, 1L);
  }
  return -1;
}

UpdateMode AgentSchedule::advance(long k) {
  if (k != expected_k_) throw std::logic_error("AgentSchedule: rounds must advance one at a time");
  ++expected_k_;
  if (kind_ == Kind::Fixed) return mode_;
  if (k == next_switch_) {
    mode_ = mode_ == UpdateMode::Gradient ? UpdateMode::Newton : UpdateMode::Gradient;
    next_switch_ = k + draw_interval();
  }
  return mode_;
}

std::vector<AgentSchedule> schedules_all_gradient(int n) {
  std::vector<AgentSchedule> out;
  for (int i = 0; i < n; ++i) out.push_back(AgentSchedule::always_gradient());
  return out;
}

std::vector<AgentSchedule> schedules_all_newton(int n) {
  std::vector<AgentSchedule> out;
  for (int i = 0; i < n; ++i) out.push_back(AgentSchedule::always_newton());
  return out;
}

std::vector<AgentSchedule> schedules_first_newton(int n, int count) {
  if (count < 0 || count > n) throw std::invalid_argument("schedules_first_newton: bad count");
  std::vector<AgentSchedule> out;
  for (int i = 0; i < n; ++i)
    out.push_back(i < count ? AgentSchedule::always_newton() : AgentSchedule::always_gradient());
  return out;
}

std::vector<AgentSchedule> schedules_switch_uniform(int n, std::uint64_t seed) {
  std::vector<AgentSchedule> out;
  for (int i = 0; i < n; ++i)
    out.push_back(AgentSchedule::switch_uniform(seed + static_cast<std::uint64_t>(i)));
  return out;
}

std::vector<AgentSchedule> schedules_switch_lognormal(int n, std::uint64_t seed) {
  std::vector<AgentSchedule> out;
  for (int i = 0; i < n; ++i)
    out.push_back(AgentSchedule::switch_lognormal(seed + static_cast<std::uint64_t>(i)));
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> scaling_choice(UpdateMode mode, const SmoothOracle& f,
                                                           const Eigen::VectorXd& x_i, double mu) {
  const int d = f.dim();
  if (mode == UpdateMode::Gradient) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    return {id, id};
  }
  Eigen::MatrixXd Q = f.hessian(x_i) + mu * Eigen::MatrixXd::Identity(d, d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("scaling_choice: local curvature factorization failed");
  Eigen::MatrixXd P = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  return {0.5 * (P + P.transpose()), std::move(Q)};
}

Eigen::VectorXd DishState::stack_x() const {
  const int n = static_cast<int>(x.size());
  const int d = n ? static_cast<int>(x.front().size()) : 0;
  Eigen::VectorXd out(n * d);
  for (int i = 0; i < n; ++i) out.segment(i * d, d) = x[static_cast<size_t>(i)];
  return out;
}

Eigen::VectorXd DishState::stack_y() const {
  const int n = static_cast<int>(y.size());
  const int d = n ? static_cast<int>(y.front().size()) : 0;
  Eigen::VectorXd out(n * d);
  for (int i = 0; i < n; ++i) out.segment(i * d, d) = y[static_cast<size_t>(i)];
  return out;
}

DishState DishState::from_stacked(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n, int d) {
  if (x.size() != n * d || y.size() != n * d)
    throw std::invalid_argument("DishState: stacked size mismatch");
  DishState st;
  st.x.reserve(static_cast<size_t>(n));
  st.y.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    st.x.push_back(x.segment(i * d, d));
    st.y.push_back(y.segment(i * d, d));
  }
  return st;
}

DishStepsizes DishStepsizes::uniform(int n, double a, double b) {
  return {Eigen::VectorXd::Constant(n, a), Eigen::VectorXd::Constant(n, b)};
}

DishRoundResult dish_round(const ConsensusProblem& prob, const DishState& state,
                           std::vector<AgentSchedule>& schedules, const DishStepsizes& steps,
                           bool newton_unit_primal_step) {
  const int n = prob.n_agents();
  const int d = prob.agent_dim;
  if (static_cast<int>(state.x.size()) != n || static_cast<int>(schedules.size()) != n ||
      steps.a.size() != n || steps.b.size() != n)
    throw std::invalid_argument("dish_round: sizes disagree with problem");

  DishRoundResult out;
  out.state.x.resize(static_cast<size_t>(n));
  out.state.y.resize(static_cast<size_t>(n));
  out.state.k = state.k + 1;
  const Eigen::MatrixXd& Z = prob.zm.Z;
  double gx2 = 0.0, gy2 = 0.0;

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& xi = state.x[static_cast<size_t>(i)];
    const Eigen::VectorXd& yi = state.y[static_cast<size_t>(i)];
    UpdateMode mode = schedules[static_cast<size_t>(i)].advance(state.k);

    // mixing terms read only round-k values of self and direct neighbors
    Eigen::VectorXd mix_dual = (1.0 - Z(i, i)) * (yi + prob.mu * xi);
    Eigen::VectorXd mix_primal = (1.0 - Z(i, i)) * xi;
    for (int j = 0; j < n; ++j) {
      if (j == i || Z(i, j) == 0.0) continue;
      mix_dual -= Z(i, j) * (state.y[static_cast<size_t>(j)] + prob.mu * state.x[static_cast<size_t>(j)]);
      mix_primal -= Z(i, j) * state.x[static_cast<size_t>(j)];
    }
    Eigen::VectorXd grad_i = prob.agents[static_cast<size_t>(i)]->gradient(xi) + mix_dual;

    auto [P, Q] = scaling_choice(mode, *prob.agents[static_cast<size_t>(i)], xi, prob.mu);
    double a_i = (mode == UpdateMode::Newton && newton_unit_primal_step) ? 1.0 : steps.a(i);

    out.state.x[static_cast<size_t>(i)] = xi - a_i * (P * grad_i);
    out.state.y[static_cast<size_t>(i)] = yi + steps.b(i) * (Q * mix_primal);
    gx2 += grad_i.squaredNorm();
    gy2 += mix_primal.squaredNorm();
  }
  (void)d;
  out.grad_x_norm = std::sqrt(gx2);
  out.grad_y_norm = std::sqrt(gy2);
  return out;
}

double relative_error(const Eigen::VectorXd& stacked_x, const Eigen::VectorXd& omega_star,
                      const Eigen::VectorXd& stacked_x0) {
  const int d = static_cast<int>(omega_star.size());
  if (stacked_x.size() % d != 0 || stacked_x.size() != stacked_x0.size())
    throw std::invalid_argument("relative_error: size mismatch");
  const int n = static_cast<int>(stacked_x.size()) / d;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (stacked_x.segment(i * d, d) - omega_star).squaredNorm();
    den += (stacked_x0.segment(i * d, d) - omega_star).squaredNorm();
  }
  if (den == 0.0) throw std::invalid_argument("relative_error: start coincides with target");
  return std::sqrt(num / den);
}

RunTrace run_dish(const ConsensusProblem& prob, std::vector<AgentSchedule> schedules,
                  const Eigen::VectorXd& omega_star, const DishRunOptions& opts) {
  const int n = prob.n_agents();
  const int d = prob.agent_dim;
  Eigen::VectorXd x0 = opts.x0.size() ? opts.x0 : Eigen::VectorXd::Zero(n * d);
  if (x0.size() != n * d) throw std::invalid_argument("run_dish: x0 size mismatch");
  DishState st = DishState::from_stacked(x0, Eigen::VectorXd::Zero(n * d), n, d);

  RunTrace trace;
  trace.add_extra_column("rel_error");

  long k = 0;
  double last_gx = 0.0, last_gy = 0.0;
  while (true) {
    Eigen::VectorXd xs = st.stack_x();
    double rel = relative_error(xs, omega_star, x0);
    if (!std::isfinite(rel)) {
      trace.diverged = true;
      break;
    }

    DishRoundResult next;
    bool stepped = false;
    bool stop_now = (opts.rel_error_tol > 0.0 && rel <= opts.rel_error_tol);
    if (!stop_now && k < opts.max_iters) {
      next = dish_round(prob, st, schedules, opts.steps, opts.newton_unit_primal_step);
      stepped = true;
      last_gx = next.grad_x_norm;
      last_gy = next.grad_y_norm;
    } else {
      // final iterate still needs its gradient record; probe copies keep schedules intact
      auto probe = schedules;
      auto res = dish_round(prob, st, probe, opts.steps, opts.newton_unit_primal_step);
      last_gx = res.grad_x_norm;
      last_gy = res.grad_y_norm;
    }

    TraceRow row;
    row.iter = k;
    row.grad_x_norm = last_gx;
    row.grad_y_norm = last_gy;
    trace.rows.push_back(row);
    trace.extra_cols[0].push_back(rel);

    if (stop_now) {
      trace.converged = true;
      break;
    }
    if (opts.grad_tol > 0.0 && last_gx + last_gy <= opts.grad_tol) {
      trace.converged = true;
      if (stepped) st = std::move(next.state);
      break;
    }
    if (!stepped) break;  // hit max_iters
    if (rel > 1e10) {
      trace.diverged = true;
      break;
    }
    st = std::move(next.state);
    ++k;
  }

  trace.final_x = st.stack_x();
  trace.final_y = st.stack_y();
  return trace;
}

namespace {

struct DishRuleState {
  ConsensusProblem prob;
  std::vector<AgentSchedule> schedules;
  DishStepsizes steps;
  bool unit_newton;
  long cached_k = -1;
  std::vector<UpdateMode> modes;

  void refresh(long k) {
    if (k == cached_k) return;
    if (k != cached_k + 1 && cached_k != -1)
      throw std::logic_error("dish_direction_rule: iterations must advance one at a time");
    modes.resize(schedules.size());
    for (size_t i = 0; i < schedules.size(); ++i) modes[i] = schedules[i].advance(k);
    cached_k = k;
  }
};

}  // namespace

std::unique_ptr<DirectionRule> dish_direction_rule(const ConsensusProblem& prob,
                                                   std::vector<AgentSchedule> schedules,
                                                   const DishStepsizes& steps,
                                                   bool newton_unit_primal_step) {
  const int n = prob.n_agents();
  const int d = prob.agent_dim;
  if (static_cast<int>(schedules.size()) != n || steps.a.size() != n || steps.b.size() != n)
    throw std::invalid_argument("dish_direction_rule: sizes disagree with problem");

  // eigenvalue envelopes over every mode each agent can visit
  double p_lo = std::numeric_limits<double>::infinity(), p_hi = 0.0;
  double q_lo = std::numeric_limits<double>::infinity(), q_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& f = *prob.agents[static_cast<size_t>(i)];
    bool can_grad = true, can_newton = true;
    if (!schedules[static_cast<size_t>(i)].switching()) {
      can_grad = schedules[static_cast<size_t>(i)].current() == UpdateMode::Gradient;
      can_newton = !can_grad;
    }
    if (can_grad) {
      p_lo = std::min(p_lo, steps.a(i));
      p_hi = std::max(p_hi, steps.a(i));
      q_lo = std::min(q_lo, steps.b(i));
      q_hi = std::max(q_hi, steps.b(i));
    }
    if (can_newton) {
      double a_i = newton_unit_primal_step ? 1.0 : steps.a(i);
      p_lo = std::min(p_lo, a_i / (f.smoothness() + prob.mu));
      p_hi = std::max(p_hi, a_i / (f.strong_convexity() + prob.mu));
      q_lo = std::min(q_lo, steps.b(i) * (f.strong_convexity() + prob.mu));
      q_hi = std::max(q_hi, steps.b(i) * (f.smoothness() + prob.mu));
    }
  }
  DirectionCertificates certs;
  certs.Gamma_s = p_hi;
  certs.gamma_s = p_lo * p_lo / p_hi;
  certs.Gamma_t = q_hi;
  certs.gamma_t = q_lo * q_lo / q_hi;

  auto rs = std::make_shared<DishRuleState>(
      DishRuleState{prob, std::move(schedules), steps, newton_unit_primal_step, -1, {}});

  MatrixProvider P = [rs, n, d](const MinimaxOracle&, const Eigen::VectorXd& x,
                                const Eigen::VectorXd&, long k) {
    rs->refresh(k);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) {
      auto [Pi, Qi] = scaling_choice(rs->modes[static_cast<size_t>(i)],
                                     *rs->prob.agents[static_cast<size_t>(i)],
                                     x.segment(i * d, d), rs->prob.mu);
      double a_i = (rs->modes[static_cast<size_t>(i)] == UpdateMode::Newton && rs->unit_newton)
                       ? 1.0
                       : rs->steps.a(i);
      out.block(i * d, i * d, d, d) = a_i * Pi;
    }
    return out;
  };
  MatrixProvider Q = [rs, n, d](const MinimaxOracle&, const Eigen::VectorXd& x,
                                const Eigen::VectorXd&, long k) {
    rs->refresh(k);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) {
      auto [Pi, Qi] = scaling_choice(rs->modes[static_cast<size_t>(i)],
                                     *rs->prob.agents[static_cast<size_t>(i)],
                                     x.segment(i * d, d), rs->prob.mu);
      out.block(i * d, i * d, d, d) = rs->steps.b(i) * Qi;
    }
    return out;
  };
  return scaled_rule(std::move(P), std::move(Q), certs, "dish");
}

double dish_equivalence_check(std::uint64_t seed, int trials, double alpha, double beta) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    int n = 3 + static_cast<int>(rng.below(5));
    int d = 2 + static_cast<int>(rng.below(3));
    Graph g = generate_erdos_renyi(n, 0.5 + 0.5 * rng.uniform(), seed + 100 + static_cast<std::uint64_t>(t));
    double mu = (t % 2 == 0) ? 0.0 : 0.7;

    std::vector<SmoothOraclePtr> agents;
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixXd M(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) M(r, c) = rng.normal();
      Eigen::MatrixXd H = M.transpose() * M / d + (0.2 + rng.uniform()) * Eigen::MatrixXd::Identity(d, d);
      Eigen::VectorXd c(d);
      for (int r = 0; r < d; ++r) c(r) = rng.normal();
      agents.push_back(std::make_shared<QuadraticOracle>(H, c));
    }
    ConsensusProblem prob = make_consensus_problem(std::move(agents), build_consensus_matrix(g), mu);
    auto L = dc_lagrangian(prob);

    Eigen::VectorXd xs(n * d), ys(n * d);
    for (int r = 0; r < n * d; ++r) {
      xs(r) = rng.normal();
      ys(r) = rng.normal();
    }

    auto schedules = schedules_all_gradient(n);
    DishState st = DishState::from_stacked(xs, ys, n, d);
    auto res = dish_round(prob, st, schedules, DishStepsizes::uniform(n, alpha, beta), false);

    auto rule = gradient_rule();
    IterateState ref = grand_step(*L, *rule, {xs, ys, 0}, alpha, beta, false);

    double dev = std::max((res.state.stack_x() - ref.x).lpNorm<Eigen::Infinity>(),
                          (res.state.stack_y() - ref.y).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, dev);
  }
  return worst;
}

}  // namespace grand
