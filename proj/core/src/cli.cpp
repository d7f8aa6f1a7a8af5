#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "grand/audit.hpp"
#include "grand/dish.hpp"
#include "grand/engine.hpp"
#include "grand/harness.hpp"
#include "grand/netflow.hpp"
#include "grand/newton_local.hpp"
#include "grand/rng.hpp"

namespace grand {

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
  bool certified = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "config file (JSON)");
  sub->add_option("--seed", o.seed, "override the config seed");
  sub->add_option("--out", o.out, "override the output directory");
  sub->add_flag("--certified", o.certified, "run with theorem stepsizes and per-step checks");
  sub->add_flag("--quiet", o.quiet, "suppress progress output");
}

ExperimentConfig resolve_config(const std::string& kind, const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? default_config(kind) : load_config(o.config);
  if (cfg.kind != kind)
    throw config_error("config: kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.certified) cfg.certified = true;
  return cfg;
}

void say(bool quiet, const std::string& line) {
  if (!quiet) std::cout << line << '\n';
}

std::vector<double> trace_metric_column(const RunTrace& trace, const std::string& name) {
  for (size_t c = 0; c < trace.extra_names.size(); ++c)
    if (trace.extra_names[c] == name) return trace.extra_cols[c];
  return {};
}

std::string save_trace(const RunTrace& trace, const ExperimentConfig& cfg,
                       const std::string& method) {
  std::string name = method + ".csv";
  trace.save_csv((fs::path(cfg.out_dir) / name).string());
  return name;
}

// Generated problems must pass a derivative audit before any run starts.
void audit_generated(const MinimaxOracle& oracle, std::uint64_t seed) {
  Rng rng(seed ^ 0x5bd1e995u);
  if (fd_minimax_gradient_error(oracle, rng, 1) > 1e-5)
    throw std::runtime_error("generated problem failed the gradient audit");
}

// ---- dish ---------------------------------------------------------------------

std::vector<AgentSchedule> dish_schedules(const std::string& method, int n, std::uint64_t seed) {
  if (method == "dish-g") return schedules_all_gradient(n);
  if (method == "dish-n") return schedules_all_newton(n);
  if (method == "dish-gn-u") return schedules_switch_uniform(n, seed);
  if (method == "dish-gn-ln") return schedules_switch_lognormal(n, seed);
  if (method.rfind("dish-", 0) == 0) {
    std::string tail = method.substr(5);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return std::isdigit(c); })) {
      int k = std::stoi(tail);
      if (k < 0 || k > n) throw config_error("method " + method + ": agent count out of range");
      return schedules_first_newton(n, k);
    }
  }
  throw config_error("unknown dish method '" + method + "'");
}

struct CertifiedSetup {
  double alpha = 0.0, beta = 0.0, p_psi = 0.0, delta = 0.0;
};

CertifiedSetup certified_stepsizes(const MinimaxOracle& oracle, DirectionRule& rule, double p_psi) {
  CertifiedSetup cs;
  cs.p_psi = p_psi;
  TheoremConstants tc = theorem_constants(oracle.constants(), rule.certificates(oracle), false);
  cs.alpha = tc.alpha_max;
  cs.beta = std::min(tc.beta_bound(cs.alpha), 0.99 * tc.beta_pl_cap(p_psi));
  cs.delta = tc.delta(cs.alpha, cs.beta, p_psi);
  return cs;
}

int run_certified_engine(const MinimaxOracle& oracle, DirectionRule& rule,
                         const CertifiedSetup& cs, double xi_psi, const ExperimentConfig& cfg,
                         const std::string& method, std::vector<SummaryRow>& rows,
                         std::vector<std::string>& outputs, bool quiet) {
  RunOptions ro;
  ro.alpha = cs.alpha;
  ro.beta = cs.beta;
  ro.stop.max_iters = cfg.stop.max_iters;
  ro.diagnostics = true;
  ro.certified = true;
  ro.p_psi = cs.p_psi;
  ro.xi_psi = xi_psi;
  ro.audit = true;
  ro.record_timing = cfg.record_timing;
  RunTrace trace = run(oracle, rule, Eigen::VectorXd::Zero(oracle.dim_x()),
                       Eigen::VectorXd::Zero(oracle.dim_y()), ro);

  SummaryRow row;
  row.method = method;
  row.alpha = cs.alpha;
  row.beta = cs.beta;
  row.converged = trace.converged;
  row.iterations = trace.iterations();
  row.final_metric = trace.rows.back().grad_x_norm + trace.rows.back().grad_y_norm;
  rows.push_back(row);
  outputs.push_back(save_trace(trace, cfg, method));

  long bad = trace.certified_violations + trace.prefix_bound_violations + trace.audit_violations;
  say(quiet, method + ": " + std::to_string(trace.iterations()) + " certified iterations, " +
                 std::to_string(bad) + " violations (delta=" + format_g17(cs.delta) + ")");
  if (trace.diverged || bad > 0) return 1;
  return 0;
}

int run_dish_experiment(const ExperimentConfig& cfg, bool quiet) {
  GeneratedConsensus gc =
      cfg.problem == "setup1" ? gen_setup1(cfg.seed, cfg.mu) : gen_setup2(cfg.seed, cfg.mu);
  audit_generated(*dc_lagrangian(gc.prob), cfg.seed);
  const int n = gc.prob.n_agents();
  std::vector<std::string> methods = cfg.methods;
  if (methods.empty()) methods = {"dish-g", "dish-5", "dish-n", "dish-gn-u", "dish-gn-ln"};

  fs::create_directories(cfg.out_dir);
  std::vector<SummaryRow> rows;
  std::vector<std::string> outputs;
  int rc = 0;

  for (const auto& method : methods) {
    if (cfg.certified) {
      auto oracle = dc_lagrangian(gc.prob);
      auto rule = dish_direction_rule(gc.prob, dish_schedules(method, n, cfg.seed),
                                      DishStepsizes::uniform(n, 1.0, 1.0), false);
      CertifiedSetup cs = certified_stepsizes(*oracle, *rule, pl_constant_dc(gc.prob));
      // max of psi is the saddle value, attained at the consensus optimum
      Eigen::VectorXd consensus(oracle->dim_x());
      for (int i = 0; i < n; ++i)
        consensus.segment(i * gc.prob.agent_dim, gc.prob.agent_dim) = gc.omega_star;
      double xi = oracle->value(consensus, Eigen::VectorXd::Zero(oracle->dim_y()));
      rc = std::max(rc,
                    run_certified_engine(*oracle, *rule, cs, xi, cfg, method, rows, outputs, quiet));
      continue;
    }

    auto make_opts = [&](double a, double b) {
      DishRunOptions opts;
      opts.steps = DishStepsizes::uniform(n, a, b);
      opts.max_iters = cfg.stop.max_iters;
      opts.rel_error_tol = cfg.stop.threshold;
      return opts;
    };
    GridRunner runner = [&](double a, double b) {
      RunTrace t = run_dish(gc.prob, dish_schedules(method, n, cfg.seed), gc.omega_star,
                            make_opts(a, b));
      RunSummary s;
      s.converged = t.converged && !t.diverged;
      s.iterations = t.iterations();
      s.final_metric = t.extra_cols[0].back();
      return s;
    };
    // unit primal stepsize is hard-wired for Newton-mode agents
    std::vector<double> alphas = method == "dish-n" ? std::vector<double>{1.0} : cfg.alpha_grid;
    GridResult grid = grid_search(alphas, cfg.beta_grid, runner, cfg.workers);

    SummaryRow row;
    row.method = method;
    if (!grid.best) {
      say(quiet, method + ": no convergent stepsize configuration");
      rows.push_back(row);
      rc = std::max(rc, 1);
      continue;
    }
    const GridOutcome& best = grid.best_outcome();
    RunTrace trace = run_dish(gc.prob, dish_schedules(method, n, cfg.seed), gc.omega_star,
                              make_opts(best.alpha, best.beta));
    RateFit fit = fit_log_rate(trace_metric_column(trace, "rel_error"));
    row.alpha = best.alpha;
    row.beta = best.beta;
    row.converged = best.summary.converged;
    row.iterations = best.summary.iterations;
    row.final_metric = best.summary.final_metric;
    row.fit_slope = fit.slope;
    row.fit_r2 = fit.r2;
    rows.push_back(row);
    outputs.push_back(save_trace(trace, cfg, method));
    say(quiet, method + ": " + std::to_string(row.iterations) + " iterations (alpha=" +
                   format_g17(best.alpha) + ", beta=" + format_g17(best.beta) + ")");
  }

  write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), rows);
  outputs.push_back("summary.csv");
  write_meta_json((fs::path(cfg.out_dir) / "meta.json").string(), cfg, outputs);
  return rc;
}

// ---- netflow -------------------------------------------------------------------

EdgeModeMap netflow_modes(const std::string& method, int m, std::uint64_t seed) {
  if (method == "all-gradient") return EdgeModeMap::all_gradient(m);
  if (method == "all-newton") return EdgeModeMap::all_newton(m);
  if (method == "switching") return EdgeModeMap::switching(m, seed);
  if (method.rfind("newton-", 0) == 0) {
    std::string tail = method.substr(7);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return std::isdigit(c); })) {
      int k = std::stoi(tail);
      if (k < 0 || k > m)
        throw config_error("method " + method + ": edge count out of range (graph has " +
                           std::to_string(m) + " edges)");
      return EdgeModeMap::first_newton(m, k);
    }
  }
  throw config_error("unknown netflow method '" + method + "'");
}

int run_netflow_experiment(const ExperimentConfig& cfg, bool quiet) {
  NetworkFlowProblem prob = gen_netflow(cfg.seed);
  audit_generated(*nf_lagrangian(prob), cfg.seed);
  const int m = prob.n_edges();
  std::vector<std::string> methods = cfg.methods;
  if (methods.empty()) methods = {"all-gradient", "newton-3", "newton-16", "all-newton"};

  fs::create_directories(cfg.out_dir);
  std::vector<SummaryRow> rows;
  std::vector<std::string> outputs;
  int rc = 0;

  for (const auto& method : methods) {
    if (cfg.certified) {
      auto oracle = nf_lagrangian(prob);
      auto rule = netflow_direction_rule(prob, netflow_modes(method, m, cfg.seed), 1.0, 1.0);
      CertifiedSetup cs = certified_stepsizes(*oracle, *rule, pl_constant_nf(prob));
      // quadratic costs admit an exact optimality-system solve for max psi
      auto [xs, ys] = netflow_kkt_reference(prob);
      double xi = oracle->value(xs, ys);
      rc = std::max(rc,
                    run_certified_engine(*oracle, *rule, cs, xi, cfg, method, rows, outputs, quiet));
      continue;
    }

    GridRunner runner = [&](double a, double b) {
      NetflowRunOptions opts;
      opts.a = a;
      opts.b = b;
      opts.max_iters = cfg.stop.max_iters;
      opts.grad_tol = cfg.stop.threshold;
      RunTrace t = run_netflow(prob, netflow_modes(method, m, cfg.seed), opts);
      RunSummary s;
      s.converged = t.converged && !t.diverged;
      s.iterations = t.iterations();
      s.final_metric = t.extra_cols[1].back();
      return s;
    };
    // all-newton pins every edge to unit primal steps, so the a axis is inert
    std::vector<double> alphas = method == "all-newton" ? std::vector<double>{1.0} : cfg.alpha_grid;
    GridResult grid = grid_search(alphas, cfg.beta_grid, runner, cfg.workers);

    SummaryRow row;
    row.method = method;
    if (!grid.best) {
      say(quiet, method + ": no convergent stepsize configuration");
      rows.push_back(row);
      rc = std::max(rc, 1);
      continue;
    }
    const GridOutcome& best = grid.best_outcome();
    NetflowRunOptions opts;
    opts.a = best.alpha;
    opts.b = best.beta;
    opts.max_iters = cfg.stop.max_iters;
    opts.grad_tol = cfg.stop.threshold;
    RunTrace trace = run_netflow(prob, netflow_modes(method, m, cfg.seed), opts);
    RateFit fit = fit_log_rate(trace_metric_column(trace, "lagrangian_grad_norm"));
    row.alpha = best.alpha;
    row.beta = best.beta;
    row.converged = best.summary.converged;
    row.iterations = best.summary.iterations;
    row.final_metric = best.summary.final_metric;
    row.fit_slope = fit.slope;
    row.fit_r2 = fit.r2;
    rows.push_back(row);
    outputs.push_back(save_trace(trace, cfg, method));
    say(quiet, method + ": " + std::to_string(row.iterations) + " iterations (a=" +
                   format_g17(best.alpha) + ", b=" + format_g17(best.beta) + ")");
  }

  write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), rows);
  outputs.push_back("summary.csv");
  write_meta_json((fs::path(cfg.out_dir) / "meta.json").string(), cfg, outputs);
  return rc;
}

// ---- minimax -------------------------------------------------------------------

Eigen::VectorXd stack_z(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd z(x.size() + y.size());
  z.head(x.size()) = x;
  z.tail(y.size()) = y;
  return z;
}

// Alt-GDA burn-in followed by a full Newton polish.
Eigen::VectorXd reference_saddle(const MinimaxOracle& oracle, long burn_iters, double burn_alpha,
                                 double burn_beta) {
  LocalRunOptions warm;
  warm.max_iters = burn_iters;
  warm.alpha = burn_alpha;
  warm.beta = burn_beta;
  RunTrace t = run_local(oracle, LocalMethod::AltGda, Eigen::VectorXd::Zero(oracle.dim_x()),
                         Eigen::VectorXd::Zero(oracle.dim_y()), warm);
  if (t.diverged) throw std::runtime_error("reference_saddle: burn-in diverged");
  Eigen::VectorXd z = stack_z(t.final_x, t.final_y);
  for (int it = 0; it < 100; ++it) {
    if (lambda_op(oracle, z).norm() <= 1e-13) break;
    z = full_newton_step(oracle, z);
    if (!z.allFinite()) throw std::runtime_error("reference_saddle: Newton polish diverged");
  }
  if (lambda_op(oracle, z).norm() > 1e-10)
    throw std::runtime_error("reference_saddle: polish did not reach tolerance");
  return z;
}

struct MinimaxMethodResult {
  SummaryRow row;
  RunTrace trace;
  bool usable = false;
};

MinimaxMethodResult run_minimax_method(const MinimaxOracle& oracle, const std::string& method,
                                       const Eigen::VectorXd& z0, const Eigen::VectorXd& zstar,
                                       const ExperimentConfig& cfg) {
  MinimaxMethodResult res;
  res.row.method = method;
  const int dx = oracle.dim_x();
  const int dy = oracle.dim_y();
  Eigen::VectorXd x0 = z0.head(dx), y0 = z0.tail(dy);

  auto engine_variant = [&](bool newton, bool alternating) {
    GridRunner runner = [&](double a, double b) {
      auto rule = newton ? newton_rule() : gradient_rule();
      RunOptions ro;
      ro.alpha = a;
      ro.beta = b;
      ro.alternating = alternating;
      ro.stop.max_iters = cfg.stop.max_iters;
      ro.reference = zstar;
      ro.rel_tol = cfg.stop.threshold;
      RunTrace t = run(oracle, *rule, x0, y0, ro);
      RunSummary s;
      s.converged = t.converged && !t.diverged;
      s.iterations = t.iterations();
      s.final_metric = t.extra_cols.empty() ? 0.0 : t.extra_cols[0].back();
      return s;
    };
    GridResult grid = grid_search(cfg.alpha_grid, cfg.beta_grid, runner, cfg.workers);
    if (!grid.best) return;
    const GridOutcome& best = grid.best_outcome();
    auto rule = newton ? newton_rule() : gradient_rule();
    RunOptions ro;
    ro.alpha = best.alpha;
    ro.beta = best.beta;
    ro.alternating = alternating;
    ro.stop.max_iters = cfg.stop.max_iters;
    ro.reference = zstar;
    ro.rel_tol = cfg.stop.threshold;
    res.trace = run(oracle, *rule, x0, y0, ro);
    res.row.alpha = best.alpha;
    res.row.beta = best.beta;
    res.row.converged = best.summary.converged;
    res.row.iterations = best.summary.iterations;
    res.row.final_metric = best.summary.final_metric;
    res.usable = true;
  };

  auto local_variant = [&](LocalMethod lm, bool grid_eta, int uj = 1) {
    auto make_opts = [&](double eta) {
      LocalRunOptions lo;
      lo.max_iters = cfg.stop.max_iters;
      lo.rel_tol = cfg.stop.threshold;
      lo.reference = zstar;
      lo.uj_steps = uj;
      lo.eta = eta;
      lo.alpha = eta;
      lo.beta = eta;
      return lo;
    };
    double chosen = 1.0;
    if (grid_eta) {
      GridRunner runner = [&](double a, double) {
        RunTrace t = run_local(oracle, lm, x0, y0, make_opts(a));
        RunSummary s;
        s.converged = t.converged && !t.diverged;
        s.iterations = t.iterations();
        s.final_metric = t.extra_cols.empty() ? 0.0 : t.extra_cols[0].back();
        return s;
      };
      GridResult grid = grid_search(cfg.alpha_grid, {1.0}, runner, cfg.workers);
      if (!grid.best) return;
      chosen = grid.best_outcome().alpha;
    }
    res.trace = run_local(oracle, lm, x0, y0, make_opts(chosen));
    res.row.alpha = chosen;
    res.row.beta = grid_eta ? 0.0 : 1.0;
    res.row.converged = res.trace.converged && !res.trace.diverged;
    res.row.iterations = res.trace.iterations();
    auto err = trace_metric_column(res.trace, "err");
    res.row.final_metric = err.empty() ? 0.0 : err.back();
    res.usable = true;
  };

  if (method == "gda") engine_variant(false, false);
  else if (method == "alt-gda") engine_variant(false, true);
  else if (method == "nda") engine_variant(true, false);
  else if (method == "alt-nda-grand") engine_variant(true, true);
  else if (method == "ogda") local_variant(LocalMethod::Ogda, true);
  else if (method == "alt-nda") local_variant(LocalMethod::AltNda, false);
  else if (method == "full-newton") local_variant(LocalMethod::FullNewton, false);
  else if (method == "cubic") local_variant(LocalMethod::Cubic, false);
  else if (method.rfind("uj-", 0) == 0) {
    int j = std::stoi(method.substr(3));
    if (j < 1) throw config_error("method " + method + ": J must be >= 1");
    local_variant(LocalMethod::MultistepUj, false, j);
  } else {
    throw config_error("unknown minimax method '" + method + "'");
  }

  if (res.usable) {
    std::string col = res.trace.extra_names.empty() ? "" : res.trace.extra_names[0];
    RateFit fit = fit_log_rate(trace_metric_column(res.trace, col));
    res.row.fit_slope = fit.slope;
    res.row.fit_r2 = fit.r2;
  }
  return res;
}

int run_minimax_experiment(const ExperimentConfig& cfg, bool quiet) {
  StructuredMinimax sm;
  if (cfg.problem == "l2") {
    std::string path = cfg.dataset_path;
    if (!path.empty() && !fs::exists(path)) {
      std::cout << "warning: dataset " << path << " not found, using the synthetic fallback\n";
      path.clear();
    }
    sm = gen_minimax_l2(path, cfg.seed);
  } else {
    sm = gen_minimax_l4(cfg.seed);
  }
  auto oracle = structured_lagrangian(sm);
  audit_generated(*oracle, cfg.seed);

  std::vector<std::string> methods = cfg.methods;
  if (methods.empty())
    methods = cfg.problem == "l2"
                  ? std::vector<std::string>{"gda", "alt-gda", "ogda", "nda", "alt-nda"}
                  : std::vector<std::string>{"alt-nda", "uj-1", "full-newton", "cubic", "ogda"};

  // l4 runs start from the alternating burn-in point the paper uses; l2 from zeros
  Eigen::VectorXd z0;
  Eigen::VectorXd zstar;
  if (cfg.problem == "l2") {
    zstar = reference_saddle(*oracle, 0, 0.0, 0.0);
    z0 = Eigen::VectorXd::Zero(oracle->dim_x() + oracle->dim_y());
  } else {
    LocalRunOptions warm;
    warm.max_iters = 500;
    warm.alpha = 0.05;
    warm.beta = 0.05;
    RunTrace t = run_local(*oracle, LocalMethod::AltGda,
                           Eigen::VectorXd::Zero(oracle->dim_x()),
                           Eigen::VectorXd::Zero(oracle->dim_y()), warm);
    z0 = stack_z(t.final_x, t.final_y);
    zstar = reference_saddle(*oracle, 500, 0.05, 0.05);
  }

  if (cfg.certified) {
    // PL route needs W with full row rank; m_g = 0 since the regularizer is convex
    double p_psi = 0.0;
    try {
      p_psi = pl_constant_structured_fullrank(sm, 0.0);
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("certified mode unavailable for ") + cfg.problem + ": " +
                         e.what());
    }
    fs::create_directories(cfg.out_dir);
    std::vector<SummaryRow> rows;
    std::vector<std::string> outputs;
    auto rule = gradient_rule();
    CertifiedSetup cs = certified_stepsizes(*oracle, *rule, p_psi);
    double xi = oracle->value(zstar.head(oracle->dim_x()), zstar.tail(oracle->dim_y()));
    int rc = run_certified_engine(*oracle, *rule, cs, xi, cfg, "gda", rows, outputs, quiet);
    write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), rows);
    outputs.push_back("summary.csv");
    write_meta_json((fs::path(cfg.out_dir) / "meta.json").string(), cfg, outputs);
    return rc;
  }

  fs::create_directories(cfg.out_dir);
  std::vector<SummaryRow> rows;
  std::vector<std::string> outputs;
  int rc = 0;
  for (const auto& method : methods) {
    MinimaxMethodResult res = run_minimax_method(*oracle, method, z0, zstar, cfg);
    rows.push_back(res.row);
    if (!res.usable) {
      say(quiet, method + ": no convergent stepsize configuration");
      rc = std::max(rc, 1);
      continue;
    }
    outputs.push_back(save_trace(res.trace, cfg, method));
    say(quiet, method + ": " + std::to_string(res.row.iterations) + " iterations");
  }

  write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), rows);
  outputs.push_back("summary.csv");
  write_meta_json((fs::path(cfg.out_dir) / "meta.json").string(), cfg, outputs);
  return rc;
}

// ---- validate ------------------------------------------------------------------

int run_validate(std::uint64_t seed, bool quiet) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    if (!ok) ++failures;
    if (!quiet || !ok) std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << '\n';
  };
  auto guarded = [&](const std::string& name, const std::function<bool()>& body) {
    bool ok = false;
    std::string note;
    try {
      ok = body();
    } catch (const std::exception& e) {
      note = e.what();
    }
    check(note.empty() ? name : name + " (" + note + ")", ok);
  };

  guarded("consensus matrix rows sum to one and stay symmetric", [&] {
    Graph g = generate_erdos_renyi(8, 0.5, seed);
    ConsensusMatrix zm = build_consensus_matrix(g);
    bool sym = zm.Z.isApprox(zm.Z.transpose(), 1e-14);
    bool rows = (zm.Z.rowwise().sum() - Eigen::VectorXd::Ones(8)).lpNorm<Eigen::Infinity>() < 1e-12;
    return sym && rows && zm.gamma < 1.0;
  });

  guarded("weight matrix kernel holds consensus directions", [&] {
    Graph g = generate_erdos_renyi(6, 0.6, seed + 1);
    Eigen::MatrixXd W = build_weight_matrix(build_consensus_matrix(g), 3);
    Eigen::VectorXd ones = Eigen::VectorXd::Zero(18);
    for (int i = 0; i < 6; ++i) ones(i * 3) = 1.0;
    return (W * ones).lpNorm<Eigen::Infinity>() < 1e-12;
  });

  auto fd_clean = [&](const MinimaxOracle& oracle, std::uint64_t fd_seed, double grad_tol = 1e-6) {
    Rng ga(fd_seed), gb(fd_seed + 1);
    return fd_minimax_gradient_error(oracle, ga, 2) < grad_tol &&
           fd_minimax_hessian_error(oracle, gb, 1) < 1e-4;
  };

  guarded("consensus saddle derivatives match finite differences", [&] {
    GeneratedConsensus gc = gen_setup1(seed);
    return fd_clean(*dc_lagrangian(gc.prob), seed + 2);
  });

  guarded("flow saddle derivatives match finite differences", [&] {
    // lognormal edge curvature makes |L| large against ||Ex - pi||; the
    // difference quotient carries ~eps |L| / h of roundoff
    return fd_clean(*nf_lagrangian(gen_netflow(seed)), seed + 4, 1e-4);
  });

  guarded("regression saddle derivatives match finite differences", [&] {
    return fd_clean(*structured_lagrangian(gen_minimax_l2("", seed, 60)), seed + 6);
  });

  guarded("quartic saddle derivatives match finite differences", [&] {
    return fd_clean(*structured_lagrangian(gen_minimax_l4(seed)), seed + 8);
  });

  guarded("all-gradient rounds equal plain descent-ascent steps", [&] {
    return dish_equivalence_check(seed + 10, 10, 0.05, 0.05) <= 1e-12;
  });

  guarded("all-newton dual scalings invert the diagonal curvature", [&] {
    NetworkFlowProblem prob = gen_netflow(seed + 11);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(prob.n_edges());
    std::vector<UpdateMode> modes(static_cast<size_t>(prob.n_edges()), UpdateMode::Newton);
    auto pq = netflow_scalings(prob, x, modes);
    Eigen::VectorXd q_expected = diag_dual_hessian(prob, x).cwiseInverse();
    return (pq.second - q_expected).lpNorm<Eigen::Infinity>() < 1e-12;
  });

  guarded("flow rounds hold still at the optimality system solution", [&] {
    NetworkFlowProblem prob = gen_netflow(seed + 12);
    auto [xs, ys] = netflow_kkt_reference(prob);
    FlowState st = FlowState::zeros(prob, 0.1, 0.1);
    st.x = xs;
    st.y = ys;
    EdgeModeMap modes = EdgeModeMap::all_gradient(prob.n_edges());
    FlowState next = netflow_round(prob, st, modes);
    return (next.x - xs).lpNorm<Eigen::Infinity>() < 1e-8 &&
           (next.y - ys).lpNorm<Eigen::Infinity>() < 1e-8;
  });

  guarded("plain-rule stepsize constants take their closed-form values", [&] {
    HessianConstants hc{1.0, 2.0, 1.5, 1.5, 0.5};
    TheoremConstants tc = theorem_constants(hc, DirectionCertificates{});
    return std::abs(tc.c1 - 0.5) < 1e-15 && std::abs(tc.c2 - 0.5) < 1e-15;
  });

  guarded("order estimation recovers quadratic convergence", [&] {
    std::vector<double> errs;
    double e = 0.5;
    for (int i = 0; i < 12 && e > 0; ++i) {
      errs.push_back(e);
      e = e * e;
    }
    auto q = rate_order(errs);
    return q && std::abs(*q - 2.0) < 0.1;
  });

  guarded("stationary points are fixed points of the local maps", [&] {
    StructuredMinimax sm = gen_minimax_l2("", seed + 13, 40);
    auto oracle = structured_lagrangian(sm);
    Eigen::VectorXd z = reference_saddle(*oracle, 0, 0.0, 0.0);
    Eigen::VectorXd x = z.head(oracle->dim_x()), y = z.tail(oracle->dim_y());
    auto [x1, y1] = alt_nda_step(*oracle, x, y);
    Eigen::VectorXd z2 = full_newton_step(*oracle, z);
    return (x1 - x).lpNorm<Eigen::Infinity>() < 1e-8 &&
           (y1 - y).lpNorm<Eigen::Infinity>() < 1e-8 &&
           (z2 - z).lpNorm<Eigen::Infinity>() < 1e-8;
  });

  if (!quiet || failures > 0)
    std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed")
              << '\n';
  return failures == 0 ? 0 : 1;
}

// ---- report --------------------------------------------------------------------

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

bool parse_csv(const std::string& path, ParsedCsv& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  if (!std::getline(in, line)) return false;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) out.header.push_back(cell);
  out.columns.assign(out.header.size(), {});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    size_t c = 0;
    while (std::getline(ls, cell, ',') && c < out.columns.size()) {
      try {
        out.columns[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        out.columns[c].push_back(std::numeric_limits<double>::quiet_NaN());
      }
      ++c;
    }
  }
  return !out.columns.empty() && !out.columns[0].empty();
}

int run_report(const std::string& dir, double threshold, bool quiet) {
  (void)quiet;
  if (!fs::is_directory(dir)) {
    std::cerr << "report: " << dir << " is not a directory\n";
    return 2;
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > 4 && name.substr(name.size() - 4) == ".csv" && name != "summary.csv")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "report: no trace files in " << dir << '\n';
    return 2;
  }

  std::cout << "trace,rows,iters_to_threshold,fit_slope,fit_r2,order\n";
  for (const auto& path : files) {
    ParsedCsv csv;
    if (!parse_csv(path, csv)) {
      std::cerr << "report: cannot read " << path << '\n';
      return 2;
    }
    // metric preference: relative error, then error, then the Lagrangian norm
    static const char* preferred[] = {"rel_error", "err", "lagrangian_grad_norm"};
    std::vector<double> metric;
    for (const char* want : preferred) {
      for (size_t c = 0; c < csv.header.size(); ++c)
        if (csv.header[c] == want) {
          metric = csv.columns[c];
          break;
        }
      if (!metric.empty()) break;
    }
    if (metric.empty()) {
      // fall back to the gradient norm sum
      std::vector<double> gx, gy;
      for (size_t c = 0; c < csv.header.size(); ++c) {
        if (csv.header[c] == "grad_x_norm") gx = csv.columns[c];
        if (csv.header[c] == "grad_y_norm") gy = csv.columns[c];
      }
      if (!gx.empty() && gx.size() == gy.size())
        for (size_t i = 0; i < gx.size(); ++i) metric.push_back(gx[i] + gy[i]);
    }
    std::string iters = "-";
    for (size_t i = 0; i < metric.size(); ++i)
      if (metric[i] <= threshold) {
        iters = std::to_string(i);
        break;
      }
    RateFit fit = fit_log_rate(metric);
    auto q = rate_order(metric);
    std::cout << fs::path(path).filename().string() << ',' << metric.size() << ',' << iters << ','
              << format_g17(fit.slope) << ',' << format_g17(fit.r2) << ','
              << (q ? format_g17(*q) : std::string("-")) << '\n';
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"distributed and centralized saddle-point experiment driver"};
  app.require_subcommand(1);

  Overrides dish_o, nf_o, mm_o;
  CLI::App* dish = app.add_subcommand("dish", "consensus experiments over a network");
  add_common(dish, dish_o);
  CLI::App* nf = app.add_subcommand("netflow", "network flow experiments");
  add_common(nf, nf_o);
  CLI::App* mm = app.add_subcommand("minimax", "centralized minimax experiments");
  add_common(mm, mm_o);

  std::int64_t val_seed = 7;
  bool val_quiet = false;
  CLI::App* val = app.add_subcommand("validate", "run the built-in invariant and oracle checks");
  val->add_option("--seed", val_seed, "seed for the randomized checks");
  val->add_flag("--quiet", val_quiet, "print failures only");

  std::string rep_dir = "runs";
  double rep_threshold = 1e-6;
  bool rep_quiet = false;
  CLI::App* rep = app.add_subcommand("report", "summarize trace CSVs in a directory");
  rep->add_option("dir", rep_dir, "directory holding trace CSVs");
  rep->add_option("--threshold", rep_threshold, "metric threshold for the iteration table");
  rep->add_flag("--quiet", rep_quiet, "suppress extra output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (dish->parsed()) return run_dish_experiment(resolve_config("dish", dish_o), dish_o.quiet);
    if (nf->parsed()) return run_netflow_experiment(resolve_config("netflow", nf_o), nf_o.quiet);
    if (mm->parsed()) return run_minimax_experiment(resolve_config("minimax", mm_o), mm_o.quiet);
    if (val->parsed()) return run_validate(static_cast<std::uint64_t>(val_seed), val_quiet);
    if (rep->parsed()) return run_report(rep_dir, rep_threshold, rep_quiet);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const divergence_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace grand
