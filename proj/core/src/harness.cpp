#include "grand/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "grand/netflow.hpp"
#include "grand/rng.hpp"
#include "grand/trace.hpp"
#include "grand/version.hpp"

namespace grand {

namespace {

// keeps the graph stream clear of the data stream (graph draws retry with
// seed+attempt, attempt < 1000)
constexpr std::uint64_t kGraphSeedOffset = 1000000;

Eigen::MatrixXd normal_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = rng.normal();
  return M;
}

Eigen::VectorXd normal_vector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int r = 0; r < n; ++r) v(r) = rng.normal();
  return v;
}

}  // namespace

GeneratedConsensus gen_setup1(std::uint64_t seed, double mu) {
  const int n = 10, d = 5, samples = 50;
  const double lambda = 1.0;
  Rng rng(seed);
  Eigen::VectorXd scale(d);
  scale << 10.0, 10.0, 0.1, 0.1, 0.1;
  Eigen::VectorXd omega0 = normal_vector(rng, d);

  std::vector<SmoothOraclePtr> agents;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  const int total = n * samples;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd theta = normal_matrix(rng, samples, d) * scale.asDiagonal();
    Eigen::VectorXd noise = normal_vector(rng, samples);
    Eigen::VectorXd v = theta * omega0 + noise;
    agents.push_back(quadratic_agent(theta, v, lambda, total, n));
    gram += theta.transpose() * theta;
    rhs += theta.transpose() * v;
  }
  Graph g = generate_erdos_renyi(n, 0.7, seed + kGraphSeedOffset);
  GeneratedConsensus out{make_consensus_problem(std::move(agents), build_consensus_matrix(g), mu),
                         Eigen::VectorXd()};
  Eigen::MatrixXd G = gram / total + lambda * Eigen::MatrixXd::Identity(d, d);
  out.omega_star = G.ldlt().solve(rhs / total);
  return out;
}

GeneratedConsensus gen_setup2(std::uint64_t seed, double mu) {
  const int n = 20, d = 3, samples = 50;
  const double lambda = 1.0;
  Rng rng(seed);
  Eigen::VectorXd scale(d);
  scale << 10.0, 0.1, 0.1;
  Eigen::VectorXd omega0 = normal_vector(rng, d);

  std::vector<SmoothOraclePtr> agents;
  const int total = n * samples;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd theta = normal_matrix(rng, samples, d) * scale.asDiagonal();
    Eigen::VectorXd noise = normal_vector(rng, samples);
    Eigen::VectorXd score = theta * omega0 + noise;
    Eigen::VectorXd v(samples);
    for (int s = 0; s < samples; ++s) v(s) = score(s) > 0.0 ? 1.0 : 0.0;
    agents.push_back(logistic_agent(theta, v, lambda, total, n));
  }
  Graph g = generate_erdos_renyi(n, 0.5, seed + kGraphSeedOffset);
  GeneratedConsensus out{make_consensus_problem(std::move(agents), build_consensus_matrix(g), mu),
                         Eigen::VectorXd()};

  // centralized damped Newton on the agent sum
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  auto sum_grad = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (const auto& a : out.prob.agents) s += a->gradient(p);
    return s;
  };
  auto sum_value = [&](const Eigen::VectorXd& p) {
    double s = 0.0;
    for (const auto& a : out.prob.agents) s += a->value(p);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd grad = sum_grad(w);
    if (grad.norm() <= 1e-12) break;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    for (const auto& a : out.prob.agents) hess += a->hessian(w);
    Eigen::VectorXd dw = hess.ldlt().solve(grad);
    double f0 = sum_value(w), gd = grad.dot(dw), step = 1.0;
    while (step > 1e-14 && sum_value(w - step * dw) > f0 - 1e-4 * step * gd) step *= 0.5;
    w -= step * dw;
  }
  if (sum_grad(w).norm() > 1e-12)
    throw std::runtime_error("gen_setup2: centralized reference did not converge");
  out.omega_star = w;
  return out;
}

NetworkFlowProblem gen_netflow(std::uint64_t seed) {
  const int n = 10;
  Graph g = generate_erdos_renyi(n, 0.4, seed + kGraphSeedOffset);
  Rng rng(seed);
  std::vector<SmoothOraclePtr> costs;
  for (int e = 0; e < g.edge_count(); ++e) {
    double h = rng.lognormal(3.0, 1.0);
    double v = rng.lognormal(1.0, 1.0);
    costs.push_back(edge_cost(h, v));
  }
  Eigen::VectorXd raw(n);
  for (int i = 0; i < n; ++i) raw(i) = rng.uniform();
  return make_network_flow_problem(std::move(costs), build_incidence(g), make_supply(raw));
}

namespace {

StructuredMinimax build_l2(const Eigen::MatrixXd& A, const Eigen::VectorXd& targets) {
  const int rows = static_cast<int>(A.rows());
  const int d = static_cast<int>(A.cols());
  const double inv_n = 1.0 / rows;
  Eigen::VectorXd b = -targets;
  auto f = std::make_shared<QuadraticOracle>(inv_n * Eigen::MatrixXd::Identity(rows, rows),
                                             inv_n * b, 0.0);
  auto g = scale_oracle(smoothed_l1(10.0, d), inv_n);
  return make_structured_minimax(f, g, A.transpose() * inv_n);
}

}  // namespace

StructuredMinimax gen_minimax_l2(const std::string& dataset_path, std::uint64_t seed,
                                 int synthetic_rows) {
  const int d = 9;
  if (!dataset_path.empty()) {
    std::ifstream in(dataset_path);
    if (!in) throw std::runtime_error("gen_minimax_l2: cannot open " + dataset_path);
    std::vector<double> targets;
    std::vector<Eigen::VectorXd> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> vals;
      bool numeric = true;
      while (std::getline(ss, cell, ',')) {
        try {
          size_t used = 0;
          double v = std::stod(cell, &used);
          if (used == 0) numeric = false;
          vals.push_back(v);
        } catch (const std::exception&) {
          numeric = false;
          break;
        }
      }
      if (!numeric) continue;  // header or malformed line
      if (static_cast<int>(vals.size()) != d + 1)
        throw std::runtime_error("gen_minimax_l2: expected target plus 9 features per row");
      targets.push_back(vals[0]);
      Eigen::VectorXd feat(d);
      for (int c = 0; c < d; ++c) feat(c) = vals[static_cast<size_t>(c) + 1];
      rows.push_back(std::move(feat));
    }
    if (rows.size() < 2) throw std::runtime_error("gen_minimax_l2: dataset has too few rows");
    Eigen::MatrixXd A(static_cast<int>(rows.size()), d);
    Eigen::VectorXd t(static_cast<int>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<int>(r)) = rows[r].transpose();
      t(static_cast<int>(r)) = targets[r];
    }
    return build_l2(A, t);
  }

  Rng rng(seed);
  Eigen::VectorXd w0 = normal_vector(rng, d);
  Eigen::MatrixXd A(synthetic_rows, d);
  Eigen::VectorXd t(synthetic_rows);
  for (int r = 0; r < synthetic_rows; ++r) {
    for (int c = 0; c < d; ++c) A(r, c) = rng.normal();
    t(r) = A.row(r).dot(w0) + 0.1 * rng.normal();
  }
  return build_l2(A, t);
}

StructuredMinimax gen_minimax_l4(std::uint64_t seed, double eps) {
  const int n = 5, d = 20;
  Rng rng(seed);
  Eigen::MatrixXd A = normal_matrix(rng, n, d);
  Eigen::VectorXd b(n);
  for (int r = 0; r < n; ++r) b(r) = rng.lognormal(0.0, 1.0);
  auto f = std::make_shared<PowerFourOracle>(b, eps);
  auto g = smoothed_l1(10.0, d);
  // x'Ay = y'(A'x): the inner variable has dimension n, the outer one d
  return make_structured_minimax(f, g, A.transpose());
}

// ---- grid search -------------------------------------------------------------

const GridOutcome& GridResult::best_outcome() const {
  if (!best) throw std::logic_error("GridResult: no convergent configuration");
  return outcomes[*best];
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw std::invalid_argument("log_grid: bad range");
  std::vector<double> out(static_cast<size_t>(points));
  double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < points; ++i)
    out[static_cast<size_t>(i)] = std::pow(10.0, llo + (lhi - llo) * i / (points - 1));
  return out;
}

std::vector<double> default_stepsize_grid() { return log_grid(1e-3, 1e1, 13); }

GridResult grid_search(const std::vector<double>& alphas, const std::vector<double>& betas,
                       const GridRunner& runner, int workers) {
  if (alphas.empty() || betas.empty()) throw std::invalid_argument("grid_search: empty grid");
  GridResult res;
  res.outcomes.resize(alphas.size() * betas.size());
  for (size_t ia = 0; ia < alphas.size(); ++ia)
    for (size_t ib = 0; ib < betas.size(); ++ib) {
      auto& o = res.outcomes[ia * betas.size() + ib];
      o.alpha = alphas[ia];
      o.beta = betas[ib];
    }

  auto eval = [&](size_t idx) {
    auto& o = res.outcomes[idx];
    try {
      o.summary = runner(o.alpha, o.beta);
    } catch (const std::exception&) {
      o.summary = RunSummary{};  // treated as a failed point
    }
  };

  if (workers <= 1) {
    for (size_t idx = 0; idx < res.outcomes.size(); ++idx) eval(idx);
  } else {
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (size_t idx = cursor.fetch_add(1); idx < res.outcomes.size(); idx = cursor.fetch_add(1))
        eval(idx);
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(workers, static_cast<int>(res.outcomes.size()));
    pool.reserve(static_cast<size_t>(count));
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (size_t idx = 0; idx < res.outcomes.size(); ++idx) {
    const auto& o = res.outcomes[idx];
    if (!o.summary.converged) continue;
    if (!res.best) {
      res.best = idx;
      continue;
    }
    const auto& cur = res.outcomes[*res.best];
    if (o.summary.iterations < cur.summary.iterations ||
        (o.summary.iterations == cur.summary.iterations &&
         o.alpha * o.beta < cur.alpha * cur.beta))
      res.best = idx;
  }
  return res;
}

RateFit fit_log_rate(const std::vector<double>& values, double burn_in_frac, double floor) {
  RateFit fit;
  size_t start = static_cast<size_t>(std::ceil(burn_in_frac * static_cast<double>(values.size())));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> pts;
  for (size_t k = start; k < values.size(); ++k) {
    double v = values[k];
    if (!(v > floor) || !std::isfinite(v)) continue;
    double x = static_cast<double>(k), y = std::log10(v);
    pts.emplace_back(x, y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.points = static_cast<long>(pts.size());
  if (pts.size() < 2) return fit;
  double n = static_cast<double>(pts.size());
  double den = n * sxx - sx * sx;
  if (den == 0.0) return fit;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0, mean = sy / n;
  for (auto& [x, y] : pts) {
    double pred = fit.slope * x + fit.intercept;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - mean) * (y - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

// ---- configuration ------------------------------------------------------------

namespace {

using nlohmann::json;

std::vector<double> parse_grid_axis(const json& j, const char* axis) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) throw config_error(std::string("grid.") + axis + ": numeric entries only");
      out.push_back(v.get<double>());
    }
  } else if (j.is_object()) {
    for (const auto& [key, val] : j.items())
      if (key != "lo" && key != "hi" && key != "points")
        throw config_error(std::string("grid.") + axis + ": unknown key '" + key + "'");
    if (!j.contains("lo") || !j.contains("hi"))
      throw config_error(std::string("grid.") + axis + ": need lo and hi");
    out = log_grid(j["lo"].get<double>(), j["hi"].get<double>(), j.value("points", 13));
  } else {
    throw config_error(std::string("grid.") + axis + ": expected array or {lo, hi, points}");
  }
  if (out.empty()) throw config_error(std::string("grid.") + axis + ": empty");
  for (double v : out)
    if (!(v > 0.0)) throw config_error(std::string("grid.") + axis + ": entries must be positive");
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config parse: ") + e.what());
  }
  if (!j.is_object()) throw config_error("config: top level must be an object");

  static const char* known[] = {"schema_version", "kind",      "problem",       "seed",
                                "out",            "methods",   "grid",          "stop",
                                "mu",             "certified", "record_timing", "dataset",
                                "workers"};
  for (const auto& [key, val] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw config_error("config: unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw config_error("config: schema_version (integer) is required");
  cfg.schema_version = j["schema_version"].get<int>();
  if (cfg.schema_version != kConfigSchemaVersion)
    throw config_error("config: unsupported schema_version " + std::to_string(cfg.schema_version));

  if (!j.contains("kind") || !j["kind"].is_string())
    throw config_error("config: kind (string) is required");
  cfg.kind = j["kind"].get<std::string>();
  if (cfg.kind != "dish" && cfg.kind != "netflow" && cfg.kind != "minimax")
    throw config_error("config: kind must be dish, netflow or minimax");

  cfg.problem = j.value("problem", cfg.kind == "dish"      ? std::string("setup1")
                                   : cfg.kind == "netflow" ? std::string("netflow")
                                                           : std::string("l2"));
  static const struct {
    const char* kind;
    const char* problem;
  } allowed[] = {{"dish", "setup1"}, {"dish", "setup2"}, {"netflow", "netflow"},
                 {"minimax", "l2"},  {"minimax", "l4"}};
  bool pair_ok = false;
  for (const auto& a : allowed) pair_ok = pair_ok || (cfg.kind == a.kind && cfg.problem == a.problem);
  if (!pair_ok) throw config_error("config: problem '" + cfg.problem + "' does not fit kind '" + cfg.kind + "'");

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
      throw config_error("config: seed must be a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.out_dir = j.value("out", cfg.out_dir);
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) throw config_error("config: methods must be an array");
    for (const auto& m : j["methods"]) {
      if (!m.is_string()) throw config_error("config: methods entries must be strings");
      cfg.methods.push_back(m.get<std::string>());
    }
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) throw config_error("config: grid must be an object");
    for (const auto& [key, val] : g.items())
      if (key != "alpha" && key != "beta") throw config_error("config: grid keys are alpha, beta");
    if (g.contains("alpha")) cfg.alpha_grid = parse_grid_axis(g["alpha"], "alpha");
    if (g.contains("beta")) cfg.beta_grid = parse_grid_axis(g["beta"], "beta");
  }
  if (cfg.alpha_grid.empty()) cfg.alpha_grid = default_stepsize_grid();
  if (cfg.beta_grid.empty()) cfg.beta_grid = default_stepsize_grid();

  if (j.contains("stop")) {
    const json& s = j["stop"];
    if (!s.is_object()) throw config_error("config: stop must be an object");
    for (const auto& [key, val] : s.items())
      if (key != "threshold" && key != "max_iters")
        throw config_error("config: stop keys are threshold, max_iters");
    cfg.stop.threshold = s.value("threshold", cfg.stop.threshold);
    cfg.stop.max_iters = s.value("max_iters", cfg.stop.max_iters);
  }
  if (!(cfg.stop.threshold > 0.0)) throw config_error("config: stop.threshold must be positive");
  if (cfg.stop.max_iters < 1) throw config_error("config: stop.max_iters must be positive");

  cfg.mu = j.value("mu", 0.0);
  if (cfg.mu < 0.0) throw config_error("config: mu must be nonnegative");
  cfg.certified = j.value("certified", false);
  cfg.record_timing = j.value("record_timing", false);
  cfg.dataset_path = j.value("dataset", std::string());
  cfg.workers = j.value("workers", 1);
  if (cfg.workers < 1) throw config_error("config: workers must be >= 1");

  cfg.canonical = j.dump();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig default_config(const std::string& kind) {
  json j{{"schema_version", kConfigSchemaVersion}, {"kind", kind}};
  if (kind == "dish") j["stop"] = {{"threshold", 1e-6}, {"max_iters", 20000}};
  if (kind == "netflow") {
    j["stop"] = {{"threshold", 1e-6}, {"max_iters", 100000}};
    // gradient-mode edges are only stable below 2/max f''; lognormal edge
    // curvatures put that around 1e-5, far under the generic grid's floor
    j["grid"] = {{"alpha", {{"lo", 1e-6}, {"hi", 1.0}, {"points", 13}}},
                 {"beta", {0.3, 1.0, 3.0}}};
  }
  if (kind == "minimax") j["stop"] = {{"threshold", 1e-8}, {"max_iters", 20000}};
  return parse_config_text(j.dump());
}

// ---- persistence ----------------------------------------------------------------

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
  out << "method,alpha,beta,converged,iterations,final_metric,fit_slope,fit_r2\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_g17(r.alpha) << ',' << format_g17(r.beta) << ','
        << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << format_g17(r.final_metric)
        << ',' << format_g17(r.fit_slope) << ',' << format_g17(r.fit_r2) << '\n';
  }
}

void write_meta_json(const std::string& path, const ExperimentConfig& cfg,
                     const std::vector<std::string>& outputs) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["kind"] = cfg.kind;
  j["problem"] = cfg.problem;
  j["seed"] = cfg.seed;
  j["certified"] = cfg.certified;
  j["config_hash"] = hash_hex(cfg.canonical);
  j["version"] = kVersion;
  j["outputs"] = outputs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_meta_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace grand
