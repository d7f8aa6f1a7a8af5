#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "grand/objectives.hpp"

namespace grand {

// ---- synthetic problem generators -------------------------------------------

struct GeneratedConsensus {
  ConsensusProblem prob;
  Eigen::VectorXd omega_star;  // centralized optimum of the agent sum
};

// 10 agents on an ER(10, 0.7) graph, 50 ridge-regression samples each over 5
// features scaled by diag{10, 10, 0.1, 0.1, 0.1}; the scaling makes the
// stacked Gram matrix badly conditioned on purpose.
GeneratedConsensus gen_setup1(std::uint64_t seed, double mu = 0.0);

// 20 agents on an ER(20, 0.5) graph, 50 logistic samples each over 3 features
// scaled by diag{10, 0.1, 0.1}; labels thresholded scores. Reference by
// centralized damped Newton.
GeneratedConsensus gen_setup2(std::uint64_t seed, double mu = 0.0);

// 10 nodes on an ER(10, 0.4) graph; quadratic edge costs (h x - v)^2 / 2 with
// h lognormal(3,1), v lognormal(1,1); supply centered uniform draws.
NetworkFlowProblem gen_netflow(std::uint64_t seed);

// max_y min_x [ (||x||^2/2 + b'x + x'Ay)/n - lambda R_a(y) ] with A the
// sample-by-feature matrix, b the negated targets, lambda = 1/n, a = 10.
// Loads "target,f1,...,f9" CSV rows when path is nonempty; otherwise builds a
// synthetic regression set with the same shape (d = 9).
StructuredMinimax gen_minimax_l2(const std::string& dataset_path = "",
                                 std::uint64_t seed = 7, int synthetic_rows = 200);

// max_y min_x [ ||x||_4^2/2 + eps||x||^2/2 + b'x + x'A'y - R_a(y) ] with
// 5 standard-normal rows of A over d = 20, b lognormal(0,1), a = 10. The
// eps = 1e-3 floor keeps the quartic head strongly convex at the origin.
StructuredMinimax gen_minimax_l4(std::uint64_t seed, double eps = 1e-3);

// ---- grid search -------------------------------------------------------------

struct RunSummary {
  bool converged = false;
  long iterations = 0;
  double final_metric = 0.0;
};

struct GridOutcome {
  double alpha = 0.0;
  double beta = 0.0;
  RunSummary summary;
};

struct GridResult {
  std::vector<GridOutcome> outcomes;       // grid order: alpha outer, beta inner
  std::optional<std::size_t> best;         // none when every point failed

  const GridOutcome& best_outcome() const;
};

using GridRunner = std::function<RunSummary(double alpha, double beta)>;

// 13 log-spaced points covering 1e-3 .. 1e1.
std::vector<double> default_stepsize_grid();
std::vector<double> log_grid(double lo, double hi, int points);

// Evaluates every (alpha, beta) combination; points may run on up to
// `workers` threads but outcomes keep grid order and the selection is
// deterministic: fewest iterations among converged points, ties by smaller
// alpha*beta, then grid order.
GridResult grid_search(const std::vector<double>& alphas, const std::vector<double>& betas,
                       const GridRunner& runner, int workers = 1);

// ---- rate fitting -------------------------------------------------------------

struct RateFit {
  double slope = 0.0;      // per-iteration change of log10(value)
  double intercept = 0.0;
  double r2 = 0.0;
  long points = 0;
};

// Least-squares line through (k, log10 v_k) skipping the leading burn-in
// fraction and anything at or below `floor`.
RateFit fit_log_rate(const std::vector<double>& values, double burn_in_frac = 0.1,
                     double floor = 1e-300);

// ---- configuration ------------------------------------------------------------

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StopSpec {
  double threshold = 1e-6;
  long max_iters = 10000;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string kind;            // dish | netflow | minimax
  std::string problem;         // setup1 | setup2 | netflow | l2 | l4
  std::uint64_t seed = 7;
  std::string out_dir = "runs";
  std::vector<std::string> methods;  // empty => kind defaults
  std::vector<double> alpha_grid, beta_grid;
  StopSpec stop;
  double mu = 0.0;
  bool certified = false;
  bool record_timing = false;
  std::string dataset_path;    // optional, l2 only
  int workers = 1;
  std::string canonical;       // canonical serialized form, hashed into meta
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Built-in config for a subcommand when no --config is given.
ExperimentConfig default_config(const std::string& kind);

// ---- persistence ----------------------------------------------------------------

std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_hex(const std::string& bytes);

struct SummaryRow {
  std::string method;
  double alpha = 0.0, beta = 0.0;
  bool converged = false;
  long iterations = 0;
  double final_metric = 0.0;
  double fit_slope = 0.0, fit_r2 = 0.0;
};

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
void write_meta_json(const std::string& path, const ExperimentConfig& cfg,
                     const std::vector<std::string>& outputs);

// ---- entry point ----------------------------------------------------------------

// Subcommands dish | netflow | minimax | validate | report. Returns 0 on
// success, 1 when a selected run diverged or a subcommand found a violation,
// 2 on configuration errors.
int cli_main(int argc, const char* const* argv);

}  // namespace grand
