#pragma once

#include <Eigen/Dense>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace grand {

// One record per observed iterate. Diagnostic fields are NaN unless the run
// was asked to compute them.
struct TraceRow {
  long iter = 0;
  double grad_x_norm = 0.0;
  double grad_y_norm = 0.0;
  double psi_grad_norm = std::numeric_limits<double>::quiet_NaN();
  double delta_x = std::numeric_limits<double>::quiet_NaN();
  double delta_y = std::numeric_limits<double>::quiet_NaN();
  double upsilon = std::numeric_limits<double>::quiet_NaN();
  double delta_big = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;

  // extra per-iterate columns appended after the base ones (e.g. rel_error)
  std::vector<std::string> extra_names;
  std::vector<std::vector<double>> extra_cols;

  bool diverged = false;
  bool converged = false;
  long audit_violations = 0;       // descent/ascent certificate checks
  long certified_violations = 0;   // per-step contraction checks (errors)
  long certified_warnings = 0;     // same checks in alternating mode
  long prefix_bound_violations = 0;  // running-average bound checks
  long regularized_steps = 0;      // curvature solves that needed a shift

  Eigen::VectorXd final_x, final_y;

  long iterations() const { return rows.empty() ? 0 : rows.back().iter; }
  void add_extra_column(std::string name) {
    extra_names.push_back(std::move(name));
    extra_cols.emplace_back();
  }
  double last_in_column(const std::string& name) const;

  // Deterministic CSV: fixed header, one row per record, %.17g formatting.
  void write_csv(std::ostream& out) const;
  void save_csv(const std::string& path) const;
};

// %.17g rendering used everywhere numbers are persisted.
std::string format_g17(double v);

}  // namespace grand
