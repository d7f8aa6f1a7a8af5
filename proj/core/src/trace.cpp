#include "grand/trace.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace grand {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double RunTrace::last_in_column(const std::string& name) const {
  for (size_t c = 0; c < extra_names.size(); ++c)
    if (extra_names[c] == name && !extra_cols[c].empty()) return extra_cols[c].back();
  throw std::out_of_range("RunTrace: no column " + name);
}

void RunTrace::write_csv(std::ostream& out) const {
  out << "iter,grad_x_norm,grad_y_norm,psi_grad_norm,delta_x,delta_y,upsilon,delta_big,wall_ms";
  for (const auto& n : extra_names) out << ',' << n;
  out << '\n';
  for (size_t r = 0; r < rows.size(); ++r) {
    const TraceRow& row = rows[r];
    out << row.iter << ',' << format_g17(row.grad_x_norm) << ',' << format_g17(row.grad_y_norm)
        << ',' << format_g17(row.psi_grad_norm) << ',' << format_g17(row.delta_x) << ','
        << format_g17(row.delta_y) << ',' << format_g17(row.upsilon) << ','
        << format_g17(row.delta_big) << ',' << format_g17(row.wall_ms);
    for (const auto& col : extra_cols)
      out << ',' << (r < col.size() ? format_g17(col[r]) : "nan");
    out << '\n';
  }
}

void RunTrace::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("RunTrace: cannot open " + path);
  write_csv(out);
}

}  // namespace grand
