#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pmfrec {

/// Per-iteration trace of an iterative fit.
struct FitReport {
  /// Objective (or log-likelihood) after each iteration.
  std::vector<double> trace;
  /// Cumulative wall time after each iteration.
  std::vector<double> seconds;
  /// Value before the first iteration.
  double initial_value = 0.0;
  double wall_seconds = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Non-empty when the fit stopped on a numerical failure.
  std::string failure;
  /// Diagnostics that did not stop the fit.
  std::vector<std::string> warnings;
  /// Smallest column mass of the input marginals, when they were used.
  std::optional<double> eta;
};

/// Writes "iteration,<value_name>,seconds" rows; iteration 0 is the
/// starting point. With record_time false the seconds column is 0 so that
/// output is reproducible byte for byte.
inline void write_report_csv(std::ostream& out, const FitReport& report,
                             const std::string& value_name, bool record_time) {
  char buf[64];
  out << "iteration," << value_name << ",seconds\n";
  std::snprintf(buf, sizeof buf, "%.17g", report.initial_value);
  out << 0 << ',' << buf << ",0\n";
  for (std::size_t t = 0; t < report.trace.size(); ++t) {
    out << t + 1 << ',';
    std::snprintf(buf, sizeof buf, "%.17g", report.trace[t]);
    out << buf << ',';
    if (record_time) {
      std::snprintf(buf, sizeof buf, "%.6f", report.seconds[t]);
      out << buf;
    } else {
      out << 0;
    }
    out << '\n';
  }
}

/// Wall-clock stopwatch.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace pmfrec
