#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pmfrec/methods.hpp"

namespace pmfrec {

/// Seeded grid of synthetic trials: for every sample size and trial a
/// ground-truth model is drawn (optionally with planted separability),
/// samples are generated with missingness, and each method is scored.
struct BenchmarkConfig {
  Index num_vars = 5;
  Index rank = 5;
  Index alphabet = 10;
  double obs_prob = 0.5;
  std::optional<double> eps;
  Index split = 3;
  std::vector<Index> sample_sizes{10000};
  std::vector<Method> methods{Method::kSpa};
  int trials = 20;
  std::uint64_t seed = 0;
  /// Worker threads; 0 means one per processor.
  unsigned threads = 0;
  OptConfig opt;
  EmConfig em;
  std::size_t cell_budget = kDefaultCellBudget;

  void validate() const;
};

struct BenchmarkRow {
  Method method = Method::kSpa;
  Index num_vars = 0;
  Index rank = 0;
  Index alphabet = 0;
  double obs_prob = 0;
  std::optional<double> eps;
  Index samples = 0;
  int trial = 0;
  /// Empty when the method failed.
  std::optional<double> mse;
  /// Empty when the method failed or the joint PMF exceeds the budget.
  std::optional<double> mre;
  double seconds = 0;
  std::string failure;
};

/// Rows ordered by sample size, then trial, then method. Each trial is
/// determined by (seed, trial index, sample size) regardless of thread
/// scheduling.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg);

/// CSV header: method,N,F,I,p,eps,S,trial,mse,mre,seconds. The seconds
/// column is written as 0 unless record_time is set.
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows,
                         bool record_time);

}  // namespace pmfrec
