#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmfrec/cnmf_opt.hpp"
#include "pmfrec/cnmf_spa.hpp"
#include "pmfrec/em.hpp"
#include "pmfrec/marginals.hpp"
#include "pmfrec/sample_table.hpp"

namespace pmfrec {

/// Estimation pipelines exposed by the CLI and the benchmark.
enum class Method {
  kSpa,     // SPA initializer alone
  kOpt,     // KL coupled NMF from a random start
  kEm,      // EM from a random start
  kSpaEm,   // SPA, then EM
  kSpaOpt,  // SPA, then KL coupled NMF
};

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::vector<Method> parse_methods(const std::string& list);
bool method_needs_samples(Method m);

struct MethodSettings {
  Index rank = 1;
  Index split = 1;
  OptConfig opt;
  EmConfig em;
  std::uint64_t seed = 0;
};

struct MethodOutcome {
  FactorModeld model;
  /// Iteration trace of the final iterative stage (empty for kSpa).
  FitReport report;
  /// Name of the traced quantity ("objective" or "log_likelihood").
  std::string trace_name;
  std::optional<SpaResult<double>> spa;
};

/// Runs one pipeline. `data` is required by the EM-based methods;
/// `spa_cache`, when given, is reused instead of recomputing the SPA
/// stage.
MethodOutcome run_method(Method method, const PairwiseSetd& pairs, const SampleTable* data,
                         const MethodSettings& settings,
                         const std::optional<SpaResult<double>>& spa_cache = std::nullopt);

}  // namespace pmfrec
