#include "pmfrec/methods.hpp"

#include <sstream>

namespace pmfrec {

std::string method_name(Method m) {
  switch (m) {
    case Method::kSpa: return "spa";
    case Method::kOpt: return "opt";
    case Method::kEm: return "em";
    case Method::kSpaEm: return "spa-em";
    case Method::kSpaOpt: return "spa-opt";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kSpa, Method::kOpt, Method::kEm, Method::kSpaEm, Method::kSpaOpt}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected spa, opt, em, spa-em, spa-opt)");
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

bool method_needs_samples(Method m) { return m == Method::kEm || m == Method::kSpaEm; }

MethodOutcome run_method(Method method, const PairwiseSetd& pairs, const SampleTable* data,
                         const MethodSettings& settings,
                         const std::optional<SpaResult<double>>& spa_cache) {
  if (method_needs_samples(method) && data == nullptr) {
    throw ConfigError("method " + method_name(method) + " needs raw samples");
  }
  const bool uses_spa =
      method == Method::kSpa || method == Method::kSpaEm || method == Method::kSpaOpt;
  std::optional<SpaResult<double>> spa;
  if (uses_spa) spa = spa_cache ? spa_cache : fit_cnmf_spa(pairs, settings.rank, settings.split);

  const double eta = pairs.empty() ? 0.0 : column_mass_floor(pairs);
  switch (method) {
    case Method::kSpa: {
      FitReport report;
      report.eta = eta;
      return {spa->model, std::move(report), "", spa};
    }
    case Method::kSpaOpt:
    case Method::kOpt: {
      OptConfig cfg = settings.opt;
      cfg.seed = settings.seed;
      std::optional<FactorModeld> init;
      if (spa) init = spa->model;
      FitResult<double> fit = fit_cnmf_opt(pairs, settings.rank, init, cfg);
      fit.report.eta = eta;
      return {std::move(fit.model), std::move(fit.report), "objective", spa};
    }
    case Method::kSpaEm:
    case Method::kEm: {
      const FactorModeld init =
          spa ? spa->model
              : random_simplex_model<double>(pairs.alphabet_sizes(), settings.rank, settings.seed);
      FitResult<double> fit = fit_em(*data, init, settings.em);
      fit.report.eta = eta;
      return {std::move(fit.model), std::move(fit.report), "log_likelihood", spa};
    }
  }
  throw ConfigError("unhandled method");
}

}  // namespace pmfrec
