#pragma once

// Expectation-maximization for the latent naive-Bayes model on raw samples
// with missing cells. Missing cells contribute to neither the E-step
// products nor the M-step counts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pmfrec/cnmf_opt.hpp"
#include "pmfrec/factor_model.hpp"
#include "pmfrec/fit_report.hpp"
#include "pmfrec/sample_table.hpp"

namespace pmfrec {

/// Responsibilities q(s, f) = Pr(latent f | sample s).
template <typename Scalar>
struct Posteriors {
  Matrix<Scalar> q;
  /// Log-likelihood of the model that produced q.
  Scalar log_likelihood = 0;
};

template <typename Scalar>
struct MStepResult {
  FactorModel<Scalar> model;
  /// (variable, component) columns that received no mass and fell back to
  /// uniform.
  std::vector<std::pair<Index, Index>> fallbacks;
};

struct EmConfig {
  int max_iters = 100;
  double rel_tol = 1e-6;

  void validate() const {
    if (max_iters < 1) throw ConfigError("max_iters must be positive");
    if (!(rel_tol > 0 && rel_tol < 1)) throw ConfigError("rel_tol must lie in (0, 1)");
  }
};

/// Assumption-style separation diagnostics of a model.
struct SeparationStats {
  double d1bar = 0;
  double d2bar = 0;
  double dbar = 0;
  double rho1 = 0;
  double rho2 = 0;
};

namespace detail {

template <typename Scalar>
void check_alphabets(const FactorModel<Scalar>& model, const SampleTable& data) {
  if (data.num_vars() != model.num_vars()) {
    throw DataError("data has " + std::to_string(data.num_vars()) + " variables, model has " +
                    std::to_string(model.num_vars()));
  }
  for (Index n = 0; n < model.num_vars(); ++n) {
    if (data.alphabet_sizes()[static_cast<std::size_t>(n)] > model.alphabet_size(n)) {
      throw DataError("variable " + data.names()[static_cast<std::size_t>(n)] +
                      " has a larger alphabet in the data than in the model");
    }
  }
}

/// log of each factor entry, floored.
template <typename Scalar>
std::vector<Matrix<Scalar>> log_factors(const FactorModel<Scalar>& model) {
  std::vector<Matrix<Scalar>> out;
  for (const auto& a : model.factors()) {
    out.push_back(a.array().max(kProbabilityFloor<Scalar>).log().matrix());
  }
  return out;
}

/// Unnormalized log posterior weights of one sample.
template <typename Scalar>
void sample_log_weights(const SampleTable& data, Index s, const Vector<Scalar>& log_prior,
                        const std::vector<Matrix<Scalar>>& log_a, Vector<Scalar>& out) {
  out = log_prior;
  for (Index n = 0; n < data.num_vars(); ++n) {
    const int code = data(s, n);
    if (code == SampleTable::kMissing) continue;
    out += log_a[static_cast<std::size_t>(n)].row(code).transpose();
  }
}

template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& v) {
  using std::exp;
  using std::log;
  const Scalar peak = v.maxCoeff();
  return peak + log((v.array() - peak).exp().sum());
}

}  // namespace detail

/// sum_s log sum_f prior(f) prod_{observed n} A_n(d_s(n), f).
template <typename Scalar>
Scalar log_likelihood(const FactorModel<Scalar>& model, const SampleTable& data) {
  detail::check_alphabets(model, data);
  const auto log_a = detail::log_factors(model);
  const Vector<Scalar> log_prior =
      model.prior().array().max(kProbabilityFloor<Scalar>).log().matrix();
  Vector<Scalar> w;
  Scalar total = 0;
  for (Index s = 0; s < data.num_samples(); ++s) {
    detail::sample_log_weights(data, s, log_prior, log_a, w);
    total += detail::log_sum_exp(w);
  }
  return total;
}

template <typename Scalar>
Posteriors<Scalar> e_step(const FactorModel<Scalar>& model, const SampleTable& data) {
  detail::check_alphabets(model, data);
  const auto log_a = detail::log_factors(model);
  const Vector<Scalar> log_prior =
      model.prior().array().max(kProbabilityFloor<Scalar>).log().matrix();
  Posteriors<Scalar> out;
  out.q.resize(data.num_samples(), model.rank());
  Vector<Scalar> w;
  for (Index s = 0; s < data.num_samples(); ++s) {
    detail::sample_log_weights(data, s, log_prior, log_a, w);
    const Scalar lse = detail::log_sum_exp(w);
    out.log_likelihood += lse;
    out.q.row(s) = (w.array() - lse).exp().matrix().transpose();
    out.q.row(s) /= out.q.row(s).sum();
  }
  return out;
}

/// Closed-form maximization given responsibilities. Alphabet sizes come
/// from `sizes` when given, otherwise from the data.
template <typename Scalar>
MStepResult<Scalar> m_step(const SampleTable& data, const Posteriors<Scalar>& post,
                           const AlphabetSizes& sizes = {}) {
  const Matrix<Scalar>& q = post.q;
  if (q.rows() != data.num_samples() || q.cols() < 1) {
    throw DataError("posterior matrix does not match the sample table");
  }
  const AlphabetSizes& alpha = sizes.empty() ? data.alphabet_sizes() : sizes;
  const Index rank = q.cols();
  std::vector<Matrix<Scalar>> counts;
  for (Index a : alpha) counts.push_back(Matrix<Scalar>::Zero(a, rank));
  for (Index s = 0; s < data.num_samples(); ++s) {
    for (Index n = 0; n < data.num_vars(); ++n) {
      const int code = data(s, n);
      if (code == SampleTable::kMissing) continue;
      counts[static_cast<std::size_t>(n)].row(code) += q.row(s);
    }
  }
  std::vector<std::pair<Index, Index>> fallbacks;
  for (std::size_t n = 0; n < counts.size(); ++n) {
    auto& c = counts[n];
    for (Index f = 0; f < rank; ++f) {
      const Scalar denom = c.col(f).sum();
      if (denom > Scalar(0)) {
        c.col(f) /= denom;
      } else {
        c.col(f).setConstant(Scalar(1) / Scalar(c.rows()));
        fallbacks.emplace_back(static_cast<Index>(n), f);
      }
    }
  }
  Vector<Scalar> prior = q.colwise().sum().transpose();
  prior /= prior.sum();
  return {FactorModel<Scalar>(std::move(counts), std::move(prior)), std::move(fallbacks)};
}

/// Alternates E and M steps from `init`; the trace holds the
/// log-likelihood after each iteration.
template <typename Scalar>
FitResult<Scalar> fit_em(const SampleTable& data, const FactorModel<Scalar>& init,
                         const EmConfig& cfg = {}) {
  cfg.validate();
  const AlphabetSizes sizes = init.alphabet_sizes();
  FactorModel<Scalar> model = init;
  FitReport report;
  Stopwatch clock;
  Posteriors<Scalar> post = e_step(model, data);
  report.initial_value = static_cast<double>(post.log_likelihood);
  Scalar value = post.log_likelihood;
  for (int it = 0; it < cfg.max_iters; ++it) {
    MStepResult<Scalar> step = m_step(data, post, sizes);
    for (const auto& [n, f] : step.fallbacks) {
      report.warnings.push_back("iteration " + std::to_string(it + 1) + ": variable " +
                                std::to_string(n + 1) + " component " + std::to_string(f + 1) +
                                " has no mass; using uniform");
    }
    model = std::move(step.model);
    post = e_step(model, data);
    const Scalar next = post.log_likelihood;
    if (!std::isfinite(static_cast<double>(next))) {
      report.failure = "log-likelihood became non-finite";
      break;
    }
    report.trace.push_back(static_cast<double>(next));
    report.seconds.push_back(clock.seconds());
    report.iterations = it + 1;
    const Scalar change = std::abs(next - value);
    const Scalar scale = std::max(std::abs(value), std::numeric_limits<Scalar>::min());
    value = next;
    if (change <= Scalar(cfg.rel_tol) * scale) {
      report.converged = true;
      break;
    }
  }
  report.wall_seconds = clock.seconds();
  return {std::move(model), std::move(report)};
}

/// KL(a || b) = sum a log(a / b) with 0 log 0 = 0 and b floored.
template <typename Derived1, typename Derived2>
double kl_pmf(const Eigen::MatrixBase<Derived1>& a, const Eigen::MatrixBase<Derived2>& b) {
  double total = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a(i));
    if (x > 0) {
      total += x * std::log(x / std::max(static_cast<double>(b(i)), 1e-12));
    }
  }
  return total;
}

/// D1bar = min_{f != f'} (1/N) sum_n p KL(A_n(:, f), A_n(:, f')),
/// D2bar = (2/N) min_{f != f'} log(prior(f) / prior(f')), their mean, and
/// the smallest factor and prior entries.
template <typename Scalar>
SeparationStats separation_stats(const FactorModel<Scalar>& model, double obs_prob) {
  if (model.rank() < 2) throw ConfigError("separation statistics need rank >= 2");
  if (!(obs_prob > 0 && obs_prob <= 1)) throw ConfigError("observation probability must lie in (0, 1]");
  const Index rank = model.rank();
  const double n_vars = static_cast<double>(model.num_vars());
  SeparationStats st;
  st.d1bar = std::numeric_limits<double>::infinity();
  st.d2bar = std::numeric_limits<double>::infinity();
  for (Index f = 0; f < rank; ++f) {
    for (Index g = 0; g < rank; ++g) {
      if (f == g) continue;
      double sum = 0;
      for (const auto& a : model.factors()) sum += obs_prob * kl_pmf(a.col(f), a.col(g));
      st.d1bar = std::min(st.d1bar, sum / n_vars);
      const double ratio = static_cast<double>(model.prior()(f)) /
                           std::max(static_cast<double>(model.prior()(g)), 1e-12);
      st.d2bar = std::min(st.d2bar,
                          2.0 / n_vars * std::log(std::max(ratio, 1e-300)));
    }
  }
  st.dbar = 0.5 * (st.d1bar + st.d2bar);
  st.rho1 = 1.0;
  for (const auto& a : model.factors()) st.rho1 = std::min(st.rho1, static_cast<double>(a.minCoeff()));
  st.rho2 = static_cast<double>(model.prior().minCoeff());
  return st;
}

}  // namespace pmfrec
