#pragma once

// Coupled NMF criterion with generalized KL divergence, minimized by block
// coordinate descent over A_1..A_N and the prior. Each block is updated by
// exponentiated-gradient (mirror descent) steps on the simplex, with
// backtracking so that the objective never increases.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/fit_report.hpp"
#include "pmfrec/marginals.hpp"
#include "pmfrec/rng.hpp"

namespace pmfrec {

struct OptConfig {
  int max_outer_iters = 200;
  int inner_md_iters = 10;
  double step0 = 1.0;
  double rel_tol = 1e-6;
  double floor = 1e-12;
  /// Weight of the uniform distribution mixed into every column of the
  /// initial model. Multiplicative updates cannot revive exact zeros, which
  /// SPA initializations contain.
  double init_mix = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_outer_iters < 1) throw ConfigError("max_outer_iters must be positive");
    if (inner_md_iters < 1) throw ConfigError("inner_md_iters must be positive");
    if (!(step0 > 0)) throw ConfigError("step0 must be positive");
    if (!(rel_tol > 0 && rel_tol < 1)) throw ConfigError("rel_tol must lie in (0, 1)");
    if (!(floor > 0)) throw ConfigError("floor must be positive");
    if (!(init_mix >= 0 && init_mix < 1)) throw ConfigError("init_mix must lie in [0, 1)");
  }
};

template <typename Scalar>
struct FitResult {
  FactorModel<Scalar> model;
  FitReport report;
};

namespace detail {

/// Halvings tried before a block step is abandoned.
inline constexpr int kMaxHalvings = 20;

template <typename Scalar>
Scalar kl_divergence(const Matrix<Scalar>& x, const Matrix<Scalar>& model, Scalar floor) {
  using std::log;
  Scalar total = 0;
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index r = 0; r < x.rows(); ++r) {
      const Scalar m = std::max(model(r, c), floor);
      const Scalar v = x(r, c);
      total += (v > Scalar(0) ? v * log(v / m) - v : Scalar(0)) + m;
    }
  }
  return total;
}

/// 1 - X / M with M floored.
template <typename Scalar>
Matrix<Scalar> kl_residual(const Matrix<Scalar>& x, const Matrix<Scalar>& model, Scalar floor) {
  return (Scalar(1) - x.array() / model.array().max(floor)).matrix();
}

template <typename Scalar>
Scalar total_objective(const std::vector<Matrix<Scalar>>& factors, const Vector<Scalar>& prior,
                       const PairwiseSet<Scalar>& pairs, Scalar floor) {
  Scalar total = 0;
  for (const auto& [key, x] : pairs.entries()) {
    const Matrix<Scalar> m =
        factors[key.first] * prior.asDiagonal() * factors[key.second].transpose();
    total += kl_divergence(x, m, floor);
  }
  return total;
}

/// Exponentiated step on every column of `a`, followed by l1
/// renormalization. The per-column shift leaves the result unchanged and
/// keeps exp() from overflowing.
template <typename Scalar>
Matrix<Scalar> exponentiated_step(const Matrix<Scalar>& a, const Matrix<Scalar>& grad,
                                  Scalar step) {
  using std::exp;
  Matrix<Scalar> out(a.rows(), a.cols());
  for (Index c = 0; c < a.cols(); ++c) {
    const Scalar shift = grad.col(c).minCoeff();
    for (Index r = 0; r < a.rows(); ++r) {
      out(r, c) = a(r, c) * exp(-step * (grad(r, c) - shift));
    }
    const Scalar s = out.col(c).sum();
    if (s > Scalar(0)) {
      out.col(c) /= s;
    } else {
      out.col(c) = a.col(c);
    }
  }
  return out;
}

/// Mirror descent with backtracking on a block whose objective and
/// gradient are supplied as callables. Returns the improved block; `step`
/// carries the last accepted step size between calls.
template <typename Scalar, typename Objective, typename Gradient>
Matrix<Scalar> mirror_descent(Matrix<Scalar> block, const OptConfig& cfg, Scalar& step,
                              Objective&& objective, Gradient&& gradient) {
  if (!(step > Scalar(0))) return block;
  Scalar value = objective(block);
  for (int it = 0; it < cfg.inner_md_iters; ++it) {
    const Matrix<Scalar> grad = gradient(block);
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      Matrix<Scalar> trial = exponentiated_step(block, grad, step);
      const Scalar trial_value = objective(trial);
      if (std::isfinite(static_cast<double>(trial_value)) && trial_value <= value) {
        accepted = trial_value < value;
        if (accepted) {
          block.swap(trial);
          value = trial_value;
        }
        break;
      }
      step /= Scalar(2);
    }
    if (!accepted) break;
    step *= Scalar(2);
  }
  // Start the next call from the last step known to be acceptable.
  step /= Scalar(2);
  return block;
}

template <typename Scalar>
void check_finite(const Matrix<Scalar>& grad, Index j, Index k) {
  if (!grad.allFinite()) {
    throw NumericalError("non-finite gradient from pair (" + std::to_string(j + 1) + "," +
                         std::to_string(k + 1) + ")");
  }
}

template <typename Scalar>
Matrix<Scalar> update_factor(const std::vector<Matrix<Scalar>>& factors,
                             const Vector<Scalar>& prior, Index k,
                             const PairwiseSet<Scalar>& pairs, const OptConfig& cfg,
                             Scalar& step) {
  const std::vector<Index> partners = pairs.partners(k);
  if (partners.empty()) return factors[k];
  const Scalar floor = Scalar(cfg.floor);
  // Oriented X_jk (rows for j) and the fixed A_j D(prior).
  std::vector<Matrix<Scalar>> xs;
  std::vector<Matrix<Scalar>> scaled;
  for (Index j : partners) {
    xs.push_back(pairs.at(j, k));
    scaled.push_back(factors[j] * prior.asDiagonal());
  }
  auto objective = [&](const Matrix<Scalar>& ak) {
    Scalar total = 0;
    for (std::size_t i = 0; i < partners.size(); ++i) {
      total += kl_divergence<Scalar>(xs[i], scaled[i] * ak.transpose(), floor);
    }
    return total;
  };
  auto gradient = [&](const Matrix<Scalar>& ak) {
    Matrix<Scalar> grad = Matrix<Scalar>::Zero(ak.rows(), ak.cols());
    for (std::size_t i = 0; i < partners.size(); ++i) {
      const Matrix<Scalar> resid = kl_residual<Scalar>(xs[i], scaled[i] * ak.transpose(), floor);
      grad.noalias() += resid.transpose() * scaled[i];
      check_finite(grad, partners[i], k);
    }
    return grad;
  };
  return mirror_descent<Scalar>(factors[k], cfg, step, objective, gradient);
}

template <typename Scalar>
Vector<Scalar> update_prior(const std::vector<Matrix<Scalar>>& factors,
                            const Vector<Scalar>& prior, const PairwiseSet<Scalar>& pairs,
                            const OptConfig& cfg, Scalar& step) {
  if (pairs.empty()) return prior;
  const Scalar floor = Scalar(cfg.floor);
  auto objective = [&](const Matrix<Scalar>& lam) {
    return total_objective<Scalar>(factors, lam.col(0), pairs, floor);
  };
  auto gradient = [&](const Matrix<Scalar>& lam) {
    Matrix<Scalar> grad = Matrix<Scalar>::Zero(lam.rows(), 1);
    for (const auto& [key, x] : pairs.entries()) {
      const auto& aj = factors[key.first];
      const auto& ak = factors[key.second];
      const Matrix<Scalar> resid =
          kl_residual<Scalar>(x, aj * lam.col(0).asDiagonal() * ak.transpose(), floor);
      grad.col(0) += (aj.transpose() * resid * ak).diagonal();
      check_finite(grad, key.first, key.second);
    }
    return grad;
  };
  Matrix<Scalar> lam = prior;
  lam = mirror_descent<Scalar>(lam, cfg, step, objective, gradient);
  return lam.col(0);
}

}  // namespace detail

/// Sum over Omega of the generalized KL divergence between X_jk and
/// A_j D(prior) A_k^T, with model entries floored.
template <typename Scalar>
Scalar kl_objective(const FactorModel<Scalar>& model, const PairwiseSet<Scalar>& pairs,
                    Scalar floor = kProbabilityFloor<Scalar>) {
  if (pairs.empty()) throw DataError("no pairwise marginals available");
  return detail::total_objective(model.factors(), model.prior(), pairs, floor);
}

/// One block update of A_k (inner_md_iters mirror-descent steps).
template <typename Scalar>
Matrix<Scalar> md_update_factor(const FactorModel<Scalar>& model, Index k,
                                const PairwiseSet<Scalar>& pairs, const OptConfig& cfg) {
  if (k < 0 || k >= model.num_vars()) throw DataError("variable index out of range");
  Scalar step = Scalar(cfg.step0);
  return detail::update_factor(model.factors(), model.prior(), k, pairs, cfg, step);
}

/// One block update of the prior.
template <typename Scalar>
Vector<Scalar> md_update_prior(const FactorModel<Scalar>& model,
                               const PairwiseSet<Scalar>& pairs, const OptConfig& cfg) {
  Scalar step = Scalar(cfg.step0);
  return detail::update_prior(model.factors(), model.prior(), pairs, cfg, step);
}

/// Model with every factor column and the prior drawn uniformly from the
/// probability simplex.
template <typename Scalar = double>
FactorModel<Scalar> random_simplex_model(const AlphabetSizes& sizes, Index rank,
                                         std::uint64_t seed) {
  if (rank < 1) throw ConfigError("rank must be positive");
  Rng rng(seed);
  auto draw = [&](Index rows, Index cols) {
    Matrix<Scalar> m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) m(r, c) = Scalar(rng.exponential());
      m.col(c) /= m.col(c).sum();
    }
    return m;
  };
  std::vector<Matrix<Scalar>> factors;
  for (Index s : sizes) factors.push_back(draw(s, rank));
  Vector<Scalar> prior = draw(rank, 1).col(0);
  return FactorModel<Scalar>(std::move(factors), std::move(prior));
}

/// Block coordinate descent: each outer iteration updates A_1..A_N in
/// order and then the prior. Stops when the relative objective change
/// drops below rel_tol or after max_outer_iters.
template <typename Scalar>
FitResult<Scalar> fit_cnmf_opt(const PairwiseSet<Scalar>& pairs, Index rank,
                               const std::optional<FactorModel<Scalar>>& init,
                               const OptConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw DataError("no pairwise marginals available");
  if (rank < 1) throw ConfigError("rank must be positive");
  FactorModel<Scalar> start =
      init ? *init : random_simplex_model<Scalar>(pairs.alphabet_sizes(), rank, cfg.seed);
  if (start.rank() != rank || start.alphabet_sizes() != pairs.alphabet_sizes()) {
    throw DataError("initial model shape does not match the marginals and rank");
  }

  const Scalar floor = Scalar(cfg.floor);
  std::vector<Matrix<Scalar>> factors = start.factors();
  Vector<Scalar> prior = start.prior();
  const Scalar mix = Scalar(cfg.init_mix);
  if (mix > Scalar(0)) {
    for (auto& a : factors) {
      a = (Scalar(1) - mix) * a.array() + mix / Scalar(a.rows());
    }
    prior = (Scalar(1) - mix) * prior.array() + mix / Scalar(prior.size());
  }
  FitReport report;
  Stopwatch clock;
  Scalar value = detail::total_objective(factors, prior, pairs, floor);
  report.initial_value = static_cast<double>(value);
  // One adaptive step size per block, kept across outer iterations.
  std::vector<Scalar> steps(factors.size() + 1, Scalar(cfg.step0));
  // Each pair's divergence is accurate to a few ulps of its unit mass;
  // changes below this are rounding.
  const Scalar noise =
      Scalar(64) * std::numeric_limits<Scalar>::epsilon() * Scalar(pairs.size());
  try {
    for (int it = 0; it < cfg.max_outer_iters; ++it) {
      for (Index n = 0; n < static_cast<Index>(factors.size()); ++n) {
        factors[n] = detail::update_factor(factors, prior, n, pairs, cfg, steps[n]);
      }
      prior = detail::update_prior(factors, prior, pairs, cfg, steps.back());
      const Scalar next = detail::total_objective(factors, prior, pairs, floor);
      if (!std::isfinite(static_cast<double>(next))) {
        throw NumericalError("objective became non-finite");
      }
      report.trace.push_back(static_cast<double>(next));
      report.seconds.push_back(clock.seconds());
      report.iterations = it + 1;
      const Scalar change = std::abs(value - next);
      const Scalar scale = std::abs(value);
      value = next;
      if (change <= Scalar(cfg.rel_tol) * scale || change <= noise) {
        report.converged = true;
        break;
      }
    }
  } catch (const NumericalError& e) {
    report.failure = e.what();
  }
  report.wall_seconds = clock.seconds();
  // Blocks are kept on the simplex by construction; renormalize to absorb
  // rounding before validation.
  for (auto& a : factors) a = normalize_columns_l1(a);
  prior /= prior.sum();
  return {FactorModel<Scalar>(std::move(factors), std::move(prior)), std::move(report)};
}

}  // namespace pmfrec
