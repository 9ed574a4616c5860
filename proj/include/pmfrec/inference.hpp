#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmfrec/factor_model.hpp"

namespace pmfrec {

/// Observed values of some variables: variable index -> 0-based code.
using Evidence = std::map<Index, Index>;

/// Dense joint PMF, flattened in row-major order (last variable fastest).
template <typename Scalar>
class JointPmf {
 public:
  JointPmf(AlphabetSizes sizes, Vector<Scalar> values)
      : sizes_(std::move(sizes)), values_(std::move(values)) {
    if (cell_count(sizes_) != static_cast<std::size_t>(values_.size())) {
      throw DataError("joint PMF value count does not match alphabet sizes");
    }
  }

  static std::size_t cell_count(const AlphabetSizes& sizes) {
    std::size_t cells = 1;
    for (Index s : sizes) cells *= static_cast<std::size_t>(s);
    return cells;
  }

  const AlphabetSizes& alphabet_sizes() const { return sizes_; }
  const Vector<Scalar>& values() const { return values_; }

  /// Flat offset of a multi-index of 0-based codes.
  std::size_t offset(const std::vector<Index>& codes) const {
    std::size_t off = 0;
    for (std::size_t n = 0; n < sizes_.size(); ++n) {
      off = off * static_cast<std::size_t>(sizes_[n]) + static_cast<std::size_t>(codes[n]);
    }
    return off;
  }

  Scalar operator()(const std::vector<Index>& codes) const {
    return values_(static_cast<Index>(offset(codes)));
  }

 private:
  AlphabetSizes sizes_;
  Vector<Scalar> values_;
};

/// Total number of cells of the joint PMF over `sizes`, saturating on
/// overflow.
inline double joint_cell_count(const AlphabetSizes& sizes) {
  double cells = 1.0;
  for (Index s : sizes) cells *= static_cast<double>(s);
  return cells;
}

/// values(i_1..i_N) = sum_f prior(f) prod_n A_n(i_n, f).
template <typename Scalar>
JointPmf<Scalar> reconstruct_joint(const FactorModel<Scalar>& model,
                                   std::size_t cell_budget = kDefaultCellBudget) {
  const AlphabetSizes sizes = model.alphabet_sizes();
  const double cells = joint_cell_count(sizes);
  if (cells > static_cast<double>(cell_budget)) {
    throw DataError("joint PMF needs " + std::to_string(static_cast<long double>(cells)) +
                    " cells, budget is " + std::to_string(cell_budget));
  }
  Vector<Scalar> values = Vector<Scalar>::Zero(static_cast<Index>(cells));
  Vector<Scalar> term;
  Vector<Scalar> next;
  for (Index f = 0; f < model.rank(); ++f) {
    term.setConstant(1, model.prior()(f));
    for (Index n = 0; n < model.num_vars(); ++n) {
      const auto col = model.factor(n).col(f);
      next.resize(term.size() * col.size());
      for (Index a = 0; a < term.size(); ++a) {
        next.segment(a * col.size(), col.size()) = term(a) * col;
      }
      term.swap(next);
    }
    values += term;
  }
  return JointPmf<Scalar>(sizes, std::move(values));
}

/// X_jk = A_j D(prior) A_k^T. Always evaluated in the (min, max) order so
/// that X_kj is exactly the transpose of X_jk.
template <typename Scalar>
Matrix<Scalar> pairwise_from_model(const FactorModel<Scalar>& model, Index j, Index k) {
  if (j == k) throw DataError("pairwise marginal needs two distinct variables");
  if (j < 0 || k < 0 || j >= model.num_vars() || k >= model.num_vars()) {
    throw DataError("pairwise marginal variable index out of range");
  }
  if (j > k) return pairwise_from_model(model, k, j).transpose();
  return model.factor(j) * model.prior().asDiagonal() * model.factor(k).transpose();
}

/// Pr(target | evidence), marginalizing every unobserved variable.
///
/// Evaluated in the log domain with the probability floor; never builds
/// the joint tensor.
template <typename Scalar>
Vector<Scalar> conditional_target_dist(const FactorModel<Scalar>& model, Index target,
                                       const Evidence& evidence) {
  using std::exp;
  using std::log;
  if (target < 0 || target >= model.num_vars()) {
    throw DataError("target variable index out of range");
  }
  const Scalar floor = kProbabilityFloor<Scalar>;
  Vector<Scalar> log_weight(model.rank());
  for (Index f = 0; f < model.rank(); ++f) {
    log_weight(f) = log(std::max(model.prior()(f), floor));
  }
  for (const auto& [var, code] : evidence) {
    if (var == target) throw DataError("evidence must not include the target variable");
    if (var < 0 || var >= model.num_vars()) {
      throw DataError("evidence variable index out of range");
    }
    if (code < 0 || code >= model.alphabet_size(var)) {
      throw DataError("evidence code out of range for variable " + std::to_string(var + 1));
    }
    for (Index f = 0; f < model.rank(); ++f) {
      log_weight(f) += log(std::max(model.factor(var)(code, f), floor));
    }
  }
  const Scalar peak = log_weight.maxCoeff();
  Vector<Scalar> weight(model.rank());
  for (Index f = 0; f < model.rank(); ++f) weight(f) = exp(log_weight(f) - peak);
  Vector<Scalar> dist = model.factor(target) * weight;
  const Scalar total = dist.sum();
  if (!(total > Scalar(0)) || !std::isfinite(static_cast<double>(total))) {
    throw NumericalError("degenerate evidence: conditional distribution has no mass");
  }
  return dist / total;
}

/// Most probable 0-based code of the target; ties go to the smallest code.
template <typename Scalar>
Index predict_map(const FactorModel<Scalar>& model, Index target, const Evidence& evidence) {
  const Vector<Scalar> dist = conditional_target_dist(model, target, evidence);
  Index best = 0;
  for (Index i = 1; i < dist.size(); ++i) {
    if (dist(i) > dist(best)) best = i;
  }
  return best;
}

/// Conditional expectation of the target in 1-based code units, i.e.
/// sum_i i * Pr(code i | evidence) with i = 1..I_target.
template <typename Scalar>
Scalar predict_mmse(const FactorModel<Scalar>& model, Index target, const Evidence& evidence) {
  const Vector<Scalar> dist = conditional_target_dist(model, target, evidence);
  Scalar mean = 0;
  for (Index i = 0; i < dist.size(); ++i) mean += Scalar(i + 1) * dist(i);
  return mean;
}

}  // namespace pmfrec
