#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/inference.hpp"
#include "pmfrec/sample_table.hpp"

namespace pmfrec {

/// Estimated pairwise marginals X_jk over the availability set Omega.
///
/// Only j < k is stored; at(k, j) returns the transpose of the stored
/// X_jk.
template <typename Scalar>
class PairwiseSet {
 public:
  using MatrixType = Matrix<Scalar>;
  using Key = std::pair<Index, Index>;

  explicit PairwiseSet(AlphabetSizes sizes) : sizes_(std::move(sizes)) {}

  const AlphabetSizes& alphabet_sizes() const { return sizes_; }
  Index num_vars() const { return static_cast<Index>(sizes_.size()); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Stores X_jk (rows indexed by variable j). Any order of (j, k) is
  /// accepted; the matrix is transposed when j > k.
  void insert(Index j, Index k, MatrixType m, long co_count) {
    if (j == k) throw DataError("pairwise marginal needs two distinct variables");
    check_index(j);
    check_index(k);
    if (j > k) {
      std::swap(j, k);
      m.transposeInPlace();
    }
    if (m.rows() != sizes_[j] || m.cols() != sizes_[k]) {
      throw DataError("pairwise marginal (" + std::to_string(j + 1) + "," +
                      std::to_string(k + 1) + ") has the wrong shape");
    }
    entries_[{j, k}] = std::move(m);
    co_counts_[{j, k}] = co_count;
  }

  bool contains(Index j, Index k) const {
    if (j > k) std::swap(j, k);
    return entries_.count({j, k}) > 0;
  }

  /// X_jk oriented with rows for variable j.
  MatrixType at(Index j, Index k) const {
    if (j < k) return stored(j, k);
    return stored(k, j).transpose();
  }

  const MatrixType& stored(Index j, Index k) const {
    auto it = entries_.find({j, k});
    if (it == entries_.end()) {
      throw DataError("pair (" + std::to_string(j + 1) + "," + std::to_string(k + 1) +
                      ") is not available");
    }
    return it->second;
  }

  long co_count(Index j, Index k) const {
    if (j > k) std::swap(j, k);
    auto it = co_counts_.find({j, k});
    return it == co_counts_.end() ? 0 : it->second;
  }

  /// Ordered (j < k) pairs in Omega.
  const std::map<Key, MatrixType>& entries() const { return entries_; }

  /// Partners j of variable k with the pair (j, k) available (Omega_k).
  std::vector<Index> partners(Index k) const {
    std::vector<Index> out;
    for (const auto& [key, m] : entries_) {
      if (key.first == k) out.push_back(key.second);
      if (key.second == k) out.push_back(key.first);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void check_index(Index n) const {
    if (n < 0 || n >= num_vars()) throw DataError("pair variable index out of range");
  }

  AlphabetSizes sizes_;
  std::map<Key, MatrixType> entries_;
  std::map<Key, long> co_counts_;
};

using PairwiseSetd = PairwiseSet<double>;

/// Co-observation-normalized frequency estimates of every pairwise
/// marginal. Pairs observed together in fewer than `min_co_count` samples
/// are left out of Omega.
template <typename Scalar = double>
PairwiseSet<Scalar> estimate_pairwise(const SampleTable& data, long min_co_count = 1) {
  if (data.num_samples() < 1) throw DataError("pairwise estimation needs at least one sample");
  min_co_count = std::max(min_co_count, 1L);
  const auto& sizes = data.alphabet_sizes();
  const Index n_vars = data.num_vars();
  PairwiseSet<Scalar> pairs(sizes);
  std::vector<long> counts;
  for (Index j = 0; j < n_vars; ++j) {
    for (Index k = j + 1; k < n_vars; ++k) {
      counts.assign(static_cast<std::size_t>(sizes[j] * sizes[k]), 0);
      long co = 0;
      for (Index s = 0; s < data.num_samples(); ++s) {
        const int a = data(s, j);
        const int b = data(s, k);
        if (a == SampleTable::kMissing || b == SampleTable::kMissing) continue;
        ++counts[static_cast<std::size_t>(a * sizes[k] + b)];
        ++co;
      }
      if (co < min_co_count) continue;
      Matrix<Scalar> m(sizes[j], sizes[k]);
      for (Index a = 0; a < sizes[j]; ++a) {
        for (Index b = 0; b < sizes[k]; ++b) {
          m(a, b) = Scalar(counts[static_cast<std::size_t>(a * sizes[k] + b)]) / Scalar(co);
        }
      }
      pairs.insert(j, k, std::move(m), co);
    }
  }
  return pairs;
}

/// Exact pairwise marginals of a model for all j < k.
template <typename Scalar>
PairwiseSet<Scalar> pairwise_set_from_model(const FactorModel<Scalar>& model) {
  PairwiseSet<Scalar> pairs(model.alphabet_sizes());
  for (Index j = 0; j < model.num_vars(); ++j) {
    for (Index k = j + 1; k < model.num_vars(); ++k) {
      pairs.insert(j, k, pairwise_from_model(model, j, k), 0);
    }
  }
  return pairs;
}

/// Smallest column l1 mass over all pairwise matrices in both orientations
/// (eta).
template <typename Scalar>
Scalar column_mass_floor(const PairwiseSet<Scalar>& pairs) {
  if (pairs.empty()) throw DataError("no pairwise marginals available");
  Scalar eta = std::numeric_limits<Scalar>::max();
  for (const auto& [key, m] : pairs.entries()) {
    eta = std::min({eta, m.colwise().sum().minCoeff(), m.rowwise().sum().minCoeff()});
  }
  return std::max(eta, Scalar(0));
}

}  // namespace pmfrec
