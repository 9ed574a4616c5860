#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pmfrec/types.hpp"

namespace pmfrec {

/// Latent naive-Bayes parameters of a joint PMF over N discrete variables.
///
/// factor(n)(i, f) = Pr(variable n takes value i | latent f), prior()(f) =
/// Pr(f). Every factor column and the prior lie on the probability simplex.
/// Instances are validated on construction and immutable afterwards.
template <typename Scalar>
class FactorModel {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  /// Tolerance used to check the simplex invariants.
  static constexpr double kSimplexTolerance = 1e-9;

  FactorModel(std::vector<MatrixType> factors, VectorType prior)
      : factors_(std::move(factors)), prior_(std::move(prior)) {
    validate();
  }

  Index num_vars() const { return static_cast<Index>(factors_.size()); }
  Index rank() const { return prior_.size(); }
  Index alphabet_size(Index n) const { return factors_[n].rows(); }

  AlphabetSizes alphabet_sizes() const {
    AlphabetSizes sizes;
    sizes.reserve(factors_.size());
    for (const auto& a : factors_) sizes.push_back(a.rows());
    return sizes;
  }

  const MatrixType& factor(Index n) const { return factors_[n]; }
  const std::vector<MatrixType>& factors() const { return factors_; }
  const VectorType& prior() const { return prior_; }

  /// Reorders the latent components: column f of the result is column
  /// perm[f] of this model, for every factor and the prior.
  FactorModel permuted(const std::vector<Index>& perm) const {
    if (static_cast<Index>(perm.size()) != rank()) {
      throw DataError("permutation length does not match model rank");
    }
    std::vector<MatrixType> factors = factors_;
    VectorType prior(rank());
    for (Index f = 0; f < rank(); ++f) {
      prior(f) = prior_(perm[f]);
      for (std::size_t n = 0; n < factors_.size(); ++n) {
        factors[n].col(f) = factors_[n].col(perm[f]);
      }
    }
    return FactorModel(std::move(factors), std::move(prior));
  }

  template <typename Other>
  FactorModel<Other> cast() const {
    std::vector<Matrix<Other>> factors;
    for (const auto& a : factors_) factors.push_back(a.template cast<Other>());
    return FactorModel<Other>(std::move(factors), prior_.template cast<Other>());
  }

 private:
  void validate() const {
    if (factors_.empty()) throw DataError("factor model needs at least one variable");
    if (prior_.size() < 1) throw DataError("factor model rank must be positive");
    check_simplex_columns(prior_, "prior");
    for (std::size_t n = 0; n < factors_.size(); ++n) {
      const auto& a = factors_[n];
      if (a.rows() < 1) {
        throw DataError("variable " + std::to_string(n + 1) + " has an empty alphabet");
      }
      if (a.cols() != prior_.size()) {
        throw DataError("factor " + std::to_string(n + 1) + " has " +
                        std::to_string(a.cols()) + " columns, expected " +
                        std::to_string(prior_.size()));
      }
      check_simplex_columns(a, "factor " + std::to_string(n + 1));
    }
  }

  template <typename Derived>
  static void check_simplex_columns(const Eigen::MatrixBase<Derived>& m,
                                    const std::string& what) {
    for (Index c = 0; c < m.cols(); ++c) {
      double sum = 0.0;
      for (Index r = 0; r < m.rows(); ++r) {
        const double v = static_cast<double>(m(r, c));
        if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kSimplexTolerance) {
          std::ostringstream msg;
          msg << what << " entry (" << r + 1 << "," << c + 1 << ") = " << v
              << " is not a probability";
          throw DataError(msg.str());
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kSimplexTolerance) {
        std::ostringstream msg;
        msg << what << " column " << c + 1 << " sums to " << sum;
        throw DataError(msg.str());
      }
    }
  }

  std::vector<MatrixType> factors_;
  VectorType prior_;
};

using FactorModeld = FactorModel<double>;

/// Returns m with every column scaled to unit l1 norm. Columns with zero
/// mass become uniform.
template <typename Derived>
auto normalize_columns_l1(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = m;
  for (Index c = 0; c < out.cols(); ++c) {
    const Scalar s = out.col(c).sum();
    if (s > Scalar(0)) {
      out.col(c) /= s;
    } else {
      out.col(c).setConstant(Scalar(1) / Scalar(out.rows()));
    }
  }
  return out;
}

}  // namespace pmfrec
