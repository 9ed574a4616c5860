#pragma once

// Coupled NMF via the successive projection algorithm: assembles the block
// matrix of cross-split pairwise marginals, picks F near-pure columns with
// SPA, then recovers every conditional PMF and the latent prior.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/marginals.hpp"

namespace pmfrec {

/// Block matrix [X_{m n}] with rows from variables in the first split and
/// columns from variables in the second split.
template <typename Scalar>
struct VirtualMatrix {
  Matrix<Scalar> data;
  std::vector<Index> row_vars;
  std::vector<Index> col_vars;
  /// row_offsets[b] is the first row of block b; one trailing entry.
  std::vector<Index> row_offsets;
  std::vector<Index> col_offsets;

  /// Source variable of a column.
  Index col_var(Index c) const {
    auto it = std::upper_bound(col_offsets.begin(), col_offsets.end(), c);
    return col_vars[static_cast<std::size_t>(it - col_offsets.begin() - 1)];
  }
  Index row_var(Index r) const {
    auto it = std::upper_bound(row_offsets.begin(), row_offsets.end(), r);
    return row_vars[static_cast<std::size_t>(it - row_offsets.begin() - 1)];
  }
};

/// Default split size used when none is configured: ceil(N / 2).
inline Index default_split(Index num_vars) { return (num_vars + 1) / 2; }

/// Splits variables into {0..M-1} and {M..N-1} and stacks the pairwise
/// marginals between them.
template <typename Scalar>
VirtualMatrix<Scalar> build_virtual(const PairwiseSet<Scalar>& pairs, Index split) {
  const Index n_vars = pairs.num_vars();
  if (split < 1 || split >= n_vars) {
    throw ConfigError("split size " + std::to_string(split) + " must lie in 1.." +
                      std::to_string(n_vars - 1));
  }
  const auto& sizes = pairs.alphabet_sizes();
  VirtualMatrix<Scalar> vm;
  vm.row_offsets.push_back(0);
  for (Index m = 0; m < split; ++m) {
    vm.row_vars.push_back(m);
    vm.row_offsets.push_back(vm.row_offsets.back() + sizes[m]);
  }
  vm.col_offsets.push_back(0);
  for (Index n = split; n < n_vars; ++n) {
    vm.col_vars.push_back(n);
    vm.col_offsets.push_back(vm.col_offsets.back() + sizes[n]);
  }
  vm.data.resize(vm.row_offsets.back(), vm.col_offsets.back());
  for (std::size_t b = 0; b < vm.row_vars.size(); ++b) {
    for (std::size_t c = 0; c < vm.col_vars.size(); ++c) {
      const Index m = vm.row_vars[b];
      const Index n = vm.col_vars[c];
      if (!pairs.contains(m, n)) {
        throw DataError("pairwise marginal (" + std::to_string(m + 1) + "," +
                        std::to_string(n + 1) + ") is required by the split but missing");
      }
      vm.data.block(vm.row_offsets[b], vm.col_offsets[c], sizes[m], sizes[n]) = pairs.at(m, n);
    }
  }
  return vm;
}

template <typename Scalar>
struct SpaSelection {
  std::vector<Index> indices;
  /// Largest squared residual column norm at each pick.
  std::vector<Scalar> residual_norms;
};

/// Successive projection: at each step take the column with the largest
/// residual l2 norm, then project every column onto the orthogonal
/// complement of the picked ones. Ties go to the smallest index.
template <typename Derived>
SpaSelection<typename Derived::Scalar> spa_select(const Eigen::MatrixBase<Derived>& normalized,
                                                  Index rank) {
  using Scalar = typename Derived::Scalar;
  const Index rows = normalized.rows();
  const Index cols = normalized.cols();
  if (rank < 1 || rank > std::min(rows, cols)) {
    throw ConfigError("SPA rank " + std::to_string(rank) + " exceeds matrix dimensions " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!normalized.allFinite()) throw NumericalError("SPA input contains non-finite entries");

  Matrix<Scalar> residual = normalized;
  Matrix<Scalar> basis(rows, rank);
  SpaSelection<Scalar> out;
  Scalar first_peak = 0;
  for (Index f = 0; f < rank; ++f) {
    const Vector<Scalar> norms = residual.colwise().squaredNorm().transpose();
    Index pick = 0;
    for (Index c = 1; c < cols; ++c) {
      if (norms(c) > norms(pick)) pick = c;
    }
    if (f == 0) first_peak = norms(pick);
    if (!(norms(pick) > Scalar(1e-20) * first_peak) || !(norms(pick) > Scalar(0))) {
      throw NumericalError("SPA residual vanished after " + std::to_string(f) + " of " +
                           std::to_string(rank) + " picks: input is rank deficient");
    }
    out.indices.push_back(pick);
    out.residual_norms.push_back(norms(pick));

    Vector<Scalar> q = normalized.col(pick);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index b = 0; b < f; ++b) q -= basis.col(b).dot(q) * basis.col(b);
    }
    q.normalize();
    basis.col(f) = q;
    residual.noalias() -= q * (q.transpose() * residual);
  }
  return out;
}

/// Projected-gradient solver for min_{H >= 0} ||X - W H^T||_F^2.
template <typename Scalar>
struct NnlsResult {
  Matrix<Scalar> h;
  Scalar residual = 0;
  int iterations = 0;
  bool converged = false;
};

template <typename Scalar>
NnlsResult<Scalar> nnls_projected_gradient(const Matrix<Scalar>& w, const Matrix<Scalar>& x,
                                           int max_iters = 500, Scalar rel_tol = Scalar(1e-10)) {
  const Matrix<Scalar> gram = w.transpose() * w;
  const Matrix<Scalar> wtx = w.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
  const Scalar lipschitz = eig.eigenvalues().maxCoeff();

  // Warm start from the clipped unconstrained solution.
  Matrix<Scalar> y = gram.completeOrthogonalDecomposition().solve(wtx).cwiseMax(Scalar(0));
  auto objective = [&](const Matrix<Scalar>& cand) {
    return Scalar(0.5) * (x - w * cand).squaredNorm();
  };
  NnlsResult<Scalar> out;
  Scalar value = objective(y);
  // Residuals at rounding level count as converged; the relative test is
  // meaningless there.
  const Scalar exact = Scalar(0.5) * (Scalar(1e-14) * x.norm()) * (Scalar(1e-14) * x.norm());
  if (value <= exact) {
    out.converged = true;
  } else if (lipschitz > Scalar(0)) {
    for (out.iterations = 0; out.iterations < max_iters;) {
      Matrix<Scalar> next = (y - (gram * y - wtx) / lipschitz).cwiseMax(Scalar(0));
      ++out.iterations;
      const Scalar next_value = objective(next);
      const bool stalled = next == y;
      const Scalar change = std::abs(value - next_value);
      y.swap(next);
      const Scalar prev = value;
      value = next_value;
      if (stalled || value <= exact ||
          change <= rel_tol * std::max(std::abs(prev), std::numeric_limits<Scalar>::min())) {
        out.converged = true;
        break;
      }
    }
  } else {
    out.converged = true;
  }
  out.h = y.transpose();
  out.residual = std::sqrt(Scalar(2) * value);
  return out;
}

template <typename Scalar>
struct SpaResult {
  /// Selected columns of the virtual matrix, in pick order.
  std::vector<Index> selected;
  FactorModel<Scalar> model;
  /// sigma_max / sigma_min of the selected normalized columns.
  Scalar condition_number = 0;
  /// ||X - W H^T||_F at the nonnegative least-squares solution.
  Scalar nnls_residual = 0;
  bool nnls_converged = true;
  /// ||(H (.) W) lambda - vec(X)||_2 with the final prior.
  Scalar prior_residual = 0;
  /// Columns left out of the selection because their l1 mass vanished.
  std::vector<Index> dropped_columns;
  /// Largest squared residual norm at each SPA pick.
  std::vector<Scalar> residual_norms;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> normalized_block(const Matrix<Scalar>& stacked, Index offset, Index size) {
  return normalize_columns_l1(stacked.middleRows(offset, size).cwiseMax(Scalar(0)));
}

}  // namespace detail

/// Recovers all factors and the prior from the virtual matrix and the
/// chosen column indices.
template <typename Scalar>
SpaResult<Scalar> extract_model(const VirtualMatrix<Scalar>& vm,
                                const std::vector<Index>& selected) {
  const Index rank = static_cast<Index>(selected.size());
  if (rank < 1) throw ConfigError("no columns selected");
  const Matrix<Scalar>& x = vm.data;

  Matrix<Scalar> w_hat(x.rows(), rank);
  for (Index f = 0; f < rank; ++f) {
    const Index c = selected[static_cast<std::size_t>(f)];
    if (c < 0 || c >= x.cols()) throw DataError("selected column index out of range");
    const Scalar mass = x.col(c).sum();
    if (!(mass > Scalar(0))) throw NumericalError("selected column has no mass");
    w_hat.col(f) = x.col(c) / mass;
  }

  Eigen::JacobiSVD<Matrix<Scalar>> svd(w_hat);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv(0);
  const Scalar smin = sv(sv.size() - 1);
  if (!(smin > Scalar(1e-10) * smax)) {
    throw NumericalError("selected columns are rank deficient (sigma_min/sigma_max = " +
                         std::to_string(static_cast<double>(smin / smax)) + ")");
  }

  std::vector<Matrix<Scalar>> factors(vm.row_vars.size() + vm.col_vars.size());
  for (std::size_t b = 0; b < vm.row_vars.size(); ++b) {
    factors[static_cast<std::size_t>(vm.row_vars[b])] = detail::normalized_block(
        w_hat, vm.row_offsets[b], vm.row_offsets[b + 1] - vm.row_offsets[b]);
  }

  NnlsResult<Scalar> nnls = nnls_projected_gradient<Scalar>(w_hat, x);
  for (std::size_t b = 0; b < vm.col_vars.size(); ++b) {
    factors[static_cast<std::size_t>(vm.col_vars[b])] = detail::normalized_block(
        nnls.h, vm.col_offsets[b], vm.col_offsets[b + 1] - vm.col_offsets[b]);
  }

  Matrix<Scalar> w_tilde(x.rows(), rank);
  for (std::size_t b = 0; b < vm.row_vars.size(); ++b) {
    w_tilde.middleRows(vm.row_offsets[b], vm.row_offsets[b + 1] - vm.row_offsets[b]) =
        factors[static_cast<std::size_t>(vm.row_vars[b])];
  }
  Matrix<Scalar> h_tilde(x.cols(), rank);
  for (std::size_t b = 0; b < vm.col_vars.size(); ++b) {
    h_tilde.middleRows(vm.col_offsets[b], vm.col_offsets[b + 1] - vm.col_offsets[b]) =
        factors[static_cast<std::size_t>(vm.col_vars[b])];
  }

  // Khatri-Rao system: column f is kron(h_tilde(:, f), w_tilde(:, f)),
  // matching column-major vec(X).
  const Index rows = x.rows();
  Matrix<Scalar> khatri_rao(rows * x.cols(), rank);
  for (Index f = 0; f < rank; ++f) {
    for (Index c = 0; c < x.cols(); ++c) {
      khatri_rao.col(f).segment(c * rows, rows) = h_tilde(c, f) * w_tilde.col(f);
    }
  }
  const Eigen::Map<const Vector<Scalar>> vec_x(x.data(), x.size());
  Vector<Scalar> prior = khatri_rao.completeOrthogonalDecomposition().solve(vec_x);
  prior = prior.cwiseMax(Scalar(0));
  const Scalar total = prior.sum();
  if (!(total > Scalar(0))) throw NumericalError("latent prior estimate has no positive mass");
  prior /= total;

  SpaResult<Scalar> out{selected, FactorModel<Scalar>(std::move(factors), prior), 0, 0, true, 0, {}, {}};
  out.condition_number = smax / smin;
  out.nnls_residual = nnls.residual;
  out.nnls_converged = nnls.converged;
  out.prior_residual = (khatri_rao * prior - vec_x).norm();
  return out;
}

/// Full initializer: virtual matrix, l1 column normalization (dropping
/// columns whose mass is below 1e-12), SPA, and factor extraction.
template <typename Scalar>
SpaResult<Scalar> fit_cnmf_spa(const PairwiseSet<Scalar>& pairs, Index rank, Index split) {
  const VirtualMatrix<Scalar> vm = build_virtual(pairs, split);
  std::vector<Index> kept;
  std::vector<Index> dropped;
  for (Index c = 0; c < vm.data.cols(); ++c) {
    (vm.data.col(c).sum() >= Scalar(1e-12) ? kept : dropped).push_back(c);
  }
  Matrix<Scalar> normalized(vm.data.rows(), static_cast<Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    normalized.col(static_cast<Index>(i)) = vm.data.col(kept[i]) / vm.data.col(kept[i]).sum();
  }
  const SpaSelection<Scalar> sel = spa_select(normalized, rank);
  std::vector<Index> selected;
  for (Index i : sel.indices) selected.push_back(kept[static_cast<std::size_t>(i)]);
  SpaResult<Scalar> out = extract_model(vm, selected);
  out.dropped_columns = std::move(dropped);
  out.residual_norms = sel.residual_norms;
  return out;
}

}  // namespace pmfrec
