#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/inference.hpp"

namespace pmfrec {

/// Common column permutation between two models.
///
/// perm[f] is the column of the second model matched to column f of the
/// first; the second model's columns line up with the first after
/// `permuted(perm)`.
struct Alignment {
  std::vector<Index> perm;
  double cost = 0;
};

/// Exact minimum-cost perfect matching on a square cost matrix
/// (Hungarian method with potentials, O(n^3)). Returns assignment[row] =
/// column.
template <typename Derived>
std::vector<Index> solve_assignment(const Eigen::MatrixBase<Derived>& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw DataError("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual start column.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  for (Index row = 1; row <= n; ++row) {
    match[0] = row;
    Index col0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(col0)] = 1;
      const Index row0 = match[static_cast<std::size_t>(col0)];
      double delta = inf;
      Index col1 = 0;
      for (Index c = 1; c <= n; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (used[cu]) continue;
        const double cur = static_cast<double>(cost(row0 - 1, c - 1)) -
                           u[static_cast<std::size_t>(row0)] - v[cu];
        if (cur < minv[cu]) {
          minv[cu] = cur;
          way[cu] = col0;
        }
        if (minv[cu] < delta) {
          delta = minv[cu];
          col1 = c;
        }
      }
      for (Index c = 0; c <= n; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (used[cu]) {
          u[static_cast<std::size_t>(match[cu])] += delta;
          v[cu] -= delta;
        } else {
          minv[cu] -= delta;
        }
      }
      col0 = col1;
    } while (match[static_cast<std::size_t>(col0)] != 0);
    do {
      const Index col1 = way[static_cast<std::size_t>(col0)];
      match[static_cast<std::size_t>(col0)] = match[static_cast<std::size_t>(col1)];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n), 0);
  for (Index c = 1; c <= n; ++c) {
    assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(c)] - 1)] = c - 1;
  }
  return assignment;
}

/// cost(f, g) = sum_n ||B_n(:, g) - A_n(:, f)||^2 + (prior_B(g) - prior_A(f))^2.
template <typename Scalar>
Matrix<double> alignment_costs(const FactorModel<Scalar>& a, const FactorModel<Scalar>& b) {
  if (a.rank() != b.rank() || a.alphabet_sizes() != b.alphabet_sizes()) {
    throw DataError("models being compared have different shapes");
  }
  const Index rank = a.rank();
  Matrix<double> cost(rank, rank);
  for (Index f = 0; f < rank; ++f) {
    for (Index g = 0; g < rank; ++g) {
      double c = 0;
      for (Index n = 0; n < a.num_vars(); ++n) {
        c += static_cast<double>((b.factor(n).col(g) - a.factor(n).col(f)).squaredNorm());
      }
      const double d = static_cast<double>(b.prior()(g) - a.prior()(f));
      cost(f, g) = c + d * d;
    }
  }
  return cost;
}

template <typename Scalar>
Alignment align(const FactorModel<Scalar>& a, const FactorModel<Scalar>& b) {
  const Matrix<double> cost = alignment_costs(a, b);
  Alignment out;
  out.perm = solve_assignment(cost);
  for (Index f = 0; f < a.rank(); ++f) out.cost += cost(f, out.perm[static_cast<std::size_t>(f)]);
  return out;
}

/// Aligned squared factor error averaged over the F (N + 1) columns of
/// all factors and the prior.
template <typename Scalar>
double mse(const FactorModel<Scalar>& a, const FactorModel<Scalar>& b) {
  const Alignment al = align(a, b);
  return al.cost / static_cast<double>(a.rank() * (a.num_vars() + 1));
}

/// ||vec(P_b) - vec(P_a)||_1 / ||vec(P_a)||_1 for the joint PMFs, with
/// `a` as the reference. The tensors are streamed one trailing
/// I_{N-1} x I_N slice at a time, so memory stays small, but the cell
/// budget still bounds the work.
template <typename Scalar>
double mre(const FactorModel<Scalar>& a, const FactorModel<Scalar>& b,
           std::size_t cell_budget = kDefaultCellBudget) {
  if (a.alphabet_sizes() != b.alphabet_sizes()) {
    throw DataError("models being compared have different alphabets");
  }
  const AlphabetSizes sizes = a.alphabet_sizes();
  const double cells = joint_cell_count(sizes);
  if (cells > static_cast<double>(cell_budget)) {
    throw DataError("joint PMF needs " + std::to_string(static_cast<long double>(cells)) +
                    " cells, budget is " + std::to_string(cell_budget));
  }
  const Index n_vars = a.num_vars();
  if (n_vars < 2) {
    const Matrix<double> pa = a.factor(0).template cast<double>() * a.prior().template cast<double>();
    const Matrix<double> pb = b.factor(0).template cast<double>() * b.prior().template cast<double>();
    return (pb - pa).template lpNorm<1>() / pa.template lpNorm<1>();
  }
  const Matrix<double> a_y = a.factor(n_vars - 2).template cast<double>();
  const Matrix<double> a_z = a.factor(n_vars - 1).template cast<double>();
  const Matrix<double> b_y = b.factor(n_vars - 2).template cast<double>();
  const Matrix<double> b_z = b.factor(n_vars - 1).template cast<double>();
  std::vector<Index> codes(static_cast<std::size_t>(n_vars - 2), 0);
  double diff = 0;
  double ref = 0;
  for (;;) {
    Vector<double> wa = a.prior().template cast<double>();
    Vector<double> wb = b.prior().template cast<double>();
    for (Index n = 0; n < n_vars - 2; ++n) {
      const Index i = codes[static_cast<std::size_t>(n)];
      wa.array() *= a.factor(n).row(i).transpose().template cast<double>().array();
      wb.array() *= b.factor(n).row(i).transpose().template cast<double>().array();
    }
    const Matrix<double> sa = a_y * wa.asDiagonal() * a_z.transpose();
    const Matrix<double> sb = b_y * wb.asDiagonal() * b_z.transpose();
    diff += (sb - sa).template lpNorm<1>();
    ref += sa.template lpNorm<1>();
    // Odometer over the leading variables, last one fastest.
    Index n = n_vars - 3;
    for (; n >= 0; --n) {
      auto& c = codes[static_cast<std::size_t>(n)];
      if (++c < sizes[static_cast<std::size_t>(n)]) break;
      c = 0;
    }
    if (n < 0) break;
  }
  return diff / ref;
}

struct RatingErrors {
  double rmse = 0;
  double mae = 0;
};

inline RatingErrors rating_errors(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw DataError("rating lists differ in length");
  if (truth.empty()) throw DataError("rating lists are empty");
  double sq = 0;
  double abs = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = pred[i] - truth[i];
    sq += d * d;
    abs += std::abs(d);
  }
  const double n = static_cast<double>(truth.size());
  return {std::sqrt(sq / n), abs / n};
}

}  // namespace pmfrec
