#pragma once

// Independent brute-force reference implementations used by the tests.
// Everything here loops over definitions directly and shares no code with
// the library beyond the FactorModel container.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "pmfrec/factor_model.hpp"

namespace oracle {

using pmfrec::FactorModeld;
using pmfrec::Index;

/// Calls fn(codes) for every multi-index, last variable fastest.
inline void for_each_cell(const std::vector<Index>& sizes,
                          const std::function<void(const std::vector<Index>&)>& fn) {
  std::vector<Index> codes(sizes.size(), 0);
  for (;;) {
    fn(codes);
    Index n = static_cast<Index>(sizes.size()) - 1;
    for (; n >= 0; --n) {
      if (++codes[n] < sizes[n]) break;
      codes[n] = 0;
    }
    if (n < 0) return;
  }
}

/// sum_f prior(f) prod_n A_n(i_n, f), one entry at a time.
inline double joint_entry(const FactorModeld& m, const std::vector<Index>& codes) {
  double total = 0;
  for (Index f = 0; f < m.rank(); ++f) {
    double term = m.prior()(f);
    for (Index n = 0; n < m.num_vars(); ++n) term *= m.factor(n)(codes[n], f);
    total += term;
  }
  return total;
}

/// Flat joint PMF in last-variable-fastest order.
inline std::vector<double> joint(const FactorModeld& m) {
  std::vector<double> out;
  for_each_cell(m.alphabet_sizes(), [&](const std::vector<Index>& c) {
    out.push_back(joint_entry(m, c));
  });
  return out;
}

/// Pairwise marginal by summing the joint over every other variable.
inline Eigen::MatrixXd marginalize_pair(const FactorModeld& m, Index j, Index k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.alphabet_size(j), m.alphabet_size(k));
  for_each_cell(m.alphabet_sizes(), [&](const std::vector<Index>& c) {
    out(c[j], c[k]) += joint_entry(m, c);
  });
  return out;
}

/// Pr(target | evidence) by Bayes rule on the brute-force joint. Evidence
/// holds (variable, code) with code -1 for unobserved.
inline std::vector<double> bayes_conditional(const FactorModeld& m, Index target,
                                             const std::vector<Index>& evidence) {
  std::vector<double> num(static_cast<std::size_t>(m.alphabet_size(target)), 0.0);
  for_each_cell(m.alphabet_sizes(), [&](const std::vector<Index>& c) {
    for (Index n = 0; n < m.num_vars(); ++n) {
      if (n != target && evidence[n] >= 0 && evidence[n] != c[n]) return;
    }
    num[c[target]] += joint_entry(m, c);
  });
  const double z = std::accumulate(num.begin(), num.end(), 0.0);
  for (double& v : num) v /= z;
  return num;
}

/// Probability of one (possibly partially observed) sample under the model,
/// summing the joint over the unobserved variables.
inline double sample_probability(const FactorModeld& m, const std::vector<Index>& row) {
  double total = 0;
  for_each_cell(m.alphabet_sizes(), [&](const std::vector<Index>& c) {
    for (Index n = 0; n < m.num_vars(); ++n) {
      if (row[n] >= 0 && row[n] != c[n]) return;
    }
    total += joint_entry(m, c);
  });
  return total;
}

/// Generalized KL with the 0 log 0 = 0 convention and floored model.
inline double generalized_kl(const Eigen::MatrixXd& x, const Eigen::MatrixXd& model,
                             double floor) {
  double total = 0;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      const double mv = std::max(model(r, c), floor);
      const double xv = x(r, c);
      if (xv > 0) total += xv * std::log(xv / mv);
      total += mv - xv;
    }
  }
  return total;
}

/// Alignment cost of matching column f of a to column perm[f] of b.
inline double permutation_cost(const FactorModeld& a, const FactorModeld& b,
                               const std::vector<Index>& perm) {
  double cost = 0;
  for (Index f = 0; f < a.rank(); ++f) {
    const Index g = perm[f];
    for (Index n = 0; n < a.num_vars(); ++n) {
      cost += (a.factor(n).col(f) - b.factor(n).col(g)).squaredNorm();
    }
    const double d = a.prior()(f) - b.prior()(g);
    cost += d * d;
  }
  return cost;
}

/// Best permutation by exhaustive search; ties keep the lexicographically
/// first permutation.
inline std::pair<std::vector<Index>, double> exhaustive_alignment(const FactorModeld& a,
                                                                  const FactorModeld& b) {
  std::vector<Index> perm(static_cast<std::size_t>(a.rank()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    const double c = permutation_cost(a, b, perm);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

/// Row-normalized stacked second block distances to e_f, minimized over
/// every injective choice of rows (exhaustive; small F only).
inline double brute_separability(const FactorModeld& m, Index split) {
  std::vector<Eigen::VectorXd> rows;
  for (Index n = split; n < m.num_vars(); ++n) {
    for (Index i = 0; i < m.alphabet_size(n); ++i) {
      Eigen::VectorXd r = m.factor(n).row(i).transpose();
      const double s = r.sum();
      if (s > 0) rows.push_back(r / s);
    }
  }
  const Index rank = m.rank();
  const Index count = static_cast<Index>(rows.size());
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Index, double, std::vector<char>&)> rec = [&](Index f, double worst,
                                                                  std::vector<char>& used) {
    if (worst >= best) return;
    if (f == rank) {
      best = worst;
      return;
    }
    for (Index r = 0; r < count; ++r) {
      if (used[r]) continue;
      Eigen::VectorXd d = rows[r];
      d(f) -= 1.0;
      used[r] = 1;
      rec(f + 1, std::max(worst, d.norm()), used);
      used[r] = 0;
    }
  };
  std::vector<char> used(static_cast<std::size_t>(count), 0);
  rec(0, 0.0, used);
  return best;
}

}  // namespace oracle
