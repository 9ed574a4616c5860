#pragma once

// Synthetic ground truth: random conditional PMFs, optional planting of
// near-pure rows in the second split block, and sampling with random
// missingness.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/rng.hpp"
#include "pmfrec/sample_table.hpp"

namespace pmfrec {

struct SynthConfig {
  Index num_vars = 5;
  Index rank = 5;
  /// One entry per variable, or a single entry shared by all.
  AlphabetSizes alphabet_sizes{10};
  Index num_samples = 10000;
  double obs_prob = 1.0;
  std::optional<double> eps;
  Index split = 3;
  std::uint64_t seed = 0;

  AlphabetSizes sizes() const {
    if (alphabet_sizes.size() == 1) {
      return AlphabetSizes(static_cast<std::size_t>(num_vars), alphabet_sizes[0]);
    }
    return alphabet_sizes;
  }

  void validate() const {
    if (num_vars < 2) throw ConfigError("need at least two variables");
    if (rank < 1) throw ConfigError("rank must be positive");
    if (alphabet_sizes.size() != 1 && static_cast<Index>(alphabet_sizes.size()) != num_vars) {
      throw ConfigError("alphabet sizes must be one value or one per variable");
    }
    for (Index a : alphabet_sizes) {
      if (a < 1) throw ConfigError("alphabet sizes must be positive");
    }
    if (num_samples < 0) throw ConfigError("sample count must be nonnegative");
    if (!(obs_prob > 0 && obs_prob <= 1)) throw ConfigError("observation probability must lie in (0, 1]");
    if (eps && !(*eps >= 0 && *eps <= 1)) throw ConfigError("eps must lie in [0, 1]");
    if (split < 1 || split >= num_vars) throw ConfigError("split must lie in 1..N-1");
  }
};

/// Entries uniform on [0, 1), columns rescaled to unit l1 norm; the prior
/// is drawn the same way.
template <typename Scalar = double>
FactorModel<Scalar> gen_model(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x6d6f64656cULL));
  auto draw = [&](Index rows, Index cols) {
    Matrix<Scalar> m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) m(r, c) = Scalar(rng.uniform());
      const Scalar s = m.col(c).sum();
      if (s > Scalar(0)) {
        m.col(c) /= s;
      } else {
        m.col(c).setConstant(Scalar(1) / Scalar(rows));
      }
    }
    return m;
  };
  std::vector<Matrix<Scalar>> factors;
  for (Index a : cfg.sizes()) factors.push_back(draw(a, cfg.rank));
  Vector<Scalar> prior = draw(cfg.rank, 1).col(0);
  return FactorModel<Scalar>(std::move(factors), std::move(prior));
}

/// Stacked factors [A_M; ...; A_{N-1}] of the second split block.
template <typename Scalar>
Matrix<Scalar> split_block_rows(const FactorModel<Scalar>& model, Index split) {
  if (split < 0 || split >= model.num_vars()) throw ConfigError("split out of range");
  Index rows = 0;
  for (Index n = split; n < model.num_vars(); ++n) rows += model.alphabet_size(n);
  Matrix<Scalar> h(rows, model.rank());
  Index off = 0;
  for (Index n = split; n < model.num_vars(); ++n) {
    h.middleRows(off, model.alphabet_size(n)) = model.factor(n);
    off += model.alphabet_size(n);
  }
  return h;
}

namespace detail {

/// Kuhn's augmenting-path step for component f.
inline bool augment(Index f, const std::vector<std::vector<Index>>& adj,
                    std::vector<Index>& row_owner, std::vector<char>& seen) {
  for (Index r : adj[static_cast<std::size_t>(f)]) {
    if (seen[static_cast<std::size_t>(r)]) continue;
    seen[static_cast<std::size_t>(r)] = 1;
    if (row_owner[static_cast<std::size_t>(r)] < 0 ||
        augment(row_owner[static_cast<std::size_t>(r)], adj, row_owner, seen)) {
      row_owner[static_cast<std::size_t>(r)] = f;
      return true;
    }
  }
  return false;
}

inline bool perfect_matching(const Matrix<double>& dist, double threshold) {
  const Index rank = dist.cols();
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(rank));
  for (Index f = 0; f < rank; ++f) {
    for (Index r = 0; r < dist.rows(); ++r) {
      if (dist(r, f) <= threshold) adj[static_cast<std::size_t>(f)].push_back(r);
    }
  }
  std::vector<Index> owner(static_cast<std::size_t>(dist.rows()), -1);
  for (Index f = 0; f < rank; ++f) {
    std::vector<char> seen(static_cast<std::size_t>(dist.rows()), 0);
    if (!augment(f, adj, owner, seen)) return false;
  }
  return true;
}

}  // namespace detail

/// dist(l, f) = ||Hbar(l, :) - e_f||_2 over the row-normalized block rows.
template <typename Scalar>
Matrix<double> unit_vector_distances(const FactorModel<Scalar>& model, Index split) {
  const Matrix<Scalar> h = split_block_rows(model, split);
  Matrix<double> dist(h.rows(), h.cols());
  for (Index l = 0; l < h.rows(); ++l) {
    const double mass = static_cast<double>(h.row(l).sum());
    for (Index f = 0; f < h.cols(); ++f) {
      if (!(mass > 0)) {
        dist(l, f) = std::numeric_limits<double>::infinity();
        continue;
      }
      double sq = 0;
      for (Index g = 0; g < h.cols(); ++g) {
        const double v = static_cast<double>(h(l, g)) / mass - (g == f ? 1.0 : 0.0);
        sq += v * v;
      }
      dist(l, f) = std::sqrt(sq);
    }
  }
  return dist;
}

/// Smallest eps such that F distinct rows of the row-normalized second
/// block lie within eps of e_1..e_F (a bottleneck assignment).
template <typename Scalar>
double measure_separability(const FactorModel<Scalar>& model, Index split) {
  const Matrix<double> dist = unit_vector_distances(model, split);
  if (dist.rows() < dist.cols()) throw ConfigError("second block has fewer rows than the rank");
  std::vector<double> levels(dist.data(), dist.data() + dist.size());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::size_t lo = 0;
  std::size_t hi = levels.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (detail::perfect_matching(dist, levels[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return levels[lo];
}

template <typename Scalar>
struct PlantResult {
  FactorModel<Scalar> model;
  /// (variable, row, component) of every overwritten row.
  std::vector<std::array<Index, 3>> planted;
  /// Second block before column renormalization.
  Matrix<Scalar> pre_renormalization;
  /// measure_separability of the returned model.
  double measured_eps = 0;
};

/// Overwrites F distinct rows of the second split block with e_f + u,
/// where u sums to zero, is nonnegative off coordinate f, and has
/// ||u||_2 = eps; the touched factors are then column-renormalized.
template <typename Scalar>
PlantResult<Scalar> plant_separability(const FactorModel<Scalar>& model, Index split, double eps,
                                       std::uint64_t seed) {
  if (!(eps >= 0 && eps <= 1)) throw ConfigError("eps must lie in [0, 1]");
  if (split < 1 || split >= model.num_vars()) throw ConfigError("split must lie in 1..N-1");
  const Index rank = model.rank();
  Index block_rows = 0;
  for (Index n = split; n < model.num_vars(); ++n) block_rows += model.alphabet_size(n);
  if (block_rows < rank) {
    throw ConfigError("second split block has " + std::to_string(block_rows) +
                      " rows, fewer than the rank " + std::to_string(rank));
  }
  // Rows are taken from as few variables as possible (random variable
  // order, random rows within each). Every touched column then receives a
  // dominant planted entry, so column sums stay balanced and the
  // renormalization distorts the planted rows less.
  Rng rng(derive_seed(seed, 0x706c616e74ULL));
  auto shuffle = [&](auto& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(static_cast<Index>(v.size() - i)));
      std::swap(v[i], v[j]);
    }
  };
  std::vector<Index> vars;
  for (Index n = split; n < model.num_vars(); ++n) vars.push_back(n);
  shuffle(vars);
  std::vector<std::pair<Index, Index>> rows;  // (variable, row)
  for (Index n : vars) {
    std::vector<Index> codes(static_cast<std::size_t>(model.alphabet_size(n)));
    std::iota(codes.begin(), codes.end(), Index{0});
    shuffle(codes);
    for (Index i : codes) rows.emplace_back(n, i);
  }

  std::vector<Matrix<Scalar>> factors = model.factors();
  std::vector<char> touched(static_cast<std::size_t>(model.num_vars()), 0);
  PlantResult<Scalar> out{model, {}, {}, 0.0};
  for (Index f = 0; f < rank; ++f) {
    const auto [n, i] = rows[static_cast<std::size_t>(f)];
    Vector<double> u = Vector<double>::Zero(rank);
    if (rank > 1 && eps > 0) {
      for (Index g = 0; g < rank; ++g) u(g) = g == f ? 0.0 : std::abs(rng.normal());
      u(f) = -u.sum();
      const double norm = u.norm();
      if (norm > 0) u *= eps / norm;
    }
    Vector<double> row = u;
    row(f) += 1.0;
    factors[static_cast<std::size_t>(n)].row(i) = row.cast<Scalar>().transpose();
    touched[static_cast<std::size_t>(n)] = 1;
    out.planted.push_back({n, i, f});
  }

  out.pre_renormalization.resize(block_rows, rank);
  Index off = 0;
  for (Index n = split; n < model.num_vars(); ++n) {
    out.pre_renormalization.middleRows(off, model.alphabet_size(n)) =
        factors[static_cast<std::size_t>(n)];
    off += model.alphabet_size(n);
  }
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (touched[n]) factors[n] = normalize_columns_l1(factors[n]);
  }
  out.model = FactorModel<Scalar>(std::move(factors), model.prior());
  out.measured_eps = measure_separability(out.model, split);
  return out;
}

/// Draws S samples: latent f from the prior, each variable from its
/// conditional column, and each cell kept independently with probability
/// obs_prob.
template <typename Scalar>
SampleTable sample_data(const FactorModel<Scalar>& model, Index num_samples, double obs_prob,
                        std::uint64_t seed) {
  if (!(obs_prob > 0 && obs_prob <= 1)) throw ConfigError("observation probability must lie in (0, 1]");
  if (num_samples < 0) throw ConfigError("sample count must be nonnegative");
  const Index n_vars = model.num_vars();
  Vector<double> prior_cdf(model.rank());
  std::partial_sum(model.prior().data(), model.prior().data() + model.rank(), prior_cdf.data());
  std::vector<Matrix<double>> cdfs;
  for (const auto& a : model.factors()) {
    Matrix<double> c = a.template cast<double>();
    for (Index f = 0; f < c.cols(); ++f) {
      for (Index i = 1; i < c.rows(); ++i) c(i, f) += c(i - 1, f);
    }
    cdfs.push_back(std::move(c));
  }
  Rng rng(derive_seed(seed, 0x73616d706c65ULL));
  SampleTable::Cells cells(num_samples, n_vars);
  for (Index s = 0; s < num_samples; ++s) {
    const Index f = rng.categorical_cdf(prior_cdf);
    for (Index n = 0; n < n_vars; ++n) {
      const Index code = rng.categorical_cdf(cdfs[static_cast<std::size_t>(n)].col(f));
      const bool keep = rng.uniform() < obs_prob;
      cells(s, n) = keep ? static_cast<int>(code) : SampleTable::kMissing;
    }
  }
  return SampleTable(std::move(cells), model.alphabet_sizes());
}

}  // namespace pmfrec
