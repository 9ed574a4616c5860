#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "pmfrec/cnmf_opt.hpp"
#include "pmfrec/cnmf_spa.hpp"
#include "pmfrec/evaluation.hpp"
#include "pmfrec/inference.hpp"
#include "pmfrec/marginals.hpp"
#include "pmfrec/synth.hpp"

using namespace pmfrec;

namespace {

FactorModeld small_model(std::uint64_t seed, Index n_vars = 4, Index alphabet = 4, Index rank = 3) {
  SynthConfig cfg;
  cfg.num_vars = n_vars;
  cfg.rank = rank;
  cfg.alphabet_sizes = {alphabet};
  cfg.split = n_vars / 2;
  cfg.seed = seed;
  return gen_model(cfg);
}

PairwiseSetd sampled_pairs(const FactorModeld& m, Index samples, double p, std::uint64_t seed) {
  return estimate_pairwise(sample_data(m, samples, p, seed));
}

double oracle_objective(const FactorModeld& m, const PairwiseSetd& pairs, double floor) {
  double total = 0;
  for (const auto& [key, x] : pairs.entries()) {
    Eigen::MatrixXd model(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index c = 0; c < x.cols(); ++c) {
        double v = 0;
        for (Index f = 0; f < m.rank(); ++f) {
          v += m.prior()(f) * m.factor(key.first)(r, f) * m.factor(key.second)(c, f);
        }
        model(r, c) = v;
      }
    }
    total += oracle::generalized_kl(x, model, floor);
  }
  return total;
}

FactorModeld permute_components(const FactorModeld& m, const std::vector<Index>& perm) {
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& a : m.factors()) {
    Eigen::MatrixXd b(a.rows(), a.cols());
    for (Index f = 0; f < m.rank(); ++f) b.col(f) = a.col(perm[f]);
    factors.push_back(b);
  }
  Eigen::VectorXd prior(m.rank());
  for (Index f = 0; f < m.rank(); ++f) prior(f) = m.prior()(perm[f]);
  return FactorModeld(std::move(factors), std::move(prior));
}

void check_feasible(const FactorModeld& m) {
  for (const auto& a : m.factors()) {
    CHECK(a.minCoeff() >= 0.0);
    CHECK((a.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
  CHECK(m.prior().minCoeff() >= 0.0);
  CHECK(std::abs(m.prior().sum() - 1.0) <= 1e-12);
}

}  // namespace

TEST_CASE("generalized KL examples") {
  Eigen::MatrixXd x(1, 1), m(1, 1);
  x << 1.0;
  m << 0.5;
  CHECK(detail::kl_divergence<double>(x, m, 1e-12) == doctest::Approx(std::log(2.0) - 0.5));
  CHECK(detail::kl_divergence<double>(x, x, 1e-12) == 0.0);
  // 0 log 0 = 0: zero data contributes only the model mass.
  x << 0.0;
  CHECK(detail::kl_divergence<double>(x, m, 1e-12) == doctest::Approx(0.5));
  // The floor replaces zero model entries.
  x << 1.0;
  m << 0.0;
  CHECK(detail::kl_divergence<double>(x, m, 1e-3) == doctest::Approx(std::log(1e3) - 1 + 1e-3));
}

TEST_CASE("objective matches the entrywise oracle and vanishes on exact marginals") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FactorModeld truth = small_model(seed);
    const FactorModeld other = small_model(seed + 100);
    const PairwiseSetd noisy = sampled_pairs(truth, 200, 0.7, seed);
    CHECK(kl_objective(other, noisy) ==
          doctest::Approx(oracle_objective(other, noisy, kProbabilityFloor<double>)).epsilon(1e-12));
    CHECK(std::abs(kl_objective(truth, pairwise_set_from_model(truth))) <= 1e-14);
  }
}

TEST_CASE("block updates leave the truth stationary") {
  const FactorModeld truth = small_model(3);
  const PairwiseSetd pairs = pairwise_set_from_model(truth);
  const OptConfig cfg;
  for (Index k = 0; k < truth.num_vars(); ++k) {
    const Eigen::MatrixXd a = md_update_factor(truth, k, pairs, cfg);
    CHECK((a - truth.factor(k)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const Eigen::VectorXd lam = md_update_prior(truth, pairs, cfg);
  CHECK((lam - truth.prior()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero step leaves a block unchanged") {
  const FactorModeld truth = small_model(4);
  const FactorModeld start = small_model(5);
  const PairwiseSetd pairs = pairwise_set_from_model(truth);
  OptConfig cfg;
  cfg.step0 = 0.0;
  CHECK(md_update_factor(start, 1, pairs, cfg) == start.factor(1));
  CHECK(md_update_prior(start, pairs, cfg) == start.prior());
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a single block update never increases the objective") {
  const OptConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FactorModeld truth = small_model(seed);
    const FactorModeld start = random_simplex_model<double>(truth.alphabet_sizes(), 3, seed + 7);
    const PairwiseSetd pairs = sampled_pairs(truth, 300, 0.6, seed);
    const double before = kl_objective(start, pairs);
    const Index k = static_cast<Index>(seed % 4);
    std::vector<Eigen::MatrixXd> factors = start.factors();
    factors[k] = md_update_factor(start, k, pairs, cfg);
    const FactorModeld after_factor(factors, start.prior());
    const double mid = kl_objective(after_factor, pairs);
    CHECK(mid <= before);
    const FactorModeld after_prior(factors, md_update_prior(after_factor, pairs, cfg));
    CHECK(kl_objective(after_prior, pairs) <= mid);
    check_feasible(after_prior);
  }
}

TEST_CASE("fit objective is monotone and iterates stay feasible") {
  OptConfig cfg;
  cfg.max_outer_iters = 30;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FactorModeld truth = small_model(seed, 5, 6, 3);
    const PairwiseSetd pairs = sampled_pairs(truth, 2000, 0.5, seed);
    cfg.seed = seed;
    const FitResult<double> r = fit_cnmf_opt<double>(pairs, 3, std::nullopt, cfg);
    CHECK(r.report.failure.empty());
    double prev = r.report.initial_value;
    for (double v : r.report.trace) {
      CHECK(v <= prev);
      prev = v;
    }
    check_feasible(r.model);
    CHECK(kl_objective(r.model, pairs, cfg.floor) <= r.report.initial_value);
  }
}

TEST_CASE("starting at the truth converges immediately") {
  const FactorModeld truth = small_model(11, 6, 5, 4);
  OptConfig cfg;
  cfg.init_mix = 0.0;
  const FitResult<double> r =
      fit_cnmf_opt<double>(pairwise_set_from_model(truth), 4, truth, cfg);
  CHECK(r.report.converged);
  CHECK(r.report.iterations <= 2);
  CHECK(r.report.trace.back() <= 1e-10);
  CHECK(mse(truth, r.model) <= 1e-20);
}

TEST_CASE("permuting the initial components permutes the result") {
  const FactorModeld truth = small_model(12, 5, 4, 3);
  const PairwiseSetd pairs = sampled_pairs(truth, 1000, 0.8, 12);
  const FactorModeld init = random_simplex_model<double>(truth.alphabet_sizes(), 3, 99);
  const std::vector<Index> perm{2, 0, 1};
  OptConfig cfg;
  cfg.max_outer_iters = 5;
  const FactorModeld a = fit_cnmf_opt<double>(pairs, 3, init, cfg).model;
  const FactorModeld b = fit_cnmf_opt<double>(pairs, 3, permute_components(init, perm), cfg).model;
  const FactorModeld expected = permute_components(a, perm);
  for (Index n = 0; n < a.num_vars(); ++n) {
    CHECK((b.factor(n) - expected.factor(n)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK((b.prior() - expected.prior()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("refining the SPA estimate usually lowers the factor error") {
  int improved = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto seed = static_cast<std::uint64_t>(t);
    SynthConfig cfg;
    cfg.num_vars = 5;
    cfg.rank = 5;
    cfg.alphabet_sizes = {10};
    cfg.split = 3;
    cfg.seed = seed;
    const FactorModeld truth = plant_separability(gen_model(cfg), 3, 0.1, seed).model;
    const PairwiseSetd pairs = sampled_pairs(truth, 100000, 0.5, seed + 1000);
    const SpaResult<double> spa = fit_cnmf_spa(pairs, 5, 3);
    const FitResult<double> opt = fit_cnmf_opt<double>(pairs, 5, spa.model, OptConfig{});
    improved += mse(truth, opt.model) < mse(truth, spa.model);
  }
  MESSAGE("improved in " << improved << " of " << trials);
  CHECK(improved >= 16);
}

TEST_CASE("configuration and input errors") {
  const FactorModeld truth = small_model(1);
  const PairwiseSetd pairs = pairwise_set_from_model(truth);
  OptConfig cfg;
  cfg.max_outer_iters = 0;
  CHECK_THROWS_AS(fit_cnmf_opt<double>(pairs, 3, std::nullopt, cfg), ConfigError);
  cfg = OptConfig{};
  cfg.init_mix = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OptConfig{};
  CHECK_THROWS_AS(fit_cnmf_opt<double>(pairs, 0, std::nullopt, cfg), ConfigError);
  CHECK_THROWS_AS(fit_cnmf_opt<double>(pairs, 2, truth, cfg), DataError);
  CHECK_THROWS_AS(fit_cnmf_opt<double>(PairwiseSetd(truth.alphabet_sizes()), 3, std::nullopt, cfg),
                  DataError);
  CHECK_THROWS_AS(md_update_factor(truth, 4, pairs, cfg), DataError);
}
