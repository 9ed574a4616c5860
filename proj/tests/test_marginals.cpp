#include <doctest.h>

#include <sstream>

#include "pmfrec/inference.hpp"
#include "pmfrec/io.hpp"
#include "pmfrec/marginals.hpp"
#include "pmfrec/synth.hpp"

using namespace pmfrec;

namespace {

SampleTable table(std::initializer_list<std::initializer_list<int>> rows, AlphabetSizes sizes) {
  SampleTable::Cells cells(static_cast<Index>(rows.size()), static_cast<Index>(sizes.size()));
  Index s = 0;
  for (const auto& r : rows) {
    Index n = 0;
    for (int v : r) cells(s, n++) = v;
    ++s;
  }
  return SampleTable(std::move(cells), std::move(sizes));
}

constexpr int kNA = SampleTable::kMissing;

}  // namespace

TEST_CASE("counting example") {
  // codes (1,1), (1,2), (2,2), (2,2) in 1-based terms
  const SampleTable data = table({{0, 0}, {0, 1}, {1, 1}, {1, 1}}, {2, 2});
  const PairwiseSetd pairs = estimate_pairwise(data);
  REQUIRE(pairs.contains(0, 1));
  const Eigen::MatrixXd x = pairs.at(0, 1);
  CHECK(x(0, 0) == 0.25);
  CHECK(x(0, 1) == 0.25);
  CHECK(x(1, 0) == 0.0);
  CHECK(x(1, 1) == 0.5);
  CHECK(pairs.co_count(0, 1) == 4);
  CHECK(column_mass_floor(pairs) == doctest::Approx(0.25));
}

TEST_CASE("a column that is never observed drops its pairs") {
  const SampleTable data = table({{0, kNA, 1}, {1, kNA, 0}, {1, kNA, 1}}, {2, 2, 2});
  const PairwiseSetd pairs = estimate_pairwise(data);
  CHECK_FALSE(pairs.contains(0, 1));
  CHECK_FALSE(pairs.contains(1, 2));
  CHECK(pairs.contains(0, 2));
  CHECK(pairs.size() == 1);
  CHECK(pairs.partners(1).empty());
}

TEST_CASE("estimates divide by the co-observation count") {
  const SampleTable data = table({{0, 0}, {1, kNA}, {kNA, 1}, {1, 1}, {1, 1}}, {2, 2});
  const PairwiseSetd pairs = estimate_pairwise(data);
  CHECK(pairs.co_count(0, 1) == 3);
  const Eigen::MatrixXd x = pairs.at(0, 1);
  CHECK(x(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(x(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(x.sum() == doctest::Approx(1.0));
}

TEST_CASE("minimum co-observation count") {
  const SampleTable data = table({{0, 0, 0}, {1, 1, kNA}, {1, 0, kNA}}, {2, 2, 2});
  const PairwiseSetd pairs = estimate_pairwise(data, 2);
  CHECK(pairs.contains(0, 1));
  CHECK_FALSE(pairs.contains(0, 2));
  CHECK_FALSE(pairs.contains(1, 2));
}

TEST_CASE("a zero column gives eta = 0") {
  const SampleTable data = table({{0, 0}, {1, 0}}, {2, 2});
  CHECK(column_mass_floor(estimate_pairwise(data)) == 0.0);
  CHECK_THROWS_AS(column_mass_floor(PairwiseSetd({2, 2})), DataError);
}

TEST_CASE("pair storage is oriented") {
  PairwiseSetd pairs({2, 3});
  Eigen::MatrixXd x(3, 2);
  x << 0.1, 0.2, 0.3, 0.1, 0.2, 0.1;
  pairs.insert(1, 0, x, 10);
  CHECK(pairs.contains(0, 1));
  CHECK(pairs.stored(0, 1).rows() == 2);
  CHECK((pairs.at(1, 0) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pairs.co_count(1, 0) == 10);
  CHECK_THROWS_AS(pairs.insert(0, 0, x, 1), DataError);
  CHECK_THROWS_AS(pairs.insert(0, 1, x, 1), DataError);
  CHECK_THROWS_AS(pairs.at(0, 2), DataError);
}

TEST_CASE("symmetry, full co-counts and count granularity") {
  SynthConfig cfg;
  cfg.num_vars = 4;
  cfg.rank = 3;
  cfg.alphabet_sizes = {4};
  cfg.split = 2;
  cfg.seed = 9;
  const FactorModeld model = gen_model(cfg);
  const SampleTable full = sample_data(model, 500, 1.0, 4);
  const SampleTable partial = sample_data(model, 500, 0.6, 4);
  const PairwiseSetd pf = estimate_pairwise(full);
  for (const auto& [key, x] : pf.entries()) CHECK(pf.co_count(key.first, key.second) == 500);

  const PairwiseSetd pp = estimate_pairwise(partial);
  // Swapping column roles must transpose the estimate exactly.
  SampleTable::Cells swapped = partial.cells();
  swapped.col(0).swap(swapped.col(3));
  AlphabetSizes sizes = partial.alphabet_sizes();
  std::swap(sizes[0], sizes[3]);
  const PairwiseSetd ps = estimate_pairwise(SampleTable(swapped, sizes));
  CHECK((pp.at(0, 1) - ps.at(3, 1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pp.at(0, 3) - ps.at(0, 3).transpose()).cwiseAbs().maxCoeff() == 0.0);

  for (const auto& [key, x] : pp.entries()) {
    const double co = static_cast<double>(pp.co_count(key.first, key.second));
    CHECK(co < 500);
    const Eigen::ArrayXXd scaled = x.array() * co;
    CHECK((scaled - scaled.round()).abs().maxCoeff() <= 1e-9);
    CHECK(std::abs(x.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("estimates converge to the model marginals") {
  SynthConfig cfg;
  cfg.num_vars = 5;
  cfg.rank = 5;
  cfg.alphabet_sizes = {10};
  cfg.split = 3;
  cfg.seed = 21;
  const FactorModeld model = gen_model(cfg);
  const PairwiseSetd pairs = estimate_pairwise(sample_data(model, 1'000'000, 1.0, 8));
  double worst = 0;
  for (const auto& [key, x] : pairs.entries()) {
    worst = std::max(worst, (x - pairwise_from_model(model, key.first, key.second))
                                .cwiseAbs()
                                .maxCoeff());
  }
  CHECK(worst <= 5e-3);
}

TEST_CASE("sample CSV reading") {
  SUBCASE("header, missing cells and inferred sizes") {
    std::stringstream in("a,b,c\n1,2,\n3,,1\n\n2,1,2\n");
    const SampleTable t = read_samples_csv(in);
    CHECK(t.num_samples() == 3);
    CHECK(t.names() == std::vector<std::string>{"a", "b", "c"});
    CHECK(t.alphabet_sizes() == AlphabetSizes{3, 2, 2});
    CHECK(t(0, 0) == 0);
    CHECK(t(0, 1) == 1);
    CHECK_FALSE(t.observed(0, 2));
    CHECK_FALSE(t.observed(1, 1));
    CHECK(t(2, 2) == 1);
  }
  SUBCASE("configured sizes") {
    std::stringstream in("a,b\n1,2\n");
    const SampleTable t = read_samples_csv(in, {4, 5});
    CHECK(t.alphabet_sizes() == AlphabetSizes{4, 5});
  }
  SUBCASE("errors") {
    auto read = [](const std::string& s, AlphabetSizes sizes = {}) {
      std::stringstream in(s);
      return read_samples_csv(in, sizes);
    };
    CHECK_THROWS_AS(read(""), DataError);
    CHECK_THROWS_AS(read("a,b\n1\n"), DataError);
    CHECK_THROWS_AS(read("a,b\n0,1\n"), DataError);
    CHECK_THROWS_AS(read("a,b\nx,1\n"), DataError);
    CHECK_THROWS_AS(read("a,b\n1.5,1\n"), DataError);
    CHECK_THROWS_AS(read("a,b\n3,1\n", {2, 2}), DataError);
    CHECK_THROWS_AS(read("a,b\n1,1\n", {2, 2, 2}), DataError);
  }
  SUBCASE("write then read") {
    const SampleTable t = table({{0, kNA}, {2, 1}}, {3, 2});
    std::stringstream io;
    write_samples_csv(io, t);
    CHECK(io.str() == "v1,v2\n1,\n3,2\n");
    const SampleTable back = read_samples_csv(io, t.alphabet_sizes());
    CHECK(back.cells() == t.cells());
  }
}
