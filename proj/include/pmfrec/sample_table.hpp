#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pmfrec/types.hpp"

namespace pmfrec {

/// S x N table of categorical observations.
///
/// Codes are 0-based in memory (0..I_n-1) and kMissing marks an unobserved
/// cell. File formats use 1-based codes.
class SampleTable {
 public:
  using Cells = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  static constexpr int kMissing = -1;

  SampleTable(Cells cells, AlphabetSizes alphabet_sizes,
              std::vector<std::string> names = {})
      : cells_(std::move(cells)),
        alphabet_sizes_(std::move(alphabet_sizes)),
        names_(std::move(names)) {
    if (static_cast<Index>(alphabet_sizes_.size()) != cells_.cols()) {
      throw DataError("sample table has " + std::to_string(cells_.cols()) +
                      " columns but " + std::to_string(alphabet_sizes_.size()) +
                      " alphabet sizes");
    }
    if (names_.empty()) {
      for (Index n = 0; n < cells_.cols(); ++n) names_.push_back("v" + std::to_string(n + 1));
    }
    if (static_cast<Index>(names_.size()) != cells_.cols()) {
      throw DataError("sample table column names do not match column count");
    }
    for (Index n = 0; n < cells_.cols(); ++n) {
      if (alphabet_sizes_[n] < 1) {
        throw DataError("variable " + names_[n] + " has an empty alphabet");
      }
      for (Index s = 0; s < cells_.rows(); ++s) {
        const int c = cells_(s, n);
        if (c != kMissing && (c < 0 || c >= alphabet_sizes_[n])) {
          throw DataError("sample " + std::to_string(s + 1) + ", variable " + names_[n] +
                          ": code " + std::to_string(c + 1) + " outside 1.." +
                          std::to_string(alphabet_sizes_[n]));
        }
      }
    }
  }

  Index num_samples() const { return cells_.rows(); }
  Index num_vars() const { return cells_.cols(); }
  const AlphabetSizes& alphabet_sizes() const { return alphabet_sizes_; }
  const std::vector<std::string>& names() const { return names_; }
  const Cells& cells() const { return cells_; }

  int operator()(Index s, Index n) const { return cells_(s, n); }
  bool observed(Index s, Index n) const { return cells_(s, n) != kMissing; }

 private:
  Cells cells_;
  AlphabetSizes alphabet_sizes_;
  std::vector<std::string> names_;
};

}  // namespace pmfrec
