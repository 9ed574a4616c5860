#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmfrec {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Alphabet sizes I_1..I_N of the observed variables.
using AlphabetSizes = std::vector<Index>;

/// Floor applied to probabilities before taking logs or dividing.
template <typename Scalar>
inline constexpr Scalar kProbabilityFloor = Scalar(1e-12);

/// Default limit on the number of cells a dense joint PMF may occupy.
inline constexpr std::size_t kDefaultCellBudget = 10'000'000;

// Error taxonomy. The CLI maps each kind to its own exit code.

/// Invalid configuration or arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, tables, models).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a valid result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pmfrec
