#pragma once

#include <iosfwd>
#include <string>

#include "pmfrec/factor_model.hpp"
#include "pmfrec/sample_table.hpp"

namespace pmfrec {

/// Text model format, version 1:
///
///   PMFREC 1
///   N F
///   I_1 ... I_N
///   prior (F values)
///   I_n rows of F values for each factor A_n
///
/// Values are printed with 17 significant digits, so a write/read cycle is
/// exact.
void write_model(std::ostream& out, const FactorModeld& model);
FactorModeld read_model(std::istream& in);
void save_model(const std::string& path, const FactorModeld& model);
FactorModeld load_model(const std::string& path);

/// Sample CSV: a header row of variable names, one row per sample, codes
/// starting at 1 and empty cells for missing values. Alphabet sizes are the
/// column maxima unless `sizes` is given.
SampleTable read_samples_csv(std::istream& in, const AlphabetSizes& sizes = {});
SampleTable load_samples_csv(const std::string& path, const AlphabetSizes& sizes = {});
void write_samples_csv(std::ostream& out, const SampleTable& data);
void save_samples_csv(const std::string& path, const SampleTable& data);

/// "%.17g" formatting.
std::string format_double(double v);

}  // namespace pmfrec
