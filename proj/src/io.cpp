#include "pmfrec/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace pmfrec {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_model(std::ostream& out, const FactorModeld& model) {
  out << "PMFREC 1\n" << model.num_vars() << ' ' << model.rank() << '\n';
  for (Index n = 0; n < model.num_vars(); ++n) {
    out << (n ? " " : "") << model.alphabet_size(n);
  }
  out << '\n';
  for (Index f = 0; f < model.rank(); ++f) {
    out << (f ? " " : "") << format_double(model.prior()(f));
  }
  out << '\n';
  for (const auto& a : model.factors()) {
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index f = 0; f < a.cols(); ++f) out << (f ? " " : "") << format_double(a(i, f));
      out << '\n';
    }
  }
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word(const char* what) {
    std::string tok;
    if (!(in_ >> tok)) throw DataError(std::string("model file truncated reading ") + what);
    return tok;
  }

  long integer(const char* what) {
    const std::string tok = word(what);
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (errno != 0 || end == tok.c_str() || *end != '\0') {
      throw DataError(std::string("model file: bad integer for ") + what + ": " + tok);
    }
    return v;
  }

  double real(const char* what) {
    const std::string tok = word(what);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (errno == ERANGE || end == tok.c_str() || *end != '\0') {
      throw DataError(std::string("model file: bad number for ") + what + ": " + tok);
    }
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

FactorModeld read_model(std::istream& in) {
  TokenReader rd(in);
  if (rd.word("magic") != "PMFREC") throw DataError("not a model file (missing PMFREC header)");
  const long version = rd.integer("version");
  if (version != 1) throw DataError("unsupported model file version " + std::to_string(version));
  const long n_vars = rd.integer("N");
  const long rank = rd.integer("F");
  if (n_vars < 1 || rank < 1) throw DataError("model file: N and F must be positive");
  AlphabetSizes sizes;
  for (long n = 0; n < n_vars; ++n) {
    const long s = rd.integer("alphabet size");
    if (s < 1) throw DataError("model file: alphabet sizes must be positive");
    sizes.push_back(s);
  }
  Eigen::VectorXd prior(rank);
  for (long f = 0; f < rank; ++f) prior(f) = rd.real("prior");
  std::vector<Eigen::MatrixXd> factors;
  for (long n = 0; n < n_vars; ++n) {
    Eigen::MatrixXd a(sizes[static_cast<std::size_t>(n)], rank);
    for (Index i = 0; i < a.rows(); ++i) {
      for (long f = 0; f < rank; ++f) a(i, f) = rd.real("factor entry");
    }
    factors.push_back(std::move(a));
  }
  return FactorModeld(std::move(factors), std::move(prior));
}

void save_model(const std::string& path, const FactorModeld& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_model(out, model);
  if (!out) throw ConfigError("error writing " + path);
}

FactorModeld load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_model(in);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

SampleTable read_samples_csv(std::istream& in, const AlphabetSizes& sizes) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("sample CSV is empty");
  const std::vector<std::string> names = split_csv_line(line);
  const auto n_vars = static_cast<Index>(names.size());
  if (!sizes.empty() && static_cast<Index>(sizes.size()) != n_vars) {
    throw DataError("configured alphabet sizes do not match the CSV column count");
  }
  std::vector<int> values;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != n_vars) {
      throw DataError("sample CSV line " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(n_vars));
    }
    for (const auto& c : cells) {
      if (c.empty()) {
        values.push_back(SampleTable::kMissing);
        continue;
      }
      char* end = nullptr;
      errno = 0;
      const long v = std::strtol(c.c_str(), &end, 10);
      if (errno != 0 || *end != '\0' || v < 1 || v > 1'000'000) {
        throw DataError("sample CSV line " + std::to_string(row) + ": invalid code '" + c + "'");
      }
      values.push_back(static_cast<int>(v - 1));
    }
  }
  const Index n_samples = n_vars ? static_cast<Index>(values.size()) / n_vars : 0;
  SampleTable::Cells cells =
      Eigen::Map<SampleTable::Cells>(values.data(), n_samples, n_vars);
  AlphabetSizes alpha = sizes;
  if (alpha.empty()) {
    for (Index n = 0; n < n_vars; ++n) {
      int top = 0;
      for (Index s = 0; s < n_samples; ++s) top = std::max(top, cells(s, n) + 1);
      alpha.push_back(std::max(top, 1));
    }
  }
  return SampleTable(std::move(cells), std::move(alpha), names);
}

SampleTable load_samples_csv(const std::string& path, const AlphabetSizes& sizes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_samples_csv(in, sizes);
}

void write_samples_csv(std::ostream& out, const SampleTable& data) {
  for (Index n = 0; n < data.num_vars(); ++n) out << (n ? "," : "") << data.names()[n];
  out << '\n';
  for (Index s = 0; s < data.num_samples(); ++s) {
    for (Index n = 0; n < data.num_vars(); ++n) {
      if (n) out << ',';
      if (data.observed(s, n)) out << data(s, n) + 1;
    }
    out << '\n';
  }
}

void save_samples_csv(const std::string& path, const SampleTable& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_samples_csv(out, data);
  if (!out) throw ConfigError("error writing " + path);
}

}  // namespace pmfrec
