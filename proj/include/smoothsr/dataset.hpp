#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace smoothsr {

// Regression data: m rows of n inputs plus a target column.
struct Dataset {
  std::vector<std::string> variable_names;  // n entries
  std::vector<double> values;               // row-major, m x n
  std::vector<double> target;               // m entries

  std::size_t rows() const { return target.size(); }
  std::size_t cols() const { return variable_names.size(); }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols(), cols()};
  }

  void validate() const;  // m >= 2, finite values, consistent sizes
};

// The Poly-10 benchmark target.
double poly10_target(std::span<const double> x);

// n=10 inputs sampled i.i.d. uniform in [lo, hi); deterministic given seed.
Dataset gen_poly10(std::size_t rows, std::uint64_t seed, double lo, double hi);

// CSV with header x1,...,xn,y. No quoting; values round-trip exactly.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, std::ostream& out);
void save_dataset_csv(const Dataset& data, const std::string& path);

// Shortest exact decimal form of a double (round-trips via from_chars).
std::string format_double(double value);

}  // namespace smoothsr
