#include "smoothsr/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "smoothsr/rng.hpp"

namespace smoothsr {

void Dataset::validate() const {
  const std::size_t n = cols();
  const std::size_t m = rows();
  if (m < 2) throw std::invalid_argument("dataset needs at least 2 rows");
  if (n < 1) throw std::invalid_argument("dataset needs at least 1 column");
  if (values.size() != m * n)
    throw std::invalid_argument("dataset value matrix has wrong size");
  for (double v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("dataset contains a non-finite input");
  for (double v : target)
    if (!std::isfinite(v))
      throw std::invalid_argument("dataset contains a non-finite target");
}

double poly10_target(std::span<const double> x) {
  return x[0] * x[1] + x[2] * x[3] + x[4] * x[5] + x[0] * x[6] * x[8] +
         x[2] * x[5] * x[9];
}

Dataset gen_poly10(std::size_t rows, std::uint64_t seed, double lo, double hi) {
  if (rows < 2) throw std::invalid_argument("poly10 needs at least 2 rows");
  if (!(lo < hi)) throw std::invalid_argument("range must satisfy lo < hi");
  Dataset data;
  data.variable_names.reserve(10);
  for (int j = 1; j <= 10; ++j)
    data.variable_names.push_back("x" + std::to_string(j));
  data.values.resize(rows * 10);
  data.target.resize(rows);
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    double* x = data.values.data() + r * 10;
    for (int j = 0; j < 10; ++j) x[j] = rng.uniform(lo, hi);
    data.target[r] = poly10_target({x, 10});
  }
  data.validate();
  return data;
}

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view text, std::size_t line_no) {
  double value = 0.0;
  const auto res =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw std::invalid_argument("bad numeric field '" + std::string(text) +
                                "' on CSV line " + std::to_string(line_no));
  return value;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("dataset file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  Dataset data;
  const auto header = split_csv(line);
  if (header.size() < 2)
    throw std::invalid_argument("dataset header needs inputs and a target");
  for (std::size_t j = 0; j + 1 < header.size(); ++j)
    data.variable_names.emplace_back(header[j]);

  const std::size_t n = data.variable_names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != n + 1)
      throw std::invalid_argument("CSV line " + std::to_string(line_no) +
                                  " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(n + 1));
    for (std::size_t j = 0; j < n; ++j)
      data.values.push_back(parse_double(fields[j], line_no));
    data.target.push_back(parse_double(fields[n], line_no));
  }
  data.validate();
  return data;
}

void save_dataset_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.variable_names.size(); ++j)
    out << data.variable_names[j] << ',';
  out << "y\n";
  const std::size_t n = data.cols();
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double* x = data.values.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) out << format_double(x[j]) << ',';
    out << format_double(data.target[r]) << '\n';
  }
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write dataset file: " + path);
  save_dataset_csv(data, out);
}

}  // namespace smoothsr
