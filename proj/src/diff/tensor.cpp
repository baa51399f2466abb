#include "tiger/diff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace tiger::diff {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError(fmt::format("tensor data of length {} does not fit shape {}",
                                     data_.size(), diff::shape_string(rows, cols)));
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Tensor2 Tensor2::row(std::initializer_list<double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values));
}

Tensor2 Tensor2::row(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor2 Tensor2::column(std::span<const double> values) {
  return Tensor2(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Tensor2::row_vector(std::size_t r) const {
  auto s = row_span(r);
  return {s.begin(), s.end()};
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const { return diff::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return fmt::format("[{}x{}]", rows, cols);
}

}  // namespace tiger::diff
