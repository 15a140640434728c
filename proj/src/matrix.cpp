#include "adar/matrix.hpp"

#include <algorithm>

#include "adar/error.hpp"

namespace adar {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw ShapeError("append_row: expected " + std::to_string(cols_) + " values");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Matrix::erase_row(std::size_t r) {
  if (r >= rows_) throw ShapeError("erase_row: row out of range");
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * cols_);
  data_.erase(first, first + static_cast<std::ptrdiff_t>(cols_));
  --rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= rows_) throw ShapeError("select_rows: row out of range");
    std::ranges::copy(row(indices[k]), out.row(k).begin());
  }
  return out;
}

}  // namespace adar
