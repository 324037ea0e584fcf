#include "spectralkan/matrix.hpp"

#include <utility>

#include "spectralkan/errors.hpp"

namespace spectralkan {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ContractError("matrix data size does not match shape");
}

Matrix Matrix::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) throw ContractError("reshape changes element count");
  return Matrix(rows, cols, data_);
}

}  // namespace spectralkan
