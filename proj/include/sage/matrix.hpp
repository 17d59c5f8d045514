#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sage/error.hpp"

namespace sage {

/// Dense row-major matrix with value semantics.
template <typename T>
class Matrix {
public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix payload has " + std::to_string(data_.size()) +
                       " values, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  /// Rows selected by `indices`, in that order.
  template <typename Index>
  Matrix gather(std::span<const Index> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = row(static_cast<std::size_t>(indices[i]));
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  void append_rows(const Matrix& other) {
    if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
    if (other.cols_ != cols_) throw ShapeError("append_rows: column count mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// n×d instance vectors shared by teacher and student. Stored as float32 to
/// match the on-disk formats bit for bit.
using EmbeddingMatrix = Matrix<float>;
/// Low-dimensional coordinates (n×m).
using Coords = Matrix<float>;
/// Network outputs (n×C).
using Logits = Matrix<double>;

/// Index of the first row holding a non-finite value, or rows() if none.
template <typename T>
std::size_t first_non_finite_row(const Matrix<T>& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (T v : m.row(r)) {
      if (!std::isfinite(v)) return r;
    }
  }
  return m.rows();
}

template <typename T>
void require_finite(const Matrix<T>& m, const std::string& what) {
  const std::size_t r = first_non_finite_row(m);
  if (r != m.rows()) throw DataError(what + " contains a non-finite value", r);
}

template <typename X, typename Y>
double squared_distance(const X& x, const Y& y) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += diff * diff;
  }
  return acc;
}

}  // namespace sage
