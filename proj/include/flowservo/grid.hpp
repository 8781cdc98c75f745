#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "flowservo/error.hpp"

namespace flowservo {

/// Dense row-major H x W image-shaped container.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, const T& fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DomainError("Grid: negative dimension");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(j);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

/// Per-pixel displacement; `row` runs along image rows (down), `col` along columns (right).
struct FlowVector {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const FlowVector&) const = default;
};

using FlowField = Grid<FlowVector>;
using ValidityGrid = Grid<std::uint8_t>;
using ObstacleMask = Grid<std::uint8_t>;
using DepthMap = Grid<double>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) throw DomainError(std::string(what) + ": dimension mismatch");
}

}  // namespace flowservo
