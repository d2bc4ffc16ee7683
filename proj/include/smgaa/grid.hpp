#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smgaa {

/// Dense row-major 2D array. Rows index range, columns index cross-range.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Grid: data size does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const Grid& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Grayscale image used as classifier input. Values nominally in [0, 1].
using Image = Grid<float>;

template <typename To, typename From>
Grid<To> grid_cast(const Grid<From>& g) {
  Grid<To> out(g.rows(), g.cols());
  std::transform(g.begin(), g.end(), out.begin(), [](From v) { return static_cast<To>(v); });
  return out;
}

/// Centered crop to (rows, cols). Used when the formed image is larger than the sample.
template <typename T>
Grid<T> center_crop(const Grid<T>& g, std::size_t rows, std::size_t cols) {
  if (rows > g.rows() || cols > g.cols()) {
    throw std::invalid_argument("center_crop: target " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " exceeds source " +
                                std::to_string(g.rows()) + "x" + std::to_string(g.cols()));
  }
  if (rows == g.rows() && cols == g.cols()) return g;
  const std::size_t r0 = g.rows() / 2 - rows / 2;
  const std::size_t c0 = g.cols() / 2 - cols / 2;
  Grid<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&g(r0 + r, c0), cols, &out(r, 0));
  }
  return out;
}

template <typename T>
T max_value(const Grid<T>& g) {
  if (g.empty()) return T{};
  return *std::max_element(g.begin(), g.end());
}

}  // namespace smgaa
