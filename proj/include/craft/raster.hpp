#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "craft/error.hpp"

namespace craft {

/// Dense row-major 2D array.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}
  Raster(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != checked_size(rows, cols)) throw InvalidArgument("raster data size does not match dimensions");
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int r, int c) const noexcept { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }
  std::size_t index(int r, int c) const noexcept { return static_cast<std::size_t>(r) * cols_ + c; }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) throw InvalidArgument("raster dimensions must be non-negative");
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

/// Binary raster; every value is 0 or 1.
using Mask = Raster<std::uint8_t>;

inline std::size_t popcount(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m) n += v ? 1 : 0;
  return n;
}

inline void require_same_shape(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("mask dimensions differ");
}

inline std::size_t symmetric_difference(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] != 0) != (b[i] != 0) ? 1 : 0;
  return n;
}

/// Intersection over union; two empty masks count as identical (1.0).
inline double iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// 180 degree rotation.
template <typename T>
Raster<T> rotate180(const Raster<T>& m) {
  Raster<T> out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(m.rows() - 1 - r, m.cols() - 1 - c) = m(r, c);
  return out;
}

/// Quarter turn clockwise (square rasters keep their shape).
template <typename T>
Raster<T> rotate90(const Raster<T>& m) {
  Raster<T> out(m.cols(), m.rows());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(c, m.rows() - 1 - r) = m(r, c);
  return out;
}

/// Left-right mirror.
template <typename T>
Raster<T> mirror_columns(const Raster<T>& m) {
  Raster<T> out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(r, m.cols() - 1 - c) = m(r, c);
  return out;
}

}  // namespace craft
