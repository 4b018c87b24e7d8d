#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace lshbeam {

// Dense row-major matrix. Rows are contiguous so kernels can hand out spans.
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(size_t rows, size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }

  std::span<T> row(size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Mat&) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<T> data_;
};

using MatF = Mat<float>;
using MatU32 = Mat<uint32_t>;
using MatI32 = Mat<int32_t>;

}  // namespace lshbeam
