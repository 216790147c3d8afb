#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace labnet {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ShapeError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class ArgumentError : public Error {
 public:
  using Error::Error;
};
class StateError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class DatasetError : public Error {
 public:
  using Error::Error;
};

struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense NCHW tensor. Matrices are carried as (1, 1, rows, cols).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }

  T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
    return values_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
  }
  T at(int64_t n, int64_t c, int64_t y, int64_t x) const {
    return values_[static_cast<size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
  }

  // Pointer to the (n, c) plane.
  T* plane(int64_t n, int64_t c) { return values_.data() + (n * shape_.c + c) * shape_.plane(); }
  const T* plane(int64_t n, int64_t c) const {
    return values_.data() + (n * shape_.c + c) * shape_.plane();
  }

  void fill(T v);
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> values_;
};

inline Shape matrix_shape(int64_t rows, int64_t cols) { return Shape{1, 1, rows, cols}; }

void require_shape(bool ok, const std::string& what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace labnet
