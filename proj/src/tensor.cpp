#include "labnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace labnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
  values_.assign(static_cast<size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
  if (static_cast<int64_t>(values_.size()) != shape.numel()) {
    throw ShapeError("value count " + std::to_string(values_.size()) + " does not match shape " +
                     shape.str());
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(values_.begin(), values_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace labnet
