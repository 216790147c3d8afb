#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "labnet/tensor.hpp"

namespace labnet {

// A named trainable array with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

// Convolution weights: kernel (out, in, k, k) with k in {1, 3}, per-output bias.
template <typename T>
struct ConvWeight {
  Parameter<T> weight;
  Parameter<T> bias;
  int64_t dilation = 1;

  ConvWeight() = default;
  ConvWeight(const std::string& name, int64_t out_channels, int64_t in_channels, int64_t kernel,
             int64_t dilation = 1);

  int64_t out_channels() const { return weight.value.shape().n; }
  int64_t in_channels() const { return weight.value.shape().c; }
  int64_t kernel() const { return weight.value.shape().h; }
  int64_t param_count() const { return weight.value.numel() + bias.value.numel(); }
};

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only reverse-mode tape. Nodes are recorded in evaluation order, so
// the node list is already a topological order and cycles cannot be formed.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  Var constant(Tensor<T> value);
  Var variable(Tensor<T> value);
  // Leaf bound to a parameter; backward adds into param.grad.
  Var param(Parameter<T>& p);

  // Used by op implementations.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn backward);
  Tensor<T>& grad_slot(Var v);

  const Tensor<T>& value(Var v) const;
  // Zero tensor if backward never reached v.
  Tensor<T> grad(Var v) const;
  bool requires_grad(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every differentiable node.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

extern template struct ConvWeight<float>;
extern template struct ConvWeight<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace labnet
