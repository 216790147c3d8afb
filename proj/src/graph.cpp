#include "labnet/graph.hpp"

namespace labnet {

template <typename T>
ConvWeight<T>::ConvWeight(const std::string& name, int64_t out_channels, int64_t in_channels,
                          int64_t kernel, int64_t dil)
    : dilation(dil) {
  if (kernel != 1 && kernel != 3) {
    throw ArgumentError(name + ": kernel must be 1x1 or 3x3, got " + std::to_string(kernel));
  }
  if (dil < 1) throw ArgumentError(name + ": dilation must be >= 1");
  if (kernel == 1 && dil != 1) throw ArgumentError(name + ": 1x1 kernels take dilation 1");
  if (out_channels < 1 || in_channels < 1) throw ArgumentError(name + ": empty channel count");
  weight = Parameter<T>(name + ".weight",
                        Tensor<T>(Shape{out_channels, in_channels, kernel, kernel}));
  bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{1, out_channels, 1, 1}));
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
  if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw StateError("graph: variable " + std::to_string(v.id) + " does not belong to this graph");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(Var v) {
  return const_cast<Node&>(static_cast<const Graph&>(*this).node(v));
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  nodes_.push_back(
      Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

template <typename T>
Tensor<T>& Graph<T>::grad_slot(Var v) {
  Node& n = node(v);
  if (n.grad.shape() != n.value.shape() || n.grad.empty() != n.value.empty()) {
    n.grad = Tensor<T>(n.value.shape());
  }
  return n.grad;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.shape() != n.value.shape()) return Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
bool Graph<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (node(loss).value.numel() != 1) {
    throw ArgumentError("backward: loss must be a scalar, got " + node(loss).value.shape().str());
  }
  for (Node& n : nodes_) n.grad = Tensor<T>();
  grad_slot(loss)[0] = T(1);
  for (int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    if (n.backward) n.backward(*this, n.grad);
  }
}

template struct ConvWeight<float>;
template struct ConvWeight<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace labnet
