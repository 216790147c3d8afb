#include "labnet/losses.hpp"

#include <cmath>
#include <random>

namespace labnet {

template <typename T>
RandomConvExtractor<T>::RandomConvExtractor(uint64_t seed) {
  layers_.emplace_back("percep.conv1", 16, 3, 3, 1);
  layers_.emplace_back("percep.conv2", 32, 16, 3, 2);
  layers_.emplace_back("percep.conv3", 32, 32, 3, 4);
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    const Shape& s = layer.weight.value.shape();
    // He-style scale keeps activations from shrinking through the stack.
    const double bound = std::sqrt(6.0 / static_cast<double>(s.c * s.h * s.w));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : layer.weight.value.values()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
std::vector<Var> RandomConvExtractor<T>::features(Graph<T>& g, Var image) {
  std::vector<Var> out;
  Var x = image;
  for (auto& layer : layers_) {
    x = ops::leaky_relu(g, ops::conv2d(g, x, g.constant(layer.weight.value),
                                       g.constant(layer.bias.value), layer.dilation));
    out.push_back(x);
  }
  return out;
}

template <typename T>
Var mse_loss(Graph<T>& g, Var pred, Var gt) {
  require_shape(g.shape(pred) == g.shape(gt),
                "mse_loss: " + g.shape(pred).str() + " vs " + g.shape(gt).str());
  return ops::mean(g, ops::square(g, ops::sub(g, pred, gt)));
}

template <typename T>
Var grad_loss(Graph<T>& g, Var pred, Var gt) {
  require_shape(g.shape(pred) == g.shape(gt),
                "grad_loss: " + g.shape(pred).str() + " vs " + g.shape(gt).str());
  Var dx = ops::mean(g, ops::abs(g, ops::sub(g, ops::diff_x(g, pred), ops::diff_x(g, gt))));
  Var dy = ops::mean(g, ops::abs(g, ops::sub(g, ops::diff_y(g, pred), ops::diff_y(g, gt))));
  return ops::scale(g, ops::add(g, dx, dy), 0.5);
}

template <typename T>
Var perceptual_loss(Graph<T>& g, Var pred, Var gt, FeatureExtractor<T>& extractor) {
  const auto fp = extractor.features(g, pred);
  const auto fg = extractor.features(g, gt);
  if (fp.empty() || fp.size() != fg.size()) throw StateError("perceptual_loss: bad extractor output");
  Var acc = ops::mean(g, ops::abs(g, ops::sub(g, fp[0], fg[0])));
  for (size_t i = 1; i < fp.size(); ++i) {
    acc = ops::add(g, acc, ops::mean(g, ops::abs(g, ops::sub(g, fp[i], fg[i]))));
  }
  return fp.size() == 1 ? acc : ops::scale(g, acc, 1.0 / static_cast<double>(fp.size()));
}

template <typename T>
LossTerms total_loss(Graph<T>& g, Var pred, Var gt, const LossWeights& weights,
                     FeatureExtractor<T>& extractor) {
  LossTerms t;
  t.mse = mse_loss(g, pred, gt);
  t.percep = perceptual_loss(g, pred, gt, extractor);
  t.grad = grad_loss(g, pred, gt);
  t.total = ops::add(g, ops::add(g, t.mse, ops::scale(g, t.percep, weights.lambda1)),
                     ops::scale(g, t.grad, weights.lambda2));
  return t;
}

template <typename T>
void Adam<T>::step(const std::vector<Parameter<T>*>& params) {
  if (m_.empty()) {
    for (const Parameter<T>* p : params) {
      m_.emplace_back(static_cast<size_t>(p->value.numel()), 0.0);
      v_.emplace_back(static_cast<size_t>(p->value.numel()), 0.0);
    }
  }
  if (m_.size() != params.size()) throw StateError("adam: parameter list changed between steps");
  for (const Parameter<T>* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      throw StateError("adam: missing gradient for " + p->name);
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    if (static_cast<int64_t>(m.size()) != p.value.numel()) {
      throw StateError("adam: shape of " + p.name + " changed");
    }
    for (size_t i = 0; i < m.size(); ++i) {
      const double gi = static_cast<double>(p.grad[static_cast<int64_t>(i)]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double update = config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      p.value[static_cast<int64_t>(i)] =
          static_cast<T>(static_cast<double>(p.value[static_cast<int64_t>(i)]) - update);
    }
  }
}

#define LABNET_INSTANTIATE_LOSSES(T)                                                         \
  template class RandomConvExtractor<T>;                                                     \
  template Var mse_loss(Graph<T>&, Var, Var);                                                \
  template Var grad_loss(Graph<T>&, Var, Var);                                               \
  template Var perceptual_loss(Graph<T>&, Var, Var, FeatureExtractor<T>&);                   \
  template LossTerms total_loss(Graph<T>&, Var, Var, const LossWeights&, FeatureExtractor<T>&); \
  template class Adam<T>;

LABNET_INSTANTIATE_LOSSES(float)
LABNET_INSTANTIATE_LOSSES(double)

}  // namespace labnet
