#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "labnet/graph.hpp"
#include "labnet/ops.hpp"

namespace labnet {

struct LossWeights {
  double lambda1 = 10.0;   // perceptual
  double lambda2 = 100.0;  // gradient
};

// Fixed (non-trainable) feature stack for the perceptual term. The pretrained
// VGG-16 of the original training setup plugs in here when available.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Var> features(Graph<T>& g, Var image) = 0;
  virtual std::string name() const = 0;
};

template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<Var> features(Graph<T>&, Var image) override { return {image}; }
  std::string name() const override { return "identity"; }
};

// Small seeded conv stack: 3 -> 16 -> 32 -> 32 with LeakyReLU, dilations
// 1, 2, 4; every activation is a feature layer.
template <typename T>
class RandomConvExtractor final : public FeatureExtractor<T> {
 public:
  explicit RandomConvExtractor(uint64_t seed = 16);
  std::vector<Var> features(Graph<T>& g, Var image) override;
  std::string name() const override { return "random-conv"; }

 private:
  std::vector<ConvWeight<T>> layers_;
};

template <typename T>
Var mse_loss(Graph<T>& g, Var pred, Var gt);

// Mean of the L1 differences of forward-difference gradients along x and y.
template <typename T>
Var grad_loss(Graph<T>& g, Var pred, Var gt);

// Mean absolute feature difference, averaged over extractor layers.
template <typename T>
Var perceptual_loss(Graph<T>& g, Var pred, Var gt, FeatureExtractor<T>& extractor);

struct LossTerms {
  Var mse;
  Var percep;
  Var grad;
  Var total;
};

template <typename T>
LossTerms total_loss(Graph<T>& g, Var pred, Var gt, const LossWeights& weights,
                     FeatureExtractor<T>& extractor);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Parameter<T>*>& params);
  int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace labnet
