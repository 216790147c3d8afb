#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "labnet/dataset.hpp"
#include "labnet/losses.hpp"
#include "labnet/model.hpp"

namespace labnet {

struct TrainConfig {
  int64_t size = 256;
  int64_t batch = 2;
  int64_t epochs = 300;
  int64_t max_steps = 0;  // 0 = no cap
  uint64_t seed = 0;
  AdamConfig adam;
  LossWeights weights;
  int64_t checkpoint_every = 0;  // steps; 0 = final checkpoint only
  std::string out_dir;           // empty = keep everything in memory
};

// One training example in the network encoding.
struct TrainSample {
  std::string id;
  Tensor<float> shadow;  // (1, 3, H, W)
  Tensor<float> mask;    // (1, 1, H, W)
  Tensor<float> gt;      // (1, 3, H, W)
};

TrainSample make_sample(const ShadowTriple& triple, ColorSpace space);

struct StepRecord {
  int64_t step = 0;
  int64_t epoch = 0;
  double mse = 0.0;
  double percep = 0.0;
  double grad = 0.0;
  double total = 0.0;
};

std::string loss_curve_header();
std::string loss_curve_row(const StepRecord& r);

// Owns model and optimizer state; one call = one optimizer step.
class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& train);

  // Losses are averaged over the batch before backward.
  StepRecord step(const std::vector<const TrainSample*>& batch, int64_t epoch);

  ModelParams<float>& params() { return params_; }
  const ModelParams<float>& params() const { return params_; }
  int64_t steps() const { return adam_.steps(); }

 private:
  TrainConfig config_;
  ModelParams<float> params_;
  Adam<float> adam_;
  RandomConvExtractor<float> extractor_;
  std::vector<Parameter<float>*> registry_;
};

// Random-access sample provider so that large datasets stay on disk.
struct SampleSource {
  size_t count = 0;
  std::function<TrainSample(size_t)> load;
};

SampleSource memory_source(const std::vector<TrainSample>& samples);
SampleSource dataset_source(const DatasetIndex& index, int64_t size, ColorSpace space);

struct TrainResult {
  std::vector<StepRecord> curve;
  std::vector<std::string> checkpoints;
  bool stopped_early = false;
};

// Return true to stop after the given step.
using StopFn = std::function<bool(const StepRecord&)>;

// Seeded shuffle per epoch. Writes loss_curve.csv and checkpoints under
// out_dir when it is set. Throws ArgumentError on an empty source and
// NumericError on a non-finite loss.
TrainResult train(Trainer& trainer, const TrainConfig& config, const SampleSource& source,
                  const StopFn& stop = {});

}  // namespace labnet
