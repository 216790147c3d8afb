#include "labnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace fs = std::filesystem;

namespace labnet {

TrainSample make_sample(const ShadowTriple& triple, ColorSpace space) {
  require_shape(triple.shadow.h == triple.gt.h && triple.shadow.w == triple.gt.w &&
                    triple.shadow.h == triple.mask.h && triple.shadow.w == triple.mask.w,
                "make_sample: triple " + triple.id + " is not dimension-locked");
  TrainSample s;
  s.id = triple.id;
  s.shadow = encode_image<float>(triple.shadow, space);
  s.gt = encode_image<float>(triple.gt, space);
  s.mask = triple.mask.to_tensor<float>();
  return s;
}

std::string loss_curve_header() { return "step,epoch,mse,percep,grad,total"; }

std::string loss_curve_row(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step),
                static_cast<long long>(r.epoch), r.mse, r.percep, r.grad, r.total);
  return buf;
}

Trainer::Trainer(const ModelConfig& model, const TrainConfig& train)
    : config_(train),
      params_(init_params<float>(model, train.seed)),
      adam_(train.adam),
      // Extractor weights derive from the run seed as well.
      extractor_(train.seed + 16) {
  registry_ = params_.parameters();
}

StepRecord Trainer::step(const std::vector<const TrainSample*>& batch, int64_t epoch) {
  if (batch.empty()) throw ArgumentError("train step: empty batch");
  params_.zero_grad();
  StepRecord rec;
  rec.epoch = epoch;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const TrainSample* s : batch) {
    Graph<float> g;
    Var pred = forward(g, params_, g.constant(s->shadow), s->mask);
    LossTerms t = total_loss(g, pred, g.constant(s->gt), config_.weights, extractor_);
    const double total = g.value(t.total)[0];
    if (!std::isfinite(total)) {
      throw NumericError("non-finite loss at step " + std::to_string(adam_.steps() + 1) +
                         " on sample " + s->id + ": mse=" + std::to_string(g.value(t.mse)[0]) +
                         " percep=" + std::to_string(g.value(t.percep)[0]) +
                         " grad=" + std::to_string(g.value(t.grad)[0]));
    }
    rec.mse += inv * g.value(t.mse)[0];
    rec.percep += inv * g.value(t.percep)[0];
    rec.grad += inv * g.value(t.grad)[0];
    rec.total += inv * total;
    g.backward(batch.size() == 1 ? t.total : ops::scale(g, t.total, inv));
  }
  adam_.step(registry_);
  rec.step = adam_.steps();
  return rec;
}

SampleSource memory_source(const std::vector<TrainSample>& samples) {
  return {samples.size(), [&samples](size_t i) { return samples[i]; }};
}

SampleSource dataset_source(const DatasetIndex& index, int64_t size, ColorSpace space) {
  return {index.ids.size(), [&index, size, space](size_t i) {
            return make_sample(load_triple(index, index.ids[i], std::make_pair(size, size)), space);
          }};
}

TrainResult train(Trainer& trainer, const TrainConfig& config, const SampleSource& source,
                  const StopFn& stop) {
  if (source.count == 0) throw ArgumentError("train: dataset is empty");
  if (config.batch < 1) throw ArgumentError("train: batch must be >= 1");
  TrainResult result;
  std::ofstream curve;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    const std::string path = (fs::path(config.out_dir) / "loss_curve.csv").string();
    curve.open(path, std::ios::trunc);
    if (!curve) throw IoError("cannot write " + path);
    curve << loss_curve_header() << "\n";
  }
  auto checkpoint = [&](const std::string& name) {
    if (config.out_dir.empty()) return;
    const std::string path = (fs::path(config.out_dir) / name).string();
    save_checkpoint(path, trainer.params());
    result.checkpoints.push_back(path);
  };

  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(source.count);
  const auto batch = static_cast<size_t>(config.batch);
  bool done = false;
  for (int64_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size() && !done; start += batch) {
      std::vector<TrainSample> samples;
      for (size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        samples.push_back(source.load(order[k]));
      }
      std::vector<const TrainSample*> ptrs;
      for (const auto& s : samples) ptrs.push_back(&s);
      const StepRecord rec = trainer.step(ptrs, epoch);
      result.curve.push_back(rec);
      if (curve.is_open()) curve << loss_curve_row(rec) << "\n" << std::flush;
      if (config.checkpoint_every > 0 && rec.step % config.checkpoint_every == 0) {
        checkpoint("step_" + std::to_string(rec.step) + ".ckpt");
      }
      if (config.max_steps > 0 && rec.step >= config.max_steps) done = true;
      if (stop && stop(rec)) {
        result.stopped_early = true;
        done = true;
      }
    }
  }
  checkpoint("final.ckpt");
  return result;
}

}  // namespace labnet
