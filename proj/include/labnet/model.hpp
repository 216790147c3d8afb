#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labnet/blocks.hpp"
#include "labnet/color.hpp"

namespace labnet {

enum class BranchMode { kTwoBranch, kLabTogether, kRgbTogether };

struct ModelConfig {
  ElementaryUnitConfig unit;
  EcaConfig eca;
  LsaConfig lsa;
  BranchMode branch_mode = BranchMode::kTwoBranch;
  // Width of the exchange convs and of block outputs inside a branch.
  int64_t branch_width = 32;

  ColorSpace color_space() const {
    return branch_mode == BranchMode::kRgbTogether ? ColorSpace::kRgb : ColorSpace::kLab;
  }
  bool two_branch() const { return branch_mode == BranchMode::kTwoBranch; }

  // Flat key/value form used by checkpoints and run manifests.
  std::map<std::string, std::string> to_kv() const;
  // Applies recognised keys on top of the defaults; unknown keys are ignored
  // so that manifests can carry other sections.
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

std::string to_string(BranchMode m);
std::string to_string(EcaMode m);
std::string to_string(LsaMode m);
BranchMode parse_branch_mode(const std::string& s);
EcaMode parse_eca_mode(const std::string& s);
LsaMode parse_lsa_mode(const std::string& s);

template <typename T>
struct BasicBlockWeights {
  ElementaryUnitWeights<T> unit;
  std::optional<EcaWeights<T>> eca;
  ConvWeight<T> project;

  template <typename Fn>
  void for_each(Fn&& fn) {
    unit.for_each(fn);
    if (eca) eca->for_each(fn);
    fn(project);
  }
};

template <typename T>
struct BranchWeights {
  std::string name;
  std::array<BasicBlockWeights<T>, 4> blocks;
  std::array<ConvWeight<T>, 3> exchange;
  std::vector<LsaWeights<T>> lsa;  // empty when LSA is off, else two

  template <typename Fn>
  void for_each(Fn&& fn) {
    blocks[0].for_each(fn);
    for (size_t j = 0; j < 3; ++j) {
      fn(exchange[j]);
      if (j >= 1 && !lsa.empty()) lsa[j - 1].for_each(fn);
      blocks[j + 1].for_each(fn);
    }
  }
};

// All network weights. Registry order (for_each / parameters) is stable and
// follows the forward data flow.
template <typename T>
class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  template <typename Fn>
  void for_each_conv(Fn&& fn) {
    fn(stem);
    for (auto& b : branches) b.for_each(fn);
    fn(head);
  }

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  Parameter<T>* find(const std::string& name);
  void zero_grad();

  ConvWeight<T> stem;
  std::vector<BranchWeights<T>> branches;
  ConvWeight<T> head;

 private:
  ModelConfig config_;
};

// Uniform(-b, b) with b = sqrt(1 / fan_in) for conv weights, zero biases.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed);

struct ForwardTrace {
  std::vector<LsaTrace> lsa;
  Var residual_sum;
};

// shadow: (1, 3, H, W) in the network encoding; mask: (1, 1, H, W) binary.
template <typename T>
Var forward(Graph<T>& g, ModelParams<T>& params, Var shadow, const Tensor<T>& mask,
            ForwardTrace* trace = nullptr);

// Convenience: inference without gradients.
template <typename T>
Tensor<T> predict(ModelParams<T>& params, const Tensor<T>& shadow, const Tensor<T>& mask);

template <typename T>
int64_t count_params(const ModelParams<T>& params);

// ---------------------------------------------------------------------------
// Complexity accounting.
// ---------------------------------------------------------------------------

enum class FlopConvention { kTwoPerMac, kOnePerMac };
std::string to_string(FlopConvention c);

struct ComplexityRow {
  std::string module;
  int64_t params = 0;
  int64_t macs = 0;
  int64_t pointwise = 0;  // elementwise op count, not MACs
  int64_t flops = 0;
};

struct ComplexityReport {
  int64_t height = 0;
  int64_t width = 0;
  FlopConvention convention = FlopConvention::kTwoPerMac;
  int64_t param_count = 0;
  int64_t macs = 0;
  int64_t flops = 0;
  std::vector<ComplexityRow> rows;
};

struct AttentionAssumption {
  // Shadow / key pixel counts at the attention resolution. Attention cost is
  // data dependent; zero excludes it from the total.
  int64_t shadow_pixels = 0;
  int64_t key_pixels = 0;
};

// Convs and matmuls count MACs (times 1 or 2 per convention); pointwise ops
// count one FLOP per output element; attention costs 2 * Ns * Nns * K MACs.
// Single conv, bias adds not counted.
int64_t conv_macs(int64_t in, int64_t out, int64_t kernel, int64_t hw);
int64_t conv_flops(int64_t in, int64_t out, int64_t kernel, int64_t height, int64_t width,
                   FlopConvention convention = FlopConvention::kTwoPerMac);

ComplexityReport count_flops(const ModelConfig& config, int64_t height, int64_t width,
                             FlopConvention convention = FlopConvention::kTwoPerMac,
                             const AttentionAssumption& attention = {});

// ---------------------------------------------------------------------------
// Checkpoints: "LABNETCK", u32 version, config text, manifest of
// (name, shape, offset), then float32 little-endian values.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams<float>& params);
ModelParams<float> load_checkpoint(const std::string& path);

}  // namespace labnet
