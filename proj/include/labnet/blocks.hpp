#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labnet/graph.hpp"
#include "labnet/ops.hpp"

namespace labnet {

// ---------------------------------------------------------------------------
// Elementary unit: three stages, each running three parallel 3x3 dilated convs
// on the same input; their concatenation is merged by a 1x1 conv and feeds
// the next stage. The unit output is the concatenation of the three merges.
// ---------------------------------------------------------------------------

using RateTriple = std::array<int64_t, 3>;

struct ElementaryUnitConfig {
  std::array<RateTriple, 3> rates{{{1, 4, 16}, {2, 8, 32}, {4, 16, 64}}};
  // Output channels of the three convs in a stage, in ascending-rate order.
  RateTriple stage_channels{16, 32, 48};
  int64_t merge_channels = 32;
  // Eq.-faithful default is a purely linear unit; a LeakyReLU after each
  // dilated conv can be switched on.
  bool activation = false;

  int64_t stage_width() const { return stage_channels[0] + stage_channels[1] + stage_channels[2]; }
  int64_t output_channels() const { return 3 * merge_channels; }
};

template <typename T>
struct ElementaryUnitWeights {
  std::array<std::array<ConvWeight<T>, 3>, 3> dilated;  // [stage][branch]
  std::array<ConvWeight<T>, 3> merge;
  bool activation = false;

  ElementaryUnitWeights() = default;
  ElementaryUnitWeights(const std::string& name, int64_t in_channels,
                        const ElementaryUnitConfig& cfg);

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& stage : dilated)
      for (auto& conv : stage) fn(conv);
    for (auto& conv : merge) fn(conv);
  }
};

struct ElementaryUnitOutput {
  std::array<Var, 3> stages;
  Var concat;
};

template <typename T>
ElementaryUnitOutput elementary_unit(Graph<T>& g, Var input, ElementaryUnitWeights<T>& w);

// ---------------------------------------------------------------------------
// Enhanced channel attention: per-channel std of a Laplacian-filtered map
// drives an SE-style gate.
// ---------------------------------------------------------------------------

enum class EcaMode { kLaplacian, kSobel, kGap, kOff };
enum class LaplacianKind { kFourNeighbor, kEightNeighbor };

struct EcaConfig {
  EcaMode mode = EcaMode::kLaplacian;
  LaplacianKind laplacian = LaplacianKind::kFourNeighbor;
  int64_t ratio = 4;
};

// FC layers are carried as 1x1 convs over (n, C, 1, 1).
template <typename T>
struct EcaWeights {
  ConvWeight<T> fc1;
  ConvWeight<T> fc2;

  EcaWeights() = default;
  EcaWeights(const std::string& name, int64_t channels, int64_t ratio);

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(fc1);
    fn(fc2);
  }
};

Stencil3x3 laplacian_stencil(LaplacianKind kind);

template <typename T>
Var laplacian_filter(Graph<T>& g, Var x, LaplacianKind kind = LaplacianKind::kFourNeighbor);

// Channel descriptor fed to the SE gate, per the configured pooling mode.
template <typename T>
Var eca_descriptor(Graph<T>& g, Var x, const EcaConfig& cfg);
template <typename T>
Var eca_gate(Graph<T>& g, Var descriptor, EcaWeights<T>& w);
template <typename T>
Var eca(Graph<T>& g, Var x, EcaWeights<T>& w, const EcaConfig& cfg);

// ---------------------------------------------------------------------------
// Mask morphology.
// ---------------------------------------------------------------------------

// Binary dilation with a kernel x kernel square, single pass. Input (1,1,h,w).
template <typename T>
Tensor<T> dilate_mask(const Tensor<T>& mask, int64_t kernel);
// Dilation minus the mask: the non-shadow ring around shadow regions.
template <typename T>
Tensor<T> boundary_mask(const Tensor<T>& mask, int64_t kernel);

// ---------------------------------------------------------------------------
// Local spatial attention.
// ---------------------------------------------------------------------------

enum class LsaMode { kLocal, kWhole, kOff };

struct LsaConfig {
  int64_t k = 32;
  int64_t m = 256;
  int64_t dilate_kernel = 7;
  LsaMode mode = LsaMode::kLocal;
  bool downsample = true;
};

template <typename T>
struct LsaWeights {
  ConvWeight<T> conv_s;
  ConvWeight<T> conv_ns;
  ConvWeight<T> merge;

  LsaWeights() = default;
  LsaWeights(const std::string& name, int64_t channels, const LsaConfig& cfg);

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(conv_s);
    fn(conv_ns);
    fn(merge);
  }
};

// Intermediate nodes kept for inspection by tests and the FLOP counter.
struct LsaTrace {
  Var output;
  Var ns_features;  // Conv_NS map at the attention resolution
  Var base;         // ns_features with shadow pixels replaced
  std::optional<Var> attention;
  std::vector<int64_t> shadow_pixels;
  std::vector<int64_t> key_pixels;
  int64_t attn_h = 0;
  int64_t attn_w = 0;
};

// Attention resolution: min(M, H) x min(M, W) when downsampling, else H x W.
std::pair<int64_t, int64_t> lsa_resolution(const LsaConfig& cfg, int64_t h, int64_t w);

// Shadow and key pixel lists at the attention resolution.
template <typename T>
std::pair<std::vector<int64_t>, std::vector<int64_t>> lsa_pixel_sets(const Tensor<T>& mask_small,
                                                                     const LsaConfig& cfg);

// mask: (1, 1, H, W) binary, 1 = shadow.
template <typename T>
LsaTrace lsa(Graph<T>& g, Var input, const Tensor<T>& mask, LsaWeights<T>& w,
             const LsaConfig& cfg);

// Downsample a binary mask (nearest, re-thresholded at 0.5).
template <typename T>
Tensor<T> downsample_mask(const Tensor<T>& mask, int64_t h, int64_t w);

}  // namespace labnet
