#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labnet/color.hpp"

namespace labnet {

// Binary plane, 1 = shadow.
struct BinaryMask {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int64_t height, int64_t width, uint8_t fill = 0)
      : h(height), w(width), data(static_cast<size_t>(height * width), fill) {}

  uint8_t& at(int64_t y, int64_t x) { return data[static_cast<size_t>(y * w + x)]; }
  uint8_t at(int64_t y, int64_t x) const { return data[static_cast<size_t>(y * w + x)]; }
  int64_t count() const;
  bool operator==(const BinaryMask&) const = default;

  template <typename T>
  Tensor<T> to_tensor() const {
    Tensor<T> t(Shape{1, 1, h, w});
    for (size_t i = 0; i < data.size(); ++i) t[static_cast<int64_t>(i)] = data[i] ? T(1) : T(0);
    return t;
  }
};

inline constexpr int kMaskThreshold = 128;

struct ShadowTriple {
  RgbImage shadow;
  BinaryMask mask;
  RgbImage gt;
  std::string id;
};

// Directory names relative to the dataset root. "{split}" expands to the
// split name, so one descriptor serves train and test.
struct DatasetLayout {
  std::string root;
  std::string shadow_dir = "{split}/{split}_A";
  std::string mask_dir = "{split}/{split}_B";
  std::string free_dir = "{split}/{split}_C";
  // Stripped from shadow-free file stems before matching (SRD names its
  // targets "<id>_free.jpg").
  std::string free_suffix;

  static DatasetLayout istd(const std::string& root);
  static DatasetLayout srd(const std::string& root);
  std::string resolve(const std::string& dir, const std::string& split) const;
};

struct DatasetIndex {
  std::string root;
  std::string split;
  DatasetLayout layout;
  std::vector<std::string> ids;
  struct Files {
    std::string shadow;
    std::string mask;
    std::string free;
  };
  std::map<std::string, Files> files;
  std::vector<std::string> orphans;
};

// ids = stems present in all three directories, sorted.
DatasetIndex scan(const DatasetLayout& layout, const std::string& split);

// Resizes shadow and gt bilinearly, the mask by nearest neighbour, then
// thresholds the mask at 128.
ShadowTriple load_triple(const DatasetIndex& index, const std::string& id,
                         std::optional<std::pair<int64_t, int64_t>> target_size = std::nullopt);

RgbImage load_image(const std::string& path);
BinaryMask load_mask(const std::string& path);
void save_image(const RgbImage& img, const std::string& path);

BinaryMask binarize(const std::vector<uint8_t>& gray, int64_t h, int64_t w,
                    int threshold = kMaskThreshold);
RgbImage resize_image(const RgbImage& img, int64_t h, int64_t w);
BinaryMask resize_mask(const BinaryMask& mask, int64_t h, int64_t w);

// Image files (png/jpg/jpeg/bmp) in dir keyed by stem.
std::map<std::string, std::string> list_images(const std::string& dir,
                                               const std::string& strip_suffix = "");

}  // namespace labnet
