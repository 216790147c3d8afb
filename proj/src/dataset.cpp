#include "labnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "labnet/kernels.hpp"

namespace fs = std::filesystem;

namespace labnet {

int64_t BinaryMask::count() const {
  return std::count(data.begin(), data.end(), uint8_t{1});
}

DatasetLayout DatasetLayout::istd(const std::string& root) {
  DatasetLayout l;
  l.root = root;
  return l;
}

DatasetLayout DatasetLayout::srd(const std::string& root) {
  DatasetLayout l;
  l.root = root;
  l.shadow_dir = "{split}/shadow";
  l.mask_dir = "{split}/mask";
  l.free_dir = "{split}/shadow_free";
  l.free_suffix = "_free";
  return l;
}

std::string DatasetLayout::resolve(const std::string& dir, const std::string& split) const {
  std::string out = dir;
  for (size_t pos; (pos = out.find("{split}")) != std::string::npos;) out.replace(pos, 7, split);
  fs::path p(out);
  if (p.is_relative()) p = fs::path(root) / p;
  return p.string();
}

std::map<std::string, std::string> list_images(const std::string& dir,
                                               const std::string& strip_suffix) {
  std::map<std::string, std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg" && ext != ".bmp") continue;
    std::string stem = entry.path().stem().string();
    if (!strip_suffix.empty() && stem.size() > strip_suffix.size() &&
        stem.compare(stem.size() - strip_suffix.size(), strip_suffix.size(), strip_suffix) == 0) {
      stem.resize(stem.size() - strip_suffix.size());
    }
    out.emplace(stem, entry.path().string());
  }
  return out;
}

DatasetIndex scan(const DatasetLayout& layout, const std::string& split) {
  if (!fs::is_directory(layout.root)) throw DatasetError("dataset root not found: " + layout.root);
  DatasetIndex index;
  index.root = layout.root;
  index.split = split;
  index.layout = layout;
  const std::string shadow_dir = layout.resolve(layout.shadow_dir, split);
  const std::string mask_dir = layout.resolve(layout.mask_dir, split);
  const std::string free_dir = layout.resolve(layout.free_dir, split);
  const auto shadows = list_images(shadow_dir);
  const auto masks = list_images(mask_dir);
  const auto frees = list_images(free_dir, layout.free_suffix);

  for (const auto& [stem, path] : shadows) {
    auto m = masks.find(stem);
    auto f = frees.find(stem);
    if (m == masks.end() || f == frees.end()) {
      index.orphans.push_back(path);
      continue;
    }
    index.ids.push_back(stem);
    index.files[stem] = {path, m->second, f->second};
  }
  for (const auto& [stem, path] : masks) {
    if (!shadows.count(stem)) index.orphans.push_back(path);
  }
  for (const auto& [stem, path] : frees) {
    if (!shadows.count(stem)) index.orphans.push_back(path);
  }
  if (index.ids.empty()) {
    throw DatasetError("no complete triples under " + layout.root + " (split " + split +
                       "): shadow=" + std::to_string(shadows.size()) + " in " + shadow_dir +
                       ", mask=" + std::to_string(masks.size()) + " in " + mask_dir +
                       ", free=" + std::to_string(frees.size()) + " in " + free_dir);
  }
  for (const auto& o : index.orphans) std::clog << "dataset: orphan file " << o << "\n";
  return index;
}

RgbImage load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path);
  RgbImage img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  return img;
}

BinaryMask binarize(const std::vector<uint8_t>& gray, int64_t h, int64_t w, int threshold) {
  BinaryMask m(h, w);
  for (size_t i = 0; i < gray.size(); ++i) m.data[i] = gray[i] >= threshold ? 1 : 0;
  return m;
}

namespace {

std::vector<uint8_t> load_gray(const std::string& path, int64_t& h, int64_t& w) {
  cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw IoError("cannot decode mask " + path);
  h = gray.rows;
  w = gray.cols;
  std::vector<uint8_t> out(static_cast<size_t>(h * w));
  for (int y = 0; y < gray.rows; ++y) {
    std::copy_n(gray.ptr<uint8_t>(y), gray.cols, out.begin() + y * gray.cols);
  }
  return out;
}

}  // namespace

BinaryMask load_mask(const std::string& path) {
  int64_t h = 0, w = 0;
  const auto gray = load_gray(path, h, w);
  return binarize(gray, h, w);
}

void save_image(const RgbImage& img, const std::string& path) {
  cv::Mat bgr(static_cast<int>(img.h), static_cast<int>(img.w), CV_8UC3);
  for (int y = 0; y < bgr.rows; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      row[x] = cv::Vec3b(img.at(y, x, 2), img.at(y, x, 1), img.at(y, x, 0));
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path, bgr);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write image " + path + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write image " + path);
}

RgbImage resize_image(const RgbImage& img, int64_t h, int64_t w) {
  if (h == img.h && w == img.w) return img;
  Tensor<double> t(Shape{1, 3, img.h, img.w});
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) t.at(0, ch, y, x) = img.at(y, x, ch);
  const Tensor<double> r = kernels::resize_forward(t, h, w, ResizeMode::kBilinear);
  RgbImage out(h, w);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        out.at(y, x, ch) =
            static_cast<uint8_t>(std::clamp<long>(std::lround(r.at(0, ch, y, x)), 0L, 255L));
      }
  return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int64_t h, int64_t w) {
  if (h == mask.h && w == mask.w) return mask;
  BinaryMask out(h, w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      out.at(y, x) = mask.at(nearest_index(y, mask.h, h), nearest_index(x, mask.w, w));
    }
  }
  return out;
}

ShadowTriple load_triple(const DatasetIndex& index, const std::string& id,
                         std::optional<std::pair<int64_t, int64_t>> target_size) {
  auto it = index.files.find(id);
  if (it == index.files.end()) throw DatasetError("id not in index: " + id);
  ShadowTriple t;
  t.id = id;
  t.shadow = load_image(it->second.shadow);
  t.gt = load_image(it->second.free);
  int64_t mh = 0, mw = 0;
  const auto gray = load_gray(it->second.mask, mh, mw);
  const int64_t h = target_size ? target_size->first : t.shadow.h;
  const int64_t w = target_size ? target_size->second : t.shadow.w;
  t.shadow = resize_image(t.shadow, h, w);
  t.gt = resize_image(t.gt, h, w);
  // Nearest on the raw gray levels, threshold afterwards.
  std::vector<uint8_t> resized(static_cast<size_t>(h * w));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      resized[static_cast<size_t>(y * w + x)] =
          gray[static_cast<size_t>(nearest_index(y, mh, h) * mw + nearest_index(x, mw, w))];
    }
  }
  t.mask = binarize(resized, h, w);
  return t;
}

}  // namespace labnet
