#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "labnet/color.hpp"
#include "labnet/dataset.hpp"

namespace labnet {

enum class Region { kShadow = 0, kNonShadow = 1, kAll = 2 };
inline constexpr std::array<Region, 3> kRegions{Region::kShadow, Region::kNonShadow, Region::kAll};
std::string to_string(Region r);

inline constexpr double kPsnrCap = 100.0;

struct LabError {
  double mae = 0.0;  // mean |diff| over pixels and the three channels
  double rms = 0.0;  // sqrt(mean diff^2) over the same selection
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  int64_t pixels = 0;
};

bool in_region(const BinaryMask& mask, int64_t i, Region r);

// Raw LAB units. An empty region reports zeros with pixels == 0.
LabError lab_error(const LabImage& pred, const LabImage& gt, const BinaryMask& mask, Region r);

// 10 log10(255^2 / MSE) over all RGB values; identical images give the cap.
double psnr(const RgbImage& pred, const RgbImage& gt);
double psnr(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask, Region r);

// Single-scale SSIM: 11x11 Gaussian (sigma 1.5), K1 0.01, K2 0.03, L 255,
// 'valid' windows, computed per RGB channel and averaged.
double ssim(const RgbImage& pred, const RgbImage& gt);
// Region variant averages the SSIM map over windows centred in the region.
double ssim(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask, Region r);

struct RegionMetrics {
  double rmse_lab = 0.0;       // mae_variant, the tables' "RMSE"
  double rmse_lab_true = 0.0;  // rms_variant
  double psnr = 0.0;
  double ssim = 0.0;
  int64_t pixels = 0;
  int64_t images = 0;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
};

struct ImageMetrics {
  std::string id;
  std::array<RegionMetrics, 3> regions;
};

ImageMetrics evaluate_image(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask,
                            const std::string& id = "");

enum class Aggregation { kPerImage, kPooled };

struct MetricsReport {
  std::string method = "Method";
  Aggregation aggregation = Aggregation::kPerImage;
  std::array<RegionMetrics, 3> regions;
  int64_t images = 0;
  std::vector<std::string> omissions;
  std::vector<std::string> notes;
};

// Order-independent reduction of per-image results.
MetricsReport aggregate(const std::vector<ImageMetrics>& images,
                        Aggregation mode = Aggregation::kPerImage);

struct EvalOptions {
  std::string method = "Method";
  Aggregation aggregation = Aggregation::kPerImage;
};

// Predictions are looked up in pred_dir by id stem. Missing predictions are
// listed in omissions and excluded.
MetricsReport evaluate_dataset(const std::string& pred_dir, const DatasetIndex& dataset,
                               const EvalOptions& options = {});

// Columns: Method, then RMSE/PSNR/SSIM for S, NS, ALL.
std::string report_csv(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace labnet
