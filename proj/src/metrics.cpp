#include "labnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace labnet {

std::string to_string(Region r) {
  switch (r) {
    case Region::kShadow: return "S";
    case Region::kNonShadow: return "NS";
    case Region::kAll: return "ALL";
  }
  return "?";
}

bool in_region(const BinaryMask& mask, int64_t i, Region r) {
  switch (r) {
    case Region::kShadow: return mask.data[static_cast<size_t>(i)] == 1;
    case Region::kNonShadow: return mask.data[static_cast<size_t>(i)] == 0;
    case Region::kAll: return true;
  }
  return false;
}

namespace {

void require_same(int64_t h1, int64_t w1, int64_t h2, int64_t w2, const char* what) {
  require_shape(h1 == h2 && w1 == w2, std::string(what) + ": image sizes differ (" +
                                          std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
                                          std::to_string(h2) + "x" + std::to_string(w2) + ")");
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

std::array<double, kWin> gaussian_1d() {
  std::array<double, kWin> g{};
  double total = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
    total += g[static_cast<size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// 'valid' separable Gaussian filter of a plane.
std::vector<double> filter_valid(const std::vector<double>& src, int64_t h, int64_t w) {
  static const auto g = gaussian_1d();
  const int64_t oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> tmp(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * src[static_cast<size_t>(y * w + x + k)];
      tmp[static_cast<size_t>(y * ow + x)] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * tmp[static_cast<size_t>((y + k) * ow + x)];
      out[static_cast<size_t>(y * ow + x)] = acc;
    }
  }
  return out;
}

// SSIM map of one channel, size (h-10) x (w-10).
std::vector<double> ssim_map(const RgbImage& a, const RgbImage& b, int ch) {
  const int64_t h = a.h, w = a.w;
  const int64_t n = h * w;
  std::vector<double> x(static_cast<size_t>(n)), y(static_cast<size_t>(n)), xx(static_cast<size_t>(n)),
      yy(static_cast<size_t>(n)), xy(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double p = a.data[static_cast<size_t>(3 * i + ch)];
    const double q = b.data[static_cast<size_t>(3 * i + ch)];
    x[static_cast<size_t>(i)] = p;
    y[static_cast<size_t>(i)] = q;
    xx[static_cast<size_t>(i)] = p * p;
    yy[static_cast<size_t>(i)] = q * q;
    xy[static_cast<size_t>(i)] = p * q;
  }
  const auto mx = filter_valid(x, h, w), my = filter_valid(y, h, w);
  const auto sxx = filter_valid(xx, h, w), syy = filter_valid(yy, h, w), sxy = filter_valid(xy, h, w);
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  std::vector<double> map(mx.size());
  for (size_t i = 0; i < map.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    map[i] = ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return map;
}

double ssim_impl(const RgbImage& pred, const RgbImage& gt, const BinaryMask* mask, Region r) {
  require_same(pred.h, pred.w, gt.h, gt.w, "ssim");
  if (pred.h < kWin || pred.w < kWin) {
    throw ArgumentError("ssim: image must be at least 11x11, got " + std::to_string(pred.h) + "x" +
                        std::to_string(pred.w));
  }
  const int64_t ow = pred.w - kWin + 1;
  double total = 0;
  for (int ch = 0; ch < 3; ++ch) {
    const auto map = ssim_map(pred, gt, ch);
    double acc = 0;
    int64_t count = 0;
    for (size_t i = 0; i < map.size(); ++i) {
      if (mask) {
        const int64_t y = static_cast<int64_t>(i) / ow + kWin / 2;
        const int64_t x = static_cast<int64_t>(i) % ow + kWin / 2;
        if (!in_region(*mask, y * pred.w + x, r)) continue;
      }
      acc += map[i];
      ++count;
    }
    if (count == 0) return 0.0;
    total += acc / static_cast<double>(count);
  }
  return total / 3.0;
}

}  // namespace

LabError lab_error(const LabImage& pred, const LabImage& gt, const BinaryMask& mask, Region r) {
  require_same(pred.h, pred.w, gt.h, gt.w, "lab_error");
  require_same(pred.h, pred.w, mask.h, mask.w, "lab_error mask");
  LabError e;
  const int64_t n = pred.h * pred.w;
  for (int64_t i = 0; i < n; ++i) {
    if (!in_region(mask, i, r)) continue;
    ++e.pixels;
    for (int ch = 0; ch < 3; ++ch) {
      const double d = pred.data[static_cast<size_t>(3 * i + ch)] - gt.data[static_cast<size_t>(3 * i + ch)];
      e.abs_sum += std::abs(d);
      e.sq_sum += d * d;
    }
  }
  if (e.pixels > 0) {
    const double values = 3.0 * static_cast<double>(e.pixels);
    e.mae = e.abs_sum / values;
    e.rms = std::sqrt(e.sq_sum / values);
  }
  return e;
}

double psnr(const RgbImage& pred, const RgbImage& gt) {
  require_same(pred.h, pred.w, gt.h, gt.w, "psnr");
  double sq = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - gt.data[i];
    sq += d * d;
  }
  return psnr_from_mse(pred.data.empty() ? 0.0 : sq / static_cast<double>(pred.data.size()));
}

double psnr(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask, Region r) {
  require_same(pred.h, pred.w, gt.h, gt.w, "psnr");
  require_same(pred.h, pred.w, mask.h, mask.w, "psnr mask");
  double sq = 0;
  int64_t count = 0;
  for (int64_t i = 0; i < pred.h * pred.w; ++i) {
    if (!in_region(mask, i, r)) continue;
    for (int ch = 0; ch < 3; ++ch) {
      const double d = static_cast<double>(pred.data[static_cast<size_t>(3 * i + ch)]) -
                       gt.data[static_cast<size_t>(3 * i + ch)];
      sq += d * d;
    }
    count += 3;
  }
  return psnr_from_mse(count == 0 ? 0.0 : sq / static_cast<double>(count));
}

double ssim(const RgbImage& pred, const RgbImage& gt) { return ssim_impl(pred, gt, nullptr, Region::kAll); }

double ssim(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask, Region r) {
  require_same(pred.h, pred.w, mask.h, mask.w, "ssim mask");
  return ssim_impl(pred, gt, &mask, r);
}

ImageMetrics evaluate_image(const RgbImage& pred, const RgbImage& gt, const BinaryMask& mask,
                            const std::string& id) {
  ImageMetrics m;
  m.id = id;
  const LabImage lp = srgb_to_lab(pred);
  const LabImage lg = srgb_to_lab(gt);
  for (Region r : kRegions) {
    RegionMetrics& out = m.regions[static_cast<size_t>(r)];
    const LabError e = lab_error(lp, lg, mask, r);
    out.rmse_lab = e.mae;
    out.rmse_lab_true = e.rms;
    out.abs_sum = e.abs_sum;
    out.sq_sum = e.sq_sum;
    out.pixels = e.pixels;
    out.images = e.pixels > 0 ? 1 : 0;
    if (e.pixels > 0) {
      out.psnr = psnr(pred, gt, mask, r);
      out.ssim = r == Region::kAll ? ssim(pred, gt) : ssim(pred, gt, mask, r);
    }
  }
  return m;
}

MetricsReport aggregate(const std::vector<ImageMetrics>& images, Aggregation mode) {
  MetricsReport report;
  report.aggregation = mode;
  report.images = static_cast<int64_t>(images.size());
  for (Region r : kRegions) {
    RegionMetrics& out = report.regions[static_cast<size_t>(r)];
    double mae = 0, rms = 0, ps = 0, ss = 0;
    for (const ImageMetrics& im : images) {
      const RegionMetrics& m = im.regions[static_cast<size_t>(r)];
      if (m.pixels == 0) continue;
      ++out.images;
      out.pixels += m.pixels;
      out.abs_sum += m.abs_sum;
      out.sq_sum += m.sq_sum;
      mae += m.rmse_lab;
      rms += m.rmse_lab_true;
      ps += m.psnr;
      ss += m.ssim;
    }
    if (out.images == 0) continue;
    const double k = static_cast<double>(out.images);
    out.psnr = ps / k;
    out.ssim = ss / k;
    if (mode == Aggregation::kPerImage) {
      out.rmse_lab = mae / k;
      out.rmse_lab_true = rms / k;
    } else {
      const double values = 3.0 * static_cast<double>(out.pixels);
      out.rmse_lab = out.abs_sum / values;
      out.rmse_lab_true = std::sqrt(out.sq_sum / values);
    }
  }
  return report;
}

MetricsReport evaluate_dataset(const std::string& pred_dir, const DatasetIndex& dataset,
                               const EvalOptions& options) {
  const auto preds = list_images(pred_dir);
  std::vector<std::string> present;
  std::vector<std::string> omissions;
  for (const auto& id : dataset.ids) {
    if (preds.count(id)) {
      present.push_back(id);
    } else {
      omissions.push_back(id);
    }
  }
  std::vector<ImageMetrics> results(present.size());
  std::vector<std::string> resized(present.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < present.size(); ++i) {
    const ShadowTriple t = load_triple(dataset, present[i]);
    RgbImage pred = load_image(preds.at(present[i]));
    if (pred.h != t.gt.h || pred.w != t.gt.w) {
      resized[i] = present[i];
      pred = resize_image(pred, t.gt.h, t.gt.w);
    }
    results[i] = evaluate_image(pred, t.gt, t.mask, present[i]);
  }
  MetricsReport report = aggregate(results, options.aggregation);
  report.method = options.method;
  report.omissions = std::move(omissions);
  report.notes.push_back("evaluated at native ground-truth resolution");
  int64_t n_resized = 0;
  for (const auto& r : resized) n_resized += r.empty() ? 0 : 1;
  if (n_resized > 0) {
    report.notes.push_back(std::to_string(n_resized) +
                           " predictions bilinearly resized to ground-truth size");
  }
  return report;
}

namespace {

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "Method";
  for (Region r : kRegions) {
    const std::string n = to_string(r);
    os << "," << n << "-RMSE," << n << "-PSNR," << n << "-SSIM";
  }
  for (Region r : kRegions) os << "," << to_string(r) << "-RMSE-true";
  os << ",images\n" << report.method;
  for (Region r : kRegions) {
    const RegionMetrics& m = report.regions[static_cast<size_t>(r)];
    os << "," << fmt(m.rmse_lab, 4) << "," << fmt(m.psnr, 4) << "," << fmt(m.ssim, 6);
  }
  for (Region r : kRegions) os << "," << fmt(report.regions[static_cast<size_t>(r)].rmse_lab_true, 4);
  os << "," << report.images << "\n";
  return os.str();
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  os << "# aggregation: " << (report.aggregation == Aggregation::kPerImage ? "per-image mean" : "pooled pixels")
     << ", images: " << report.images << "\n";
  for (const auto& n : report.notes) os << "# " << n << "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s | %8s %8s %8s | %8s %8s %8s | %8s %8s %8s\n", "Method",
                "S-RMSE", "S-PSNR", "S-SSIM", "NS-RMSE", "NS-PSNR", "NS-SSIM", "ALL-RMSE", "ALL-PSNR",
                "ALL-SSIM");
  os << line;
  const auto& s = report.regions[0];
  const auto& ns = report.regions[1];
  const auto& all = report.regions[2];
  std::snprintf(line, sizeof(line),
                "%-16s | %8.2f %8.2f %8.4f | %8.2f %8.2f %8.4f | %8.2f %8.2f %8.4f\n",
                report.method.c_str(), s.rmse_lab, s.psnr, s.ssim, ns.rmse_lab, ns.psnr, ns.ssim,
                all.rmse_lab, all.psnr, all.ssim);
  os << line;
  std::snprintf(line, sizeof(line), "%-16s | %8.2f %8s %8s | %8.2f %8s %8s | %8.2f\n",
                "(true RMSE)", s.rmse_lab_true, "", "", ns.rmse_lab_true, "", "", all.rmse_lab_true);
  os << line;
  if (!report.omissions.empty()) {
    os << "\nOmissions (" << report.omissions.size() << " missing predictions):\n";
    for (const auto& id : report.omissions) os << "  " << id << "\n";
  }
  return os.str();
}

}  // namespace labnet
