#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "gradcheck.hpp"
#include "model_check.hpp"
#include "labnet/model.hpp"
#include "op_suite.hpp"

using namespace labnet;
using labnet::testing::box_mask;
using labnet::testing::vals;

namespace fs = std::filesystem;

namespace {

ModelConfig small_config() { return labnet::testing::tiny_model_config(); }

template <typename T>
Tensor<T> random_image(int64_t h, int64_t w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor<T> t(Shape{1, 3, h, w});
  for (T& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

Tensor<float> float_mask(int64_t h, int64_t w) { return box_mask(h, w, h / 4, w / 4, h / 2, w / 2).cast<float>(); }

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("labnet_test_" + name)).string();
}

}  // namespace

TEST(Model, ForwardShapeDefaultConfig) {
  auto p = init_params<float>(ModelConfig{}, 1);
  const Tensor<float> out = predict(p, random_image<float>(64, 64, 2), float_mask(64, 64));
  EXPECT_EQ(out.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_TRUE(out.all_finite());
}

TEST(Model, ForwardShapeNonSquare) {
  auto p = init_params<double>(small_config(), 1);
  const Tensor<double> out =
      predict(p, random_image<double>(12, 20, 3), box_mask(12, 20, 3, 4, 8, 11));
  EXPECT_EQ(out.shape(), (Shape{1, 3, 12, 20}));
}

TEST(Model, ZeroHeadGivesZeroOutput) {
  auto p = init_params<double>(small_config(), 4);
  p.head.weight.value.fill(0.0);
  const Tensor<double> out = predict(p, random_image<double>(16, 16, 5), box_mask(16, 16, 4, 4, 9, 9));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, ForwardIsDeterministic) {
  auto a = init_params<float>(ModelConfig{}, 7);
  auto b = init_params<float>(ModelConfig{}, 7);
  const auto x = random_image<float>(16, 16, 8);
  EXPECT_EQ(vals(predict(a, x, float_mask(16, 16))), vals(predict(b, x, float_mask(16, 16))));
}

TEST(Model, InputContract) {
  auto p = init_params<double>(small_config(), 1);
  EXPECT_THROW(predict(p, random_image<double>(10, 16, 1), box_mask(10, 16, 0, 0, 1, 1)), ShapeError);
  EXPECT_THROW(predict(p, random_image<double>(16, 16, 1), box_mask(8, 8, 0, 0, 1, 1)), ShapeError);
  Tensor<double> soft = box_mask(16, 16, 2, 2, 5, 5);
  soft[0] = 0.3;
  EXPECT_THROW(predict(p, random_image<double>(16, 16, 1), soft), ArgumentError);
}

TEST(Model, BranchStructure) {
  auto p = init_params<float>(ModelConfig{}, 1);
  ASSERT_EQ(p.branches.size(), 2u);
  EXPECT_EQ(p.branches[0].blocks[3].project.out_channels(), 2);
  EXPECT_EQ(p.branches[1].blocks[3].project.out_channels(), 1);
  EXPECT_EQ(p.branches[0].lsa.size(), 2u);
  // Same structure apart from the final projection.
  std::vector<int64_t> ab, l;
  p.branches[0].for_each([&](ConvWeight<float>& c) { ab.push_back(c.param_count()); });
  p.branches[1].for_each([&](ConvWeight<float>& c) { l.push_back(c.param_count()); });
  ASSERT_EQ(ab.size(), l.size());
  int differing = 0;
  for (size_t i = 0; i < ab.size(); ++i) differing += ab[i] != l[i];
  EXPECT_EQ(differing, 1);
}

TEST(Model, RegistryNamesUniqueAndStable) {
  auto a = init_params<float>(ModelConfig{}, 1);
  auto b = init_params<float>(ModelConfig{}, 2);
  std::set<std::string> seen;
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(seen.insert(pa[i]->name).second) << pa[i]->name;
    EXPECT_EQ(pa[i]->name, pb[i]->name);
  }
  EXPECT_EQ(pa.front()->name, "stem.weight");
  EXPECT_NE(a.find("head.bias"), nullptr);
  EXPECT_EQ(a.find("nope"), nullptr);
}

TEST(Model, InitSeeds) {
  auto a = init_params<float>(ModelConfig{}, 11);
  auto b = init_params<float>(ModelConfig{}, 11);
  auto c = init_params<float>(ModelConfig{}, 12);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differ = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(vals(pa[i]->value), vals(pb[i]->value));
    differ = differ || vals(pa[i]->value) != vals(pc[i]->value);
    if (pa[i]->name.ends_with(".bias")) {
      for (float v : pa[i]->value.values()) EXPECT_EQ(v, 0.0f);
    }
  }
  EXPECT_TRUE(differ);
}

TEST(Model, InitMomentMatchesUniform) {
  // exchange convs read 32 channels through a 1x1 kernel; the stage-2 dilated
  // convs read 32 merged channels through 3x3, fan-in 288.
  auto p = init_params<double>(ModelConfig{}, 13);
  const ConvWeight<double>& w = p.branches[0].blocks[1].unit.dilated[1][2];
  ASSERT_EQ(w.in_channels() * w.kernel() * w.kernel(), 288);
  double sum = 0, sq = 0;
  const auto v = w.weight.value.values();
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(v.size()));
  const double bound = std::sqrt(1.0 / 288.0);
  EXPECT_NEAR(sd, bound / std::sqrt(3.0), 0.2 * bound / std::sqrt(3.0));
  for (double x : v) EXPECT_LE(std::abs(x), bound);
}

TEST(Model, ParamCounts) {
  auto p = init_params<float>(ModelConfig{}, 1);
  // 3x3 kernel, 3 in, 3 out: 81 weights and 3 biases.
  EXPECT_EQ(p.stem.param_count(), 3 * 3 * 3 * 3 + 3);
  EXPECT_EQ(p.stem.param_count(), 84);
  const int64_t base = count_params(p);
  EXPECT_EQ(base, count_flops(ModelConfig{}, 32, 32).param_count);
  ModelConfig wide;
  wide.unit.merge_channels = 64;
  EXPECT_GT(count_params(init_params<float>(wide, 1)), base);
}

TEST(Model, SingleConvFlops) {
  EXPECT_EQ(conv_flops(4, 32, 3, 256, 256), 150994944);
  EXPECT_EQ(conv_flops(4, 32, 3, 256, 256, FlopConvention::kOnePerMac), 75497472);
}

TEST(Model, FlopsScaleQuadratically) {
  ModelConfig cfg;
  cfg.lsa.downsample = false;
  // The ECA gate FCs run on 1x1 descriptors and do not scale.
  const auto a = count_flops(cfg, 64, 64), b = count_flops(cfg, 128, 128);
  EXPECT_NEAR(static_cast<double>(b.macs) / static_cast<double>(a.macs), 4.0, 1e-4);
  EXPECT_NEAR(static_cast<double>(b.flops) / static_cast<double>(a.flops), 4.0, 1e-4);
}

TEST(Model, ReportTotalsEqualRowSums) {
  for (auto conv : {FlopConvention::kTwoPerMac, FlopConvention::kOnePerMac}) {
    const auto r = count_flops(ModelConfig{}, 256, 256, conv, AttentionAssumption{100, 50});
    int64_t params = 0, macs = 0, flops = 0;
    for (const auto& row : r.rows) {
      params += row.params;
      macs += row.macs;
      flops += row.flops;
      EXPECT_EQ(row.flops, row.macs * (conv == FlopConvention::kTwoPerMac ? 2 : 1) + row.pointwise);
    }
    EXPECT_EQ(params, r.param_count);
    EXPECT_EQ(macs, r.macs);
    EXPECT_EQ(flops, r.flops);
  }
  EXPECT_THROW(count_flops(ModelConfig{}, 0, 8), ArgumentError);
}

TEST(Model, EndToEndGradient) {
  for (uint64_t seed : {1, 2, 3}) {
    const auto r = labnet::testing::check_model_gradients(small_config(), seed, 20);
    EXPECT_LT(r.max_rel_error, 1e-3) << "seed " << seed << " " << r.worst;
  }
}

TEST(Model, ConfigKvRoundTrip) {
  ModelConfig c = small_config();
  c.eca.mode = EcaMode::kSobel;
  c.lsa.mode = LsaMode::kWhole;
  c.branch_mode = BranchMode::kRgbTogether;
  c.unit.activation = true;
  const ModelConfig back = ModelConfig::from_kv(c.to_kv());
  EXPECT_EQ(back.to_kv(), c.to_kv());
  EXPECT_EQ(back.color_space(), ColorSpace::kRgb);
  EXPECT_THROW(ModelConfig::from_kv({{"unit.rates", "1,2,3;4,5,6"}}), ArgumentError);
  EXPECT_THROW(ModelConfig::from_kv({{"eca.mode", "fancy"}}), ArgumentError);
  EXPECT_THROW(ModelConfig::from_kv({{"lsa.k", "x"}}), ArgumentError);
}

TEST(Model, SingleBranchModes) {
  for (auto mode : {BranchMode::kLabTogether, BranchMode::kRgbTogether}) {
    ModelConfig c = small_config();
    c.branch_mode = mode;
    auto p = init_params<double>(c, 1);
    EXPECT_EQ(p.branches.size(), 1u);
    EXPECT_EQ(count_params(p), count_flops(c, 16, 16).param_count);
    EXPECT_EQ(predict(p, random_image<double>(16, 16, 2), box_mask(16, 16, 2, 2, 6, 6)).shape(),
              (Shape{1, 3, 16, 16}));
  }
}

TEST(Checkpoint, RoundTrip) {
  ModelConfig c = small_config();
  c.eca.mode = EcaMode::kGap;
  auto p = init_params<float>(c, 31);
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, p);
  auto q = load_checkpoint(path);
  EXPECT_EQ(q.config().to_kv(), c.to_kv());
  const auto a = p.parameters(), b = q.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(vals(a[i]->value), vals(b[i]->value));
  }
  // Saving again gives the same bytes.
  const std::string again = temp_path("roundtrip2.ckpt");
  save_checkpoint(again, q);
  std::ifstream fa(path, std::ios::binary), fb(again, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), {}), bb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(ba, bb);
  fs::remove(path);
  fs::remove(again);
}

TEST(Checkpoint, Errors) {
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), IoError);
  const std::string bad = temp_path("bad.ckpt");
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(bad), IoError);

  auto p = init_params<float>(small_config(), 1);
  const std::string good = temp_path("trunc.ckpt");
  save_checkpoint(good, p);
  fs::resize_file(good, fs::file_size(good) - 10);
  EXPECT_THROW(load_checkpoint(good), IoError);
  EXPECT_THROW(save_checkpoint("/nonexistent_dir/x.ckpt", p), IoError);
  fs::remove(bad);
  fs::remove(good);
}
