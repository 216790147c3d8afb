#include "labnet/model.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <sstream>

namespace labnet {

namespace {

std::string join(const RateTriple& t) {
  return std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]);
}

RateTriple parse_triple(const std::string& s, const std::string& key) {
  RateTriple out{};
  std::stringstream ss(s);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw ArgumentError(key + ": expected three comma-separated integers");
    try {
      out[i++] = std::stoll(item);
    } catch (const std::exception&) {
      throw ArgumentError(key + ": not an integer list: " + s);
    }
  }
  if (i != 3) throw ArgumentError(key + ": expected three comma-separated integers");
  return out;
}

int64_t parse_int(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw ArgumentError(key);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError(key + ": not an integer: " + s);
  }
}

bool parse_switch(const std::string& s, const std::string& key) {
  if (s == "on" || s == "1" || s == "true") return true;
  if (s == "off" || s == "0" || s == "false") return false;
  throw ArgumentError(key + ": expected on/off, got " + s);
}

}  // namespace

std::string to_string(BranchMode m) {
  switch (m) {
    case BranchMode::kTwoBranch: return "two-branch";
    case BranchMode::kLabTogether: return "lab-together";
    case BranchMode::kRgbTogether: return "rgb-together";
  }
  return "?";
}

std::string to_string(EcaMode m) {
  switch (m) {
    case EcaMode::kLaplacian: return "laplacian";
    case EcaMode::kSobel: return "sobel";
    case EcaMode::kGap: return "gap";
    case EcaMode::kOff: return "off";
  }
  return "?";
}

std::string to_string(LsaMode m) {
  switch (m) {
    case LsaMode::kLocal: return "local";
    case LsaMode::kWhole: return "whole";
    case LsaMode::kOff: return "off";
  }
  return "?";
}

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "two-branch") return BranchMode::kTwoBranch;
  if (s == "lab-together") return BranchMode::kLabTogether;
  if (s == "rgb-together") return BranchMode::kRgbTogether;
  throw ArgumentError("unknown branch mode: " + s);
}

EcaMode parse_eca_mode(const std::string& s) {
  if (s == "laplacian") return EcaMode::kLaplacian;
  if (s == "sobel") return EcaMode::kSobel;
  if (s == "gap") return EcaMode::kGap;
  if (s == "off") return EcaMode::kOff;
  throw ArgumentError("unknown eca mode: " + s);
}

LsaMode parse_lsa_mode(const std::string& s) {
  if (s == "local") return LsaMode::kLocal;
  if (s == "whole") return LsaMode::kWhole;
  if (s == "off") return LsaMode::kOff;
  throw ArgumentError("unknown lsa mode: " + s);
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["unit.rates"] = join(unit.rates[0]) + ";" + join(unit.rates[1]) + ";" + join(unit.rates[2]);
  kv["unit.stage_channels"] = join(unit.stage_channels);
  kv["unit.merge_channels"] = std::to_string(unit.merge_channels);
  kv["unit.activation"] = unit.activation ? "on" : "off";
  kv["eca.mode"] = to_string(eca.mode);
  kv["eca.laplacian"] = eca.laplacian == LaplacianKind::kEightNeighbor ? "8" : "4";
  kv["eca.ratio"] = std::to_string(eca.ratio);
  kv["lsa.k"] = std::to_string(lsa.k);
  kv["lsa.m"] = std::to_string(lsa.m);
  kv["lsa.dilate_kernel"] = std::to_string(lsa.dilate_kernel);
  kv["lsa.mode"] = to_string(lsa.mode);
  kv["lsa.downsample"] = lsa.downsample ? "on" : "off";
  kv["model.branch_mode"] = to_string(branch_mode);
  kv["model.branch_width"] = std::to_string(branch_width);
  return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("unit.rates")) {
    std::stringstream ss(*v);
    std::string part;
    size_t i = 0;
    while (std::getline(ss, part, ';')) {
      if (i >= 3) throw ArgumentError("unit.rates: expected three stages");
      c.unit.rates[i++] = parse_triple(part, "unit.rates");
    }
    if (i != 3) throw ArgumentError("unit.rates: expected three stages");
  }
  if (auto v = get("unit.stage_channels")) c.unit.stage_channels = parse_triple(*v, "unit.stage_channels");
  if (auto v = get("unit.merge_channels")) c.unit.merge_channels = parse_int(*v, "unit.merge_channels");
  if (auto v = get("unit.activation")) c.unit.activation = parse_switch(*v, "unit.activation");
  if (auto v = get("eca.mode")) c.eca.mode = parse_eca_mode(*v);
  if (auto v = get("eca.laplacian")) {
    if (*v != "4" && *v != "8") throw ArgumentError("eca.laplacian: expected 4 or 8");
    c.eca.laplacian = *v == "8" ? LaplacianKind::kEightNeighbor : LaplacianKind::kFourNeighbor;
  }
  if (auto v = get("eca.ratio")) c.eca.ratio = parse_int(*v, "eca.ratio");
  if (auto v = get("lsa.k")) c.lsa.k = parse_int(*v, "lsa.k");
  if (auto v = get("lsa.m")) c.lsa.m = parse_int(*v, "lsa.m");
  if (auto v = get("lsa.dilate_kernel")) c.lsa.dilate_kernel = parse_int(*v, "lsa.dilate_kernel");
  if (auto v = get("lsa.mode")) c.lsa.mode = parse_lsa_mode(*v);
  if (auto v = get("lsa.downsample")) c.lsa.downsample = parse_switch(*v, "lsa.downsample");
  if (auto v = get("model.branch_mode")) c.branch_mode = parse_branch_mode(*v);
  if (auto v = get("model.branch_width")) c.branch_width = parse_int(*v, "model.branch_width");
  return c;
}

namespace {

template <typename T>
BasicBlockWeights<T> make_block(const std::string& name, int64_t in_channels, int64_t out_channels,
                                const ModelConfig& cfg) {
  BasicBlockWeights<T> b;
  b.unit = ElementaryUnitWeights<T>(name + ".unit", in_channels, cfg.unit);
  const int64_t width = cfg.unit.output_channels();
  if (cfg.eca.mode != EcaMode::kOff) b.eca = EcaWeights<T>(name + ".eca", width, cfg.eca.ratio);
  b.project = ConvWeight<T>(name + ".project", out_channels, width, 1);
  return b;
}

template <typename T>
BranchWeights<T> make_branch(const std::string& name, int64_t final_channels,
                             const ModelConfig& cfg) {
  BranchWeights<T> br;
  br.name = name;
  const int64_t width = cfg.branch_width;
  const int64_t exchange_in = cfg.two_branch() ? 2 * width : width;
  br.blocks[0] = make_block<T>(name + ".block1", 4, width, cfg);
  for (size_t j = 0; j < 3; ++j) {
    br.exchange[j] = ConvWeight<T>(name + ".exchange" + std::to_string(j + 1), width, exchange_in, 1);
    const int64_t out = j == 2 ? final_channels : width;
    br.blocks[j + 1] = make_block<T>(name + ".block" + std::to_string(j + 2), width, out, cfg);
  }
  if (cfg.lsa.mode != LsaMode::kOff) {
    br.lsa.emplace_back(name + ".lsa1", width, cfg.lsa);
    br.lsa.emplace_back(name + ".lsa2", width, cfg.lsa);
  }
  return br;
}

template <typename T>
Var run_block(Graph<T>& g, Var x, BasicBlockWeights<T>& b, const ModelConfig& cfg) {
  Var features = elementary_unit(g, x, b.unit).concat;
  if (b.eca) features = eca(g, features, *b.eca, cfg.eca);
  return ops::conv2d(g, features, b.project);
}

}  // namespace

template <typename T>
ModelParams<T>::ModelParams(const ModelConfig& config) : config_(config) {
  stem = ConvWeight<T>("stem", 3, 3, 3);
  if (config.two_branch()) {
    branches.push_back(make_branch<T>("ab", 2, config));
    branches.push_back(make_branch<T>("l", 1, config));
  } else {
    branches.push_back(make_branch<T>("main", 3, config));
  }
  head = ConvWeight<T>("head", 3, 3, 3);
}

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for_each_conv([&](ConvWeight<T>& c) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  });
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ModelParams<T>::parameters() const {
  auto mutable_list = const_cast<ModelParams*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

template <typename T>
Parameter<T>* ModelParams<T>::find(const std::string& name) {
  for (Parameter<T>* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (Parameter<T>* p : parameters()) p->zero_grad();
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed) {
  ModelParams<T> params(config);
  std::mt19937_64 rng(seed);
  params.for_each_conv([&](ConvWeight<T>& c) {
    const Shape& s = c.weight.value.shape();
    const double bound = std::sqrt(1.0 / static_cast<double>(s.c * s.h * s.w));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : c.weight.value.values()) v = static_cast<T>(dist(rng));
    c.bias.value.fill(T(0));
  });
  return params;
}

template <typename T>
Var forward(Graph<T>& g, ModelParams<T>& params, Var shadow, const Tensor<T>& mask,
            ForwardTrace* trace) {
  const Shape in = g.shape(shadow);
  require_shape(in.n == 1 && in.c == 3, "forward: shadow image must be (1,3,H,W), got " + in.str());
  require_shape(in.h % 4 == 0 && in.w % 4 == 0,
                "forward: H and W must be multiples of 4, got " + in.str());
  require_shape(mask.shape() == (Shape{1, 1, in.h, in.w}),
                "forward: mask " + mask.shape().str() + " for image " + in.str());
  for (T v : mask.values()) {
    if (v != T(0) && v != T(1)) throw ArgumentError("forward: mask must be binary");
  }
  const ModelConfig& cfg = params.config();
  Var mask_var = g.constant(mask);
  Var primary = ops::concat_channels(g, {ops::conv2d(g, shadow, params.stem), mask_var});

  const size_t nb = params.branches.size();
  std::vector<Var> feats(nb);
  for (size_t b = 0; b < nb; ++b) feats[b] = run_block(g, primary, params.branches[b].blocks[0], cfg);

  for (size_t j = 0; j < 3; ++j) {
    Var joined = nb > 1 ? ops::concat_channels(g, std::span<const Var>(feats)) : feats[0];
    for (size_t b = 0; b < nb; ++b) {
      BranchWeights<T>& br = params.branches[b];
      Var x = ops::conv2d(g, joined, br.exchange[j]);
      if (j >= 1 && !br.lsa.empty()) {
        LsaTrace t = lsa(g, x, mask, br.lsa[j - 1], cfg.lsa);
        x = t.output;
        if (trace) trace->lsa.push_back(std::move(t));
      }
      feats[b] = run_block(g, x, br.blocks[j + 1], cfg);
    }
  }
  Var residual = nb > 1 ? ops::concat_channels(g, std::span<const Var>(feats)) : feats[0];
  Var sum = ops::add(g, residual, shadow);
  if (trace) trace->residual_sum = sum;
  return ops::conv2d(g, sum, params.head);
}

template <typename T>
Tensor<T> predict(ModelParams<T>& params, const Tensor<T>& shadow, const Tensor<T>& mask) {
  Graph<T> g;
  Var out = forward(g, params, g.constant(shadow), mask);
  return g.value(out);
}

template <typename T>
int64_t count_params(const ModelParams<T>& params) {
  int64_t total = 0;
  for (const Parameter<T>* p : params.parameters()) total += p->value.numel();
  return total;
}

std::string to_string(FlopConvention c) {
  return c == FlopConvention::kTwoPerMac ? "1 MAC = 2 FLOPs" : "1 MAC = 1 FLOP";
}

int64_t conv_macs(int64_t in, int64_t out, int64_t kernel, int64_t hw) {
  return out * in * kernel * kernel * hw;
}

int64_t conv_flops(int64_t in, int64_t out, int64_t kernel, int64_t height, int64_t width,
                   FlopConvention convention) {
  return conv_macs(in, out, kernel, height * width) *
         (convention == FlopConvention::kTwoPerMac ? 2 : 1);
}

namespace {

class FlopCounter {
 public:
  FlopCounter(int64_t hw, FlopConvention convention)
      : hw_(hw), per_mac_(convention == FlopConvention::kTwoPerMac ? 2 : 1) {}

  ComplexityRow& row(const std::string& name) {
    rows_.push_back(ComplexityRow{name});
    return rows_.back();
  }
  void conv(ComplexityRow& r, int64_t in, int64_t out, int64_t k, int64_t hw) {
    r.params += out * in * k * k + out;
    r.macs += conv_macs(in, out, k, hw);
  }
  void conv(ComplexityRow& r, int64_t in, int64_t out, int64_t k) { conv(r, in, out, k, hw_); }
  std::vector<ComplexityRow> finish() {
    for (auto& r : rows_) r.flops = r.macs * per_mac_ + r.pointwise;
    return {rows_.begin(), rows_.end()};
  }

 private:
  int64_t hw_;
  int64_t per_mac_;
  std::deque<ComplexityRow> rows_;  // row() hands out references
};

void count_block(FlopCounter& fc, const std::string& name, int64_t in, int64_t out,
                 const ModelConfig& cfg, int64_t hw) {
  ComplexityRow& unit = fc.row(name + ".unit");
  int64_t c = in;
  for (size_t s = 0; s < 3; ++s) {
    for (size_t b = 0; b < 3; ++b) {
      fc.conv(unit, c, cfg.unit.stage_channels[b], 3);
      if (cfg.unit.activation) unit.pointwise += cfg.unit.stage_channels[b] * hw;
    }
    fc.conv(unit, cfg.unit.stage_width(), cfg.unit.merge_channels, 1);
    c = cfg.unit.merge_channels;
  }
  const int64_t width = cfg.unit.output_channels();
  if (cfg.eca.mode != EcaMode::kOff) {
    ComplexityRow& e = fc.row(name + ".eca");
    const int64_t hidden = width / cfg.eca.ratio;
    fc.conv(e, width, hidden, 1, 1);
    fc.conv(e, hidden, width, 1, 1);
    e.pointwise += hidden + width;  // leakyrelu + sigmoid
    switch (cfg.eca.mode) {
      case EcaMode::kLaplacian: e.pointwise += 9 * width * hw + 2 * width * hw; break;
      case EcaMode::kSobel: e.pointwise += 2 * 9 * width * hw + 5 * width * hw; break;
      case EcaMode::kGap: e.pointwise += width * hw; break;
      case EcaMode::kOff: break;
    }
    e.pointwise += width * hw;  // channel scaling
  }
  ComplexityRow& p = fc.row(name + ".project");
  fc.conv(p, width, out, 1);
}

}  // namespace

ComplexityReport count_flops(const ModelConfig& cfg, int64_t height, int64_t width,
                             FlopConvention convention, const AttentionAssumption& attention) {
  if (height < 1 || width < 1) throw ArgumentError("count_flops: image dims must be positive");
  ComplexityReport report;
  report.height = height;
  report.width = width;
  report.convention = convention;
  const int64_t hw = height * width;
  FlopCounter fc(hw, convention);

  fc.conv(fc.row("stem"), 3, 3, 3);
  const bool two = cfg.two_branch();
  std::vector<std::pair<std::string, int64_t>> branches =
      two ? std::vector<std::pair<std::string, int64_t>>{{"ab", 2}, {"l", 1}}
          : std::vector<std::pair<std::string, int64_t>>{{"main", 3}};
  const int64_t bw = cfg.branch_width;
  const auto [mh, mw] = lsa_resolution(cfg.lsa, height, width);
  const int64_t mhw = mh * mw;
  for (const auto& [name, final_channels] : branches) {
    count_block(fc, name + ".block1", 4, bw, cfg, hw);
    for (int j = 0; j < 3; ++j) {
      fc.conv(fc.row(name + ".exchange" + std::to_string(j + 1)), two ? 2 * bw : bw, bw, 1);
      if (j >= 1 && cfg.lsa.mode != LsaMode::kOff) {
        ComplexityRow& r = fc.row(name + ".lsa" + std::to_string(j));
        const bool resized = mh != height || mw != width;
        fc.conv(r, bw, cfg.lsa.k, 3, mhw);  // conv_s
        fc.conv(r, bw, cfg.lsa.k, 3, mhw);  // conv_ns
        fc.conv(r, bw + cfg.lsa.k, bw, 1);  // merge
        if (resized) r.pointwise += bw * mhw + cfg.lsa.k * hw;
        const int64_t ns = attention.shadow_pixels, nk = attention.key_pixels;
        r.macs += 2 * ns * nk * cfg.lsa.k;
        r.pointwise += ns * nk;  // softmax
      }
      const int64_t out = j == 2 ? final_channels : bw;
      count_block(fc, name + ".block" + std::to_string(j + 2), bw, out, cfg, hw);
    }
  }
  fc.row("residual").pointwise += 3 * hw;
  fc.conv(fc.row("head"), 3, 3, 3);

  report.rows = fc.finish();
  for (const auto& r : report.rows) {
    report.param_count += r.params;
    report.macs += r.macs;
    report.flops += r.flops;
  }
  return report;
}

template class ModelParams<float>;
template class ModelParams<double>;
template ModelParams<float> init_params(const ModelConfig&, uint64_t);
template ModelParams<double> init_params(const ModelConfig&, uint64_t);
template Var forward(Graph<float>&, ModelParams<float>&, Var, const Tensor<float>&, ForwardTrace*);
template Var forward(Graph<double>&, ModelParams<double>&, Var, const Tensor<double>&,
                     ForwardTrace*);
template Tensor<float> predict(ModelParams<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> predict(ModelParams<double>&, const Tensor<double>&, const Tensor<double>&);
template int64_t count_params(const ModelParams<float>&);
template int64_t count_params(const ModelParams<double>&);

}  // namespace labnet
