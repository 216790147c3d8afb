#include "labnet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace labnet {

std::string to_string(Preset p) {
  switch (p) {
    case Preset::kIstd: return "istd";
    case Preset::kSrd: return "srd";
    case Preset::kCustom: return "custom";
  }
  return "?";
}

Preset parse_preset(const std::string& s) {
  if (s == "istd") return Preset::kIstd;
  if (s == "srd") return Preset::kSrd;
  if (s == "custom") return Preset::kCustom;
  throw ArgumentError("unknown preset '" + s + "' (expected istd, srd or custom)");
}

namespace {

int64_t to_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ArgumentError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ArgumentError(key + ": expected a number, got '" + v + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool is_model_key(const std::string& k) {
  for (const char* prefix : {"unit.", "eca.", "lsa.", "model."}) {
    if (k.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_preset(Preset p) {
  RunConfig c;
  c.preset = p;
  if (p == Preset::kIstd) {
    c.train.size = 256;
    c.train.batch = 2;
    c.train.epochs = 300;
    c.model.lsa.m = 256;
  } else if (p == Preset::kSrd) {
    c.train.size = 400;
    c.train.batch = 1;
    c.train.epochs = 500;
    c.model.lsa.m = 128;
    c.layout = DatasetLayout::srd("");
    c.layout_name = "srd";
  }
  return c;
}

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
  if (auto it = kv.find("preset"); it != kv.end()) {
    const Preset p = parse_preset(it->second);
    if (p != Preset::kCustom) {
      const std::string root = layout.root;
      const std::string out = train.out_dir;
      const uint64_t seed = train.seed;
      *this = from_preset(p);
      layout.root = root;
      train.out_dir = out;
      train.seed = seed;
    }
    preset = p;
  }
  // Layout first: it resets the directory names that later keys may override.
  if (auto it = kv.find("data.layout"); it != kv.end()) {
    const std::string root = layout.root;
    if (it->second == "istd") {
      layout = DatasetLayout::istd(root);
    } else if (it->second == "srd") {
      layout = DatasetLayout::srd(root);
    } else {
      throw ArgumentError("data.layout: expected istd or srd, got '" + it->second + "'");
    }
    layout_name = it->second;
  }
  std::map<std::string, std::string> model_kv = model.to_kv();
  bool model_changed = false;
  for (const auto& [k, v] : kv) {
    if (k == "preset" || k == "data.layout") continue;
    if (is_model_key(k)) {
      model_kv[k] = v;
      model_changed = true;
    } else if (k == "seed") {
      train.seed = static_cast<uint64_t>(to_int(k, v));
    } else if (k == "out") {
      train.out_dir = v;
    } else if (k == "data.root") {
      layout.root = v;
    } else if (k == "data.shadow_dir") {
      layout.shadow_dir = v;
    } else if (k == "data.mask_dir") {
      layout.mask_dir = v;
    } else if (k == "data.free_dir") {
      layout.free_dir = v;
    } else if (k == "data.free_suffix") {
      layout.free_suffix = v;
    } else if (k == "data.limit") {
      limit = to_int(k, v);
    } else if (k == "train.size") {
      train.size = to_int(k, v);
    } else if (k == "train.batch") {
      train.batch = to_int(k, v);
    } else if (k == "train.epochs") {
      train.epochs = to_int(k, v);
    } else if (k == "train.max_steps") {
      train.max_steps = to_int(k, v);
    } else if (k == "train.checkpoint_every") {
      train.checkpoint_every = to_int(k, v);
    } else if (k == "train.lr") {
      train.adam.lr = to_double(k, v);
    } else if (k == "train.beta1") {
      train.adam.beta1 = to_double(k, v);
    } else if (k == "train.beta2") {
      train.adam.beta2 = to_double(k, v);
    } else if (k == "train.epsilon") {
      train.adam.epsilon = to_double(k, v);
    } else if (k == "train.lambda1") {
      train.weights.lambda1 = to_double(k, v);
    } else if (k == "train.lambda2") {
      train.weights.lambda2 = to_double(k, v);
    } else {
      throw ArgumentError("unknown config key '" + k + "'");
    }
  }
  if (model_changed) model = ModelConfig::from_kv(model_kv);
  if (train.size <= 0 || train.size % 4 != 0) {
    throw ArgumentError("train.size must be a positive multiple of 4, got " + std::to_string(train.size));
  }
  if (train.batch < 1) throw ArgumentError("train.batch must be >= 1");
  if (train.epochs < 1) throw ArgumentError("train.epochs must be >= 1");
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv = model.to_kv();
  kv["preset"] = to_string(preset);
  kv["seed"] = std::to_string(train.seed);
  kv["out"] = train.out_dir;
  kv["data.layout"] = layout_name;
  kv["data.root"] = layout.root;
  kv["data.shadow_dir"] = layout.shadow_dir;
  kv["data.mask_dir"] = layout.mask_dir;
  kv["data.free_dir"] = layout.free_dir;
  kv["data.free_suffix"] = layout.free_suffix;
  kv["data.limit"] = std::to_string(limit);
  kv["train.size"] = std::to_string(train.size);
  kv["train.batch"] = std::to_string(train.batch);
  kv["train.epochs"] = std::to_string(train.epochs);
  kv["train.max_steps"] = std::to_string(train.max_steps);
  kv["train.checkpoint_every"] = std::to_string(train.checkpoint_every);
  kv["train.lr"] = fmt_double(train.adam.lr);
  kv["train.beta1"] = fmt_double(train.adam.beta1);
  kv["train.beta2"] = fmt_double(train.adam.beta2);
  kv["train.epsilon"] = fmt_double(train.adam.epsilon);
  kv["train.lambda1"] = fmt_double(train.weights.lambda1);
  kv["train.lambda2"] = fmt_double(train.weights.lambda2);
  return kv;
}

std::string RunConfig::manifest() const {
  std::ostringstream os;
  os << "# labnet run manifest\n";
  os << "# losses computed in the normalized network encoding\n";
  os << "# perceptual extractor: random-conv, seed = seed + 16\n";
  for (const auto& [k, v] : to_kv()) os << k << " = " << v << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ArgumentError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_kv_text(os.str());
}

}  // namespace labnet
