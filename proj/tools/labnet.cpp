// labnet {train|infer|eval|stats}

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "labnet/config.hpp"
#include "labnet/metrics.hpp"
#include "labnet/runtime.hpp"
#include "labnet/train.hpp"

namespace fs = std::filesystem;
using namespace labnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitEvalMismatch = 3;

// Options shared by all subcommands; each maps onto a flat config key.
struct CommonOptions {
  std::string config_file;
  std::map<std::string, std::string> kv;
  std::vector<std::string> sets;

  void add(CLI::App* app, bool model_switches) {
    app->add_option("--config", config_file, "flat key = value config file");
    bind(app, "--preset", "preset", "istd | srd | custom");
    bind(app, "--seed", "seed", "seed for every random choice");
    bind(app, "--out", "out", "output directory");
    bind(app, "--data", "data.root", "dataset root");
    bind(app, "--layout", "data.layout", "directory layout: istd | srd");
    bind(app, "--shadow-dir", "data.shadow_dir", "shadow image dir ({split} expands)");
    bind(app, "--mask-dir", "data.mask_dir", "mask dir ({split} expands)");
    bind(app, "--free-dir", "data.free_dir", "shadow-free dir ({split} expands)");
    bind(app, "--free-suffix", "data.free_suffix", "suffix stripped from shadow-free stems");
    bind(app, "--limit", "data.limit", "use only the first N triples");
    if (model_switches) {
      bind(app, "--rates", "unit.rates", "dilation rates, e.g. 1,4,16;2,8,32;4,16,64");
      bind(app, "--stage-channels", "unit.stage_channels", "per-rate widths, e.g. 16,32,48");
      bind(app, "--unit-activation", "unit.activation", "on | off");
      bind(app, "--branch-mode", "model.branch_mode", "two-branch | lab-together | rgb-together");
      bind(app, "--eca-mode", "eca.mode", "laplacian | sobel | gap | off");
      bind(app, "--lsa-mode", "lsa.mode", "local | whole | off");
      bind(app, "--lsa-downsample", "lsa.downsample", "on | off");
      bind(app, "--lsa-m", "lsa.m", "attention resolution M");
      bind(app, "--lsa-k", "lsa.k", "attention feature width K");
      bind(app, "--dilate-kernel", "lsa.dilate_kernel", "boundary dilation kernel (odd)");
    }
    app->add_option("--set", sets, "extra key=value overrides")->take_all();
  }

  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [this, key](const std::string& v) { kv[key] = v; },
                                          help);
  }

  RunConfig resolve() const {
    std::map<std::string, std::string> merged;
    if (!config_file.empty()) merged = read_kv_file(config_file);
    for (const auto& [k, v] : kv) merged[k] = v;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + s + "'");
      merged[s.substr(0, eq)] = s.substr(eq + 1);
    }
    RunConfig rc;
    rc.apply(merged);
    return rc;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

DatasetIndex open_dataset(const RunConfig& rc, const std::string& split) {
  if (rc.layout.root.empty()) throw ArgumentError("no dataset root given (--data)");
  DatasetIndex index = scan(rc.layout, split);
  if (rc.limit > 0 && static_cast<size_t>(rc.limit) < index.ids.size()) {
    index.ids.resize(static_cast<size_t>(rc.limit));
  }
  return index;
}

int cmd_train(const RunConfig& rc, const std::string& split) {
  const std::string out = rc.train.out_dir.empty() ? "runs/train" : rc.train.out_dir;
  RunConfig run = rc;
  run.train.out_dir = out;
  const DatasetIndex index = open_dataset(run, split);
  fs::create_directories(out);
  write_text(fs::path(out) / "manifest.txt", run.manifest());
  std::cout << "train: " << index.ids.size() << " triples, size " << run.train.size << ", batch "
            << run.train.batch << ", epochs " << run.train.epochs << ", M " << run.model.lsa.m
            << "\n";
  Trainer trainer(run.model, run.train);
  const auto source = dataset_source(index, run.train.size, run.model.color_space());
  const auto result = train(trainer, run.train, source, [](const StepRecord& r) {
    if (r.step == 1 || r.step % 10 == 0) {
      std::printf("step %lld epoch %lld total %.6f (mse %.6f percep %.6f grad %.6f)\n",
                  static_cast<long long>(r.step), static_cast<long long>(r.epoch), r.total, r.mse,
                  r.percep, r.grad);
      std::fflush(stdout);
    }
    return false;
  });
  std::cout << "train: " << result.curve.size() << " steps, final checkpoint "
            << result.checkpoints.back() << "\n";
  return kExitOk;
}

// The network needs sides divisible by 4; other sizes run at the nearest
// smaller multiple and are resized back.
RgbImage infer_one(ModelParams<float>& params, const RgbImage& shadow, const BinaryMask& mask) {
  const int64_t h = std::max<int64_t>(4, shadow.h / 4 * 4);
  const int64_t w = std::max<int64_t>(4, shadow.w / 4 * 4);
  const ColorSpace space = params.config().color_space();
  const RgbImage in = resize_image(shadow, h, w);
  const BinaryMask m = resize_mask(mask, h, w);
  const Tensor<float> pred = predict(params, encode_image<float>(in, space), m.to_tensor<float>());
  return resize_image(decode_image(pred, space), shadow.h, shadow.w);
}

int cmd_infer(const RunConfig& rc, const std::string& checkpoint, const std::string& split,
              const std::string& input_dir, const std::string& mask_dir) {
  ModelParams<float> params = load_checkpoint(checkpoint);
  const std::string out = rc.train.out_dir.empty() ? "runs/infer" : rc.train.out_dir;
  fs::create_directories(out);
  RunConfig manifest = rc;
  manifest.model = params.config();
  write_text(fs::path(out) / "manifest.txt",
             manifest.manifest() + "checkpoint = " + checkpoint + "\n");

  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> jobs;
  if (!input_dir.empty()) {
    if (mask_dir.empty()) throw ArgumentError("--input requires --masks");
    const auto images = list_images(input_dir);
    const auto masks = list_images(mask_dir);
    for (const auto& [id, path] : images) {
      auto m = masks.find(id);
      if (m == masks.end()) throw DatasetError("no mask for " + path + " in " + mask_dir);
      jobs.push_back({id, {path, m->second}});
    }
    if (jobs.empty()) throw DatasetError("no images in " + input_dir);
  } else {
    const DatasetIndex index = open_dataset(rc, split);
    for (const auto& id : index.ids) {
      const auto& f = index.files.at(id);
      jobs.push_back({id, {f.shadow, f.mask}});
    }
  }
  for (const auto& [id, paths] : jobs) {
    const RgbImage shadow = load_image(paths.first);
    const BinaryMask mask = resize_mask(load_mask(paths.second), shadow.h, shadow.w);
    save_image(infer_one(params, shadow, mask), (fs::path(out) / (id + ".png")).string());
  }
  std::cout << "infer: wrote " << jobs.size() << " predictions to " << out << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, const std::string& pred_dir, const std::string& split,
             const std::string& method, const std::string& aggregation) {
  const DatasetIndex index = open_dataset(rc, split);
  EvalOptions opt;
  opt.method = method;
  if (aggregation == "pooled") {
    opt.aggregation = Aggregation::kPooled;
  } else if (aggregation != "per-image") {
    throw ArgumentError("--aggregation expects per-image or pooled");
  }
  const MetricsReport report = evaluate_dataset(pred_dir, index, opt);
  const std::string table = report_table(report);
  std::cout << table;
  if (!rc.train.out_dir.empty()) {
    fs::create_directories(rc.train.out_dir);
    write_text(fs::path(rc.train.out_dir) / "metrics.csv", report_csv(report));
    write_text(fs::path(rc.train.out_dir) / "metrics.txt", table);
    write_text(fs::path(rc.train.out_dir) / "manifest.txt",
               rc.manifest() + "pred = " + pred_dir + "\nsplit = " + split + "\n");
  }
  return report.omissions.empty() ? kExitOk : kExitEvalMismatch;
}

std::string stats_table(const ComplexityReport& r) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %10s %14s %12s %14s\n", "module", "params", "MACs",
                "pointwise", "FLOPs");
  s += line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof(line), "%-28s %10lld %14lld %12lld %14lld\n", row.module.c_str(),
                  static_cast<long long>(row.params), static_cast<long long>(row.macs),
                  static_cast<long long>(row.pointwise), static_cast<long long>(row.flops));
    s += line;
  }
  std::snprintf(line, sizeof(line), "%-28s %10lld %14lld %12s %14lld\n", "total",
                static_cast<long long>(r.param_count), static_cast<long long>(r.macs), "",
                static_cast<long long>(r.flops));
  s += line;
  return s;
}

int cmd_stats(const RunConfig& rc, int64_t size, const std::string& convention) {
  FlopConvention declared = FlopConvention::kOnePerMac;
  if (convention == "2") {
    declared = FlopConvention::kTwoPerMac;
  } else if (convention != "1") {
    throw ArgumentError("--convention expects 1 or 2 (FLOPs per MAC)");
  }
  const ComplexityReport one = count_flops(rc.model, size, size, FlopConvention::kOnePerMac);
  const ComplexityReport two = count_flops(rc.model, size, size, FlopConvention::kTwoPerMac);
  const ComplexityReport& chosen = declared == FlopConvention::kOnePerMac ? one : two;
  std::ostringstream os;
  os << "# input " << size << "x" << size << ", declared convention: " << to_string(declared)
     << "\n# attention matmuls excluded (data dependent)\n";
  os << stats_table(chosen);
  std::printf("%s", os.str().c_str());
  std::printf("\nparams: %lld (%.4f M)\n", static_cast<long long>(chosen.param_count),
              static_cast<double>(chosen.param_count) / 1e6);
  std::printf("FLOPs (%s): %.4f G\n", to_string(FlopConvention::kOnePerMac).c_str(),
              static_cast<double>(one.flops) / 1e9);
  std::printf("FLOPs (%s): %.4f G\n", to_string(FlopConvention::kTwoPerMac).c_str(),
              static_cast<double>(two.flops) / 1e9);
  if (!rc.train.out_dir.empty()) {
    fs::create_directories(rc.train.out_dir);
    write_text(fs::path(rc.train.out_dir) / "stats.txt", os.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_blas_runtime(argv);
  CLI::App app{"LAB-Net shadow removal: train, infer, eval, stats"};
  app.require_subcommand(1);

  CommonOptions train_opts, infer_opts, eval_opts, stats_opts;
  std::string split = "train";
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_opts.add(train_cmd, true);
  train_cmd->add_option("--split", split, "dataset split")->capture_default_str();
  for (auto [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--epochs", "train.epochs"}, {"--batch", "train.batch"}, {"--size", "train.size"},
           {"--max-steps", "train.max_steps"}, {"--lr", "train.lr"},
           {"--checkpoint-every", "train.checkpoint_every"}}) {
    train_opts.bind(train_cmd, flag, key, key);
  }

  std::string checkpoint, input_dir, mask_dir, infer_split = "test";
  auto* infer_cmd = app.add_subcommand("infer", "run a checkpoint on images");
  infer_opts.add(infer_cmd, false);
  infer_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer_cmd->add_option("--split", infer_split, "dataset split")->capture_default_str();
  infer_cmd->add_option("--input", input_dir, "directory of shadow images (instead of --data)");
  infer_cmd->add_option("--masks", mask_dir, "directory of masks matching --input");

  std::string pred_dir, eval_split = "test", method = "LAB-Net", aggregation = "per-image";
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_opts.add(eval_cmd, false);
  eval_cmd->add_option("--pred", pred_dir, "prediction directory")->required();
  eval_cmd->add_option("--split", eval_split, "dataset split")->capture_default_str();
  eval_cmd->add_option("--method", method, "row label")->capture_default_str();
  eval_cmd->add_option("--aggregation", aggregation, "per-image | pooled")->capture_default_str();

  int64_t size = 256;
  std::string convention = "1";
  auto* stats_cmd = app.add_subcommand("stats", "parameter and FLOP counts");
  stats_opts.add(stats_cmd, true);
  stats_cmd->add_option("--size", size, "square input side")->capture_default_str();
  stats_cmd->add_option("--convention", convention, "FLOPs per MAC: 1 or 2")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts.resolve(), split);
    if (*infer_cmd) return cmd_infer(infer_opts.resolve(), checkpoint, infer_split, input_dir, mask_dir);
    if (*eval_cmd) return cmd_eval(eval_opts.resolve(), pred_dir, eval_split, method, aggregation);
    if (*stats_cmd) return cmd_stats(stats_opts.resolve(), size, convention);
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
