#pragma once

#include <map>
#include <string>

#include "labnet/dataset.hpp"
#include "labnet/model.hpp"
#include "labnet/train.hpp"

namespace labnet {

enum class Preset { kIstd, kSrd, kCustom };
std::string to_string(Preset p);
Preset parse_preset(const std::string& s);

struct RunConfig {
  Preset preset = Preset::kCustom;
  DatasetLayout layout;
  std::string layout_name = "istd";
  ModelConfig model;
  TrainConfig train;
  int64_t limit = 0;  // use only the first N triples; 0 = all

  // istd: 256 / 2 / 300 / M=256, srd: 400 / 1 / 500 / M=128.
  static RunConfig from_preset(Preset p);

  // Flat keys, e.g. "train.batch", "lsa.m", "data.root". A "preset" key is
  // applied first so that the remaining keys override it. Unknown keys throw
  // ArgumentError.
  void apply(const std::map<std::string, std::string>& kv);

  std::map<std::string, std::string> to_kv() const;
  std::string manifest() const;
};

// "key = value" lines; '#' starts a comment. Throws ArgumentError with the
// line number on malformed input and IoError if the file cannot be read.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace labnet
