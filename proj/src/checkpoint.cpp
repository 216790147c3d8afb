#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "labnet/model.hpp"

namespace labnet {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'B', 'N', 'E', 'T', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& is, const std::string& path) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) {
    throw IoError("checkpoint " + path + ": truncated file");
  }
  return v;
}

std::string read_string(std::istream& is, uint32_t len, const std::string& path) {
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), len)) throw IoError("checkpoint " + path + ": truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path);

  std::string config_text;
  for (const auto& [k, v] : params.config().to_kv()) config_text += k + "=" + v + "\n";

  const auto list = params.parameters();
  os.write(kMagic, sizeof(kMagic));
  put<uint32_t>(os, kCheckpointVersion);
  put<uint32_t>(os, static_cast<uint32_t>(config_text.size()));
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put<uint32_t>(os, static_cast<uint32_t>(list.size()));
  uint64_t offset = 0;
  for (const Parameter<float>* p : list) {
    put<uint32_t>(os, static_cast<uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const Shape& s = p->value.shape();
    for (int64_t d : {s.n, s.c, s.h, s.w}) put<uint32_t>(os, static_cast<uint32_t>(d));
    put<uint64_t>(os, offset);
    offset += static_cast<uint64_t>(p->value.numel());
  }
  put<uint64_t>(os, offset);
  for (const Parameter<float>* p : list) {
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

ModelParams<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint " + path + ": bad magic");
  }
  const auto version = get<uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const std::string config_text = read_string(is, get<uint32_t>(is, path), path);
  std::map<std::string, std::string> kv;
  std::istringstream lines(config_text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelParams<float> params(ModelConfig::from_kv(kv));

  struct Entry {
    std::string name;
    Shape shape;
    uint64_t offset;
  };
  const auto count = get<uint32_t>(is, path);
  std::vector<Entry> entries;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = read_string(is, get<uint32_t>(is, path), path);
    e.shape.n = get<uint32_t>(is, path);
    e.shape.c = get<uint32_t>(is, path);
    e.shape.h = get<uint32_t>(is, path);
    e.shape.w = get<uint32_t>(is, path);
    e.offset = get<uint64_t>(is, path);
    entries.push_back(std::move(e));
  }
  const auto total = get<uint64_t>(is, path);
  std::vector<float> data(total);
  if (total > 0 && !is.read(reinterpret_cast<char*>(data.data()),
                            static_cast<std::streamsize>(total * sizeof(float)))) {
    throw IoError("checkpoint " + path + ": truncated data block");
  }

  auto list = params.parameters();
  if (list.size() != entries.size()) {
    throw StateError("checkpoint " + path + ": " + std::to_string(entries.size()) +
                     " blocks, model config expects " + std::to_string(list.size()));
  }
  for (const Entry& e : entries) {
    Parameter<float>* p = params.find(e.name);
    if (p == nullptr) throw StateError("checkpoint " + path + ": unknown parameter " + e.name);
    if (p->value.shape() != e.shape) {
      throw StateError("checkpoint " + path + ": shape mismatch for " + e.name);
    }
    if (e.offset + static_cast<uint64_t>(e.shape.numel()) > total) {
      throw IoError("checkpoint " + path + ": block " + e.name + " out of range");
    }
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(e.offset), e.shape.numel(),
                p->value.data());
  }
  return params;
}

}  // namespace labnet
