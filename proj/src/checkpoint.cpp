#include "fjsp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace fjsp {

namespace {

constexpr char kMagic[5] = {'D', 'A', 'N', 'L', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor->rows));
    put_u32(out, static_cast<std::uint32_t>(tensor->cols));
    for (double v : tensor->data) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);

  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write checkpoint sidecar: " + path + ".json");
  side << metadata_json;
  if (metadata_json.empty() || metadata_json.back() != '\n') side << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("incompatible checkpoint version in " + path);

  LoadedCheckpoint loaded;
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : t.data) v = get_f64(in);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    loaded.tensors.emplace(std::move(name), std::move(t));
  }

  std::ifstream side(path + ".json");
  if (side) {
    std::ostringstream buf;
    buf << side.rdbuf();
    loaded.metadata_json = buf.str();
  } else {
    loaded.metadata_json = "{}";
  }
  return loaded;
}

}  // namespace fjsp
