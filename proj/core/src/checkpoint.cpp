#include "dapolab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dapolab {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'P', 'O', 'L', 'A', 'B', 'C'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::uint8_t byte() { return static_cast<std::uint8_t>(data_[pos_++]); }
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("load_checkpoint: " + path_ + " is truncated");
    }
  }
  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::uint64_t config_fingerprint) {
  std::string blob;
  blob.reserve(64 + params.values.size() * 8);
  blob.append(kMagic, sizeof(kMagic));
  blob.push_back(static_cast<char>(kVersion));
  put_u64(blob, config_fingerprint);
  put_u32(blob, static_cast<std::uint32_t>(params.shape.vocab_size));
  put_u32(blob, static_cast<std::uint32_t>(params.shape.embed_dim));
  put_u32(blob, static_cast<std::uint32_t>(params.shape.hidden_dim));
  put_u32(blob, static_cast<std::uint32_t>(params.shape.window));
  put_u64(blob, static_cast<std::uint64_t>(params.values.size()));
  for (double v : params.values) put_f64(blob, v);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path + " for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  out.flush();
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(data, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_checkpoint: " + path + " has a bad magic header");
  }
  char version;
  r.raw(&version, 1);
  if (static_cast<std::uint8_t>(version) != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported format version in " + path);
  }

  Checkpoint ck;
  ck.config_fingerprint = r.u64();
  PolicyShape shape;
  shape.vocab_size = static_cast<int>(r.u32());
  shape.embed_dim = static_cast<int>(r.u32());
  shape.hidden_dim = static_cast<int>(r.u32());
  shape.window = static_cast<int>(r.u32());
  shape.validate();
  const std::uint64_t count = r.u64();
  if (count != shape.param_count()) {
    throw std::runtime_error("load_checkpoint: parameter count does not match the stored shape");
  }
  ck.params.shape = shape;
  ck.params.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) ck.params.values[i] = r.f64();
  if (!r.exhausted()) {
    throw std::runtime_error("load_checkpoint: trailing bytes in " + path);
  }
  return ck;
}

}  // namespace dapolab
