#include "codecsep/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace codecsep {

namespace {

constexpr char kMagic[5] = {'N', 'T', 'A', 'R', '1'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

  void need(size_t n, const char* what) const {
    if (pos_ + n > buf_.size())
      throw std::runtime_error("checkpoint: truncated " + std::string(what) + " in " + path_);
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(buf_[pos_++]);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return buf_.size() - pos_; }
  const std::string& path() const { return path_; }

 private:
  std::string buf_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

bool TensorArchive::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

const ad::Tensor& TensorArchive::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::out_of_range("checkpoint: missing tensor '" + name + "'");
}

bool TensorArchive::has_meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return true;
  return false;
}

const std::string& TensorArchive::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  throw std::out_of_range("checkpoint: missing metadata key '" + key + "'");
}

std::string TensorArchive::meta_or(const std::string& key, const std::string& fallback) const {
  return has_meta(key) ? meta(key) : fallback;
}

void TensorArchive::add_tensor(std::string name, ad::Tensor t) {
  if (has_tensor(name)) throw std::invalid_argument("checkpoint: duplicate tensor " + name);
  tensors.emplace_back(std::move(name), std::move(t));
}

void TensorArchive::set_meta(std::string key, std::string value) {
  for (auto& [k, v] : metadata)
    if (k == key) {
      v = std::move(value);
      return;
    }
  metadata.emplace_back(std::move(key), std::move(value));
}

void save_archive(const TensorArchive& a, const std::string& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<uint32_t>(a.tensors.size()));
  for (const auto& [name, t] : a.tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    out.push_back(0);  // dtype 0 = f32
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) put_u64(out, static_cast<uint64_t>(d));
    const size_t bytes = t.data.size() * sizeof(float);
    const size_t off = out.size();
    out.resize(off + bytes);
    std::memcpy(out.data() + off, t.data.data(), bytes);
  }
  std::string meta;
  for (const auto& [k, v] : a.metadata) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint: metadata key may not contain '=' or newline");
    if (v.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint: metadata value may not contain newline");
    meta += k;
    meta += '=';
    meta += v;
    meta += '\n';
  }
  put_u32(out, static_cast<uint32_t>(meta.size()));
  out += meta;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f.good()) throw std::runtime_error("checkpoint: write failed for " + path);
}

TensorArchive load_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(buf), path);

  const std::string magic = r.bytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  TensorArchive a;
  const uint32_t count = r.u32("tensor count");
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("tensor name length");
    std::string name = r.bytes(name_len, "tensor name");
    if (!seen.insert(name).second)
      throw std::runtime_error("checkpoint: duplicate tensor '" + name + "' in " + path);
    const uint8_t dtype = r.u8("dtype");
    if (dtype != 0)
      throw std::runtime_error("checkpoint: unknown dtype code " + std::to_string(dtype) +
                               " for tensor '" + name + "'");
    const uint32_t rank = r.u32("rank");
    ad::Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(r.u64("dim"));
    const int64_t n = ad::numel(shape);
    if (n < 0) throw std::runtime_error("checkpoint: invalid shape for '" + name + "'");
    const std::string payload = r.bytes(static_cast<size_t>(n) * sizeof(float), "payload");
    ad::Tensor t;
    t.shape = std::move(shape);
    t.data.resize(static_cast<size_t>(n));
    std::memcpy(t.data.data(), payload.data(), payload.size());
    a.tensors.emplace_back(std::move(name), std::move(t));
  }

  const uint32_t meta_len = r.u32("metadata length");
  const std::string meta = r.bytes(meta_len, "metadata");
  size_t pos = 0;
  std::set<std::string> meta_seen;
  while (pos < meta.size()) {
    size_t nl = meta.find('\n', pos);
    if (nl == std::string::npos) nl = meta.size();
    const std::string line = meta.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("checkpoint: malformed metadata line '" + line + "'");
    std::string key = line.substr(0, eq);
    if (!meta_seen.insert(key).second)
      throw std::runtime_error("checkpoint: duplicate metadata key '" + key + "'");
    a.metadata.emplace_back(std::move(key), line.substr(eq + 1));
  }
  return a;
}

}  // namespace codecsep
