#include "codecsep/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace codecsep {

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& buf, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[off + i])) << (8 * i);
  return v;
}

uint16_t get_u16(const std::string& buf, size_t off) {
  return static_cast<uint16_t>(static_cast<uint8_t>(buf[off]) |
                               (static_cast<uint8_t>(buf[off + 1]) << 8));
}

}  // namespace

void write_wav(const Waveform& w, const std::string& path) {
  if (w.sample_rate <= 0) throw std::invalid_argument("write_wav: sample_rate must be > 0");
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_bytes = n * 2;

  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  put_u32(buf, 36 + data_bytes);
  buf += "WAVE";
  buf += "fmt ";
  put_u32(buf, 16);
  put_u16(buf, 1);  // PCM
  put_u16(buf, 1);  // mono
  put_u32(buf, static_cast<uint32_t>(w.sample_rate));
  put_u32(buf, static_cast<uint32_t>(w.sample_rate) * 2);
  put_u16(buf, 2);   // block align
  put_u16(buf, 16);  // bits per sample
  buf += "data";
  put_u32(buf, data_bytes);
  for (float s : w.samples) {
    const float clamped = std::clamp(s, -1.0f, 1.0f);
    const int32_t q = static_cast<int32_t>(std::lround(clamped * 32767.0f));
    put_u16(buf, static_cast<uint16_t>(static_cast<int16_t>(std::clamp(q, -32768, 32767))));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out.good()) throw std::runtime_error("write_wav: write failed for " + path);
}

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

  // Chunk scan; fmt must precede data.
  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t sample_rate = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id = buf.substr(pos, 4);
    const uint32_t chunk_size = get_u32(buf, pos + 4);
    const size_t body = pos + 8;
    if (body + chunk_size > buf.size())
      throw std::runtime_error("read_wav: truncated chunk '" + id + "' in " + path);
    if (id == "fmt ") {
      if (chunk_size < 16) throw std::runtime_error("read_wav: fmt chunk too small");
      format = get_u16(buf, body);
      channels = get_u16(buf, body + 2);
      sample_rate = get_u32(buf, body + 4);
      bits = get_u16(buf, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error("read_wav: data chunk before fmt");
      if (format != 1) throw std::runtime_error("read_wav: not PCM (format " +
                                                std::to_string(format) + ")");
      if (channels != 1)
        throw std::runtime_error("read_wav: expected mono, got " + std::to_string(channels) +
                                 " channels");
      if (bits != 16) throw std::runtime_error("read_wav: expected 16-bit samples, got " +
                                               std::to_string(bits));
      Waveform w;
      w.sample_rate = static_cast<int>(sample_rate);
      const size_t count = chunk_size / 2;
      w.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        const int16_t q = static_cast<int16_t>(get_u16(buf, body + 2 * i));
        w.samples[i] = static_cast<float>(q) / 32767.0f;
      }
      return w;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  throw std::runtime_error("read_wav: no data chunk in " + path);
}

}  // namespace codecsep
