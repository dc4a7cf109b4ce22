#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "codecsep/rng.hpp"
#include "codecsep/waveform.hpp"

namespace test_support {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const int id = counter++;
    path_ = std::filesystem::temp_directory_path() /
            ("codecsep_test_" + std::to_string(::getpid()) + "_" + std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline codecsep::Waveform make_wave(std::vector<float> samples, int sr = 8000) {
  codecsep::Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = sr;
  return w;
}

inline codecsep::Waveform random_wave(codecsep::Rng& rng, int64_t n, int sr = 8000) {
  codecsep::Waveform w;
  w.sample_rate = sr;
  w.samples.resize(static_cast<size_t>(n));
  for (float& s : w.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
  return w;
}

}  // namespace test_support
