#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace codecsep {

// Mono audio buffer. Samples are dimensionless amplitudes, nominally in
// [-1, 1]; values may exceed that range until WAV write time.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 8000;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// One dataset entry: a mixture plus its ground-truth sources (already
// scaled, so the mixture is their elementwise sum).
struct MixtureExample {
  std::string id;
  Waveform mixture;
  std::vector<Waveform> sources;
};

}  // namespace codecsep
