#pragma once

#include <string>

#include "codecsep/waveform.hpp"

namespace codecsep {

// PCM16 mono little-endian RIFF/WAVE. Samples are clamped to [-1, 1] and
// quantized with scale 32767, so a round trip is exact to within 1/32768
// per sample.
void write_wav(const Waveform& w, const std::string& path);

// Throws std::runtime_error on malformed headers, non-PCM data or
// multi-channel files.
Waveform read_wav(const std::string& path);

}  // namespace codecsep
