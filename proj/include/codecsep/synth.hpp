#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codecsep/waveform.hpp"

namespace codecsep {

// Recipe for a deterministic synthetic two-speaker mixture set. Every
// sample of every file is a pure function of these fields.
struct SynthSpec {
  int num_examples = 0;
  int num_speakers = 2;
  double duration_s = 1.0;
  int sample_rate = 8000;
  double snr_low_db = 0.0;
  double snr_high_db = 5.0;
  uint64_t seed = 0;

  int64_t samples_per_example() const;
  void validate() const;  // throws std::invalid_argument
};

// Harmonic pseudo-speech: 3-8 partials over a fundamental drawn from this
// speaker's slice of [80, 300] Hz (speakers get disjoint bands so the
// mixture is separable in principle), amplitude-modulated by a 4-16 segment
// piecewise-linear envelope, peak-normalized to 0.7.
Waveform synth_source(const SynthSpec& spec, int example_index, int speaker_index);

// Rescales the second source so 10*log10(P(s1)/P(s2')) = snr_db and returns
// s1 + s2'. No clipping. The scaled source is written back into `sources`
// so the sum invariant holds for the returned mixture.
// Exactly two sources; zero-power sources are rejected ("degenerate source").
Waveform mix(std::vector<Waveform>& sources, double snr_db);

// In-memory synthesis of one example (mixture + scaled sources + snr used).
struct SynthesizedExample {
  MixtureExample example;
  double snr_db = 0.0;
};
SynthesizedExample synth_example(const SynthSpec& spec, int example_index);

// Writes <id>_mix.wav / <id>_src1.wav / <id>_src2.wav per example plus a
// tab-separated manifest (id, relative paths, snr_db). Returns the manifest
// path. Byte-identical for identical specs.
std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir);

// Manifest loading (paths resolved relative to the manifest location).
struct ManifestEntry {
  std::string id;
  std::string mixture_path;
  std::vector<std::string> source_paths;
  double snr_db = 0.0;
};
std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);
MixtureExample load_example(const ManifestEntry& entry);

}  // namespace codecsep
