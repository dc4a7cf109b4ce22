#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "codecsep/synth.hpp"
#include "codecsep/wav_io.hpp"
#include "support/helpers.hpp"

using namespace codecsep;
using test_support::TempDir;
using test_support::make_wave;

namespace {

SynthSpec toy_spec(uint64_t seed, int num = 3) {
  SynthSpec s;
  s.num_examples = num;
  s.seed = seed;
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synth_source is deterministic and seed-sensitive") {
  const SynthSpec spec = toy_spec(1);
  const Waveform a = synth_source(spec, 0, 0);
  const Waveform b = synth_source(spec, 0, 0);
  CHECK(a.samples == b.samples);  // bit-identical

  const Waveform c = synth_source(toy_spec(2), 0, 0);
  CHECK(a.samples != c.samples);
}

TEST_CASE("synth_source peak-normalizes to 0.7") {
  for (uint64_t seed : {1ull, 7ull, 42ull}) {
    const Waveform w = synth_source(toy_spec(seed), 0, 1);
    float peak = 0.0f;
    for (float s : w.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak == doctest::Approx(0.7).epsilon(1e-6));
  }
}

TEST_CASE("synth_source rejects bad indices") {
  const SynthSpec spec = toy_spec(1);
  CHECK_THROWS_AS(synth_source(spec, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(synth_source(spec, -1, 0), std::invalid_argument);
}

TEST_CASE("mix scales the second source to the requested SNR") {
  // Hand computation: power(s1) = 1/2, power(s2) = 2; at 0 dB the scale is
  // sqrt((1/2)/2) = 1/2, so the output is [1, 1].
  std::vector<Waveform> sources{make_wave({1.0f, 0.0f}), make_wave({0.0f, 2.0f})};
  const Waveform m = mix(sources, 0.0);
  CHECK(m.samples[0] == doctest::Approx(1.0));
  CHECK(m.samples[1] == doctest::Approx(1.0));
  CHECK(sources[1].samples[1] == doctest::Approx(1.0));  // scaled in place
}

TEST_CASE("mix at 0 dB with equal sources is the plain sum") {
  Rng rng(3);
  const Waveform s = test_support::random_wave(rng, 64);
  std::vector<Waveform> sources{s, s};
  const Waveform m = mix(sources, 0.0);
  for (size_t i = 0; i < m.samples.size(); ++i)
    CHECK(m.samples[i] == doctest::Approx(2.0f * s.samples[i]).epsilon(1e-6));
}

TEST_CASE("mix at 20 dB yields a power ratio of 100") {
  Rng rng(4);
  std::vector<Waveform> sources{test_support::random_wave(rng, 512),
                                test_support::random_wave(rng, 512)};
  mix(sources, 20.0);
  auto power = [](const Waveform& w) {
    double p = 0;
    for (float s : w.samples) p += static_cast<double>(s) * s;
    return p / w.samples.size();
  };
  CHECK(power(sources[0]) / power(sources[1]) == doctest::Approx(100.0).epsilon(1e-6));
}

TEST_CASE("mix rejects degenerate sources") {
  std::vector<Waveform> sources{make_wave({0.0f, 0.0f}), make_wave({1.0f, 1.0f})};
  CHECK_THROWS_WITH_AS(mix(sources, 0.0), "mix: degenerate source", std::invalid_argument);
}

TEST_CASE("wav round trip stays within one quantization step") {
  TempDir dir;
  Waveform w;
  w.sample_rate = 8000;
  w.samples.resize(2000);  // 0.25 s sine
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.9f * std::sin(2.0 * M_PI * 440.0 * i / 8000.0);

  const std::string path = dir.file("sine.wav");
  write_wav(w, path);
  const Waveform r = read_wav(path);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.sample_rate == 8000);
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0f / 32768.0f);
}

TEST_CASE("wav round trip of silence is exact") {
  TempDir dir;
  const Waveform w = make_wave(std::vector<float>(128, 0.0f));
  const std::string path = dir.file("zero.wav");
  write_wav(w, path);
  const Waveform r = read_wav(path);
  for (float s : r.samples) CHECK(s == 0.0f);
}

TEST_CASE("read_wav rejects malformed input") {
  TempDir dir;
  const std::string path = dir.file("bad.wav");
  std::ofstream(path, std::ios::binary) << "JUNKJUNKJUNKJUNKJUNK";
  CHECK_THROWS_AS(read_wav(path), std::runtime_error);
  CHECK_THROWS_AS(read_wav(dir.file("missing.wav")), std::runtime_error);
}

TEST_CASE("synth_dataset writes the expected files and manifest") {
  TempDir dir;
  const std::string manifest_path = synth_dataset(toy_spec(5, 3), dir.file("data"));
  const auto entries = read_manifest(manifest_path);
  REQUIRE(entries.size() == 3);

  int wav_count = 0;
  for (const auto& p : std::filesystem::directory_iterator(dir.file("data")))
    if (p.path().extension() == ".wav") ++wav_count;
  CHECK(wav_count == 9);  // mixture + 2 sources per example

  for (const auto& e : entries) {
    CHECK(e.snr_db >= 0.0);
    CHECK(e.snr_db <= 5.0);
    CHECK(std::filesystem::exists(e.mixture_path));
    for (const auto& s : e.source_paths) CHECK(std::filesystem::exists(s));
  }
}

TEST_CASE("synth_dataset is byte-identical across runs") {
  TempDir dir;
  const std::string m1 = synth_dataset(toy_spec(9, 2), dir.file("a"));
  const std::string m2 = synth_dataset(toy_spec(9, 2), dir.file("b"));
  CHECK(slurp(m1) == slurp(m2));
  const auto e1 = read_manifest(m1);
  const auto e2 = read_manifest(m2);
  for (size_t i = 0; i < e1.size(); ++i) {
    CHECK(slurp(e1[i].mixture_path) == slurp(e2[i].mixture_path));
    CHECK(slurp(e1[i].source_paths[0]) == slurp(e2[i].source_paths[0]));
  }
}

TEST_CASE("synth_dataset with zero examples writes an empty manifest") {
  TempDir dir;
  const std::string manifest = synth_dataset(toy_spec(11, 0), dir.file("empty"));
  CHECK(read_manifest(manifest).empty());
  int wav_count = 0;
  for (const auto& p : std::filesystem::directory_iterator(dir.file("empty")))
    if (p.path().extension() == ".wav") ++wav_count;
  CHECK(wav_count == 0);
}

TEST_CASE("mixture equals the sum of stored sources before quantization") {
  const SynthSpec spec = toy_spec(21, 4);
  for (int i = 0; i < spec.num_examples; ++i) {
    const SynthesizedExample ex = synth_example(spec, i);
    REQUIRE(ex.example.sources.size() == 2);
    for (size_t j = 0; j < ex.example.mixture.samples.size(); ++j) {
      const float sum = ex.example.sources[0].samples[j] + ex.example.sources[1].samples[j];
      CHECK(std::abs(ex.example.mixture.samples[j] - sum) <= 1e-6f);
    }
  }
}

TEST_CASE("sources for the same example use disjoint fundamental bands") {
  // Indirect check: sources from different bands should be far from
  // proportional; correlation of disjoint-band harmonics stays low.
  const SynthSpec spec = toy_spec(33, 4);
  for (int i = 0; i < spec.num_examples; ++i) {
    const Waveform a = synth_source(spec, i, 0);
    const Waveform b = synth_source(spec, i, 1);
    double dot = 0, na = 0, nb = 0;
    for (size_t j = 0; j < a.samples.size(); ++j) {
      dot += static_cast<double>(a.samples[j]) * b.samples[j];
      na += static_cast<double>(a.samples[j]) * a.samples[j];
      nb += static_cast<double>(b.samples[j]) * b.samples[j];
    }
    CHECK(std::abs(dot) / std::sqrt(na * nb) < 0.2);
  }
}
