#include "codecsep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "codecsep/rng.hpp"
#include "codecsep/wav_io.hpp"

namespace codecsep {

namespace fs = std::filesystem;

int64_t SynthSpec::samples_per_example() const {
  return static_cast<int64_t>(std::llround(duration_s * sample_rate));
}

void SynthSpec::validate() const {
  if (num_examples < 0) throw std::invalid_argument("synth: num_examples must be >= 0");
  if (num_speakers < 1) throw std::invalid_argument("synth: num_speakers must be >= 1");
  if (sample_rate <= 0) throw std::invalid_argument("synth: sample_rate must be > 0");
  if (duration_s <= 0) throw std::invalid_argument("synth: duration_s must be > 0");
  if (snr_low_db > snr_high_db) throw std::invalid_argument("synth: snr_low > snr_high");
  const double exact = duration_s * sample_rate;
  if (std::abs(exact - std::llround(exact)) > 1e-9 || samples_per_example() < 1)
    throw std::invalid_argument("synth: duration_s * sample_rate must be an integer >= 1");
}

Waveform synth_source(const SynthSpec& spec, int example_index, int speaker_index) {
  spec.validate();
  if (example_index < 0 || example_index >= std::max(spec.num_examples, example_index + 1))
    throw std::invalid_argument("synth_source: bad example index");
  if (speaker_index < 0 || speaker_index >= spec.num_speakers)
    throw std::invalid_argument("synth_source: bad speaker index");

  Rng rng = Rng::from_keys(spec.seed, static_cast<uint64_t>(example_index),
                           static_cast<uint64_t>(speaker_index));

  // Disjoint fundamental bands per speaker: [80, 300] Hz split into
  // num_speakers equal slices.
  const double band_lo = 80.0, band_hi = 300.0;
  const double width = (band_hi - band_lo) / spec.num_speakers;
  const double f0 =
      rng.uniform(band_lo + width * speaker_index, band_lo + width * (speaker_index + 1));

  const int num_harmonics = static_cast<int>(rng.range_int(3, 8));
  std::vector<double> amp(num_harmonics), phase(num_harmonics);
  for (int h = 0; h < num_harmonics; ++h) {
    amp[h] = rng.uniform(0.3, 1.0) / (h + 1);  // roughly 1/h rolloff
    phase[h] = rng.uniform(0.0, 6.283185307179586);
  }

  // Piecewise-linear amplitude envelope, 4-16 segments.
  const int num_segments = static_cast<int>(rng.range_int(4, 16));
  std::vector<double> knots(static_cast<size_t>(num_segments) + 1);
  for (double& k : knots) k = rng.uniform(0.2, 1.0);

  const int64_t n = spec.samples_per_example();
  const double nyquist = spec.sample_rate / 2.0;
  Waveform w;
  w.sample_rate = spec.sample_rate;
  w.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double u = static_cast<double>(i) / std::max<int64_t>(n - 1, 1) * num_segments;
    const int seg = std::min(static_cast<int>(u), num_segments - 1);
    const double frac = u - seg;
    const double env = knots[seg] * (1.0 - frac) + knots[seg + 1] * frac;
    double s = 0.0;
    for (int h = 0; h < num_harmonics; ++h) {
      const double freq = f0 * (h + 1);
      if (freq >= nyquist) break;
      s += amp[h] * std::sin(6.283185307179586 * freq * t + phase[h]);
    }
    w.samples[i] = static_cast<float>(env * s);
  }

  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0f) {
    const float gain = 0.7f / peak;
    for (float& s : w.samples) s *= gain;
  }
  return w;
}

Waveform mix(std::vector<Waveform>& sources, double snr_db) {
  if (sources.size() != 2)
    throw std::invalid_argument("mix: exactly 2 sources required for SNR semantics");
  const Waveform& s1 = sources[0];
  Waveform& s2 = sources[1];
  if (s1.samples.size() != s2.samples.size() || s1.sample_rate != s2.sample_rate)
    throw std::invalid_argument("mix: sources must share length and sample rate");

  auto power = [](const Waveform& w) {
    double p = 0.0;
    for (float s : w.samples) p += static_cast<double>(s) * s;
    return p / std::max<size_t>(w.samples.size(), 1);
  };
  const double p1 = power(s1);
  const double p2 = power(s2);
  if (p1 <= 0.0 || p2 <= 0.0) throw std::invalid_argument("mix: degenerate source");

  // Scale s2 so that 10*log10(p1 / p2') = snr_db.
  const double target_p2 = p1 / std::pow(10.0, snr_db / 10.0);
  const float gain = static_cast<float>(std::sqrt(target_p2 / p2));
  for (float& s : s2.samples) s *= gain;

  Waveform out;
  out.sample_rate = s1.sample_rate;
  out.samples.resize(s1.samples.size());
  for (size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = s1.samples[i] + s2.samples[i];
  return out;
}

SynthesizedExample synth_example(const SynthSpec& spec, int example_index) {
  spec.validate();
  if (spec.num_speakers != 2)
    throw std::invalid_argument("synth_example: mixing is defined for 2 speakers");
  std::vector<Waveform> sources;
  sources.reserve(2);
  for (int spk = 0; spk < spec.num_speakers; ++spk)
    sources.push_back(synth_source(spec, example_index, spk));

  // SNR draw uses a speaker-index past the real ones so it is independent
  // of the source streams.
  Rng snr_rng = Rng::from_keys(spec.seed, static_cast<uint64_t>(example_index),
                               static_cast<uint64_t>(spec.num_speakers) + 1000);
  const double snr_db = snr_rng.uniform(spec.snr_low_db, spec.snr_high_db);

  SynthesizedExample out;
  out.snr_db = snr_db;
  out.example.mixture = mix(sources, snr_db);
  out.example.sources = std::move(sources);

  std::ostringstream id;
  id << "ex" << std::setw(5) << std::setfill('0') << example_index;
  out.example.id = id.str();
  return out;
}

std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const fs::path manifest_path = dir / "manifest.tsv";

  std::ostringstream manifest;
  manifest.setf(std::ios::fixed);
  for (int i = 0; i < spec.num_examples; ++i) {
    SynthesizedExample ex = synth_example(spec, i);
    const std::string mix_name = ex.example.id + "_mix.wav";
    const std::string src1_name = ex.example.id + "_src1.wav";
    const std::string src2_name = ex.example.id + "_src2.wav";
    write_wav(ex.example.mixture, (dir / mix_name).string());
    write_wav(ex.example.sources[0], (dir / src1_name).string());
    write_wav(ex.example.sources[1], (dir / src2_name).string());
    manifest << ex.example.id << '\t' << mix_name << '\t' << src1_name << '\t' << src2_name
             << '\t' << std::setprecision(6) << ex.snr_db << '\n';
  }

  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw std::runtime_error("synth_dataset: cannot write " + manifest_path.string());
  const std::string body = manifest.str();
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  return manifest_path.string();
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string mix_rel, src1_rel, src2_rel, snr;
    if (!std::getline(ls, e.id, '\t') || !std::getline(ls, mix_rel, '\t') ||
        !std::getline(ls, src1_rel, '\t') || !std::getline(ls, src2_rel, '\t') ||
        !std::getline(ls, snr, '\t'))
      throw std::runtime_error("read_manifest: malformed line: " + line);
    e.mixture_path = (base / mix_rel).string();
    e.source_paths = {(base / src1_rel).string(), (base / src2_rel).string()};
    e.snr_db = std::stod(snr);
    entries.push_back(std::move(e));
  }
  return entries;
}

MixtureExample load_example(const ManifestEntry& entry) {
  MixtureExample ex;
  ex.id = entry.id;
  ex.mixture = read_wav(entry.mixture_path);
  for (const std::string& p : entry.source_paths) ex.sources.push_back(read_wav(p));
  return ex;
}

}  // namespace codecsep
