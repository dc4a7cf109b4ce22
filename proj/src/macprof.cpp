#include "codecsep/macprof.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace codecsep::macprof {

namespace {

std::string dims(int64_t a, int64_t b) {
  return "[" + std::to_string(a) + "," + std::to_string(b) + "]";
}

void require_nonneg(int64_t v, const char* what) {
  if (v < 0) throw std::invalid_argument(std::string("macs: negative ") + what);
}

}  // namespace

int64_t macs_linear(int64_t n_positions, int64_t in_dim, int64_t out_dim) {
  require_nonneg(n_positions, "positions");
  require_nonneg(in_dim, "in_dim");
  require_nonneg(out_dim, "out_dim");
  return n_positions * in_dim * out_dim;
}

int64_t macs_conv1d(int64_t out_len, int64_t in_ch, int64_t out_ch, int64_t kernel) {
  require_nonneg(out_len, "out_len");
  return out_len * in_ch * out_ch * kernel;
}

int64_t macs_conv1d_transposed(int64_t in_len, int64_t in_ch, int64_t out_ch, int64_t kernel) {
  return macs_conv1d(in_len, in_ch, out_ch, kernel);
}

int64_t macs_attention(int64_t seq_len, int64_t model_dim, int64_t num_heads) {
  require_nonneg(seq_len, "seq_len");
  if (num_heads < 1 || model_dim % num_heads != 0)
    throw std::invalid_argument("macs_attention: model_dim must divide into heads");
  // QKV + output projections (4 L d^2) plus per-head scores and weighted
  // sums, which sum to 2 L^2 d regardless of the head count.
  return 4 * seq_len * model_dim * model_dim + 2 * seq_len * seq_len * model_dim;
}

int64_t MacReport::total() const {
  int64_t t = 0;
  for (const LayerMacs& l : layers) t += l.macs;
  return t;
}

MacReport profile_codec(const CodecConfig& cfg, double duration_s, int sample_rate) {
  cfg.validate();
  const int64_t samples = static_cast<int64_t>(std::llround(duration_s * sample_rate));
  if (samples < 1) throw std::invalid_argument("profile: empty input");

  MacReport r;
  r.model = "codec";
  int64_t len = samples;
  int64_t cin = 1;
  for (size_t i = 0; i < cfg.strides.size(); ++i) {
    const int64_t cout = cfg.channels[i];
    const int64_t out_len = len / cfg.strides[i];
    r.layers.push_back({"enc" + std::to_string(i), "conv1d", dims(len, cin),
                        dims(out_len, cout),
                        macs_conv1d(out_len, cin, cout, cfg.kernel_size)});
    len = out_len;
    cin = cout;
  }
  const int64_t frames = len;
  r.layers.push_back({"rvq", "vq_scan", dims(frames, cfg.embedding_dim),
                      dims(frames, static_cast<int64_t>(cfg.num_codebooks)),
                      frames * cfg.num_codebooks * static_cast<int64_t>(cfg.codebook_size) *
                          cfg.embedding_dim});
  for (size_t i = 0; i < cfg.strides.size(); ++i) {
    const size_t rev = cfg.strides.size() - 1 - i;
    const int64_t dec_in = cfg.channels[rev];
    const int64_t dec_out = rev > 0 ? cfg.channels[rev - 1] : cfg.channels[0];
    const int64_t out_len = len * cfg.strides[rev];
    r.layers.push_back({"dec" + std::to_string(i), "conv1d_transposed", dims(len, dec_in),
                        dims(out_len, dec_out),
                        macs_conv1d_transposed(len, dec_in, dec_out, cfg.kernel_size)});
    len = out_len;
  }
  r.layers.push_back({"out_proj", "linear", dims(len, cfg.channels[0]), dims(len, 1),
                      macs_linear(len, cfg.channels[0], 1)});
  r.note = "convention: 1 MAC = multiply+accumulate; activations, biases and "
           "norm/softmax multiplies excluded";
  return r;
}

MacReport profile_separator(const SeparatorConfig& cfg, int64_t seq_len) {
  cfg.validate();
  if (seq_len < 1) throw std::invalid_argument("profile: empty sequence");
  const int64_t E = cfg.codec_embedding_dim;
  const int64_t d = cfg.model_dim;

  MacReport r;
  r.model = "separator";
  r.layers.push_back({"in_proj", "linear", dims(seq_len, E), dims(seq_len, d),
                      macs_linear(seq_len, E, d)});
  for (int i = 0; i < cfg.num_blocks; ++i) {
    const std::string blk = "block" + std::to_string(i);
    r.layers.push_back({blk + ".attn", "attention", dims(seq_len, d), dims(seq_len, d),
                        macs_attention(seq_len, d, cfg.num_heads)});
    r.layers.push_back({blk + ".ffn", "linear", dims(seq_len, d), dims(seq_len, d),
                        macs_linear(seq_len, d, cfg.ffn_dim) +
                            macs_linear(seq_len, cfg.ffn_dim, d)});
  }
  const int64_t out = static_cast<int64_t>(cfg.num_speakers) * E;
  r.layers.push_back({"out_proj", "linear", dims(seq_len, d), dims(seq_len, out),
                      macs_linear(seq_len, d, out)});
  r.note = "convention: 1 MAC = multiply+accumulate; activations, biases and "
           "norm/softmax multiplies excluded";
  return r;
}

ProfileModel profile_model_from_string(const std::string& s) {
  if (s == "codec") return ProfileModel::Codec;
  if (s == "sep") return ProfileModel::Separator;
  if (s == "pipeline") return ProfileModel::Pipeline;
  throw std::invalid_argument("unknown profile model '" + s + "' (codec|sep|pipeline)");
}

MacReport profile(ProfileModel model, const CodecConfig& codec_cfg,
                  const SeparatorConfig& sep_cfg, double duration_s, int sample_rate) {
  const int64_t samples = static_cast<int64_t>(std::llround(duration_s * sample_rate));
  if (samples < 1) throw std::invalid_argument("profile: empty input");
  switch (model) {
    case ProfileModel::Codec:
      return profile_codec(codec_cfg, duration_s, sample_rate);
    case ProfileModel::Separator: {
      MacReport r = profile_separator(sep_cfg, samples / codec_cfg.hop());
      r.model = "separator@codec-rate";
      return r;
    }
    case ProfileModel::Pipeline: {
      MacReport r = profile_separator(sep_cfg, samples / codec_cfg.hop());
      r.model = "pipeline";
      r.note += "; codec encode/decode excluded (runs on both sides of the comparison)";
      return r;
    }
  }
  throw std::logic_error("profile: unreachable");
}

CompareTable compare(const MacReport& a, const MacReport& b) {
  if (b.total() == 0) throw std::invalid_argument("compare: empty baseline");
  std::map<std::string, std::pair<int64_t, int64_t>> kinds;
  for (const LayerMacs& l : a.layers) kinds[l.kind].first += l.macs;
  for (const LayerMacs& l : b.layers) kinds[l.kind].second += l.macs;

  CompareTable t;
  for (const auto& [kind, macs] : kinds) {
    CompareRow row;
    row.kind = kind;
    row.macs_a = macs.first;
    row.macs_b = macs.second;
    row.ratio = macs.second > 0 ? static_cast<double>(macs.first) / macs.second : 0.0;
    t.per_kind.push_back(row);
  }
  t.total_a = a.total();
  t.total_b = b.total();
  t.total_ratio = static_cast<double>(t.total_a) / t.total_b;
  return t;
}

std::string render_table(const MacReport& r) {
  std::ostringstream os;
  os << "model: " << r.model << "\n";
  char line[192];
  std::snprintf(line, sizeof(line), "%-14s %-18s %-14s %-14s %16s\n", "layer", "kind",
                "in_shape", "out_shape", "macs");
  os << line;
  for (const LayerMacs& l : r.layers) {
    std::snprintf(line, sizeof(line), "%-14s %-18s %-14s %-14s %16lld\n", l.name.c_str(),
                  l.kind.c_str(), l.in_shape.c_str(), l.out_shape.c_str(),
                  static_cast<long long>(l.macs));
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-14s %-18s %-14s %-14s %16lld (%.3f GMACs)\n", "total",
                "", "", "", static_cast<long long>(r.total()), r.total() / 1e9);
  os << line;
  if (!r.note.empty()) os << "note: " << r.note << "\n";
  return os.str();
}

std::string render_csv(const MacReport& r) {
  std::ostringstream os;
  os << "layer,kind,in_shape,out_shape,macs\n";
  for (const LayerMacs& l : r.layers)
    os << l.name << ',' << l.kind << ",\"" << l.in_shape << "\",\"" << l.out_shape << "\","
       << l.macs << '\n';
  os << "total,,,," << r.total() << '\n';
  return os.str();
}

std::string render_compare(const CompareTable& t, const std::string& label_a,
                           const std::string& label_b) {
  std::ostringstream os;
  char line[192];
  std::snprintf(line, sizeof(line), "%-18s %16s %16s %10s\n", "kind", label_a.c_str(),
                label_b.c_str(), "ratio");
  os << line;
  for (const CompareRow& r : t.per_kind) {
    std::snprintf(line, sizeof(line), "%-18s %16lld %16lld %10.2f\n", r.kind.c_str(),
                  static_cast<long long>(r.macs_a), static_cast<long long>(r.macs_b), r.ratio);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-18s %16lld %16lld %10.2f\n", "total",
                static_cast<long long>(t.total_a), static_cast<long long>(t.total_b),
                t.total_ratio);
  os << line;
  return os.str();
}

}  // namespace codecsep::macprof
