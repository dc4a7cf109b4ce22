#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codecsep/codec.hpp"
#include "codecsep/separator.hpp"

// Hardware-agnostic multiply-accumulate accounting over the model graphs.
// The walk is symbolic (no tensors are allocated), so the paper-parity
// configuration profiles instantly.
//
// Convention: one MAC = one multiply + one accumulate. Activation
// functions, biases, and normalization/softmax multiplies are excluded
// (dominated terms); state the convention next to any number this prints.
namespace codecsep::macprof {

int64_t macs_linear(int64_t n_positions, int64_t in_dim, int64_t out_dim);
int64_t macs_conv1d(int64_t out_len, int64_t in_ch, int64_t out_ch, int64_t kernel);
// Transposed convolution spreads each input position across the kernel, so
// the count uses the input length (adjoint symmetry with macs_conv1d).
int64_t macs_conv1d_transposed(int64_t in_len, int64_t in_ch, int64_t out_ch, int64_t kernel);
// QKV + output projections plus score and weighted-sum matmuls:
// 4*L*d^2 + 2*L^2*d. Independent of num_heads (the head split preserves
// total dimensions).
int64_t macs_attention(int64_t seq_len, int64_t model_dim, int64_t num_heads);

struct LayerMacs {
  std::string name;
  std::string kind;  // linear | conv1d | conv1d_transposed | attention | vq_scan
  std::string in_shape;
  std::string out_shape;
  int64_t macs = 0;
};

struct MacReport {
  std::string model;
  std::string note;
  std::vector<LayerMacs> layers;

  int64_t total() const;
};

// Encoder convs, RVQ codebook scans, decoder transposed convs, output
// projection, at the given input duration.
MacReport profile_codec(const CodecConfig& cfg, double duration_s, int sample_rate);

// Separator stack at an explicit sequence length (frames).
MacReport profile_separator(const SeparatorConfig& cfg, int64_t seq_len);

enum class ProfileModel { Codec, Separator, Pipeline };
ProfileModel profile_model_from_string(const std::string& s);

// Separator/Pipeline profile at the codec frame rate (samples / hop);
// Pipeline excludes codec encode/decode MACs, matching the transmission
// accounting where the codec runs on both sides regardless.
MacReport profile(ProfileModel model, const CodecConfig& codec_cfg,
                  const SeparatorConfig& sep_cfg, double duration_s, int sample_rate);

struct CompareRow {
  std::string kind;
  int64_t macs_a = 0;
  int64_t macs_b = 0;
  double ratio = 0.0;  // a / b; 0 when a kind is missing from one side
};

struct CompareTable {
  std::vector<CompareRow> per_kind;
  int64_t total_a = 0;
  int64_t total_b = 0;
  double total_ratio = 0.0;
};

// Ratios of report_a over report_b (report_b is the denominator/baseline).
// Throws "empty baseline" when report_b has no MACs.
CompareTable compare(const MacReport& a, const MacReport& b);

std::string render_table(const MacReport& r);
std::string render_csv(const MacReport& r);
std::string render_compare(const CompareTable& t, const std::string& label_a,
                           const std::string& label_b);

}  // namespace codecsep::macprof
