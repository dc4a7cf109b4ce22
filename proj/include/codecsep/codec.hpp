#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codecsep/autodiff.hpp"
#include "codecsep/checkpoint.hpp"
#include "codecsep/metrics.hpp"
#include "codecsep/params.hpp"
#include "codecsep/synth.hpp"
#include "codecsep/waveform.hpp"

namespace codecsep {

struct CodecConfig {
  int sample_rate = 8000;
  std::vector<int> strides = {4, 4, 4};
  std::vector<int> channels = {16, 32, 64};
  int embedding_dim = 64;
  int num_codebooks = 4;
  int codebook_size = 256;
  int kernel_size = 7;  // odd; >= every stride

  int hop() const {
    int h = 1;
    for (int s : strides) h *= s;
    return h;
  }
  void validate() const;  // throws std::invalid_argument

  // toy: the trainable desk-scale configuration (hop 64). paper: a
  // DAC-shaped stand-in (hop 160, 1024-dim embedding) used for symbolic
  // profiling only -- it is never trained here.
  static CodecConfig preset(const std::string& name);
};

// Codec latent: frames x channels, row-major.
struct Embedding {
  ad::Tensor values;  // shape [frames, channels]

  int64_t frames() const { return values.shape.empty() ? 0 : values.shape[0]; }
  int64_t channels() const { return values.shape.size() < 2 ? 0 : values.shape[1]; }
};

// Residual VQ indices: frames x num_codebooks, each in [0, codebook_size).
struct CodeSequence {
  int64_t frames = 0;
  int num_codebooks = 0;
  std::vector<int32_t> indices;  // row-major [frames, num_codebooks]

  int32_t at(int64_t frame, int q) const { return indices[frame * num_codebooks + q]; }
};

struct QuantizeResult {
  CodeSequence codes;
  Embedding quantized;
  float commitment_loss = 0.0f;  // mean ||e - stopgrad(q)||^2
};

// Reflect-pads on the right to the next hop multiple (zero-fills if the
// signal is shorter than the required reflection).
Waveform pad_to_hop(const Waveform& w, int hop);

// Strided-conv encoder with snake activations, residual vector quantizer,
// transposed-conv decoder with a final 1x1 projection to mono. Inference
// entry points are read-only over parameters and safe to call concurrently;
// training requires exclusive ownership.
class Codec {
 public:
  Codec(CodecConfig cfg, uint64_t seed);
  static Codec from_archive(const TensorArchive& a);
  TensorArchive to_archive() const;

  const CodecConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool quantizer_ready() const { return quantizer_ready_; }
  int64_t param_count() const { return params_.total_scalars(); }

  // Graph builders over an externally owned tape (used by training loops).
  // Waveform input/output tensors are [T, 1]; embeddings [T', E].
  ad::Tape::Id encode_on(ad::Tape& t, const BoundParams& b, ad::Tape::Id wave) const;
  ad::Tape::Id decode_on(ad::Tape& t, const BoundParams& b, ad::Tape::Id emb) const;

  struct QuantizeIds {
    ad::Tape::Id quantized;      // straight-through: value of q, gradient to e
    ad::Tape::Id commit_loss;    // scalar
    CodeSequence codes;
    // Per-stage inputs r_q as raw values, for EMA codebook updates.
    std::vector<ad::Tensor> stage_residuals;
  };
  QuantizeIds quantize_on(ad::Tape& t, ad::Tape::Id emb) const;

  // Convenience inference (deterministic).
  Embedding encode(const Waveform& w) const;  // length must be a hop multiple
  QuantizeResult quantize(const Embedding& e) const;
  Waveform decode(const Embedding& e) const;

  // t = Codec(s): pad to hop, encode, optionally quantize, decode, truncate
  // back to the input length.
  Waveform transmit(const Waveform& w, bool use_rvq) const;

  // Codebook maintenance (training side).
  void init_codebooks_random(Rng& rng);
  void init_codebooks_from_rows(const std::vector<std::vector<float>>& rows, Rng& rng);
  struct EmaUpdateStats {
    int dead_codes_reseeded = 0;
  };
  EmaUpdateStats ema_update(const QuantizeIds& q, Rng& rng);

  int64_t train_step_count() const { return train_steps_; }

 private:
  void build_params(uint64_t seed);
  ad::Tape::Id waveform_leaf(ad::Tape& t, const Waveform& w) const;

  CodecConfig cfg_;
  ParamStore params_;
  bool quantizer_ready_ = false;
  int64_t train_steps_ = 0;
  float ema_decay_ = 0.99f;
  int64_t dead_code_steps_ = 100;
};

// Adapter so the metrics module can drive a codec without depending on it.
class CodecTransmitter final : public metrics::Transmitter {
 public:
  CodecTransmitter(const Codec& codec, bool use_rvq) : codec_(&codec), use_rvq_(use_rvq) {}
  Waveform transmit(const Waveform& w) const override {
    return codec_->transmit(w, use_rvq_);
  }

 private:
  const Codec* codec_;
  bool use_rvq_;
};

struct CodecTrainLog {
  std::vector<float> step_losses;
  std::vector<float> epoch_losses;
  int dead_codes_reseeded = 0;
};

// Reconstruction training: loss = -si_sdr_soft(decode(quantize(encode(s))), s)
// + 0.25 * commitment, Adam on encoder/decoder, EMA codebook updates with
// dead-code reseeding. Trains on every waveform in the manifest (sources and
// mixtures), cropped to `segment_s`.
CodecTrainLog train_codec(Codec& codec, const std::vector<ManifestEntry>& manifest,
                          int epochs, double lr, uint64_t seed, double segment_s = 1.0,
                          float commit_weight = 0.25f);

}  // namespace codecsep
