#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codecsep/autodiff.hpp"
#include "codecsep/checkpoint.hpp"
#include "codecsep/codec.hpp"
#include "codecsep/params.hpp"
#include "codecsep/waveform.hpp"

namespace codecsep {

struct SeparatorConfig {
  int codec_embedding_dim = 64;  // must match the codec
  int model_dim = 64;
  int num_blocks = 4;
  int num_heads = 4;
  int ffn_dim = 256;  // 4 * model_dim
  int num_speakers = 2;
  int max_frames = 4096;  // positional-encoding table size

  void validate() const;

  // toy: trains in minutes on CPU. paper: embedding 256 / 16 blocks.
  static SeparatorConfig preset(const std::string& name, int codec_embedding_dim);
};

// Embedding-space separator: input projection, sinusoidal positional
// encodings, a plain pre-norm transformer stack over the full sequence (no
// chunking, no dual path), output projection into per-speaker embeddings,
// and a final snake activation matching the codec's.
class Separator {
 public:
  Separator(SeparatorConfig cfg, uint64_t seed);
  static Separator from_archive(const TensorArchive& a);
  TensorArchive to_archive() const;

  const SeparatorConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int64_t param_count() const { return params_.total_scalars(); }

  // Core graph builder; returns one [T', E] node per speaker. `pe` must be
  // a [T', model_dim] node of positional encodings (pass pe_rows() for the
  // standard table; tests permute it together with the input).
  std::vector<ad::Tape::Id> separate_on(ad::Tape& t, const BoundParams& b,
                                        ad::Tape::Id emb, ad::Tape::Id pe) const;

  ad::Tape::Id pe_rows(ad::Tape& t, int64_t frames) const;  // throws past max_frames

  // Convenience inference.
  std::vector<Embedding> separate(const Embedding& mixture_embedding) const;

  // Full pipeline: encode the mixture (optionally through the quantizer,
  // modeling code transmission), separate, decode each speaker. Outputs have
  // the hop-padded mixture length.
  std::vector<Waveform> separate_waveforms(const Codec& codec, const Waveform& mixture,
                                           bool use_rvq_in) const;

 private:
  void build_params(uint64_t seed);

  SeparatorConfig cfg_;
  ParamStore params_;
  ad::Tensor pe_table_;  // [max_frames, model_dim]
};

}  // namespace codecsep
