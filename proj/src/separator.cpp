#include "codecsep/separator.hpp"

#include <cmath>
#include <stdexcept>

#include "codecsep/nn.hpp"

namespace codecsep {

void SeparatorConfig::validate() const {
  if (codec_embedding_dim < 1 || model_dim < 1 || num_blocks < 1 || num_heads < 1 ||
      ffn_dim < 1 || max_frames < 1)
    throw std::invalid_argument("separator: dimensions must be >= 1");
  if (model_dim % num_heads != 0)
    throw std::invalid_argument("separator: model_dim must be divisible by num_heads");
  if (num_speakers < 2) throw std::invalid_argument("separator: num_speakers must be >= 2");
}

SeparatorConfig SeparatorConfig::preset(const std::string& name, int codec_embedding_dim) {
  SeparatorConfig cfg;
  cfg.codec_embedding_dim = codec_embedding_dim;
  if (name == "toy") {
    cfg.model_dim = 64;
    cfg.num_blocks = 4;
  } else if (name == "paper") {
    cfg.model_dim = 256;
    cfg.num_blocks = 16;
  } else {
    throw std::invalid_argument("separator: unknown preset '" + name + "' (toy|paper)");
  }
  cfg.num_heads = 4;
  cfg.ffn_dim = 4 * cfg.model_dim;
  return cfg;
}

Separator::Separator(SeparatorConfig cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build_params(seed);
  pe_table_ = nn::sinusoidal_pe<float>(cfg_.max_frames, cfg_.model_dim);
}

void Separator::build_params(uint64_t seed) {
  Rng rng(seed ^ 0x5e9a7a705e9a7a70ull);
  const int E = cfg_.codec_embedding_dim;
  const int d = cfg_.model_dim;
  const int f = cfg_.ffn_dim;

  auto add_linear = [&](const std::string& name, int in, int out) {
    const double bound = std::sqrt(1.0 / in);
    params_.add_uniform(name + ".w", {in, out}, rng, bound);
    params_.add_uniform(name + ".b", {out}, rng, bound);
  };

  add_linear("in_proj", E, d);
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const std::string blk = "block" + std::to_string(i);
    params_.add_constant(blk + ".ln1.g", {d}, 1.0f);
    params_.add_constant(blk + ".ln1.b", {d}, 0.0f);
    add_linear(blk + ".attn.q", d, d);
    add_linear(blk + ".attn.k", d, d);
    add_linear(blk + ".attn.v", d, d);
    add_linear(blk + ".attn.o", d, d);
    params_.add_constant(blk + ".ln2.g", {d}, 1.0f);
    params_.add_constant(blk + ".ln2.b", {d}, 0.0f);
    add_linear(blk + ".ffn.1", d, f);
    add_linear(blk + ".ffn.2", f, d);
  }
  params_.add_constant("final_ln.g", {d}, 1.0f);
  params_.add_constant("final_ln.b", {d}, 0.0f);
  add_linear("out_proj", d, cfg_.num_speakers * E);
}

ad::Tape::Id Separator::pe_rows(ad::Tape& t, int64_t frames) const {
  if (frames > cfg_.max_frames)
    throw std::invalid_argument(
        "separator: input has " + std::to_string(frames) + " frames but max_frames is " +
        std::to_string(cfg_.max_frames) +
        "; chunked evaluation is unsupported by design (raise max_frames instead)");
  const int64_t d = cfg_.model_dim;
  std::vector<float> rows(pe_table_.data.begin(), pe_table_.data.begin() + frames * d);
  return t.constant({frames, d}, std::move(rows));
}

std::vector<ad::Tape::Id> Separator::separate_on(ad::Tape& t, const BoundParams& b,
                                                 ad::Tape::Id emb, ad::Tape::Id pe) const {
  const int E = cfg_.codec_embedding_dim;
  if (t.shape(emb).size() != 2 || t.shape(emb)[1] != E)
    throw std::invalid_argument("separator: embedding channel dim mismatch (expected " +
                                std::to_string(E) + ")");
  const int64_t frames = t.shape(emb)[0];
  if (frames > cfg_.max_frames)
    throw std::invalid_argument("separator: frames exceed max_frames; chunked evaluation is "
                                "unsupported by design");
  constexpr float kLnEps = 1e-5f;

  auto id_of = [&](const std::string& name) { return b[params_.index_of(name)]; };

  ad::Tape::Id x = nn::linear(t, emb, id_of("in_proj.w"), id_of("in_proj.b"));
  x = t.add(x, pe);

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const std::string blk = "block" + std::to_string(i);
    nn::BlockParams<float> p;
    p.ln1_g = id_of(blk + ".ln1.g");
    p.ln1_b = id_of(blk + ".ln1.b");
    p.attn.wq = id_of(blk + ".attn.q.w");
    p.attn.bq = id_of(blk + ".attn.q.b");
    p.attn.wk = id_of(blk + ".attn.k.w");
    p.attn.bk = id_of(blk + ".attn.k.b");
    p.attn.wv = id_of(blk + ".attn.v.w");
    p.attn.bv = id_of(blk + ".attn.v.b");
    p.attn.wo = id_of(blk + ".attn.o.w");
    p.attn.bo = id_of(blk + ".attn.o.b");
    p.ln2_g = id_of(blk + ".ln2.g");
    p.ln2_b = id_of(blk + ".ln2.b");
    p.ffn_w1 = id_of(blk + ".ffn.1.w");
    p.ffn_b1 = id_of(blk + ".ffn.1.b");
    p.ffn_w2 = id_of(blk + ".ffn.2.w");
    p.ffn_b2 = id_of(blk + ".ffn.2.b");
    x = nn::transformer_block(t, x, p, cfg_.num_heads, kLnEps);
  }

  x = t.channel_affine(t.layer_norm(x, kLnEps), id_of("final_ln.g"), id_of("final_ln.b"));
  ad::Tape::Id y = nn::linear(t, x, id_of("out_proj.w"), id_of("out_proj.b"));

  // Per-speaker split; snake last so the output distribution matches the
  // codec's embedding activation.
  std::vector<ad::Tape::Id> outs;
  outs.reserve(static_cast<size_t>(cfg_.num_speakers));
  for (int k = 0; k < cfg_.num_speakers; ++k)
    outs.push_back(t.snake(t.slice(y, 1, static_cast<int64_t>(k) * E, E)));
  return outs;
}

std::vector<Embedding> Separator::separate(const Embedding& mixture_embedding) const {
  ad::Tape t;
  BoundParams b = bind_params(t, params_, false);
  ad::Tape::Id emb = t.leaf(mixture_embedding.values, false);
  std::vector<ad::Tape::Id> outs =
      separate_on(t, b, emb, pe_rows(t, mixture_embedding.frames()));
  std::vector<Embedding> result;
  for (ad::Tape::Id id : outs) {
    Embedding e;
    e.values = ad::Tensor(t.shape(id), std::vector<float>(t.val(id).begin(), t.val(id).end()));
    result.push_back(std::move(e));
  }
  return result;
}

std::vector<Waveform> Separator::separate_waveforms(const Codec& codec,
                                                    const Waveform& mixture,
                                                    bool use_rvq_in) const {
  if (cfg_.codec_embedding_dim != codec.config().embedding_dim)
    throw std::invalid_argument("separator: codec embedding dim mismatch");
  const Waveform padded = pad_to_hop(mixture, codec.config().hop());

  ad::Tape t;
  BoundParams cb = bind_params(t, codec.params(), false);
  BoundParams sb = bind_params(t, params_, false);
  ad::Tape::Id wave =
      t.leaf({padded.size(), 1}, std::vector<float>(padded.samples.begin(), padded.samples.end()),
             false);
  ad::Tape::Id e = codec.encode_on(t, cb, wave);
  if (use_rvq_in) e = codec.quantize_on(t, e).quantized;
  std::vector<ad::Tape::Id> outs = separate_on(t, sb, e, pe_rows(t, t.shape(e)[0]));

  std::vector<Waveform> result;
  for (ad::Tape::Id id : outs) {
    ad::Tape::Id d = codec.decode_on(t, cb, id);
    Waveform w;
    w.sample_rate = codec.config().sample_rate;
    w.samples.assign(t.val(d).begin(), t.val(d).end());
    result.push_back(std::move(w));
  }
  return result;
}

TensorArchive Separator::to_archive() const {
  TensorArchive a;
  for (const Param& p : params_.items()) {
    a.add_tensor(p.name, ad::Tensor(p.shape, p.value));
    if (p.trainable) {
      a.add_tensor("adam.m/" + p.name, ad::Tensor(p.shape, p.m));
      a.add_tensor("adam.v/" + p.name, ad::Tensor(p.shape, p.v));
    }
  }
  a.set_meta("kind", "separator");
  a.set_meta("codec_embedding_dim", std::to_string(cfg_.codec_embedding_dim));
  a.set_meta("model_dim", std::to_string(cfg_.model_dim));
  a.set_meta("num_blocks", std::to_string(cfg_.num_blocks));
  a.set_meta("num_heads", std::to_string(cfg_.num_heads));
  a.set_meta("ffn_dim", std::to_string(cfg_.ffn_dim));
  a.set_meta("num_speakers", std::to_string(cfg_.num_speakers));
  a.set_meta("max_frames", std::to_string(cfg_.max_frames));
  a.set_meta("adam_steps", std::to_string(params_.adam_step_count()));
  return a;
}

Separator Separator::from_archive(const TensorArchive& a) {
  if (a.meta_or("kind", "") != "separator")
    throw std::runtime_error("separator: archive kind is '" + a.meta_or("kind", "<missing>") +
                             "', expected 'separator'");
  SeparatorConfig cfg;
  cfg.codec_embedding_dim = std::stoi(a.meta("codec_embedding_dim"));
  cfg.model_dim = std::stoi(a.meta("model_dim"));
  cfg.num_blocks = std::stoi(a.meta("num_blocks"));
  cfg.num_heads = std::stoi(a.meta("num_heads"));
  cfg.ffn_dim = std::stoi(a.meta("ffn_dim"));
  cfg.num_speakers = std::stoi(a.meta("num_speakers"));
  cfg.max_frames = std::stoi(a.meta("max_frames"));

  Separator sep(cfg, /*seed=*/0);
  if (a.tensors.empty())
    throw std::runtime_error("separator: archive holds no tensors (empty model)");
  for (Param& p : sep.params_.items()) {
    const ad::Tensor& t = a.tensor(p.name);
    if (t.shape != p.shape)
      throw std::runtime_error("separator: tensor shape mismatch for '" + p.name + "'");
    p.value = t.data;
    if (p.trainable) {
      if (a.has_tensor("adam.m/" + p.name)) p.m = a.tensor("adam.m/" + p.name).data;
      if (a.has_tensor("adam.v/" + p.name)) p.v = a.tensor("adam.v/" + p.name).data;
    }
  }
  sep.params_.set_adam_step_count(std::stoll(a.meta_or("adam_steps", "0")));
  return sep;
}

}  // namespace codecsep
