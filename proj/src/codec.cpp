#include "codecsep/codec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "codecsep/nn.hpp"
#include "codecsep/wav_io.hpp"

namespace codecsep {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

void CodecConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("codec: sample_rate must be > 0");
  if (strides.empty() || strides.size() != channels.size())
    throw std::invalid_argument("codec: strides and channels must be non-empty and equal length");
  for (int s : strides)
    if (s < 1) throw std::invalid_argument("codec: strides must be >= 1");
  for (int c : channels)
    if (c < 1) throw std::invalid_argument("codec: channels must be >= 1");
  if (embedding_dim != channels.back())
    throw std::invalid_argument("codec: embedding_dim must equal the last channel count");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("codec: kernel_size must be odd and positive");
  for (int s : strides)
    if (kernel_size < s) throw std::invalid_argument("codec: kernel_size must be >= each stride");
  if (num_codebooks < 1 || codebook_size < 1)
    throw std::invalid_argument("codec: quantizer dims must be >= 1");
}

CodecConfig CodecConfig::preset(const std::string& name) {
  CodecConfig cfg;
  if (name == "toy") return cfg;
  if (name == "paper") {
    cfg.strides = {4, 5, 8};  // hop 160: 8 kHz -> 50 Hz frame rate
    cfg.channels = {128, 512, 1024};
    cfg.embedding_dim = 1024;
    cfg.codebook_size = 1024;
    return cfg;
  }
  throw std::invalid_argument("codec: unknown preset '" + name + "' (toy|paper)");
}

Waveform pad_to_hop(const Waveform& w, int hop) {
  if (w.samples.empty()) throw std::invalid_argument("pad_to_hop: empty waveform");
  const int64_t n = w.size();
  const int64_t rem = n % hop;
  if (rem == 0) return w;
  const int64_t pad = hop - rem;
  Waveform out = w;
  out.samples.reserve(static_cast<size_t>(n + pad));
  for (int64_t i = 0; i < pad; ++i) {
    const int64_t src = n - 2 - i;  // reflect, no edge duplicate
    out.samples.push_back(src >= 0 ? w.samples[static_cast<size_t>(src)] : 0.0f);
  }
  return out;
}

Codec::Codec(CodecConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build_params(seed);
}

void Codec::build_params(uint64_t seed) {
  Rng rng(seed ^ 0xc0dec0dec0dec0deull);
  const int K = cfg_.kernel_size;
  const size_t stages = cfg_.strides.size();

  // Encoder: conv1d weights [Cout, K, Cin].
  int cin = 1;
  for (size_t i = 0; i < stages; ++i) {
    const int cout = cfg_.channels[i];
    const double bound = std::sqrt(1.0 / (cin * K));
    params_.add_uniform("enc" + std::to_string(i) + ".w", {cout, K, cin}, rng, bound);
    params_.add_uniform("enc" + std::to_string(i) + ".b", {cout}, rng, bound);
    cin = cout;
  }

  // Decoder: conv1d_transposed weights [Cin, K, Cout]; last stage keeps its
  // width, the 1x1 projection takes care of mono output.
  for (size_t i = 0; i < stages; ++i) {
    const size_t rev = stages - 1 - i;
    const int dec_in = cfg_.channels[rev];
    const int dec_out = rev > 0 ? cfg_.channels[rev - 1] : cfg_.channels[0];
    const double bound = std::sqrt(1.0 / (dec_in * K));
    params_.add_uniform("dec" + std::to_string(i) + ".w", {dec_in, K, dec_out}, rng, bound);
    params_.add_uniform("dec" + std::to_string(i) + ".b", {dec_out}, rng, bound);
  }
  const int proj_in = cfg_.channels[0];
  const double proj_bound = std::sqrt(1.0 / proj_in);
  params_.add_uniform("out_proj.w", {proj_in, 1}, rng, proj_bound);
  params_.add_uniform("out_proj.b", {1}, rng, proj_bound);

  // Quantizer state: codebooks plus EMA statistics, never touched by Adam.
  for (int q = 0; q < cfg_.num_codebooks; ++q) {
    const std::string base = "rvq.codebook" + std::to_string(q);
    std::vector<float> init(static_cast<size_t>(cfg_.codebook_size) * cfg_.embedding_dim);
    for (float& x : init) x = static_cast<float>(rng.normal() * 0.1);
    params_.add(base, {cfg_.codebook_size, cfg_.embedding_dim}, init, /*trainable=*/false);
    params_.add(base + ".cluster_size", {cfg_.codebook_size},
                std::vector<float>(static_cast<size_t>(cfg_.codebook_size), 1.0f), false);
    params_.add(base + ".embed_avg", {cfg_.codebook_size, cfg_.embedding_dim}, init, false);
    params_.add_constant(base + ".last_used", {cfg_.codebook_size}, 0.0f, false);
  }
}

ad::Tape::Id Codec::waveform_leaf(ad::Tape& t, const Waveform& w) const {
  std::vector<float> col(w.samples.begin(), w.samples.end());
  return t.leaf({w.size(), 1}, std::move(col), false);
}

ad::Tape::Id Codec::encode_on(ad::Tape& t, const BoundParams& b, ad::Tape::Id wave) const {
  const int K = cfg_.kernel_size;
  if (t.shape(wave).size() != 2 || t.shape(wave)[1] != 1)
    throw std::invalid_argument("encode: expected a [T, 1] waveform tensor");
  if (t.shape(wave)[0] % cfg_.hop() != 0)
    throw std::invalid_argument("encode: length not a hop multiple; pad to multiple of hop "
                                "(pad_to_hop)");
  ad::Tape::Id x = wave;
  for (size_t i = 0; i < cfg_.strides.size(); ++i) {
    const int s = cfg_.strides[i];
    const int pad_total = K - s;
    const int left = (pad_total + 1) / 2;
    const int right = pad_total - left;
    x = t.pad_rows(x, left, right);
    x = t.conv1d(x, b[params_.index_of("enc" + std::to_string(i) + ".w")], s, 0);
    x = t.bias_add(x, b[params_.index_of("enc" + std::to_string(i) + ".b")]);
    x = t.snake(x);
  }
  return x;
}

ad::Tape::Id Codec::decode_on(ad::Tape& t, const BoundParams& b, ad::Tape::Id emb) const {
  const int K = cfg_.kernel_size;
  if (t.shape(emb).size() != 2 || t.shape(emb)[1] != cfg_.embedding_dim)
    throw std::invalid_argument("decode: embedding channel dim mismatch");
  ad::Tape::Id x = emb;
  const size_t stages = cfg_.strides.size();
  for (size_t i = 0; i < stages; ++i) {
    const size_t rev = stages - 1 - i;
    const int s = cfg_.strides[rev];
    const int pad_total = K - s;
    const int left = (pad_total + 1) / 2;
    const int64_t frames = t.shape(x)[0];
    x = t.conv1d_transposed(x, b[params_.index_of("dec" + std::to_string(i) + ".w")], s, 0);
    // Full output is (frames-1)*s + K; trim to exactly frames*s, mirroring
    // the encoder's asymmetric padding.
    x = t.slice(x, 0, left, frames * s);
    x = t.bias_add(x, b[params_.index_of("dec" + std::to_string(i) + ".b")]);
    x = t.snake(x);
  }
  x = t.matmul(x, b[params_.index_of("out_proj.w")]);
  x = t.bias_add(x, b[params_.index_of("out_proj.b")]);
  return x;
}

Codec::QuantizeIds Codec::quantize_on(ad::Tape& t, ad::Tape::Id emb) const {
  if (!quantizer_ready_)
    throw std::runtime_error("quantize: codebooks are uninitialized; train the codec or call "
                             "an init_codebooks_* method");
  const int64_t frames = t.shape(emb)[0];
  const int64_t dim = t.shape(emb)[1];
  if (dim != cfg_.embedding_dim)
    throw std::invalid_argument("quantize: embedding channel dim mismatch");

  QuantizeIds out;
  out.codes.frames = frames;
  out.codes.num_codebooks = cfg_.num_codebooks;
  out.codes.indices.assign(static_cast<size_t>(frames) * cfg_.num_codebooks, 0);

  std::vector<float> residual(t.val(emb).begin(), t.val(emb).end());
  std::vector<float> quantized(residual.size(), 0.0f);

  for (int q = 0; q < cfg_.num_codebooks; ++q) {
    out.stage_residuals.push_back(ad::Tensor({frames, dim}, residual));
    const Param& cb = params_.named("rvq.codebook" + std::to_string(q));
    for (int64_t f = 0; f < frames; ++f) {
      const float* r = residual.data() + f * dim;
      int best = 0;
      double best_dist = -1.0;
      for (int c = 0; c < cfg_.codebook_size; ++c) {
        const float* cv = cb.value.data() + static_cast<int64_t>(c) * dim;
        double dist = 0.0;
        for (int64_t d = 0; d < dim; ++d) {
          const double diff = static_cast<double>(r[d]) - cv[d];
          dist += diff * diff;
        }
        if (best_dist < 0.0 || dist < best_dist) {  // strict <: ties keep lowest index
          best_dist = dist;
          best = c;
        }
      }
      out.codes.indices[f * cfg_.num_codebooks + q] = best;
      const float* cv = cb.value.data() + static_cast<int64_t>(best) * dim;
      float* rm = residual.data() + f * dim;
      float* qm = quantized.data() + f * dim;
      for (int64_t d = 0; d < dim; ++d) {
        rm[d] -= cv[d];
        qm[d] += cv[d];
      }
    }
  }

  ad::Tape::Id q_const = t.constant({frames, dim}, std::move(quantized));
  out.quantized = t.passthrough_grad(emb, q_const);
  out.commit_loss = t.mean(t.square(t.sub(emb, q_const)));
  return out;
}

Embedding Codec::encode(const Waveform& w) const {
  ad::Tape t;
  BoundParams b = bind_params(t, params_, false);
  ad::Tape::Id e = encode_on(t, b, waveform_leaf(t, w));
  Embedding out;
  out.values = ad::Tensor(t.shape(e), std::vector<float>(t.val(e).begin(), t.val(e).end()));
  return out;
}

QuantizeResult Codec::quantize(const Embedding& e) const {
  ad::Tape t;
  ad::Tape::Id emb = t.leaf(e.values, false);
  QuantizeIds ids = quantize_on(t, emb);
  QuantizeResult out;
  out.codes = std::move(ids.codes);
  out.quantized.values = ad::Tensor(t.shape(ids.quantized),
                                    std::vector<float>(t.val(ids.quantized).begin(),
                                                       t.val(ids.quantized).end()));
  out.commitment_loss = t.scalar_val(ids.commit_loss);
  return out;
}

Waveform Codec::decode(const Embedding& e) const {
  ad::Tape t;
  BoundParams b = bind_params(t, params_, false);
  ad::Tape::Id d = decode_on(t, b, t.leaf(e.values, false));
  Waveform out;
  out.sample_rate = cfg_.sample_rate;
  out.samples.assign(t.val(d).begin(), t.val(d).end());
  return out;
}

Waveform Codec::transmit(const Waveform& w, bool use_rvq) const {
  const Waveform padded = pad_to_hop(w, cfg_.hop());
  ad::Tape t;
  BoundParams b = bind_params(t, params_, false);
  ad::Tape::Id e = encode_on(t, b, waveform_leaf(t, padded));
  if (use_rvq) e = quantize_on(t, e).quantized;
  ad::Tape::Id d = decode_on(t, b, e);
  Waveform out;
  out.sample_rate = cfg_.sample_rate;
  out.samples.assign(t.val(d).begin(), t.val(d).end());
  out.samples.resize(w.samples.size());  // drop the hop padding
  return out;
}

void Codec::init_codebooks_random(Rng& rng) {
  for (int q = 0; q < cfg_.num_codebooks; ++q) {
    const std::string base = "rvq.codebook" + std::to_string(q);
    Param& cb = params_.named(base);
    for (float& x : cb.value) x = static_cast<float>(rng.normal() * 0.5);
    params_.named(base + ".embed_avg").value = cb.value;
    std::fill(params_.named(base + ".cluster_size").value.begin(),
              params_.named(base + ".cluster_size").value.end(), 1.0f);
    std::fill(params_.named(base + ".last_used").value.begin(),
              params_.named(base + ".last_used").value.end(),
              static_cast<float>(train_steps_));
  }
  quantizer_ready_ = true;
}

void Codec::init_codebooks_from_rows(const std::vector<std::vector<float>>& rows, Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("init_codebooks_from_rows: no rows");
  const int64_t dim = cfg_.embedding_dim;
  for (const auto& r : rows)
    if (static_cast<int64_t>(r.size()) != dim)
      throw std::invalid_argument("init_codebooks_from_rows: row dim mismatch");

  // Stage q is seeded from the residuals left by stages < q.
  std::vector<std::vector<float>> residuals = rows;
  for (int q = 0; q < cfg_.num_codebooks; ++q) {
    const std::string base = "rvq.codebook" + std::to_string(q);
    Param& cb = params_.named(base);
    for (int c = 0; c < cfg_.codebook_size; ++c) {
      const auto& src = residuals[rng.below(residuals.size())];
      std::copy(src.begin(), src.end(), cb.value.begin() + static_cast<int64_t>(c) * dim);
    }
    params_.named(base + ".embed_avg").value = cb.value;
    std::fill(params_.named(base + ".cluster_size").value.begin(),
              params_.named(base + ".cluster_size").value.end(), 1.0f);
    std::fill(params_.named(base + ".last_used").value.begin(),
              params_.named(base + ".last_used").value.end(),
              static_cast<float>(train_steps_));

    // Subtract each row's nearest code to form the next stage's residuals.
    for (auto& r : residuals) {
      int best = 0;
      double best_dist = -1.0;
      for (int c = 0; c < cfg_.codebook_size; ++c) {
        const float* cv = cb.value.data() + static_cast<int64_t>(c) * dim;
        double dist = 0.0;
        for (int64_t d = 0; d < dim; ++d) {
          const double diff = static_cast<double>(r[d]) - cv[d];
          dist += diff * diff;
        }
        if (best_dist < 0.0 || dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      const float* cv = cb.value.data() + static_cast<int64_t>(best) * dim;
      for (int64_t d = 0; d < dim; ++d) r[d] -= cv[d];
    }
  }
  quantizer_ready_ = true;
}

Codec::EmaUpdateStats Codec::ema_update(const QuantizeIds& q, Rng& rng) {
  EmaUpdateStats stats;
  const int64_t dim = cfg_.embedding_dim;
  const int64_t frames = q.codes.frames;
  ++train_steps_;

  for (int stage = 0; stage < cfg_.num_codebooks; ++stage) {
    const std::string base = "rvq.codebook" + std::to_string(stage);
    Param& cb = params_.named(base);
    Param& cluster = params_.named(base + ".cluster_size");
    Param& avg = params_.named(base + ".embed_avg");
    Param& last_used = params_.named(base + ".last_used");
    const ad::Tensor& residual = q.stage_residuals[static_cast<size_t>(stage)];

    std::vector<float> counts(static_cast<size_t>(cfg_.codebook_size), 0.0f);
    std::vector<float> sums(static_cast<size_t>(cfg_.codebook_size) * dim, 0.0f);
    for (int64_t f = 0; f < frames; ++f) {
      const int32_t code = q.codes.at(f, stage);
      counts[static_cast<size_t>(code)] += 1.0f;
      const float* r = residual.data.data() + f * dim;
      float* s = sums.data() + static_cast<int64_t>(code) * dim;
      for (int64_t d = 0; d < dim; ++d) s[d] += r[d];
    }

    for (int c = 0; c < cfg_.codebook_size; ++c) {
      cluster.value[c] = ema_decay_ * cluster.value[c] + (1.0f - ema_decay_) * counts[c];
      float* a = avg.value.data() + static_cast<int64_t>(c) * dim;
      const float* s = sums.data() + static_cast<int64_t>(c) * dim;
      for (int64_t d = 0; d < dim; ++d)
        a[d] = ema_decay_ * a[d] + (1.0f - ema_decay_) * s[d];
      const float denom = std::max(cluster.value[c], 1e-5f);
      float* v = cb.value.data() + static_cast<int64_t>(c) * dim;
      for (int64_t d = 0; d < dim; ++d) v[d] = a[d] / denom;
      if (counts[c] > 0.0f) last_used.value[c] = static_cast<float>(train_steps_);
    }

    // Reseed codes unused for dead_code_steps_ from a random batch residual.
    for (int c = 0; c < cfg_.codebook_size; ++c) {
      if (train_steps_ - static_cast<int64_t>(last_used.value[c]) < dead_code_steps_) continue;
      const int64_t f = static_cast<int64_t>(rng.below(static_cast<uint64_t>(frames)));
      const float* r = residual.data.data() + f * dim;
      float* v = cb.value.data() + static_cast<int64_t>(c) * dim;
      float* a = avg.value.data() + static_cast<int64_t>(c) * dim;
      for (int64_t d = 0; d < dim; ++d) {
        v[d] = r[d];
        a[d] = r[d];
      }
      cluster.value[c] = 1.0f;
      last_used.value[c] = static_cast<float>(train_steps_);
      ++stats.dead_codes_reseeded;
    }
  }
  return stats;
}

TensorArchive Codec::to_archive() const {
  TensorArchive a;
  for (const Param& p : params_.items()) {
    a.add_tensor(p.name, ad::Tensor(p.shape, p.value));
    if (p.trainable) {
      a.add_tensor("adam.m/" + p.name, ad::Tensor(p.shape, p.m));
      a.add_tensor("adam.v/" + p.name, ad::Tensor(p.shape, p.v));
    }
  }
  a.set_meta("kind", "codec");
  a.set_meta("sample_rate", std::to_string(cfg_.sample_rate));
  a.set_meta("strides", join_ints(cfg_.strides));
  a.set_meta("channels", join_ints(cfg_.channels));
  a.set_meta("embedding_dim", std::to_string(cfg_.embedding_dim));
  a.set_meta("num_codebooks", std::to_string(cfg_.num_codebooks));
  a.set_meta("codebook_size", std::to_string(cfg_.codebook_size));
  a.set_meta("kernel_size", std::to_string(cfg_.kernel_size));
  a.set_meta("quantizer_ready", quantizer_ready_ ? "1" : "0");
  a.set_meta("train_steps", std::to_string(train_steps_));
  a.set_meta("adam_steps", std::to_string(params_.adam_step_count()));
  return a;
}

Codec Codec::from_archive(const TensorArchive& a) {
  if (a.meta_or("kind", "") != "codec")
    throw std::runtime_error("codec: archive kind is '" + a.meta_or("kind", "<missing>") +
                             "', expected 'codec'");
  CodecConfig cfg;
  cfg.sample_rate = std::stoi(a.meta("sample_rate"));
  cfg.strides = split_ints(a.meta("strides"));
  cfg.channels = split_ints(a.meta("channels"));
  cfg.embedding_dim = std::stoi(a.meta("embedding_dim"));
  cfg.num_codebooks = std::stoi(a.meta("num_codebooks"));
  cfg.codebook_size = std::stoi(a.meta("codebook_size"));
  cfg.kernel_size = std::stoi(a.meta("kernel_size"));

  Codec codec(cfg, /*seed=*/0);
  if (a.tensors.empty()) throw std::runtime_error("codec: archive holds no tensors (empty model)");
  for (Param& p : codec.params_.items()) {
    const ad::Tensor& t = a.tensor(p.name);
    if (t.shape != p.shape)
      throw std::runtime_error("codec: tensor shape mismatch for '" + p.name + "'");
    p.value = t.data;
    if (p.trainable) {
      if (a.has_tensor("adam.m/" + p.name)) p.m = a.tensor("adam.m/" + p.name).data;
      if (a.has_tensor("adam.v/" + p.name)) p.v = a.tensor("adam.v/" + p.name).data;
    }
  }
  codec.quantizer_ready_ = a.meta_or("quantizer_ready", "0") == "1";
  codec.train_steps_ = std::stoll(a.meta_or("train_steps", "0"));
  codec.params_.set_adam_step_count(std::stoll(a.meta_or("adam_steps", "0")));
  return codec;
}

CodecTrainLog train_codec(Codec& codec, const std::vector<ManifestEntry>& manifest,
                          int epochs, double lr, uint64_t seed, double segment_s,
                          float commit_weight) {
  if (manifest.empty()) throw std::invalid_argument("train_codec: empty dataset");
  if (epochs < 1) throw std::invalid_argument("train_codec: epochs must be >= 1");
  const int hop = codec.config().hop();
  const int64_t segment =
      static_cast<int64_t>(std::llround(segment_s * codec.config().sample_rate));
  if (segment < hop || segment % hop != 0)
    throw std::invalid_argument("train_codec: segment samples must be a positive hop multiple");

  // The codec is trained on every waveform of the set: sources and mixtures.
  std::vector<Waveform> waves;
  for (const ManifestEntry& e : manifest) {
    MixtureExample ex = load_example(e);
    waves.push_back(std::move(ex.mixture));
    for (Waveform& s : ex.sources) waves.push_back(std::move(s));
  }

  auto crop = [&](const Waveform& w, Rng& rng) {
    Waveform out;
    out.sample_rate = w.sample_rate;
    if (w.size() <= segment) {
      out.samples = w.samples;
      out.samples.resize(static_cast<size_t>(segment), 0.0f);
    } else {
      const int64_t off =
          static_cast<int64_t>(rng.below(static_cast<uint64_t>(w.size() - segment + 1)));
      out.samples.assign(w.samples.begin() + off, w.samples.begin() + off + segment);
    }
    return out;
  };

  if (!codec.quantizer_ready()) {
    // Data-dependent init: codebooks seeded from encoder outputs of a probe
    // subset.
    Rng init_rng(seed ^ 0x1717171717171717ull);
    std::vector<std::vector<float>> rows;
    const size_t probe = std::min<size_t>(waves.size(), 16);
    for (size_t i = 0; i < probe; ++i) {
      Embedding e = codec.encode(crop(waves[i], init_rng));
      const int64_t dim = e.channels();
      for (int64_t f = 0; f < e.frames(); ++f)
        rows.emplace_back(e.values.data.begin() + f * dim,
                          e.values.data.begin() + (f + 1) * dim);
    }
    codec.init_codebooks_from_rows(rows, init_rng);
  }

  AdamConfig adam;
  adam.lr = static_cast<float>(lr);
  const int batch_size = 2;

  CodecTrainLog log;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    Rng epoch_rng = Rng::from_keys(seed, 0xe90c4, static_cast<uint64_t>(epoch));
    std::vector<size_t> order(waves.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.below(i)]);

    double epoch_loss = 0.0;
    int64_t steps = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += batch_size) {
      const size_t bend = std::min(order.size(), b0 + batch_size);
      std::vector<std::vector<float>> grads;
      double batch_loss = 0.0;
      for (size_t bi = b0; bi < bend; ++bi) {
        const Waveform w = crop(waves[order[bi]], epoch_rng);
        ad::Tape t;
        BoundParams bound = bind_params(t, codec.params(), true);
        ad::Tape::Id wave = t.leaf({w.size(), 1},
                                   std::vector<float>(w.samples.begin(), w.samples.end()),
                                   false);
        ad::Tape::Id emb = codec.encode_on(t, bound, wave);
        Codec::QuantizeIds q = codec.quantize_on(t, emb);
        ad::Tape::Id rec = codec.decode_on(t, bound, q.quantized);
        ad::Tape::Id fit = nn::si_sdr_soft(t, rec, wave, 1e-8f);
        ad::Tape::Id loss = t.add(t.scale(fit, -1.0f), t.scale(q.commit_loss, commit_weight));
        t.backward(loss);
        batch_loss += t.scalar_val(loss);
        accumulate_grads(grads, collect_grads(t, codec.params(), bound),
                         1.0f / static_cast<float>(bend - b0));
        codec.ema_update(q, epoch_rng);
      }
      codec.params().adam_step(grads, adam);
      batch_loss /= static_cast<double>(bend - b0);
      log.step_losses.push_back(static_cast<float>(batch_loss));
      epoch_loss += batch_loss;
      ++steps;
    }
    log.epoch_losses.push_back(static_cast<float>(epoch_loss / std::max<int64_t>(steps, 1)));
  }
  return log;
}

}  // namespace codecsep
