#include <doctest.h>

#include <cmath>

#include "codecsep/codec.hpp"
#include "codecsep/separator.hpp"
#include "support/helpers.hpp"

using namespace codecsep;
using test_support::random_wave;

namespace {

SeparatorConfig small_cfg() {
  SeparatorConfig cfg;
  cfg.codec_embedding_dim = 8;
  cfg.model_dim = 16;
  cfg.num_blocks = 2;
  cfg.num_heads = 2;
  cfg.ffn_dim = 32;
  cfg.max_frames = 64;
  return cfg;
}

Embedding random_embedding(Rng& rng, int64_t frames, int64_t channels) {
  Embedding e;
  e.values = ad::Tensor::zeros({frames, channels});
  for (float& v : e.values.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return e;
}

}  // namespace

TEST_CASE("config validation") {
  SeparatorConfig cfg = small_cfg();
  CHECK_NOTHROW(cfg.validate());
  cfg.model_dim = 15;  // not divisible by heads
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.num_speakers = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("presets") {
  const SeparatorConfig toy = SeparatorConfig::preset("toy", 64);
  CHECK(toy.model_dim == 64);
  CHECK(toy.num_blocks == 4);
  CHECK(toy.ffn_dim == 256);
  const SeparatorConfig paper = SeparatorConfig::preset("paper", 1024);
  CHECK(paper.model_dim == 256);
  CHECK(paper.num_blocks == 16);
  CHECK_THROWS_AS(SeparatorConfig::preset("huge", 64), std::invalid_argument);
}

TEST_CASE("separate shape contract") {
  Separator sep(small_cfg(), 1);
  Rng rng(2);
  const Embedding e = random_embedding(rng, 10, 8);
  const std::vector<Embedding> outs = sep.separate(e);
  REQUIRE(outs.size() == 2);
  for (const Embedding& o : outs) {
    CHECK(o.frames() == 10);
    CHECK(o.channels() == 8);
  }
}

TEST_CASE("speaker heads differ at random init") {
  Separator sep(small_cfg(), 3);
  Rng rng(4);
  const std::vector<Embedding> outs = sep.separate(random_embedding(rng, 6, 8));
  CHECK(outs[0].values.data != outs[1].values.data);
}

TEST_CASE("channel-dim mismatch and frame overflow are rejected") {
  Separator sep(small_cfg(), 5);
  Rng rng(6);
  CHECK_THROWS_AS(sep.separate(random_embedding(rng, 4, 9)), std::invalid_argument);
  CHECK_THROWS_WITH_AS(sep.separate(random_embedding(rng, 65, 8)),
                       doctest::Contains("chunked evaluation is unsupported"),
                       std::invalid_argument);
}

TEST_CASE("frame permutation equivariance with matching positional rows") {
  Separator sep(small_cfg(), 7);
  Rng rng(8);
  const int64_t T = 12, E = 8, d = 16;
  const Embedding e = random_embedding(rng, T, E);

  // Permutation: rotate by 5.
  std::vector<int64_t> perm(T);
  for (int64_t i = 0; i < T; ++i) perm[i] = (i + 5) % T;

  ad::Tape t1;
  BoundParams b1 = bind_params(t1, sep.params(), false);
  auto pe1 = sep.pe_rows(t1, T);
  auto out1 = sep.separate_on(t1, b1, t1.leaf(e.values, false), pe1);

  // Permuted input and identically permuted positional encodings.
  Embedding ep;
  ep.values = ad::Tensor::zeros({T, E});
  for (int64_t i = 0; i < T; ++i)
    for (int64_t c = 0; c < E; ++c)
      ep.values.data[i * E + c] = e.values.data[perm[i] * E + c];

  ad::Tape t2;
  BoundParams b2 = bind_params(t2, sep.params(), false);
  std::vector<float> pe_src(t1.val(pe1).begin(), t1.val(pe1).end());
  std::vector<float> pe_perm(static_cast<size_t>(T * d));
  for (int64_t i = 0; i < T; ++i)
    for (int64_t c = 0; c < d; ++c) pe_perm[i * d + c] = pe_src[perm[i] * d + c];
  auto out2 = sep.separate_on(t2, b2, t2.leaf(ep.values, false),
                              t2.constant({T, d}, pe_perm));

  for (size_t k = 0; k < out1.size(); ++k)
    for (int64_t i = 0; i < T; ++i)
      for (int64_t c = 0; c < E; ++c)
        CHECK(t2.val(out2[k])[i * E + c] ==
              doctest::Approx(t1.val(out1[k])[perm[i] * E + c]).epsilon(2e-3));
}

TEST_CASE("structure: final activation is snake and attention is global") {
  Separator sep(small_cfg(), 9);
  Rng rng(10);
  const int64_t T = 9;
  ad::Tape t;
  BoundParams b = bind_params(t, sep.params(), false);
  const Embedding e = random_embedding(rng, T, 8);
  auto outs = sep.separate_on(t, b, t.leaf(e.values, false), sep.pe_rows(t, T));

  for (auto id : outs) CHECK(std::string(t.node(id).op) == "snake");

  // Attention scores are softmaxed [T, T] matrices: full-sequence
  // attention, no chunking.
  int softmax_nodes = 0;
  for (size_t i = 0; i < t.num_nodes(); ++i) {
    const auto& n = t.node(static_cast<ad::Tape::Id>(i));
    if (std::string(n.op) == "softmax") {
      ++softmax_nodes;
      CHECK(n.shape == ad::Shape{T, T});
    }
  }
  CHECK(softmax_nodes == small_cfg().num_blocks * small_cfg().num_heads);
}

TEST_CASE("gradient flows back to the input projection") {
  Separator sep(small_cfg(), 11);
  Rng rng(12);
  ad::Tape t;
  BoundParams b = bind_params(t, sep.params(), true);
  const Embedding e = random_embedding(rng, 7, 8);
  auto outs = sep.separate_on(t, b, t.leaf(e.values, false), sep.pe_rows(t, 7));

  // SI-SDR-style random weighting over both heads.
  std::vector<float> w(7 * 8);
  for (float& v : w) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto loss = t.add(t.sum(t.mul(outs[0], t.constant({7, 8}, w))),
                    t.sum(t.mul(outs[1], t.constant({7, 8}, w))));
  t.backward(loss);

  double norm = 0.0;
  for (float g : t.grad(b[sep.params().index_of("in_proj.w")])) norm += std::abs(g);
  CHECK(norm > 0.0);
}

TEST_CASE("param_count matches layer arithmetic and the archive") {
  SeparatorConfig cfg = small_cfg();
  Separator sep(cfg, 13);

  const int64_t E = cfg.codec_embedding_dim, d = cfg.model_dim, f = cfg.ffn_dim;
  const int64_t per_block = 2 * d           // ln1
                            + 4 * (d * d + d)  // qkvo
                            + 2 * d            // ln2
                            + (d * f + f) + (f * d + d);
  const int64_t expected = (E * d + d) + cfg.num_blocks * per_block + 2 * d +
                           (d * cfg.num_speakers * E + cfg.num_speakers * E);
  CHECK(sep.param_count() == expected);

  // Doubling the depth strictly increases the count.
  SeparatorConfig deeper = cfg;
  deeper.num_blocks *= 2;
  CHECK(Separator(deeper, 13).param_count() > sep.param_count());

  // Consistency with the serialized tensor list (model tensors only).
  const TensorArchive a = sep.to_archive();
  int64_t total = 0;
  for (const auto& [name, tensor] : a.tensors)
    if (name.rfind("adam.", 0) != 0) total += tensor.size();
  CHECK(total == sep.param_count());
}

TEST_CASE("separate_waveforms pipeline shapes and determinism") {
  Codec codec(CodecConfig{}, 14);
  Rng rng(15);
  codec.init_codebooks_random(rng);
  Separator sep(SeparatorConfig::preset("toy", 64), 16);

  const Waveform mix = random_wave(rng, 700);  // forces hop padding to 704
  const std::vector<Waveform> outs = sep.separate_waveforms(codec, mix, false);
  REQUIRE(outs.size() == 2);
  for (const Waveform& o : outs) CHECK(o.size() == 704);

  const std::vector<Waveform> again = sep.separate_waveforms(codec, mix, false);
  for (size_t i = 0; i < outs.size(); ++i) CHECK(outs[i].samples == again[i].samples);

  // RVQ-in-loop path runs and differs from the continuous path.
  const std::vector<Waveform> rvq_outs = sep.separate_waveforms(codec, mix, true);
  CHECK(rvq_outs[0].samples != outs[0].samples);
}

TEST_CASE("separator checkpoint round trip is bit-exact on a probe") {
  test_support::TempDir dir;
  Separator sep(small_cfg(), 17);
  const std::string path = dir.file("sep.ntar");
  save_archive(sep.to_archive(), path);
  const Separator loaded = Separator::from_archive(load_archive(path));

  Rng rng(18);
  const Embedding e = random_embedding(rng, 11, 8);
  const std::vector<Embedding> a = sep.separate(e);
  const std::vector<Embedding> b = loaded.separate(e);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].values.data == b[i].values.data);
}
