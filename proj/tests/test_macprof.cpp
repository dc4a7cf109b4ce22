#include <doctest.h>

#include <cstdint>

#include "codecsep/macprof.hpp"

using namespace codecsep;
using namespace codecsep::macprof;

namespace {

// Instrumented naive reference implementations: actually run the loops and
// count every multiply.
int64_t counted_linear(int64_t n, int64_t in_dim, int64_t out_dim) {
  int64_t mults = 0;
  for (int64_t p = 0; p < n; ++p)
    for (int64_t o = 0; o < out_dim; ++o)
      for (int64_t i = 0; i < in_dim; ++i) ++mults;
  return mults;
}

int64_t counted_conv1d(int64_t out_len, int64_t in_ch, int64_t out_ch, int64_t kernel) {
  int64_t mults = 0;
  for (int64_t t = 0; t < out_len; ++t)
    for (int64_t co = 0; co < out_ch; ++co)
      for (int64_t k = 0; k < kernel; ++k)
        for (int64_t ci = 0; ci < in_ch; ++ci) ++mults;
  return mults;
}

int64_t counted_conv1d_transposed(int64_t in_len, int64_t in_ch, int64_t out_ch,
                                  int64_t kernel) {
  int64_t mults = 0;
  for (int64_t t = 0; t < in_len; ++t)
    for (int64_t ci = 0; ci < in_ch; ++ci)
      for (int64_t k = 0; k < kernel; ++k)
        for (int64_t co = 0; co < out_ch; ++co) ++mults;
  return mults;
}

int64_t counted_attention(int64_t L, int64_t d, int64_t heads) {
  const int64_t dh = d / heads;
  int64_t mults = 0;
  mults += 4 * counted_linear(L, d, d);  // q, k, v, out projections
  for (int64_t h = 0; h < heads; ++h) {
    mults += counted_linear(L, dh, L);  // scores: [L,dh] x [dh,L]
    mults += counted_linear(L, L, dh);  // weighted sum: [L,L] x [L,dh]
  }
  return mults;
}

}  // namespace

TEST_CASE("formula counts equal instrumented naive counts") {
  CHECK(macs_linear(1, 1, 1) == 1);
  CHECK(macs_linear(0, 8, 8) == 0);
  CHECK(macs_conv1d(1, 1, 1, 1) == 1);

  struct LinShape { int64_t n, i, o; };
  for (const auto& s : {LinShape{10, 64, 128}, LinShape{3, 5, 7}, LinShape{1, 17, 2}}) {
    CHECK(macs_linear(s.n, s.i, s.o) == counted_linear(s.n, s.i, s.o));
  }
  CHECK(macs_linear(10, 64, 128) == 81920);

  struct ConvShape { int64_t l, ci, co, k; };
  for (const auto& s :
       {ConvShape{100, 16, 32, 7}, ConvShape{5, 2, 3, 4}, ConvShape{9, 1, 8, 3}}) {
    CHECK(macs_conv1d(s.l, s.ci, s.co, s.k) == counted_conv1d(s.l, s.ci, s.co, s.k));
    CHECK(macs_conv1d_transposed(s.l, s.ci, s.co, s.k) ==
          counted_conv1d_transposed(s.l, s.ci, s.co, s.k));
    // Adjoint symmetry: same parameters, same count.
    CHECK(macs_conv1d(s.l, s.ci, s.co, s.k) == macs_conv1d_transposed(s.l, s.ci, s.co, s.k));
  }
  CHECK(macs_conv1d(100, 16, 32, 7) == 358400);

  for (int64_t heads : {1, 2, 4}) {
    CHECK(macs_attention(8, 8, heads) == counted_attention(8, 8, heads));
    CHECK(macs_attention(50, 64, heads) == counted_attention(50, 64, heads));
  }
  // Head count cancels.
  CHECK(macs_attention(50, 64, 1) == macs_attention(50, 64, 4));
  CHECK(macs_attention(1, 16, 4) == 4 * 16 * 16 + 2 * 16);
  CHECK(macs_attention(50, 64, 4) == 1139200);
}

TEST_CASE("profile totals equal per-layer sums and a brute-force mini model") {
  SeparatorConfig cfg;
  cfg.codec_embedding_dim = 4;
  cfg.model_dim = 4;
  cfg.num_blocks = 2;
  cfg.num_heads = 2;
  cfg.ffn_dim = 8;
  const int64_t L = 8;
  const MacReport r = profile_separator(cfg, L);

  int64_t sum = 0;
  for (const LayerMacs& l : r.layers) sum += l.macs;
  CHECK(r.total() == sum);  // additivity

  // Independent count of the whole mini model.
  int64_t expect = counted_linear(L, 4, 4);  // in_proj
  for (int b = 0; b < 2; ++b) {
    expect += counted_attention(L, 4, 2);
    expect += counted_linear(L, 4, 8) + counted_linear(L, 8, 4);
  }
  expect += counted_linear(L, 4, 2 * 4);  // out_proj
  CHECK(r.total() == expect);
}

TEST_CASE("MACs are monotone in sequence length, width and depth") {
  SeparatorConfig cfg = SeparatorConfig::preset("toy", 64);
  const int64_t base = profile_separator(cfg, 100).total();
  CHECK(profile_separator(cfg, 200).total() > base);

  SeparatorConfig wider = cfg;
  wider.model_dim *= 2;
  wider.ffn_dim *= 2;
  CHECK(profile_separator(wider, 100).total() > base);

  SeparatorConfig deeper = cfg;
  deeper.num_blocks += 1;
  CHECK(profile_separator(deeper, 100).total() > base);
}

TEST_CASE("codec profile walks encoder, quantizer and decoder") {
  const MacReport r = profile_codec(CodecConfig::preset("toy"), 2.0, 8000);
  CHECK(r.layers.size() == 3 + 1 + 3 + 1);  // enc stages, rvq, dec stages, out_proj
  // Frame rate at the bottleneck: 16000 / 64 = 250 frames.
  const int64_t rvq_macs = 250LL * 4 * 256 * 64;
  bool found = false;
  for (const LayerMacs& l : r.layers)
    if (l.kind == "vq_scan") {
      CHECK(l.macs == rvq_macs);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("pipeline profiles the separator at the codec frame rate") {
  const CodecConfig cc = CodecConfig::preset("toy");
  const SeparatorConfig sc = SeparatorConfig::preset("toy", cc.embedding_dim);
  const MacReport r = profile(ProfileModel::Pipeline, cc, sc, 2.0, 8000);
  // Attention rows must use L = 16000/64 = 250, not 16000.
  for (const LayerMacs& l : r.layers)
    if (l.kind == "attention") CHECK(l.macs == macs_attention(250, sc.model_dim, sc.num_heads));
}

TEST_CASE("compare: identity, empty baseline, and the compression ratio") {
  const CodecConfig cc = CodecConfig::preset("paper");
  const SeparatorConfig sc = SeparatorConfig::preset("paper", cc.embedding_dim);
  const MacReport codec_rate = profile(ProfileModel::Pipeline, cc, sc, 2.0, 8000);

  SUBCASE("identical reports have ratio 1") {
    const CompareTable t = compare(codec_rate, codec_rate);
    CHECK(t.total_ratio == doctest::Approx(1.0));
    for (const CompareRow& row : t.per_kind) CHECK(row.ratio == doctest::Approx(1.0));
  }
  SUBCASE("empty baseline is an error") {
    MacReport empty;
    CHECK_THROWS_WITH_AS(compare(codec_rate, empty), "compare: empty baseline",
                         std::invalid_argument);
  }
  SUBCASE("paper-parity config: waveform rate vs codec rate exceeds 50x") {
    // 2 s at 8 kHz, hop 160: L drops from 16000 to 100. The quadratic
    // attention term drives the reduction.
    const MacReport wave_rate = profile_separator(sc, 16000);
    const CompareTable t = compare(wave_rate, codec_rate);
    CHECK(t.total_ratio > 50.0);
  }
}

TEST_CASE("render helpers produce aligned text and csv") {
  const MacReport r = profile_codec(CodecConfig::preset("toy"), 1.0, 8000);
  const std::string table = render_table(r);
  CHECK(table.find("total") != std::string::npos);
  CHECK(table.find("GMACs") != std::string::npos);
  const std::string csv = render_csv(r);
  CHECK(csv.find("layer,kind,in_shape,out_shape,macs") == 0);
}
