#include <doctest.h>

#include <cmath>
#include <fstream>

#include "codecsep/codec.hpp"
#include "codecsep/nn.hpp"
#include "codecsep/separator.hpp"
#include "codecsep/trainer.hpp"
#include "support/helpers.hpp"

using namespace codecsep;
using test_support::TempDir;
using test_support::random_wave;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small trained-free setup shared by trainer tests: toy codec with random
// codebooks plus a tiny separator.
struct TinySystem {
  TinySystem() : codec(CodecConfig{}, 21), sep(make_sep_cfg(), 22) {
    Rng rng(23);
    codec.init_codebooks_random(rng);
  }
  static SeparatorConfig make_sep_cfg() {
    SeparatorConfig cfg;
    cfg.codec_embedding_dim = 64;
    cfg.model_dim = 16;
    cfg.num_blocks = 1;
    cfg.num_heads = 2;
    cfg.ffn_dim = 32;
    return cfg;
  }
  Codec codec;
  Separator sep;
};

std::string make_dataset(const TempDir& dir, uint64_t seed, int num,
                         const std::string& name) {
  SynthSpec spec;
  spec.num_examples = num;
  spec.seed = seed;
  return synth_dataset(spec, dir.file(name));
}

}  // namespace

TEST_CASE("lr scheduler follows the patience rule") {
  // Frozen validation score, start epoch 5, patience 2: the halved rate is
  // first used at epoch 7, then halves again every 2 epochs.
  LrScheduler sched(1.0, 2, 5);
  std::vector<double> trace;
  for (int epoch = 1; epoch <= 11; ++epoch) {
    trace.push_back(sched.lr());
    sched.observe(epoch, 0.0);
  }
  CHECK(trace == std::vector<double>{1, 1, 1, 1, 1, 1, 0.5, 0.5, 0.25, 0.25, 0.125});
}

TEST_CASE("lr scheduler resets patience on improvement") {
  LrScheduler sched(1.0, 2, 5);
  double score = 0.0;
  for (int epoch = 1; epoch <= 5; ++epoch) sched.observe(epoch, score);
  CHECK(sched.lr() == 1.0);      // one bad epoch so far (epoch 5)
  sched.observe(6, 1.0);         // improvement resets the counter
  CHECK(sched.lr() == 1.0);
  sched.observe(7, 0.5);
  sched.observe(8, 0.5);
  CHECK(sched.lr() == 0.5);      // two bad epochs after the reset
}

TEST_CASE("train config file parsing") {
  TempDir dir;
  const std::string path = dir.file("train.cfg");
  std::ofstream(path) << "# comment line\n"
                      << "target = ground-truth\n"
                      << "rvq_in_loop = on\n"
                      << "lr = 3e-4  # inline comment\n"
                      << "epochs = 7\n"
                      << "segment_s = 0.5\n"
                      << "seed = 99\n";
  const TrainConfig cfg = parse_train_config_file(path);
  CHECK(cfg.target == TrainTarget::GroundTruth);
  CHECK(cfg.rvq_in_loop);
  CHECK(cfg.lr == doctest::Approx(3e-4));
  CHECK(cfg.epochs == 7);
  CHECK(cfg.segment_s == doctest::Approx(0.5));
  CHECK(cfg.seed == 99);

  TrainConfig c;
  CHECK_THROWS_AS(apply_train_config_line(c, "unknown_key = 1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_train_config_line(c, "rvq_in_loop = maybe"), std::invalid_argument);
  CHECK_THROWS_AS(apply_train_config_line(c, "no equals sign"), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate(64, 8000));
  cfg.segment_s = 0.33;  // 2640 samples, not a hop multiple
  CHECK_THROWS_AS(cfg.validate(64, 8000), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(64, 8000), std::invalid_argument);
}

TEST_CASE("NTAR archive round trip and error paths") {
  TempDir dir;
  TensorArchive a;
  a.add_tensor("alpha", ad::Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  a.add_tensor("beta", ad::Tensor({4}, {-1, 0, 1, 2}));
  a.set_meta("kind", "codec");
  a.set_meta("note", "round trip");

  const std::string path = dir.file("a.ntar");
  save_archive(a, path);
  const TensorArchive b = load_archive(path);
  REQUIRE(b.tensors.size() == 2);
  CHECK(b.tensors[0].first == "alpha");
  CHECK(b.tensor("alpha").shape == ad::Shape{2, 3});
  CHECK(b.tensor("alpha").data == a.tensor("alpha").data);
  CHECK(b.tensor("beta").data == a.tensor("beta").data);
  CHECK(b.meta("kind") == "codec");
  CHECK(b.meta("note") == "round trip");

  SUBCASE("corrupt magic") {
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream(dir.file("bad.ntar"), std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_archive(dir.file("bad.ntar")), doctest::Contains("bad magic"),
                         std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(dir.file("trunc.ntar"), std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_archive(dir.file("trunc.ntar")), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("zero tensors is a valid archive; models reject it at bind time") {
    TensorArchive empty;
    empty.set_meta("kind", "codec");
    empty.set_meta("sample_rate", "8000");
    empty.set_meta("strides", "4,4,4");
    empty.set_meta("channels", "16,32,64");
    empty.set_meta("embedding_dim", "64");
    empty.set_meta("num_codebooks", "4");
    empty.set_meta("codebook_size", "256");
    empty.set_meta("kernel_size", "7");
    const std::string epath = dir.file("empty.ntar");
    save_archive(empty, epath);
    const TensorArchive loaded = load_archive(epath);
    CHECK(loaded.tensors.empty());
    CHECK_THROWS_WITH_AS(Codec::from_archive(loaded), doctest::Contains("no tensors"),
                         std::runtime_error);
  }
}

TEST_CASE("evaluate: mixture estimates give exactly zero improvement") {
  TempDir dir;
  const auto manifest = read_manifest(make_dataset(dir, 31, 4, "data"));
  const SeparateFn stub = [](const Waveform& mix) {
    return std::vector<Waveform>{mix, mix};
  };
  const EvalSummary s = evaluate(manifest, stub, Comparison::GroundTruth, nullptr, false);
  CHECK(s.num_examples == 4);
  CHECK(s.si_sdri.mean == 0.0);
  CHECK(s.sdri.mean == 0.0);
  CHECK(s.si_sdri.capped == 0);
}

TEST_CASE("evaluate: perfect estimates are capped and excluded from means") {
  TempDir dir;
  const auto manifest = read_manifest(make_dataset(dir, 32, 3, "data"));
  std::vector<MixtureExample> loaded;
  for (const auto& e : manifest) loaded.push_back(load_example(e));

  size_t next = 0;
  const SeparateFn oracle_stub = [&](const Waveform&) {
    const MixtureExample& ex = loaded[next++];
    return std::vector<Waveform>{ex.sources[0], ex.sources[1]};
  };
  const EvalSummary s = evaluate(manifest, oracle_stub, Comparison::GroundTruth, nullptr,
                                 false);
  CHECK(s.si_sdr.capped == 6);  // every (example, source) pair
  CHECK(s.si_sdr.used == 0);
}

TEST_CASE("evaluate rejects an empty manifest") {
  const SeparateFn stub = [](const Waveform& m) { return std::vector<Waveform>{m, m}; };
  CHECK_THROWS_AS(evaluate({}, stub, Comparison::GroundTruth, nullptr, false),
                  std::invalid_argument);
}

TEST_CASE("PIT loss is the max over fixed permutations") {
  TinySystem sys;
  Rng rng(41);
  const Waveform mix = random_wave(rng, 512);
  std::vector<Waveform> refs{random_wave(rng, 512), random_wave(rng, 512)};

  ad::Tape t;
  BoundParams cb = bind_params(t, sys.codec.params(), false);
  BoundParams sb = bind_params(t, sys.sep.params(), true);
  auto wave = t.leaf({512, 1}, std::vector<float>(mix.samples.begin(), mix.samples.end()),
                     false);
  auto e = sys.codec.encode_on(t, cb, wave);
  auto outs = sys.sep.separate_on(t, sb, e, sys.sep.pe_rows(t, t.shape(e)[0]));
  std::vector<ad::Tape::Id> ests;
  for (auto o : outs) ests.push_back(sys.codec.decode_on(t, cb, o));

  std::vector<ad::Tape::Id> ref_ids;
  for (const Waveform& r : refs)
    ref_ids.push_back(
        t.leaf({512, 1}, std::vector<float>(r.samples.begin(), r.samples.end()), false));

  const double s00 = t.scalar_val(nn::si_sdr_soft(t, ests[0], ref_ids[0], 1e-8f));
  const double s11 = t.scalar_val(nn::si_sdr_soft(t, ests[1], ref_ids[1], 1e-8f));
  const double s01 = t.scalar_val(nn::si_sdr_soft(t, ests[0], ref_ids[1], 1e-8f));
  const double s10 = t.scalar_val(nn::si_sdr_soft(t, ests[1], ref_ids[0], 1e-8f));
  const double pit = std::max(0.5 * (s00 + s11), 0.5 * (s01 + s10));
  CHECK(pit >= 0.5 * (s00 + s11));
  CHECK(pit >= 0.5 * (s01 + s10));
}

TEST_CASE("train_separator smoke run: frozen codec, recorded validation, determinism") {
  TempDir dir;
  const auto train = read_manifest(make_dataset(dir, 51, 4, "train"));
  const auto valid = read_manifest(make_dataset(dir, 52, 2, "valid"));

  TrainConfig cfg;
  cfg.target = TrainTarget::GroundTruth;
  cfg.rvq_in_loop = false;
  cfg.epochs = 2;
  cfg.lr = 1e-3;
  cfg.seed = 7;

  TinySystem sys;
  std::vector<float> codec_bytes_before;
  for (const Param& p : sys.codec.params().items())
    codec_bytes_before.insert(codec_bytes_before.end(), p.value.begin(), p.value.end());

  const TrainResult r1 = train_separator(sys.sep, sys.codec, train, valid, cfg);
  REQUIRE(r1.log.size() == 2);  // validation metric recorded each epoch
  for (const EpochLog& e : r1.log) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_primary));
    CHECK(std::isfinite(e.val_secondary));
  }

  std::vector<float> codec_bytes_after;
  for (const Param& p : sys.codec.params().items())
    codec_bytes_after.insert(codec_bytes_after.end(), p.value.begin(), p.value.end());
  CHECK(codec_bytes_before == codec_bytes_after);  // frozen codec guarantee

  // Same seed, fresh model: identical epoch logs, identical CSV bytes.
  TinySystem sys2;
  const TrainResult r2 = train_separator(sys2.sep, sys2.codec, train, valid, cfg);
  const std::string csv1 = dir.file("log1.csv");
  const std::string csv2 = dir.file("log2.csv");
  write_epoch_log(r1.log, csv1);
  write_epoch_log(r2.log, csv2);
  CHECK(slurp(csv1) == slurp(csv2));

  // Checkpoint round trip via the trainer-side writer.
  const std::string ckpt = dir.file("sep.ntar");
  save_separator_checkpoint(sys.sep, cfg, r1.best_epoch, r1.best_val, ckpt);
  const TensorArchive a = load_archive(ckpt);
  CHECK(a.meta("target") == "ground-truth");
  CHECK(a.meta("epoch") == std::to_string(r1.best_epoch));
  const Separator loaded = Separator::from_archive(a);
  CHECK(loaded.param_count() == sys.sep.param_count());
}

TEST_CASE("train_separator rejects empty manifests") {
  TinySystem sys;
  TrainConfig cfg;
  CHECK_THROWS_AS(train_separator(sys.sep, sys.codec, {}, {}, cfg), std::invalid_argument);
}
