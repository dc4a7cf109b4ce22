#include "codecsep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "codecsep/metrics.hpp"
#include "codecsep/nn.hpp"

namespace codecsep {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

Waveform crop_at(const Waveform& w, int64_t offset, int64_t length) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(static_cast<size_t>(length), 0.0f);
  const int64_t avail = std::min<int64_t>(length, w.size() - offset);
  for (int64_t i = 0; i < avail; ++i)
    out.samples[static_cast<size_t>(i)] = w.samples[static_cast<size_t>(offset + i)];
  return out;
}

void add_value(MetricAggregate& agg, const metrics::MetricValue& v) {
  if (v.finite) {
    agg.mean += v.value_db;  // finalized by finish()
    ++agg.used;
  } else {
    ++agg.capped;
  }
}

void finish(MetricAggregate& agg) {
  if (agg.used > 0) agg.mean /= agg.used;
}

}  // namespace

std::string to_string(TrainTarget t) {
  return t == TrainTarget::GroundTruth ? "ground-truth" : "transmission";
}

std::string to_string(Comparison c) {
  return c == Comparison::GroundTruth ? "ground-truth" : "transmission";
}

TrainTarget train_target_from_string(const std::string& s) {
  if (s == "ground-truth") return TrainTarget::GroundTruth;
  if (s == "transmission") return TrainTarget::Transmission;
  throw std::invalid_argument("unknown training target '" + s +
                              "' (ground-truth|transmission)");
}

Comparison comparison_from_string(const std::string& s) {
  if (s == "ground-truth") return Comparison::GroundTruth;
  if (s == "transmission") return Comparison::Transmission;
  throw std::invalid_argument("unknown comparison '" + s + "' (ground-truth|transmission)");
}

void TrainConfig::validate(int codec_hop, int sample_rate) const {
  if (lr <= 0) throw std::invalid_argument("train: lr must be > 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (lr_halve_patience < 1) throw std::invalid_argument("train: lr_halve_patience must be >= 1");
  if (lr_schedule_start_epoch < 1)
    throw std::invalid_argument("train: lr_schedule_start_epoch must be >= 1");
  const double exact = segment_s * sample_rate;
  const int64_t segment = static_cast<int64_t>(std::llround(exact));
  if (segment < 1 || std::abs(exact - static_cast<double>(segment)) > 1e-9)
    throw std::invalid_argument("train: segment_s * sample_rate must be a positive integer");
  if (segment % codec_hop != 0)
    throw std::invalid_argument("train: segment samples must be divisible by the codec hop");
}

void apply_train_config_line(TrainConfig& cfg, const std::string& raw) {
  std::string line = raw;
  const size_t hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return;
  const size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: expected 'key = value', got '" + raw + "'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));

  if (key == "target") cfg.target = train_target_from_string(value);
  else if (key == "rvq_in_loop") cfg.rvq_in_loop = parse_bool(value, key);
  else if (key == "lr") cfg.lr = std::stod(value);
  else if (key == "lr_halve_patience") cfg.lr_halve_patience = std::stoi(value);
  else if (key == "lr_schedule_start_epoch") cfg.lr_schedule_start_epoch = std::stoi(value);
  else if (key == "epochs") cfg.epochs = std::stoi(value);
  else if (key == "batch_size") cfg.batch_size = std::stoi(value);
  else if (key == "segment_s") cfg.segment_s = std::stod(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig parse_train_config_file(const std::string& path, TrainConfig defaults) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  while (std::getline(in, line)) apply_train_config_line(defaults, line);
  return defaults;
}

void LrScheduler::observe(int epoch, double val_score) {
  if (!has_best_ || val_score > best_) {
    best_ = val_score;
    has_best_ = true;
    bad_epochs_ = 0;
    return;
  }
  if (epoch < start_epoch_) return;  // halving disabled before the start epoch
  if (++bad_epochs_ >= patience_) {
    lr_ /= 2.0;
    bad_epochs_ = 0;
  }
}

void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("epoch log: cannot open " + path);
  out << "epoch,train_loss,val_primary,val_secondary,lr\n";
  for (const EpochLog& e : log)
    out << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_primary) << ','
        << fmt(e.val_secondary) << ',' << fmt(e.lr) << '\n';
}

namespace {

// Shared by evaluate() and the per-epoch validation: metrics for
// precomputed estimates against one comparison axis.
EvalSummary evaluate_loaded(const std::vector<MixtureExample>& examples,
                            const std::vector<std::vector<Waveform>>& estimates,
                            Comparison comparison, const Codec* codec, bool rvq_in_loop) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty manifest");
  if (comparison == Comparison::Transmission && codec == nullptr)
    throw std::invalid_argument("evaluate: transmission comparison requires a codec");

  EvalSummary summary;
  summary.comparison = comparison;
  summary.num_examples = static_cast<int>(examples.size());

  for (size_t ei = 0; ei < examples.size(); ++ei) {
    const MixtureExample& ex = examples[ei];
    const size_t n_src = ex.sources.size();
    if (estimates[ei].size() != n_src)
      throw std::invalid_argument("evaluate: estimate count mismatch for example " + ex.id);

    // References on the comparison axis.
    std::vector<Waveform> refs;
    refs.reserve(n_src);
    for (const Waveform& s : ex.sources)
      refs.push_back(comparison == Comparison::Transmission ? codec->transmit(s, rvq_in_loop)
                                                            : s);

    // Estimates carry hop padding; truncate to the reference length.
    std::vector<Waveform> est = estimates[ei];
    for (Waveform& e : est) {
      if (e.samples.size() < refs[0].samples.size())
        throw std::invalid_argument("evaluate: estimate shorter than reference in " + ex.id);
      e.samples.resize(refs[0].samples.size());
    }

    const metrics::MetricFn pit_metric = [](const Waveform& a, const Waveform& b) {
      return metrics::si_sdr(a, b);
    };
    const metrics::PitAssignment assign = metrics::pit_assign(pit_metric, est, refs);

    EvalRow row;
    row.id = ex.id;
    row.permutation = assign.permutation;
    for (size_t i = 0; i < n_src; ++i) {
      const Waveform& e = est[i];
      const Waveform& r = refs[static_cast<size_t>(assign.permutation[i])];
      const metrics::MetricValue v_si = metrics::si_sdr(e, r);
      const metrics::MetricValue v_sii = metrics::improvement(
          [](const Waveform& x, const Waveform& y) { return metrics::si_sdr(x, y); }, e, r,
          ex.mixture);
      const metrics::MetricValue v_sd = metrics::sdr(e, r);
      const metrics::MetricValue v_sdi = metrics::improvement(
          [](const Waveform& x, const Waveform& y) { return metrics::sdr(x, y); }, e, r,
          ex.mixture);
      row.si_sdr.push_back(v_si.value_db);
      row.si_sdri.push_back(v_sii.value_db);
      row.sdr.push_back(v_sd.value_db);
      row.sdri.push_back(v_sdi.value_db);
      row.finite.push_back(v_si.finite);
      add_value(summary.si_sdr, v_si);
      add_value(summary.si_sdri, v_sii);
      add_value(summary.sdr, v_sd);
      add_value(summary.sdri, v_sdi);
    }
    summary.rows.push_back(std::move(row));
  }
  finish(summary.si_sdr);
  finish(summary.si_sdri);
  finish(summary.sdr);
  finish(summary.sdri);
  return summary;
}

}  // namespace

EvalSummary evaluate(const std::vector<ManifestEntry>& manifest, const SeparateFn& separate,
                     Comparison comparison, const Codec* codec, bool rvq_in_loop) {
  if (manifest.empty()) throw std::invalid_argument("evaluate: empty manifest");
  std::vector<MixtureExample> examples;
  std::vector<std::vector<Waveform>> estimates;
  examples.reserve(manifest.size());
  for (const ManifestEntry& e : manifest) {
    examples.push_back(load_example(e));
    estimates.push_back(separate(examples.back().mixture));
  }
  return evaluate_loaded(examples, estimates, comparison, codec, rvq_in_loop);
}

std::string render_eval_summary(const EvalSummary& s) {
  const bool c = s.comparison == Comparison::Transmission;
  auto name = [&](const char* base) { return std::string(c ? "c" : "") + base; };
  std::ostringstream os;
  os << "comparison: " << to_string(s.comparison) << " ("
     << (c ? "references are codec transmissions" : "references are clean sources") << ")\n";
  os << "examples: " << s.num_examples << "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %12s %8s %8s\n", "metric", "mean_db", "used",
                "capped");
  os << line;
  auto row = [&](const std::string& metric, const MetricAggregate& a) {
    std::snprintf(line, sizeof(line), "%-10s %12.3f %8d %8d\n", metric.c_str(), a.mean, a.used,
                  a.capped);
    os << line;
  };
  row(name("SI-SDR"), s.si_sdr);
  row(name("SI-SDRi"), s.si_sdri);
  row(name("SDR"), s.sdr);
  row(name("SDRi"), s.sdri);
  return os.str();
}

void write_eval_csv(const EvalSummary& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("eval csv: cannot open " + path);
  const std::string p = s.comparison == Comparison::Transmission ? "c" : "";
  out << "id,source,ref," << p << "si_sdr," << p << "si_sdri," << p << "sdr," << p
      << "sdri,finite\n";
  for (const EvalRow& r : s.rows)
    for (size_t i = 0; i < r.si_sdr.size(); ++i)
      out << r.id << ',' << i << ',' << r.permutation[i] << ',' << fmt(r.si_sdr[i]) << ','
          << fmt(r.si_sdri[i]) << ',' << fmt(r.sdr[i]) << ',' << fmt(r.sdri[i]) << ','
          << (r.finite[i] ? 1 : 0) << '\n';
}

void save_separator_checkpoint(const Separator& sep, const TrainConfig& cfg, int epoch,
                               double best_val, const std::string& path) {
  TensorArchive a = sep.to_archive();
  a.set_meta("target", to_string(cfg.target));
  a.set_meta("rvq_in_loop", cfg.rvq_in_loop ? "1" : "0");
  a.set_meta("lr", fmt(cfg.lr));
  a.set_meta("lr_halve_patience", std::to_string(cfg.lr_halve_patience));
  a.set_meta("lr_schedule_start_epoch", std::to_string(cfg.lr_schedule_start_epoch));
  a.set_meta("epochs", std::to_string(cfg.epochs));
  a.set_meta("batch_size", std::to_string(cfg.batch_size));
  a.set_meta("segment_s", fmt(cfg.segment_s));
  a.set_meta("seed", std::to_string(cfg.seed));
  a.set_meta("epoch", std::to_string(epoch));
  a.set_meta("best_val", fmt(best_val));
  save_archive(a, path);
}

void save_codec_checkpoint(const Codec& codec, const std::string& path) {
  save_archive(codec.to_archive(), path);
}

TrainResult train_separator(Separator& sep, const Codec& codec,
                            const std::vector<ManifestEntry>& train_manifest,
                            const std::vector<ManifestEntry>& valid_manifest,
                            const TrainConfig& cfg) {
  cfg.validate(codec.config().hop(), codec.config().sample_rate);
  if (train_manifest.empty() || valid_manifest.empty())
    throw std::invalid_argument("train_separator: empty manifest");
  if (sep.config().codec_embedding_dim != codec.config().embedding_dim)
    throw std::invalid_argument("train_separator: separator/codec embedding dim mismatch");

  const int64_t segment =
      static_cast<int64_t>(std::llround(cfg.segment_s * codec.config().sample_rate));
  const int num_speakers = sep.config().num_speakers;

  std::vector<MixtureExample> train_examples, valid_examples;
  for (const ManifestEntry& e : train_manifest) train_examples.push_back(load_example(e));
  for (const ManifestEntry& e : valid_manifest) valid_examples.push_back(load_example(e));
  for (const MixtureExample& ex : train_examples)
    if (static_cast<int>(ex.sources.size()) != num_speakers)
      throw std::invalid_argument("train_separator: example " + ex.id + " has " +
                                  std::to_string(ex.sources.size()) + " sources, model expects " +
                                  std::to_string(num_speakers));

  LrScheduler sched(cfg.lr, cfg.lr_halve_patience, cfg.lr_schedule_start_epoch);
  AdamConfig adam;

  TrainResult result;
  std::vector<Param> best_params;
  int64_t best_adam_steps = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = Rng::from_keys(cfg.seed, 0x5e9, static_cast<uint64_t>(epoch));
    std::vector<size_t> order(train_examples.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.below(i)]);

    double epoch_loss = 0.0;
    int64_t num_batches = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
      const size_t bend = std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
      std::vector<std::vector<float>> grads;
      double batch_loss = 0.0;
      for (size_t bi = b0; bi < bend; ++bi) {
        const MixtureExample& ex = train_examples[order[bi]];
        const int64_t max_off = std::max<int64_t>(ex.mixture.size() - segment, 0);
        const int64_t off =
            max_off > 0 ? static_cast<int64_t>(epoch_rng.below(static_cast<uint64_t>(max_off + 1)))
                        : 0;
        const Waveform mix_seg = crop_at(ex.mixture, off, segment);
        std::vector<Waveform> src_segs;
        for (const Waveform& s : ex.sources) src_segs.push_back(crop_at(s, off, segment));

        try {
          ad::Tape t;
          BoundParams cb = bind_params(t, codec.params(), false);
          BoundParams sb = bind_params(t, sep.params(), true);
          ad::Tape::Id wave = t.leaf(
              {mix_seg.size(), 1},
              std::vector<float>(mix_seg.samples.begin(), mix_seg.samples.end()), false);
          ad::Tape::Id e = codec.encode_on(t, cb, wave);
          if (cfg.rvq_in_loop) e = codec.quantize_on(t, e).quantized;
          std::vector<ad::Tape::Id> outs = sep.separate_on(t, sb, e, sep.pe_rows(t, t.shape(e)[0]));

          std::vector<ad::Tape::Id> ests;
          for (ad::Tape::Id o : outs) ests.push_back(codec.decode_on(t, cb, o));

          std::vector<ad::Tape::Id> refs;
          for (const Waveform& s : src_segs) {
            const Waveform target = cfg.target == TrainTarget::Transmission
                                        ? codec.transmit(s, cfg.rvq_in_loop)
                                        : s;
            refs.push_back(t.leaf({target.size(), 1},
                                  std::vector<float>(target.samples.begin(),
                                                     target.samples.end()),
                                  false));
          }

          // PIT: pairwise differentiable SI-SDR, best permutation by value.
          std::vector<std::vector<ad::Tape::Id>> pair(num_speakers,
                                                      std::vector<ad::Tape::Id>(num_speakers));
          for (int i = 0; i < num_speakers; ++i)
            for (int j = 0; j < num_speakers; ++j)
              pair[i][j] = nn::si_sdr_soft(t, ests[static_cast<size_t>(i)],
                                           refs[static_cast<size_t>(j)], 1e-8f);

          std::vector<int> perm(static_cast<size_t>(num_speakers));
          std::iota(perm.begin(), perm.end(), 0);
          ad::Tape::Id best_score = -1;
          double best_value = 0.0;
          do {
            ad::Tape::Id acc = pair[0][static_cast<size_t>(perm[0])];
            for (int i = 1; i < num_speakers; ++i)
              acc = t.add(acc, pair[static_cast<size_t>(i)][static_cast<size_t>(perm[i])]);
            acc = t.scale(acc, 1.0f / static_cast<float>(num_speakers));
            const double v = t.scalar_val(acc);
            if (best_score < 0 || v > best_value) {
              best_score = acc;
              best_value = v;
            }
          } while (std::next_permutation(perm.begin(), perm.end()));

          ad::Tape::Id loss = t.scale(best_score, -1.0f);
          t.backward(loss);
          batch_loss += t.scalar_val(loss);
          accumulate_grads(grads, collect_grads(t, sep.params(), sb),
                           1.0f / static_cast<float>(bend - b0));
        } catch (const std::runtime_error& err) {
          throw std::runtime_error("train_separator: aborted at epoch " +
                                   std::to_string(epoch) + ", example '" + ex.id +
                                   "': " + err.what());
        }
      }
      adam.lr = static_cast<float>(sched.lr());
      sep.params().adam_step(grads, adam);
      batch_loss /= static_cast<double>(bend - b0);
      epoch_loss += batch_loss;
      ++num_batches;
    }

    // Validation on full (uncropped) examples, both comparison axes.
    std::vector<std::vector<Waveform>> val_estimates;
    for (const MixtureExample& ex : valid_examples)
      val_estimates.push_back(sep.separate_waveforms(codec, ex.mixture, cfg.rvq_in_loop));
    const EvalSummary gt =
        evaluate_loaded(valid_examples, val_estimates, Comparison::GroundTruth, &codec,
                        cfg.rvq_in_loop);
    const EvalSummary tr =
        evaluate_loaded(valid_examples, val_estimates, Comparison::Transmission, &codec,
                        cfg.rvq_in_loop);
    const double val_gt = gt.si_sdri.mean;
    const double val_tr = tr.si_sdri.mean;
    const double primary = cfg.target == TrainTarget::Transmission ? val_tr : val_gt;
    const double secondary = cfg.target == TrainTarget::Transmission ? val_gt : val_tr;

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / std::max<int64_t>(num_batches, 1);
    log.val_primary = primary;
    log.val_secondary = secondary;
    log.lr = sched.lr();
    result.log.push_back(log);

    if (result.log.size() == 1 || primary > result.best_val) {
      result.best_val = primary;
      result.best_epoch = epoch;
      best_params = sep.params().items();
      best_adam_steps = sep.params().adam_step_count();
    }
    sched.observe(epoch, primary);
  }

  if (!best_params.empty()) {
    sep.params().items() = best_params;
    sep.params().set_adam_step_count(best_adam_steps);
  }
  return result;
}

}  // namespace codecsep
