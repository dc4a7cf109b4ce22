// codecsep: dataset synthesis, codec/separator training, evaluation and MAC
// profiling in one binary. Exit codes: 0 ok, 1 usage error, 2 data/model
// error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "codecsep/codec.hpp"
#include "codecsep/grad_check.hpp"
#include "codecsep/macprof.hpp"
#include "codecsep/separator.hpp"
#include "codecsep/synth.hpp"
#include "codecsep/trainer.hpp"
#include "codecsep/wav_io.hpp"

namespace cs = codecsep;

namespace {

void print_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "resolved config:\n";
  for (const auto& [k, v] : kv) std::cout << "  " << k << " = " << v << "\n";
  std::cout << std::flush;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct SynthArgs {
  std::string out;
  int num = 8;
  int speakers = 2;
  double duration = 1.0;
  int sr = 8000;
  double snr_low = 0.0;
  double snr_high = 5.0;
  uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  cs::SynthSpec spec;
  spec.num_examples = a.num;
  spec.num_speakers = a.speakers;
  spec.duration_s = a.duration;
  spec.sample_rate = a.sr;
  spec.snr_low_db = a.snr_low;
  spec.snr_high_db = a.snr_high;
  spec.seed = a.seed;
  print_config({{"out", a.out},
                {"num", std::to_string(a.num)},
                {"speakers", std::to_string(a.speakers)},
                {"duration", fmt(a.duration)},
                {"sr", std::to_string(a.sr)},
                {"snr_low", fmt(a.snr_low)},
                {"snr_high", fmt(a.snr_high)},
                {"seed", std::to_string(a.seed)}});
  const std::string manifest = cs::synth_dataset(spec, a.out);
  std::cout << "wrote " << a.num << " examples; manifest: " << manifest << "\n";
  return 0;
}

struct TrainCodecArgs {
  std::string data;
  std::string out;
  int epochs = 12;
  double lr = 1e-3;
  std::string config_file;
  uint64_t seed = 0;
};

int run_train_codec(const TrainCodecArgs& a) {
  cs::CodecConfig cfg;
  if (!a.config_file.empty()) {
    // Codec config file: key = value lines matching CodecConfig fields.
    std::ifstream in(a.config_file);
    if (!in) throw std::runtime_error("cannot open config " + a.config_file);
    std::string line;
    while (std::getline(in, line)) {
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const size_t b = s.find_first_not_of(" \t\r");
        const size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      auto ints = [&value] {
        std::vector<int> v;
        std::istringstream is(value);
        std::string tok;
        while (std::getline(is, tok, ',')) v.push_back(std::stoi(tok));
        return v;
      };
      if (key == "sample_rate") cfg.sample_rate = std::stoi(value);
      else if (key == "strides") cfg.strides = ints();
      else if (key == "channels") cfg.channels = ints();
      else if (key == "embedding_dim") cfg.embedding_dim = std::stoi(value);
      else if (key == "num_codebooks") cfg.num_codebooks = std::stoi(value);
      else if (key == "codebook_size") cfg.codebook_size = std::stoi(value);
      else if (key == "kernel_size") cfg.kernel_size = std::stoi(value);
      else throw std::runtime_error("config: unknown codec key '" + key + "'");
    }
  }
  cfg.validate();
  print_config({{"data", a.data},
                {"out", a.out},
                {"epochs", std::to_string(a.epochs)},
                {"lr", fmt(a.lr)},
                {"seed", std::to_string(a.seed)},
                {"hop", std::to_string(cfg.hop())},
                {"embedding_dim", std::to_string(cfg.embedding_dim)},
                {"num_codebooks", std::to_string(cfg.num_codebooks)},
                {"codebook_size", std::to_string(cfg.codebook_size)}});

  const std::vector<cs::ManifestEntry> manifest = cs::read_manifest(a.data);
  cs::Codec codec(cfg, a.seed);
  const cs::CodecTrainLog log = cs::train_codec(codec, manifest, a.epochs, a.lr, a.seed);
  cs::save_codec_checkpoint(codec, a.out);
  std::cout << "epochs: " << log.epoch_losses.size() << "\n";
  if (!log.epoch_losses.empty())
    std::cout << "first epoch loss: " << fmt(log.epoch_losses.front())
              << "  last epoch loss: " << fmt(log.epoch_losses.back()) << "\n";
  std::cout << "saved codec checkpoint: " << a.out << "\n";
  return 0;
}

struct TrainSepArgs {
  std::string codec_ckpt;
  std::string data;
  std::string valid;
  std::string target = "transmission";
  std::string rvq = "off";
  std::string preset = "toy";
  std::string out;
  std::string config_file;
  std::string log_csv;
  int epochs = -1;     // -1: preset default (toy 40, paper 200)
  double lr = -1.0;    // -1: config/default
  int64_t seed = -1;   // -1: config/default
};

int run_train_sep(const TrainSepArgs& a) {
  cs::TrainConfig cfg;
  if (!a.config_file.empty()) cfg = cs::parse_train_config_file(a.config_file, cfg);
  cfg.target = cs::train_target_from_string(a.target);
  cfg.rvq_in_loop = a.rvq == "on";
  if (a.rvq != "on" && a.rvq != "off") throw std::runtime_error("--rvq must be on|off");
  cfg.epochs = a.epochs > 0 ? a.epochs : (a.preset == "paper" ? 200 : 40);
  if (a.lr > 0) cfg.lr = a.lr;
  if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);

  const cs::Codec codec = cs::Codec::from_archive(cs::load_archive(a.codec_ckpt));
  cs::SeparatorConfig scfg =
      cs::SeparatorConfig::preset(a.preset, codec.config().embedding_dim);

  print_config({{"codec", a.codec_ckpt},
                {"data", a.data},
                {"valid", a.valid},
                {"target", cs::to_string(cfg.target)},
                {"rvq", cfg.rvq_in_loop ? "on" : "off"},
                {"preset", a.preset},
                {"out", a.out},
                {"epochs", std::to_string(cfg.epochs)},
                {"lr", fmt(cfg.lr)},
                {"lr_halve_patience", std::to_string(cfg.lr_halve_patience)},
                {"lr_schedule_start_epoch", std::to_string(cfg.lr_schedule_start_epoch)},
                {"batch_size", std::to_string(cfg.batch_size)},
                {"segment_s", fmt(cfg.segment_s)},
                {"seed", std::to_string(cfg.seed)},
                {"model_dim", std::to_string(scfg.model_dim)},
                {"num_blocks", std::to_string(scfg.num_blocks)}});

  cs::Separator sep(scfg, cfg.seed);
  const std::vector<cs::ManifestEntry> train = cs::read_manifest(a.data);
  const std::vector<cs::ManifestEntry> valid = cs::read_manifest(a.valid);
  const cs::TrainResult result = cs::train_separator(sep, codec, train, valid, cfg);
  cs::save_separator_checkpoint(sep, cfg, result.best_epoch, result.best_val, a.out);
  const std::string log_path = a.log_csv.empty() ? a.out + ".log.csv" : a.log_csv;
  cs::write_epoch_log(result.log, log_path);
  std::cout << "best epoch: " << result.best_epoch << "  best validation ("
            << (cfg.target == cs::TrainTarget::Transmission ? "cSI-SDRi" : "SI-SDRi")
            << "): " << fmt(result.best_val) << " dB\n";
  std::cout << "saved separator checkpoint: " << a.out << "\nepoch log: " << log_path << "\n";
  return 0;
}

struct EvalArgs {
  std::string codec_ckpt;
  std::string sep_ckpt;
  std::string data;
  std::string scenario = "codecspace";
  std::string comparison = "transmission";
  std::string report;
  std::string rvq = "auto";
};

int run_eval(const EvalArgs& a) {
  const cs::Codec codec = cs::Codec::from_archive(cs::load_archive(a.codec_ckpt));
  const cs::TensorArchive sep_arch = cs::load_archive(a.sep_ckpt);
  const cs::Separator sep = cs::Separator::from_archive(sep_arch);

  bool rvq_in_loop;
  if (a.rvq == "on") rvq_in_loop = true;
  else if (a.rvq == "off") rvq_in_loop = false;
  else if (a.rvq == "auto") rvq_in_loop = sep_arch.meta_or("rvq_in_loop", "1") == "1";
  else throw std::runtime_error("--rvq must be auto|on|off");

  const cs::Comparison comparison = cs::comparison_from_string(a.comparison);
  print_config({{"codec", a.codec_ckpt},
                {"sep", a.sep_ckpt},
                {"data", a.data},
                {"scenario", a.scenario},
                {"comparison", a.comparison},
                {"rvq", rvq_in_loop ? "on" : "off"},
                {"report", a.report}});

  // Scenario estimate paths. "transmit" always means the full codec with
  // RVQ (codes are what a deployment sends); the --rvq flag controls the
  // codecspace embedding path and the transmission-comparison references.
  cs::SeparateFn separate;
  if (a.scenario == "oracle") {
    separate = [&](const cs::Waveform& mix) { return sep.separate_waveforms(codec, mix, false); };
  } else if (a.scenario == "local") {
    separate = [&](const cs::Waveform& mix) {
      std::vector<cs::Waveform> outs = sep.separate_waveforms(codec, mix, false);
      for (cs::Waveform& o : outs) o = codec.transmit(o, true);
      return outs;
    };
  } else if (a.scenario == "cloud") {
    separate = [&](const cs::Waveform& mix) {
      return sep.separate_waveforms(codec, codec.transmit(mix, true), false);
    };
  } else if (a.scenario == "codecspace") {
    separate = [&](const cs::Waveform& mix) {
      return sep.separate_waveforms(codec, mix, rvq_in_loop);
    };
  } else {
    throw std::runtime_error("unknown scenario '" + a.scenario +
                             "' (oracle|local|cloud|codecspace)");
  }

  const std::vector<cs::ManifestEntry> manifest = cs::read_manifest(a.data);
  const cs::EvalSummary summary = cs::evaluate(manifest, separate, comparison, &codec,
                                               rvq_in_loop);
  std::cout << cs::render_eval_summary(summary);
  if (!a.report.empty()) {
    cs::write_eval_csv(summary, a.report);
    std::cout << "report: " << a.report << "\n";
  }
  return 0;
}

struct ProfileArgs {
  std::string model = "pipeline";
  std::string preset = "toy";
  double duration = 2.0;
  int sr = 8000;
  std::string csv;
  bool compare_waveform_rate = false;
};

int run_profile(const ProfileArgs& a) {
  const cs::CodecConfig codec_cfg = cs::CodecConfig::preset(a.preset);
  const cs::SeparatorConfig sep_cfg =
      cs::SeparatorConfig::preset(a.preset, codec_cfg.embedding_dim);
  print_config({{"model", a.model},
                {"preset", a.preset},
                {"duration", fmt(a.duration)},
                {"sr", std::to_string(a.sr)},
                {"hop", std::to_string(codec_cfg.hop())}});

  const cs::macprof::MacReport report = cs::macprof::profile(
      cs::macprof::profile_model_from_string(a.model), codec_cfg, sep_cfg, a.duration, a.sr);
  std::cout << cs::macprof::render_table(report);
  if (a.compare_waveform_rate) {
    const int64_t samples = static_cast<int64_t>(a.duration * a.sr);
    cs::macprof::MacReport wave = cs::macprof::profile_separator(sep_cfg, samples);
    wave.model = "separator@waveform-rate";
    std::cout << "\nwaveform-rate baseline (same architecture at L = " << samples << "):\n";
    std::cout << cs::macprof::render_compare(cs::macprof::compare(wave, report),
                                             "waveform", "codec-rate");
  }
  if (!a.csv.empty()) {
    std::ofstream out(a.csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + a.csv);
    out << cs::macprof::render_csv(report);
    std::cout << "csv: " << a.csv << "\n";
  }
  return 0;
}

struct GradCheckArgs {
  std::string op;  // empty: all registered ops
  double tol = 1e-3;
  uint64_t seed = 0;
};

int run_grad_check(const GradCheckArgs& a) {
  print_config({{"op", a.op.empty() ? "<all>" : a.op},
                {"tol", fmt(a.tol)},
                {"seed", std::to_string(a.seed)}});
  std::vector<std::string> ops =
      a.op.empty() ? cs::ad::grad_check_ops() : std::vector<std::string>{a.op};
  bool all_pass = true;
  for (const std::string& op : ops) {
    const cs::ad::GradCheckReport r = cs::ad::grad_check(op, {}, a.tol, a.seed);
    std::printf("%-20s %s  max_rel_err %.3e\n", op.c_str(), r.pass ? "pass" : "FAIL",
                r.max_rel_error);
    if (!r.pass) {
      std::printf("  %s\n", r.detail.c_str());
      all_pass = false;
    }
  }
  if (!all_pass) throw std::runtime_error("gradient check failed");
  return 0;
}

int run_info(const std::string& ckpt) {
  const cs::TensorArchive a = cs::load_archive(ckpt);
  print_config({{"ckpt", ckpt}});
  std::cout << "metadata:\n";
  for (const auto& [k, v] : a.metadata) std::cout << "  " << k << " = " << v << "\n";
  int64_t model_params = 0, state_scalars = 0;
  for (const auto& [name, t] : a.tensors) {
    if (name.rfind("adam.", 0) == 0) state_scalars += t.size();
    else model_params += t.size();
  }
  std::cout << "tensors: " << a.tensors.size() << "\n";
  std::cout << "model parameters: " << model_params << "\n";
  std::cout << "optimizer state scalars: " << state_scalars << "\n";
  const std::string kind = a.meta_or("kind", "");
  if (kind == "codec") {
    const cs::Codec codec = cs::Codec::from_archive(a);
    std::cout << "hop: " << codec.config().hop() << "\n";
    std::cout << "quantizer ready: " << (codec.quantizer_ready() ? "yes" : "no") << "\n";
  } else if (kind == "separator") {
    const cs::Separator sep = cs::Separator::from_archive(a);
    std::cout << "param_count: " << sep.param_count() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codec-space speech separation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Synthesize a deterministic 2-speaker mixture set");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--num", synth.num, "Number of examples")->capture_default_str();
  s->add_option("--speakers", synth.speakers, "Speakers per mixture")->capture_default_str();
  s->add_option("--duration", synth.duration, "Example duration in seconds")
      ->capture_default_str();
  s->add_option("--sr", synth.sr, "Sample rate in Hz")->capture_default_str();
  s->add_option("--snr-low", synth.snr_low, "Mixing SNR lower bound (dB)")
      ->capture_default_str();
  s->add_option("--snr-high", synth.snr_high, "Mixing SNR upper bound (dB)")
      ->capture_default_str();
  s->add_option("--seed", synth.seed, "Dataset seed")->capture_default_str();

  TrainCodecArgs tc;
  CLI::App* c = app.add_subcommand("train-codec", "Train the audio codec on a manifest");
  c->add_option("--data", tc.data, "Training manifest")->required();
  c->add_option("--out", tc.out, "Output checkpoint path")->required();
  c->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
  c->add_option("--lr", tc.lr, "Adam learning rate")->capture_default_str();
  c->add_option("--config", tc.config_file, "Codec config file (key = value)");
  c->add_option("--seed", tc.seed, "Init/shuffle seed")->capture_default_str();

  TrainSepArgs ts;
  CLI::App* t = app.add_subcommand("train-sep", "Train the separator over a frozen codec");
  t->add_option("--codec", ts.codec_ckpt, "Codec checkpoint")->required();
  t->add_option("--data", ts.data, "Training manifest")->required();
  t->add_option("--valid", ts.valid, "Validation manifest")->required();
  t->add_option("--target", ts.target, "Training target: ground-truth|transmission")
      ->capture_default_str();
  t->add_option("--rvq", ts.rvq, "Quantizer in the loop: on|off")->capture_default_str();
  t->add_option("--preset", ts.preset, "Model preset: toy|paper")->capture_default_str();
  t->add_option("--out", ts.out, "Output checkpoint path")->required();
  t->add_option("--config", ts.config_file, "Train config file (key = value)");
  t->add_option("--log", ts.log_csv, "Epoch log CSV path (default: <out>.log.csv)");
  t->add_option("--epochs", ts.epochs, "Override epochs (preset default: toy 40, paper 200)");
  t->add_option("--lr", ts.lr, "Override initial learning rate (default 1.5e-4)");
  t->add_option("--seed", ts.seed, "Override seed (default 0)");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Evaluate a trained system on a manifest");
  e->add_option("--codec", ev.codec_ckpt, "Codec checkpoint")->required();
  e->add_option("--sep", ev.sep_ckpt, "Separator checkpoint")->required();
  e->add_option("--data", ev.data, "Evaluation manifest")->required();
  e->add_option("--scenario", ev.scenario, "oracle|local|cloud|codecspace")
      ->capture_default_str();
  e->add_option("--comparison", ev.comparison, "ground-truth|transmission")
      ->capture_default_str();
  e->add_option("--report", ev.report, "Per-example CSV report path");
  e->add_option("--rvq", ev.rvq, "Quantizer for codecspace/references: auto|on|off")
      ->capture_default_str();

  ProfileArgs pf;
  CLI::App* p = app.add_subcommand("profile", "Count MACs for a model configuration");
  p->add_option("--model", pf.model, "codec|sep|pipeline")->capture_default_str();
  p->add_option("--preset", pf.preset, "toy|paper")->capture_default_str();
  p->add_option("--duration", pf.duration, "Input duration in seconds")->capture_default_str();
  p->add_option("--sr", pf.sr, "Sample rate in Hz")->capture_default_str();
  p->add_option("--csv", pf.csv, "Write the per-layer report as CSV");
  p->add_flag("--compare-waveform-rate", pf.compare_waveform_rate,
              "Also compare against the same architecture at waveform rate");

  GradCheckArgs gc;
  CLI::App* g = app.add_subcommand("grad-check",
                                   "Finite-difference check of the autodiff backward pass");
  g->add_option("--op", gc.op, "Op name (default: every registered op)");
  g->add_option("--tol", gc.tol, "Relative tolerance")->capture_default_str();
  g->add_option("--seed", gc.seed, "Probe seed")->capture_default_str();

  std::string info_ckpt;
  CLI::App* i = app.add_subcommand("info", "Inspect a checkpoint");
  i->add_option("--ckpt", info_ckpt, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help and friends
    app.exit(err);
    return 1;  // usage error
  }

  try {
    if (s->parsed()) return run_synth(synth);
    if (c->parsed()) return run_train_codec(tc);
    if (t->parsed()) return run_train_sep(ts);
    if (e->parsed()) return run_eval(ev);
    if (p->parsed()) return run_profile(pf);
    if (g->parsed()) return run_grad_check(gc);
    if (i->parsed()) return run_info(info_ckpt);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
