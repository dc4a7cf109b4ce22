#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "codecsep/codec.hpp"
#include "codecsep/separator.hpp"
#include "codecsep/synth.hpp"
#include "codecsep/waveform.hpp"

namespace codecsep {

enum class TrainTarget { GroundTruth, Transmission };
enum class Comparison { GroundTruth, Transmission };

std::string to_string(TrainTarget t);
std::string to_string(Comparison c);
TrainTarget train_target_from_string(const std::string& s);    // "ground-truth"/"transmission"
Comparison comparison_from_string(const std::string& s);

struct TrainConfig {
  TrainTarget target = TrainTarget::Transmission;
  bool rvq_in_loop = false;
  double lr = 1.5e-4;
  int lr_halve_patience = 2;
  int lr_schedule_start_epoch = 5;
  int epochs = 200;  // toy preset uses 40
  int batch_size = 2;
  double segment_s = 1.0;
  uint64_t seed = 0;

  void validate(int codec_hop, int sample_rate) const;
};

// `key = value` lines, '#' comments, keys exactly matching the TrainConfig
// field names. Unknown keys are rejected.
TrainConfig parse_train_config_file(const std::string& path, TrainConfig defaults = {});
void apply_train_config_line(TrainConfig& cfg, const std::string& line);

// Validation-driven step decay: halve when the score fails to improve for
// `patience` consecutive epochs, with halving disabled before `start_epoch`
// (epochs are 1-based). lr() is the rate for the upcoming epoch.
class LrScheduler {
 public:
  LrScheduler(double initial_lr, int patience, int start_epoch)
      : lr_(initial_lr), patience_(patience), start_epoch_(start_epoch) {}

  double lr() const { return lr_; }
  void observe(int epoch, double val_score);

 private:
  double lr_;
  int patience_;
  int start_epoch_;
  int bad_epochs_ = 0;
  bool has_best_ = false;
  double best_ = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_primary = 0.0;    // axis matching the training target
  double val_secondary = 0.0;  // the other axis
  double lr = 0.0;
};

// UTF-8 CSV: epoch,train_loss,val_primary,val_secondary,lr
void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val = 0.0;
};

// Permutation-invariant training of the separator over a frozen codec.
// References per source are the clean signals (GroundTruth) or
// transmit(source, rvq_in_loop) (Transmission); the loss is the negated
// PIT-max differentiable SI-SDR. The best checkpoint (by the validation
// axis matching the target) is restored into `sep` before returning.
TrainResult train_separator(Separator& sep, const Codec& codec,
                            const std::vector<ManifestEntry>& train_manifest,
                            const std::vector<ManifestEntry>& valid_manifest,
                            const TrainConfig& cfg);

// Writes a model checkpoint (parameters + optimizer state + config echo).
void save_separator_checkpoint(const Separator& sep, const TrainConfig& cfg, int epoch,
                               double best_val, const std::string& path);
void save_codec_checkpoint(const Codec& codec, const std::string& path);

struct MetricAggregate {
  double mean = 0.0;
  int used = 0;    // finite values entering the mean
  int capped = 0;  // non-finite (capped) values, excluded from the mean
};

struct EvalRow {
  std::string id;
  std::vector<int> permutation;
  // Per-source metric values under the PIT assignment, in reference order.
  std::vector<double> si_sdr, si_sdri, sdr, sdri;
  std::vector<bool> finite;  // of si_sdr (capping per metric handled in sums)
};

struct EvalSummary {
  Comparison comparison = Comparison::GroundTruth;
  int num_examples = 0;
  MetricAggregate si_sdr, si_sdri, sdr, sdri;
  std::vector<EvalRow> rows;
};

using SeparateFn = std::function<std::vector<Waveform>(const Waveform& mixture)>;

// PIT assignment by the comparison's SI-SDR variant, then all four metrics
// under that assignment. For Comparison::Transmission the references are
// transmit(source, rvq_in_loop) and `codec` must be non-null.
EvalSummary evaluate(const std::vector<ManifestEntry>& manifest, const SeparateFn& separate,
                     Comparison comparison, const Codec* codec, bool rvq_in_loop);

std::string render_eval_summary(const EvalSummary& s);
void write_eval_csv(const EvalSummary& s, const std::string& path);

}  // namespace codecsep
