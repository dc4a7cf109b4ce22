#pragma once

#include <functional>
#include <vector>

#include "codecsep/waveform.hpp"

namespace codecsep::metrics {

// Perfect reconstructions and orthogonal estimates are capped at +/-300 dB
// instead of infinities so metric values stay totally ordered and
// serializable; `finite` marks the capped cases.
inline constexpr double kCapDb = 300.0;

struct MetricValue {
  double value_db = 0.0;
  bool finite = true;
};

// Scale-invariant SDR. Both signals are mean-subtracted, then
// alpha = <e, r> / ||r||^2 and value = 10*log10(||alpha r||^2 / ||alpha r - e||^2).
// Error energy below 1e-12 * ||alpha r||^2 caps at +300; alpha == 0 caps at
// -300. Throws on length mismatch, length < 2, or a constant reference
// ("degenerate reference").
MetricValue si_sdr(const Waveform& estimate, const Waveform& reference);

// Scale-sensitive SNR-style ratio 10*log10(||r||^2 / ||r - e||^2), same
// mean subtraction and capping rules. This is NOT BSS-eval SDR (no
// projection filter); it is used for comparative reporting only.
MetricValue sdr(const Waveform& estimate, const Waveform& reference);

using MetricFn = std::function<MetricValue(const Waveform&, const Waveform&)>;

// metric(estimate, reference) - metric(mixture, reference). Capped inputs
// make the result non-finite.
MetricValue improvement(const MetricFn& metric, const Waveform& estimate,
                        const Waveform& reference, const Waveform& mixture);

// Anything that can stand in for "encode, transmit, decode". The codec
// module provides the real implementation; tests use the identity double.
class Transmitter {
 public:
  virtual ~Transmitter() = default;
  virtual Waveform transmit(const Waveform& w) const = 0;
};

class IdentityTransmitter final : public Transmitter {
 public:
  Waveform transmit(const Waveform& w) const override { return w; }
};

// si_sdr against the transmitted reference t = Codec(clean_reference).
// Codec framing length mismatches are resolved by truncating both signals
// to the shorter length.
MetricValue codec_si_sdr(const Waveform& estimate, const Waveform& clean_reference,
                         const Transmitter& codec);

struct PitAssignment {
  std::vector<int> permutation;  // estimate index -> reference index
  double score_db = 0.0;         // mean metric under this permutation
};

// Exhaustive search over all N! assignments (N <= 4); ties broken by the
// lexicographically smallest permutation.
PitAssignment pit_assign(const MetricFn& metric, const std::vector<Waveform>& estimates,
                         const std::vector<Waveform>& references);

}  // namespace codecsep::metrics
