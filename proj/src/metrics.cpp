#include "codecsep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace codecsep::metrics {

namespace {

// Mean-subtracted copies in double precision.
void center(const Waveform& w, std::vector<double>& out) {
  out.resize(w.samples.size());
  double mean = 0.0;
  for (float s : w.samples) mean += s;
  mean /= static_cast<double>(w.samples.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(w.samples[i]) - mean;
}

void check_pair(const Waveform& estimate, const Waveform& reference) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("metric: length mismatch");
  if (reference.samples.size() < 2) throw std::invalid_argument("metric: need length >= 2");
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

MetricValue ratio_db(double num, double err) {
  if (err < 1e-12 * num) return {kCapDb, false};
  return {10.0 * std::log10(num / err), true};
}

}  // namespace

MetricValue si_sdr(const Waveform& estimate, const Waveform& reference) {
  check_pair(estimate, reference);
  std::vector<double> e, r;
  center(estimate, e);
  center(reference, r);

  const double r_energy = energy(r);
  if (r_energy <= 0.0) throw std::invalid_argument("metric: degenerate reference");

  double dot = 0.0;
  for (size_t i = 0; i < e.size(); ++i) dot += e[i] * r[i];
  const double alpha = dot / r_energy;
  if (alpha == 0.0) return {-kCapDb, false};

  const double num = alpha * alpha * r_energy;  // ||alpha r||^2
  double err = 0.0;
  for (size_t i = 0; i < e.size(); ++i) {
    const double d = alpha * r[i] - e[i];
    err += d * d;
  }
  return ratio_db(num, err);
}

MetricValue sdr(const Waveform& estimate, const Waveform& reference) {
  check_pair(estimate, reference);
  std::vector<double> e, r;
  center(estimate, e);
  center(reference, r);

  const double r_energy = energy(r);
  if (r_energy <= 0.0) throw std::invalid_argument("metric: degenerate reference");

  double err = 0.0;
  for (size_t i = 0; i < e.size(); ++i) {
    const double d = r[i] - e[i];
    err += d * d;
  }
  return ratio_db(r_energy, err);
}

MetricValue improvement(const MetricFn& metric, const Waveform& estimate,
                        const Waveform& reference, const Waveform& mixture) {
  const MetricValue a = metric(estimate, reference);
  const MetricValue b = metric(mixture, reference);
  return {a.value_db - b.value_db, a.finite && b.finite};
}

MetricValue codec_si_sdr(const Waveform& estimate, const Waveform& clean_reference,
                         const Transmitter& codec) {
  Waveform t = codec.transmit(clean_reference);
  // Codec framing may change the length; truncate both to the shorter.
  const size_t n = std::min(estimate.samples.size(), t.samples.size());
  Waveform est = estimate;
  est.samples.resize(n);
  t.samples.resize(n);
  return si_sdr(est, t);
}

PitAssignment pit_assign(const MetricFn& metric, const std::vector<Waveform>& estimates,
                         const std::vector<Waveform>& references) {
  if (estimates.size() != references.size())
    throw std::invalid_argument("pit_assign: count mismatch");
  const int n = static_cast<int>(estimates.size());
  if (n == 0 || n > 4)
    throw std::invalid_argument("pit_assign: supports 1..4 sources (exhaustive search)");

  // Pairwise scores once; permutations reuse them.
  std::vector<std::vector<double>> score(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) score[i][j] = metric(estimates[i], references[j]).value_db;

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  PitAssignment best;
  bool first = true;
  do {  // std::next_permutation enumerates in lexicographic order
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += score[i][perm[i]];
    mean /= n;
    if (first || mean > best.score_db) {  // strict: ties keep the earlier (smaller) perm
      best.permutation = perm;
      best.score_db = mean;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace codecsep::metrics
