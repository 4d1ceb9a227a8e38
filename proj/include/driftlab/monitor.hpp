#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

namespace driftlab {

/// Detection thresholds produced by nominal calibration.
///
/// tau gates which states are eligible as rollback snapshots; tau_d is the
/// drift-detection level; kappa * tau_d is the hysteresis exit level. A
/// degenerate calibration (zero nominal variance) is allowed to produce
/// tau = tau_d = 0 and is flagged upstream.
struct Thresholds {
  double tau = 0.0;
  double tau_d = 0.0;
  double kappa = 0.85;
};

void validate(const Thresholds& th); // throws std::invalid_argument

/// Fixed-capacity window over the most recent innovation energies,
/// oldest-first eviction.
class SlidingWindow {
public:
  explicit SlidingWindow(std::size_t capacity);

  void push(double value);
  bool full() const { return buffer_.size() == capacity_; }
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<double>& values() const { return buffer_; }

  /// Mean of the buffered values in push order; only defined once full.
  std::optional<double> mean() const;

private:
  std::size_t capacity_;
  std::deque<double> buffer_;
};

enum class MonitorEvent { none, drift_detected, recovery_complete };

/// Streaming drift monitor: window of recent energies, drift score as the
/// window mean, and the two-state detection/recovery event machine.
///
/// One instance per episode; single-owner mutable state.
class DriftMonitor {
public:
  DriftMonitor(std::size_t window, Thresholds thresholds);

  /// Push one energy; returns the drift score iff the window just reached
  /// capacity (no score before the window fills). Energy must be >= 0.
  std::optional<double> push_and_score(double energy);

  /// Evaluate the drift score at step t. At most one event per call:
  /// drift_detected when score > tau_d while not recovering, recovery_complete
  /// when score <= kappa * tau_d while recovering, none otherwise (scores
  /// inside the hysteresis band fire nothing).
  MonitorEvent evaluate(double score, int t);

  bool recovering() const { return recovering_; }
  std::optional<int> detection_step() const { return t0_; }
  std::optional<int> recovery_step() const { return tr_; }
  std::optional<double> last_score() const { return last_score_; }
  const Thresholds& thresholds() const { return thresholds_; }

private:
  SlidingWindow window_;
  Thresholds thresholds_;
  bool recovering_ = false;
  std::optional<int> t0_;
  std::optional<int> tr_;
  std::optional<double> last_score_;
};

/// Nearest-rank percentile: element at 1-based index ceil(p * n) of the
/// ascending sort. Deterministic and interpolation-free.
double nearest_rank_percentile(std::vector<double> values, double p);

/// Fit detection thresholds from nominal episodes. The percentile population
/// is the per-episode maximum drift score, so the nominal per-episode
/// false-alarm rate lands near 1 - p_tau_d by construction. Empty episode
/// score sequences are skipped; at least one nonempty sequence is required.
Thresholds calibrate_thresholds(const std::vector<std::vector<double>>& nominal_episode_scores,
                                double p_tau, double p_tau_d, double kappa);

/// Signed detection latency t0 - t_star; negative values mark detections that
/// fired before perturbation onset (false positives).
int detection_latency(int t0, int t_star);

} // namespace driftlab
