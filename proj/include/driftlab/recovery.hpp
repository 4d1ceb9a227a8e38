#pragma once

#include <optional>
#include <span>
#include <vector>

#include "driftlab/stability.hpp"

namespace driftlab {

/// Recovery policy configuration. Each mechanism can be disabled
/// independently for ablation runs; a disabled mechanism is skipped without
/// error when recovery engages.
struct RecoveryConfig {
  double alpha = 0.35;   // nominal update gain, restored on completion
  double beta = 0.20;    // rollback mixing weight toward the snapshot
  double gamma_g = 0.15; // gain-modulation factor applied to alpha
  bool rollback = true;
  bool gain_modulation = true;
  bool tool_fallback = true;
};

void validate(const RecoveryConfig& cfg); // throws std::invalid_argument

/// One detection/recovery cycle: detection step t0, completion step tr once
/// (and if) bounded stability is re-entered. tr >= t0 always holds.
struct RecoveryEvent {
  int t0 = 0;
  std::optional<int> tr;
};

struct MttrStats {
  double mean = 0.0;
  double stddev = 0.0; // population convention
  std::size_t count = 0;
};

/// Mean time to recovery over successfully closed events; nothing when no
/// event recovered (reported as null downstream).
std::optional<MttrStats> mttr_a(std::span<const RecoveryEvent> events);

/// Per-episode recovery controller. Owns the snapshot used as the rollback
/// target, the active update gain, the fallback flag, and the event log.
///
/// Mechanics on engage, in order: rollback mixes the state toward the last
/// stable snapshot (applied once), gain modulation lowers the active gain to
/// gamma_g * alpha, tool fallback reroutes evidence to the true intent. Gain
/// and fallback persist until complete() reverts them.
class RecoveryController {
public:
  explicit RecoveryController(RecoveryConfig cfg);

  /// Store x as the rollback target when not recovering and the step's drift
  /// score is either unavailable or at most tau.
  void record_snapshot(const UnitVector& x, std::optional<double> score, double tau);

  /// Apply the enabled mechanisms and open a recovery event at step t0.
  /// Returns the (possibly rolled-back) state. Engaging while already
  /// recovering is a contract violation.
  UnitVector engage(const UnitVector& x, int t0);

  /// Close the open recovery event at step tr and restore nominal gain and
  /// evidence routing. Completing while not recovering is a contract
  /// violation.
  void complete(int tr);

  bool recovering() const { return recovering_; }
  double active_gain() const { return active_gain_; }
  bool fallback_active() const { return fallback_active_; }
  const std::optional<UnitVector>& snapshot() const { return snapshot_; }
  const std::vector<RecoveryEvent>& events() const { return events_; }
  const RecoveryConfig& config() const { return cfg_; }

private:
  RecoveryConfig cfg_;
  bool recovering_ = false;
  double active_gain_;
  bool fallback_active_ = false;
  std::optional<UnitVector> snapshot_;
  std::vector<RecoveryEvent> events_;
};

/// Rollback mixing: renormalize((1 - beta) * x + beta * snapshot).
/// Exact at beta = 0 (returns x) and beta = 1 (returns snapshot).
UnitVector rollback_mix(const UnitVector& x, const UnitVector& snapshot, double beta);

} // namespace driftlab
