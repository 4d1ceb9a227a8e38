#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/monitor.hpp"
#include "driftlab/recovery.hpp"
#include "driftlab/simulator.hpp"
#include "driftlab/stability.hpp"

namespace driftlab {

/// Monitor-side configuration shared by calibration and episode runs.
struct MonitorSettings {
  std::size_t window = 3; // H
  double p_tau = 0.90;
  double p_tau_d = 0.95;
  double kappa = 0.85;
  double epsilon = 1e-6;
  ScaleMode scale_mode = ScaleMode::variance;
};

void validate(const MonitorSettings& m); // throws std::invalid_argument

/// Full experiment plan: sim/recovery/monitor templates plus batch sizes and
/// the master seed from which every episode stream is derived.
///
/// The delayed-evidence condition runs in its own noise regime
/// (delayed_sigma_r) and is calibrated against nominal episodes of that
/// regime; all misroute rows share plan.sim.
struct ExperimentPlan {
  int episodes = 120;         // N per condition
  int calibration_runs = 200; // nominal episodes per regime for fitting
  std::uint64_t master_seed = 42;
  int jobs = 1;
  SimConfig sim;
  double delayed_sigma_r = 0.0225; // evidence-noise override for the delayed row
  RecoveryConfig recovery;
  MonitorSettings monitor;

  SimConfig delayed_sim() const; // plan.sim with the delayed-row overrides
};

void validate(const ExperimentPlan& plan);

/// Substream tags; condition episodes share one stream so ablation rows are
/// seed-paired, calibration and condition streams never overlap.
inline constexpr std::uint64_t kConditionStream = 1;
inline constexpr std::uint64_t kCalibrationBaselineStream = 101;
inline constexpr std::uint64_t kCalibrationRecoveryStream = 102;
inline constexpr std::uint64_t kCalibrationDelayedStream = 103;

std::uint64_t episode_seed(const ExperimentPlan& plan, std::uint64_t stream, int index);

/// One experimental condition (a Table row): variant, scenario, mechanism set,
/// and the fully resolved simulator configuration for its episodes.
struct Condition {
  std::string name;
  Variant variant = Variant::recovery_aware;
  Scenario scenario = Scenario::misroute;
  RecoveryConfig recovery;
  SimConfig sim;
};

/// The canonical six-row ablation matrix.
std::vector<Condition> ablation_conditions(const ExperimentPlan& plan);
std::optional<Condition> find_condition(const ExperimentPlan& plan, const std::string& name);

struct CalibrationResult {
  Variant variant = Variant::recovery_aware;
  Scenario scenario = Scenario::misroute; // perturbation regime the fit serves
  ScaleCalibration scale;
  Thresholds thresholds;
  bool degenerate = false; // zero nominal innovation variance, S fell back to epsilon
  int episodes = 0;
};

/// Nominal phase: run calibration episodes of the given regime with monitoring
/// disabled, fit the energy scale from pooled innovations and thresholds from
/// per-episode maximum drift scores.
CalibrationResult run_calibration(const ExperimentPlan& plan, Variant variant);
CalibrationResult run_calibration(const ExperimentPlan& plan, Variant variant,
                                  const SimConfig& regime, std::uint64_t stream,
                                  Scenario target_scenario);

/// Per-episode scalar summary used for scatter/latency reporting.
struct EpisodeRow {
  int index = 0;
  std::uint64_t seed = 0;
  bool detected = false;
  std::optional<int> t0;
  bool recovered = false;
  std::optional<int> tr;
  std::optional<int> latency; // t0 - t_star when detected
  double final_drift = 0.0;
  double final_semantic = 0.0;
};

/// Pointwise mean/std (population) across episodes for each monitored signal.
/// Drift entries start at t = window (empty before the window fills); the
/// vectors are indexed by t - 1 over the full horizon.
struct AggregateCurves {
  std::vector<double> nu_mean, nu_std;
  std::vector<double> energy_mean, energy_std;
  std::vector<double> semantic_mean, semantic_std;
  std::vector<std::optional<double>> drift_mean, drift_std;
};

struct ConditionSummary {
  std::string name;
  Variant variant = Variant::baseline;
  Scenario scenario = Scenario::nominal;
  int episodes = 0;
  int detected = 0;
  int recovered = 0;
  int pre_onset_detections = 0; // detections before the perturbation step
  double detection_rate = 0.0;
  std::optional<double> recovery_rate; // recovered / detected, null if no detections
  std::optional<double> mttr_mean;     // over closed recovery events, pooled
  std::optional<double> mttr_std;
  int mttr_count = 0;
  std::optional<double> latency_mean; // over post-onset detections
  AggregateCurves curves;
  std::vector<EpisodeRow> rows;
};

/// Aggregate a batch of traces into a condition summary. Pure; shared by the
/// live harness and by report regeneration from persisted traces.
ConditionSummary summarize_condition(const Condition& condition, int t_star,
                                     const std::vector<EpisodeTrace>& traces);

/// Run N seeded episodes of one condition and aggregate. Episode i uses
/// stream (master_seed, i) regardless of condition, and results are
/// independent of plan.jobs.
ConditionSummary run_condition(const ExperimentPlan& plan, const Condition& condition,
                               const CalibrationResult& calibration);

/// Same, but also returns the raw traces (for persistence).
ConditionSummary run_condition(const ExperimentPlan& plan, const Condition& condition,
                               const CalibrationResult& calibration,
                               std::vector<EpisodeTrace>* traces_out);

/// Calibrations for the ablation matrix: one per variant in the shared
/// regime, plus one for the delayed-evidence regime.
struct CalibrationSet {
  CalibrationResult baseline;
  CalibrationResult recovery_aware;
  CalibrationResult delayed;
  const CalibrationResult& for_condition(const Condition& c) const {
    if (c.scenario == Scenario::delayed) return delayed;
    return c.variant == Variant::baseline ? baseline : recovery_aware;
  }
};

CalibrationSet run_all_calibrations(const ExperimentPlan& plan);

/// Run the six-row matrix with paired seeds across rows.
std::vector<ConditionSummary> run_ablation(const ExperimentPlan& plan,
                                           const CalibrationSet& calibrations,
                                           std::vector<std::vector<EpisodeTrace>>* traces_out = nullptr);

/// Rebuild detection/recovery bookkeeping from step records alone (used when
/// traces are reloaded from disk). Recovery events are reconstructed from the
/// event column for recovery-aware traces; baseline traces log monitor events
/// but own no recovery cycles.
void rebuild_bookkeeping(EpisodeTrace& trace);

} // namespace driftlab
