#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/harness.hpp"

namespace driftlab {

/// Configuration or validation failure; names the offending field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fully resolved application configuration: unspecified fields take the
/// documented defaults. Rejects unknown keys and constraint violations with a
/// field-qualified message.
struct AppConfig {
  ExperimentPlan plan;
  std::string out_dir = "out";
};

AppConfig default_config();
AppConfig parse_config(const std::filesystem::path& path);
AppConfig parse_config_text(const std::string& text, const std::string& origin);

/// Canonical JSON dump of a resolved configuration (stable key order).
std::string canonical_config(const AppConfig& config);

/// FNV-1a 64-bit content hash, hex-encoded; identifies a resolved config.
std::string config_digest(const AppConfig& config);

/// Run provenance written next to the outputs. The timestamp is taken from
/// the DRIFTLAB_TIMESTAMP environment variable when set and left null
/// otherwise, so identical runs produce identical manifests.
struct RunManifest {
  std::string artifact_version;
  std::string digest;
  std::uint64_t master_seed = 0;
  std::optional<std::string> timestamp;
  std::vector<std::string> outputs;
};

extern const char* kArtifactVersion;

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// Episode trace CSV: header `t,nu,energy,drift_score,semantic_drift,event`,
/// one row per step, 12 significant digits, drift_score empty before the
/// window fills.
void emit_episode_csv(const EpisodeTrace& trace, const std::filesystem::path& path);
EpisodeTrace load_episode_csv(const std::filesystem::path& path, Variant variant,
                              Scenario scenario, std::uint64_t seed);

/// Calibration artifact round trip (JSON).
void write_calibration(const CalibrationResult& cal, const std::filesystem::path& path);
CalibrationResult load_calibration(const std::filesystem::path& path);

/// Condition metadata needed to regenerate summaries from persisted traces.
struct ConditionMeta {
  Condition condition;
  int t_star = 0;
  int episodes = 0;
  std::vector<std::uint64_t> seeds;
};

void write_condition_meta(const ConditionMeta& meta, const std::filesystem::path& path);
ConditionMeta load_condition_meta(const std::filesystem::path& path);

/// Figure-ready data: per-step aggregate curves and the final-step
/// (drift, semantic drift) scatter.
void emit_aggregate_csv(const ConditionSummary& summary, const std::filesystem::path& path);
void emit_scatter_csv(const ConditionSummary& summary, const std::filesystem::path& path);
void emit_episode_rows_csv(const ConditionSummary& summary, const std::filesystem::path& path);

/// Machine-readable summary: one record per condition with nullable metrics
/// (null exactly when the defining population is empty) plus paths to the
/// figure-ready files.
void emit_summary(const std::vector<ConditionSummary>& summaries,
                  const std::filesystem::path& out_dir, const std::filesystem::path& path);
std::vector<ConditionSummary> load_summary_records(const std::filesystem::path& path);

/// Format a double with 12 significant digits (the trace/CSV convention).
std::string format_number(double value);

} // namespace driftlab
