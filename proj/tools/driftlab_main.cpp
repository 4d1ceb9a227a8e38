// driftlab command-line front end: calibrate | run | ablate | report.
//
// Exit codes: 0 success, 2 usage, 3 configuration/validation, 4 runtime.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftlab/harness.hpp"
#include "driftlab/report.hpp"

namespace fs = std::filesystem;
using namespace driftlab;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string condition;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

AppConfig resolve_config(const CliOptions& opts) {
  AppConfig config = opts.config_path.empty() ? default_config() : parse_config(opts.config_path);

  // Precedence: flag > environment > config file > default.
  if (const char* env = std::getenv("DRIFTLAB_SEED")) {
    config.plan.master_seed = std::stoull(env);
  }
  if (const char* env = std::getenv("DRIFTLAB_OUT")) {
    config.out_dir = env;
  }
  if (opts.seed) config.plan.master_seed = *opts.seed;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.jobs) config.plan.jobs = *opts.jobs;

  validate(config.plan);
  return config;
}

// Calibration artifacts, one per regime: the two variants in the shared
// noise regime, plus the delayed-evidence regime.
struct CalRegime {
  std::string name;
  Variant variant;
};

const CalRegime kBaselineRegime{"baseline", Variant::baseline};
const CalRegime kRecoveryRegime{"recovery_aware", Variant::recovery_aware};
const CalRegime kDelayedRegime{"delayed", Variant::recovery_aware};

CalRegime regime_for(const Condition& condition) {
  if (condition.scenario == Scenario::delayed) return kDelayedRegime;
  return condition.variant == Variant::baseline ? kBaselineRegime : kRecoveryRegime;
}

fs::path calibration_path(const fs::path& out, const CalRegime& regime) {
  return out / ("calibration_" + regime.name + ".json");
}

CalibrationResult compute_calibration(const AppConfig& config, const CalRegime& regime) {
  if (regime.name == kDelayedRegime.name) {
    return run_calibration(config.plan, Variant::recovery_aware, config.plan.delayed_sim(),
                           kCalibrationDelayedStream, Scenario::delayed);
  }
  return run_calibration(config.plan, regime.variant);
}

CalibrationResult calibration_for(const AppConfig& config, const fs::path& out,
                                  const CalRegime& regime) {
  const fs::path path = calibration_path(out, regime);
  if (fs::exists(path)) {
    return load_calibration(path);
  }
  CalibrationResult cal = compute_calibration(config, regime);
  if (cal.degenerate) {
    std::cerr << "warning: degenerate calibration for " << regime.name
              << " (zero nominal innovation variance); scale fell back to epsilon\n";
  }
  write_calibration(cal, path);
  return cal;
}

void persist_condition(const AppConfig& config, const fs::path& out, const Condition& condition,
                       const ConditionSummary& summary, const std::vector<EpisodeTrace>& traces) {
  const fs::path dir = out / "conditions" / condition.name;
  (void)config;
  ConditionMeta meta;
  meta.condition = condition;
  meta.t_star = condition.sim.onset;
  meta.episodes = static_cast<int>(traces.size());
  for (const auto& trace : traces) meta.seeds.push_back(trace.seed);
  write_condition_meta(meta, dir / "condition.json");

  char name[32];
  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::snprintf(name, sizeof(name), "ep_%04zu.csv", i);
    emit_episode_csv(traces[i], dir / "episodes" / name);
  }
  emit_aggregate_csv(summary, dir / "aggregate.csv");
  emit_scatter_csv(summary, dir / "scatter.csv");
  emit_episode_rows_csv(summary, dir / "episodes.csv");
}

void write_run_manifest(const AppConfig& config, const fs::path& out,
                        std::vector<std::string> outputs) {
  RunManifest manifest;
  manifest.artifact_version = kArtifactVersion;
  manifest.digest = config_digest(config);
  manifest.master_seed = config.plan.master_seed;
  if (const char* stamp = std::getenv("DRIFTLAB_TIMESTAMP")) {
    manifest.timestamp = std::string(stamp);
  }
  manifest.outputs = std::move(outputs);
  write_manifest(manifest, out / "manifest.json");
}

int cmd_calibrate(const CliOptions& opts) {
  const AppConfig config = resolve_config(opts);
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  for (const CalRegime& regime : {kBaselineRegime, kRecoveryRegime, kDelayedRegime}) {
    CalibrationResult cal = compute_calibration(config, regime);
    if (cal.degenerate) {
      std::cerr << "warning: degenerate calibration for " << regime.name
                << " (zero nominal innovation variance); scale fell back to epsilon\n";
    }
    write_calibration(cal, calibration_path(out, regime));
    std::cout << regime.name << ": S=" << format_number(cal.scale.scale)
              << " tau=" << format_number(cal.thresholds.tau)
              << " tau_d=" << format_number(cal.thresholds.tau_d) << "\n";
  }
  write_run_manifest(config, out,
                     {"calibration_baseline.json", "calibration_recovery_aware.json",
                      "calibration_delayed.json"});
  return 0;
}

int cmd_run(const CliOptions& opts) {
  const AppConfig config = resolve_config(opts);
  if (opts.condition.empty()) {
    std::cerr << "error: run requires --condition <name>\n";
    return 2;
  }
  const auto condition = find_condition(config.plan, opts.condition);
  if (!condition) {
    std::cerr << "error: unknown condition '" << opts.condition << "'; known conditions:";
    for (const auto& c : ablation_conditions(config.plan)) std::cerr << " " << c.name;
    std::cerr << "\n";
    return 3;
  }
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  const CalibrationResult cal = calibration_for(config, out, regime_for(*condition));

  std::vector<EpisodeTrace> traces;
  const ConditionSummary summary = run_condition(config.plan, *condition, cal, &traces);
  persist_condition(config, out, *condition, summary, traces);
  emit_summary({summary}, out, out / "summary.json");
  write_run_manifest(config, out, {"summary.json", "conditions/" + condition->name});
  std::cout << condition->name << ": det_rate=" << format_number(summary.detection_rate)
            << " detected=" << summary.detected << "/" << summary.episodes << "\n";
  return 0;
}

int cmd_ablate(const CliOptions& opts) {
  const AppConfig config = resolve_config(opts);
  const fs::path out(config.out_dir);
  fs::create_directories(out);

  CalibrationSet calibrations;
  calibrations.baseline = calibration_for(config, out, kBaselineRegime);
  calibrations.recovery_aware = calibration_for(config, out, kRecoveryRegime);
  calibrations.delayed = calibration_for(config, out, kDelayedRegime);

  std::vector<std::vector<EpisodeTrace>> traces;
  const std::vector<ConditionSummary> summaries = run_ablation(config.plan, calibrations, &traces);
  const std::vector<Condition> conditions = ablation_conditions(config.plan);
  std::vector<std::string> outputs = {"summary.json", "calibration_baseline.json",
                                      "calibration_recovery_aware.json",
                                      "calibration_delayed.json"};
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    persist_condition(config, out, conditions[i], summaries[i], traces[i]);
    outputs.push_back("conditions/" + conditions[i].name);
  }
  emit_summary(summaries, out, out / "summary.json");
  write_run_manifest(config, out, outputs);

  for (const auto& s : summaries) {
    std::cout << s.name << ": det=" << format_number(s.detection_rate) << " rec="
              << (s.recovery_rate ? format_number(*s.recovery_rate) : std::string("--"))
              << " mttr=" << (s.mttr_mean ? format_number(*s.mttr_mean) : std::string("--"))
              << "\n";
  }
  return 0;
}

int cmd_report(const CliOptions& opts) {
  const AppConfig config = resolve_config(opts);
  const fs::path out(config.out_dir);
  const fs::path conditions_dir = out / "conditions";
  if (!fs::exists(conditions_dir)) {
    std::cerr << "error: no persisted conditions under " << conditions_dir << "\n";
    return 4;
  }

  // Regenerate every summary artifact from the persisted traces alone.
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(conditions_dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  // Keep the canonical matrix order when all six rows are present.
  std::vector<std::string> ordered;
  for (const auto& c : ablation_conditions(config.plan)) {
    if (std::find(names.begin(), names.end(), c.name) != names.end()) ordered.push_back(c.name);
  }
  for (const auto& n : names) {
    if (std::find(ordered.begin(), ordered.end(), n) == ordered.end()) ordered.push_back(n);
  }

  std::vector<ConditionSummary> summaries;
  char name[32];
  for (const std::string& cond_name : ordered) {
    const fs::path dir = conditions_dir / cond_name;
    const ConditionMeta meta = load_condition_meta(dir / "condition.json");
    std::vector<EpisodeTrace> traces;
    traces.reserve(static_cast<std::size_t>(meta.episodes));
    for (int i = 0; i < meta.episodes; ++i) {
      std::snprintf(name, sizeof(name), "ep_%04d.csv", i);
      traces.push_back(load_episode_csv(dir / "episodes" / name, meta.condition.variant,
                                        meta.condition.scenario,
                                        meta.seeds.at(static_cast<std::size_t>(i))));
    }
    ConditionSummary summary = summarize_condition(meta.condition, meta.t_star, traces);
    emit_aggregate_csv(summary, dir / "aggregate.csv");
    emit_scatter_csv(summary, dir / "scatter.csv");
    emit_episode_rows_csv(summary, dir / "episodes.csv");
    summaries.push_back(std::move(summary));
  }
  emit_summary(summaries, out, out / "summary.json");
  std::cout << "regenerated summary for " << summaries.size() << " condition(s)\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftlab: runtime stability monitoring and recovery experiments"};
  app.require_subcommand(1);

  CliOptions opts;
  std::uint64_t seed_value = 0;
  int jobs_value = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "configuration file (JSON)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", seed_value, "master seed override")
        ->each([&](const std::string&) { opts.seed = seed_value; });
    cmd->add_option("--jobs", jobs_value, "worker threads for episode batches")
        ->each([&](const std::string&) { opts.jobs = jobs_value; });
  };

  CLI::App* calibrate = app.add_subcommand("calibrate", "fit scale and thresholds per variant");
  add_common(calibrate);
  CLI::App* run = app.add_subcommand("run", "run a single condition end to end");
  add_common(run);
  run->add_option("--condition", opts.condition, "condition name (see ablate rows)");
  CLI::App* ablate = app.add_subcommand("ablate", "run the full ablation matrix");
  add_common(ablate);
  CLI::App* report = app.add_subcommand("report", "regenerate summaries from persisted traces");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(opts);
    if (run->parsed()) return cmd_run(opts);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (report->parsed()) return cmd_report(opts);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
