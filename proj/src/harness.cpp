#include "driftlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace driftlab {

void validate(const MonitorSettings& m) {
  if (m.window < 1) throw std::invalid_argument("MonitorSettings: window must be >= 1");
  if (!(m.p_tau > 0.0 && m.p_tau <= m.p_tau_d && m.p_tau_d < 1.0)) {
    throw std::invalid_argument("MonitorSettings: need 0 < p_tau <= p_tau_d < 1");
  }
  if (!(m.kappa > 0.0 && m.kappa < 1.0)) {
    throw std::invalid_argument("MonitorSettings: kappa must lie in (0,1)");
  }
  if (!(m.epsilon > 0.0)) {
    throw std::invalid_argument("MonitorSettings: epsilon must be positive");
  }
}

SimConfig ExperimentPlan::delayed_sim() const {
  SimConfig cfg = sim;
  cfg.scenario = Scenario::delayed;
  cfg.sigma_r = delayed_sigma_r;
  return cfg;
}

void validate(const ExperimentPlan& plan) {
  if (plan.episodes < 1) throw std::invalid_argument("ExperimentPlan: episodes must be >= 1");
  if (plan.calibration_runs < 10) {
    throw std::invalid_argument("ExperimentPlan: calibration_runs must be >= 10");
  }
  if (plan.jobs < 1) throw std::invalid_argument("ExperimentPlan: jobs must be >= 1");
  if (plan.delayed_sigma_r < 0.0) {
    throw std::invalid_argument("ExperimentPlan: delayed_sigma_r must be nonnegative");
  }
  validate(plan.sim);
  validate(plan.delayed_sim());
  validate(plan.recovery);
  validate(plan.monitor);
}

std::uint64_t episode_seed(const ExperimentPlan& plan, std::uint64_t stream, int index) {
  return Rng::derive(plan.master_seed, stream, static_cast<std::uint64_t>(index));
}

std::vector<Condition> ablation_conditions(const ExperimentPlan& plan) {
  RecoveryConfig all = plan.recovery;
  all.rollback = true;
  all.gain_modulation = true;
  all.tool_fallback = true;

  auto with = [&](bool rb, bool gm, bool tf) {
    RecoveryConfig c = all;
    c.rollback = rb;
    c.gain_modulation = gm;
    c.tool_fallback = tf;
    return c;
  };

  SimConfig misroute = plan.sim;
  misroute.scenario = Scenario::misroute;
  const SimConfig delayed = plan.delayed_sim();

  return {
      {"baseline", Variant::baseline, Scenario::misroute, all, misroute},
      {"full_controller", Variant::recovery_aware, Scenario::misroute, all, misroute},
      {"no_rollback", Variant::recovery_aware, Scenario::misroute, with(false, true, true),
       misroute},
      {"no_gain_modulation", Variant::recovery_aware, Scenario::misroute,
       with(true, false, true), misroute},
      {"no_tool_fallback", Variant::recovery_aware, Scenario::misroute, with(true, true, false),
       misroute},
      {"delayed_evidence", Variant::recovery_aware, Scenario::delayed, all, delayed},
  };
}

std::optional<Condition> find_condition(const ExperimentPlan& plan, const std::string& name) {
  for (auto& c : ablation_conditions(plan)) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

CalibrationResult run_calibration(const ExperimentPlan& plan, Variant variant) {
  const std::uint64_t stream = variant == Variant::baseline ? kCalibrationBaselineStream
                                                            : kCalibrationRecoveryStream;
  return run_calibration(plan, variant, plan.sim, stream, Scenario::misroute);
}

CalibrationResult run_calibration(const ExperimentPlan& plan, Variant variant,
                                  const SimConfig& regime, std::uint64_t stream,
                                  Scenario target_scenario) {
  validate(plan);
  const double gain = variant == Variant::baseline ? regime.alpha_baseline : regime.alpha;

  std::vector<std::vector<double>> episode_nus(static_cast<std::size_t>(plan.calibration_runs));
  for (int i = 0; i < plan.calibration_runs; ++i) {
    SimConfig cfg = regime;
    cfg.scenario = Scenario::nominal;
    cfg.seed = episode_seed(plan, stream, i);
    episode_nus[static_cast<std::size_t>(i)] = run_nominal_innovations(cfg, gain);
  }

  std::vector<double> pooled;
  pooled.reserve(episode_nus.size() * static_cast<std::size_t>(regime.horizon));
  for (const auto& nus : episode_nus) {
    pooled.insert(pooled.end(), nus.begin(), nus.end());
  }

  CalibrationResult result;
  result.variant = variant;
  result.scenario = target_scenario;
  result.episodes = plan.calibration_runs;
  result.scale = calibrate_scale(pooled, plan.monitor.epsilon, plan.monitor.scale_mode);
  result.degenerate = result.scale.scale <= plan.monitor.epsilon;

  // Score each calibration episode with the fitted scale, then fit thresholds
  // from per-episode drift-score sequences.
  std::vector<std::vector<double>> episode_scores;
  episode_scores.reserve(episode_nus.size());
  for (const auto& nus : episode_nus) {
    SlidingWindow window(plan.monitor.window);
    std::vector<double> scores;
    for (double nu : nus) {
      window.push(innovation_energy(nu, result.scale));
      if (auto mean = window.mean()) scores.push_back(*mean);
    }
    episode_scores.push_back(std::move(scores));
  }
  result.thresholds = calibrate_thresholds(episode_scores, plan.monitor.p_tau,
                                           plan.monitor.p_tau_d, plan.monitor.kappa);
  return result;
}

void rebuild_bookkeeping(EpisodeTrace& trace) {
  trace.detected = false;
  trace.t0.reset();
  trace.recovered = false;
  trace.tr.reset();
  trace.recovery_events.clear();
  for (const auto& step : trace.steps) {
    if (step.event == MonitorEvent::drift_detected) {
      if (!trace.t0) {
        trace.t0 = step.t;
        trace.detected = true;
      }
      if (trace.variant == Variant::recovery_aware) {
        trace.recovery_events.push_back(RecoveryEvent{step.t, std::nullopt});
      }
    } else if (step.event == MonitorEvent::recovery_complete) {
      if (trace.variant == Variant::recovery_aware && !trace.recovery_events.empty() &&
          !trace.recovery_events.back().tr) {
        trace.recovery_events.back().tr = step.t;
        trace.recovered = true;
        if (!trace.tr) trace.tr = step.t;
      }
    }
  }
  if (!trace.steps.empty()) {
    trace.final_semantic = trace.steps.back().semantic;
    trace.final_drift = trace.steps.back().drift_score.value_or(0.0);
  }
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
  var /= static_cast<double>(xs.size());
  ms.std = std::sqrt(var);
  return ms;
}

} // namespace

ConditionSummary summarize_condition(const Condition& condition, int t_star,
                                     const std::vector<EpisodeTrace>& traces) {
  if (traces.empty()) {
    throw std::invalid_argument("summarize_condition: no traces");
  }
  const int horizon = static_cast<int>(traces.front().steps.size());

  ConditionSummary s;
  s.name = condition.name;
  s.variant = condition.variant;
  s.scenario = condition.scenario;
  s.episodes = static_cast<int>(traces.size());

  std::vector<RecoveryEvent> pooled_events;
  std::vector<double> latencies;
  s.rows.reserve(traces.size());

  for (std::size_t i = 0; i < traces.size(); ++i) {
    const EpisodeTrace& tr = traces[i];
    if (static_cast<int>(tr.steps.size()) != horizon) {
      throw std::invalid_argument("summarize_condition: ragged trace horizons");
    }
    EpisodeRow row;
    row.index = static_cast<int>(i);
    row.seed = tr.seed;
    row.detected = tr.detected;
    row.t0 = tr.t0;
    row.recovered = tr.recovered;
    row.tr = tr.tr;
    row.final_drift = tr.final_drift;
    row.final_semantic = tr.final_semantic;
    if (tr.detected) {
      ++s.detected;
      const int lat = detection_latency(*tr.t0, t_star);
      row.latency = lat;
      if (lat < 0) {
        ++s.pre_onset_detections;
      } else {
        latencies.push_back(static_cast<double>(lat));
      }
    }
    if (tr.recovered) ++s.recovered;
    for (const auto& ev : tr.recovery_events) pooled_events.push_back(ev);
    s.rows.push_back(row);
  }

  s.detection_rate = static_cast<double>(s.detected) / static_cast<double>(s.episodes);
  if (s.detected > 0) {
    s.recovery_rate = static_cast<double>(s.recovered) / static_cast<double>(s.detected);
  }
  if (auto stats = mttr_a(pooled_events)) {
    s.mttr_mean = stats->mean;
    s.mttr_std = stats->stddev;
    s.mttr_count = static_cast<int>(stats->count);
  }
  if (!latencies.empty()) {
    s.latency_mean = mean_std(latencies).mean;
  }

  s.curves.nu_mean.resize(static_cast<std::size_t>(horizon));
  s.curves.nu_std.resize(static_cast<std::size_t>(horizon));
  s.curves.energy_mean.resize(static_cast<std::size_t>(horizon));
  s.curves.energy_std.resize(static_cast<std::size_t>(horizon));
  s.curves.semantic_mean.resize(static_cast<std::size_t>(horizon));
  s.curves.semantic_std.resize(static_cast<std::size_t>(horizon));
  s.curves.drift_mean.resize(static_cast<std::size_t>(horizon));
  s.curves.drift_std.resize(static_cast<std::size_t>(horizon));

  std::vector<double> column;
  column.reserve(traces.size());
  for (int t = 1; t <= horizon; ++t) {
    const std::size_t idx = static_cast<std::size_t>(t - 1);
    auto fill = [&](auto getter, std::vector<double>& mean_out, std::vector<double>& std_out) {
      column.clear();
      for (const auto& tr : traces) column.push_back(getter(tr.steps[idx]));
      const MeanStd ms = mean_std(column);
      mean_out[idx] = ms.mean;
      std_out[idx] = ms.std;
    };
    fill([](const StepRecord& r) { return r.nu; }, s.curves.nu_mean, s.curves.nu_std);
    fill([](const StepRecord& r) { return r.energy; }, s.curves.energy_mean, s.curves.energy_std);
    fill([](const StepRecord& r) { return r.semantic; }, s.curves.semantic_mean,
         s.curves.semantic_std);

    column.clear();
    bool any = true;
    for (const auto& tr : traces) {
      if (!tr.steps[idx].drift_score) {
        any = false;
        break;
      }
      column.push_back(*tr.steps[idx].drift_score);
    }
    if (any) {
      const MeanStd ms = mean_std(column);
      s.curves.drift_mean[idx] = ms.mean;
      s.curves.drift_std[idx] = ms.std;
    }
  }
  return s;
}

ConditionSummary run_condition(const ExperimentPlan& plan, const Condition& condition,
                               const CalibrationResult& calibration,
                               std::vector<EpisodeTrace>* traces_out) {
  validate(plan);
  if (calibration.variant != condition.variant) {
    throw std::invalid_argument("run_condition: calibration fitted on a different variant");
  }

  const int n = plan.episodes;
  std::vector<EpisodeTrace> traces(static_cast<std::size_t>(n));

  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      SimConfig cfg = condition.sim;
      cfg.scenario = condition.scenario;
      cfg.seed = episode_seed(plan, kConditionStream, i);
      traces[static_cast<std::size_t>(i)] =
          run_episode(cfg, condition.variant, condition.recovery, plan.monitor.window,
                      calibration.thresholds, calibration.scale);
    }
  };

  const int jobs = std::min(plan.jobs, n);
  if (jobs <= 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    const int chunk = (n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const int begin = j * chunk;
      const int end = std::min(n, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back(worker, begin, end);
    }
    for (auto& th : threads) th.join();
  }

  ConditionSummary summary = summarize_condition(condition, condition.sim.onset, traces);
  if (traces_out) *traces_out = std::move(traces);
  return summary;
}

ConditionSummary run_condition(const ExperimentPlan& plan, const Condition& condition,
                               const CalibrationResult& calibration) {
  return run_condition(plan, condition, calibration, nullptr);
}

CalibrationSet run_all_calibrations(const ExperimentPlan& plan) {
  CalibrationSet set;
  set.baseline = run_calibration(plan, Variant::baseline);
  set.recovery_aware = run_calibration(plan, Variant::recovery_aware);
  set.delayed = run_calibration(plan, Variant::recovery_aware, plan.delayed_sim(),
                                kCalibrationDelayedStream, Scenario::delayed);
  return set;
}

std::vector<ConditionSummary> run_ablation(const ExperimentPlan& plan,
                                           const CalibrationSet& calibrations,
                                           std::vector<std::vector<EpisodeTrace>>* traces_out) {
  std::vector<ConditionSummary> summaries;
  if (traces_out) traces_out->clear();
  for (const Condition& condition : ablation_conditions(plan)) {
    std::vector<EpisodeTrace> traces;
    summaries.push_back(run_condition(plan, condition,
                                      calibrations.for_condition(condition), &traces));
    if (traces_out) traces_out->push_back(std::move(traces));
  }
  return summaries;
}

} // namespace driftlab
