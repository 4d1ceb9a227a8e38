#include "driftlab/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace driftlab {

using ordered_json = nlohmann::ordered_json;

const char* kArtifactVersion = "0.1.0";

namespace {

void ensure_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_keys(const ordered_json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(scope + "." + it.key() + ": unknown field");
    }
  }
}

template <typename T>
T get_or(const ordered_json& obj, const std::string& scope, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(scope + "." + key + ": wrong type");
  }
}

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ConfigError(field + ": " + constraint);
}

std::string event_name(MonitorEvent e) {
  switch (e) {
    case MonitorEvent::none: return "";
    case MonitorEvent::drift_detected: return "drift_detected";
    case MonitorEvent::recovery_complete: return "recovery_complete";
  }
  return "";
}

MonitorEvent event_from(const std::string& name) {
  if (name.empty()) return MonitorEvent::none;
  if (name == "drift_detected") return MonitorEvent::drift_detected;
  if (name == "recovery_complete") return MonitorEvent::recovery_complete;
  throw std::runtime_error("unknown event name: " + name);
}

Variant variant_from(const std::string& name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "recovery_aware") return Variant::recovery_aware;
  throw std::runtime_error("unknown variant: " + name);
}

Scenario scenario_from(const std::string& name) {
  if (name == "nominal") return Scenario::nominal;
  if (name == "misroute") return Scenario::misroute;
  if (name == "delayed") return Scenario::delayed;
  throw std::runtime_error("unknown scenario: " + name);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

} // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

AppConfig default_config() {
  AppConfig config;
  config.plan.recovery.alpha = config.plan.sim.alpha;
  return config;
}

AppConfig parse_config_text(const std::string& text, const std::string& origin) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!root.is_object()) {
    throw ConfigError(origin + ": top-level value must be an object");
  }
  check_keys(root, "config", {"sim", "monitor", "recovery", "plan", "out_dir"});

  AppConfig config = default_config();
  SimConfig& sim = config.plan.sim;
  MonitorSettings& mon = config.plan.monitor;
  RecoveryConfig& rec = config.plan.recovery;

  if (root.contains("sim")) {
    const auto& j = root.at("sim");
    check_keys(j, "sim",
               {"d", "horizon", "onset", "alpha", "alpha_baseline", "sigma_q", "sigma_r",
                "delay_k", "theta", "sigma_r_delayed"});
    sim.d = get_or<std::size_t>(j, "sim", "d", sim.d);
    sim.horizon = get_or<int>(j, "sim", "horizon", sim.horizon);
    sim.onset = get_or<int>(j, "sim", "onset", sim.onset);
    sim.alpha = get_or<double>(j, "sim", "alpha", sim.alpha);
    sim.alpha_baseline = get_or<double>(j, "sim", "alpha_baseline", sim.alpha_baseline);
    sim.sigma_q = get_or<double>(j, "sim", "sigma_q", sim.sigma_q);
    sim.sigma_r = get_or<double>(j, "sim", "sigma_r", sim.sigma_r);
    sim.delay_k = get_or<int>(j, "sim", "delay_k", sim.delay_k);
    sim.theta = get_or<double>(j, "sim", "theta", sim.theta);
    config.plan.delayed_sigma_r =
        get_or<double>(j, "sim", "sigma_r_delayed", config.plan.delayed_sigma_r);
  }
  if (root.contains("monitor")) {
    const auto& j = root.at("monitor");
    check_keys(j, "monitor", {"window", "p_tau", "p_tau_d", "kappa", "epsilon", "scale_mode"});
    mon.window = get_or<std::size_t>(j, "monitor", "window", mon.window);
    mon.p_tau = get_or<double>(j, "monitor", "p_tau", mon.p_tau);
    mon.p_tau_d = get_or<double>(j, "monitor", "p_tau_d", mon.p_tau_d);
    mon.kappa = get_or<double>(j, "monitor", "kappa", mon.kappa);
    mon.epsilon = get_or<double>(j, "monitor", "epsilon", mon.epsilon);
    const std::string mode = get_or<std::string>(j, "monitor", "scale_mode", "variance");
    if (mode == "variance") {
      mon.scale_mode = ScaleMode::variance;
    } else if (mode == "second_moment") {
      mon.scale_mode = ScaleMode::second_moment;
    } else {
      throw ConfigError("monitor.scale_mode: must be \"variance\" or \"second_moment\"");
    }
  }
  if (root.contains("recovery")) {
    const auto& j = root.at("recovery");
    check_keys(j, "recovery", {"beta", "gamma_g", "rollback", "gain_modulation", "tool_fallback"});
    rec.beta = get_or<double>(j, "recovery", "beta", rec.beta);
    rec.gamma_g = get_or<double>(j, "recovery", "gamma_g", rec.gamma_g);
    rec.rollback = get_or<bool>(j, "recovery", "rollback", rec.rollback);
    rec.gain_modulation = get_or<bool>(j, "recovery", "gain_modulation", rec.gain_modulation);
    rec.tool_fallback = get_or<bool>(j, "recovery", "tool_fallback", rec.tool_fallback);
  }
  if (root.contains("plan")) {
    const auto& j = root.at("plan");
    check_keys(j, "plan", {"episodes", "calibration_runs", "master_seed", "jobs"});
    config.plan.episodes = get_or<int>(j, "plan", "episodes", config.plan.episodes);
    config.plan.calibration_runs =
        get_or<int>(j, "plan", "calibration_runs", config.plan.calibration_runs);
    config.plan.master_seed =
        get_or<std::uint64_t>(j, "plan", "master_seed", config.plan.master_seed);
    config.plan.jobs = get_or<int>(j, "plan", "jobs", config.plan.jobs);
  }
  config.out_dir = get_or<std::string>(root, "config", "out_dir", config.out_dir);

  // The recovery controller restores the simulator's nominal gain.
  rec.alpha = sim.alpha;

  // Field-qualified constraint checks.
  require(sim.d >= 2, "sim.d", "must be >= 2");
  require(sim.horizon >= 1, "sim.horizon", "must be >= 1");
  require(sim.onset >= 1 && sim.onset < sim.horizon, "sim.onset",
          "must satisfy 1 <= onset < horizon");
  require(sim.alpha > 0.0 && sim.alpha <= 1.0, "sim.alpha", "must lie in (0,1]");
  require(sim.alpha_baseline > 0.0 && sim.alpha_baseline <= 1.0, "sim.alpha_baseline",
          "must lie in (0,1]");
  require(sim.sigma_q >= 0.0, "sim.sigma_q", "must be nonnegative");
  require(sim.sigma_r >= 0.0, "sim.sigma_r", "must be nonnegative");
  require(sim.delay_k >= 1, "sim.delay_k", "must be >= 1");
  require(sim.theta >= 0.0, "sim.theta", "must be nonnegative");
  require(config.plan.delayed_sigma_r >= 0.0, "sim.sigma_r_delayed", "must be nonnegative");
  require(mon.window >= 1, "monitor.window", "must be >= 1");
  require(mon.p_tau > 0.0 && mon.p_tau <= mon.p_tau_d && mon.p_tau_d < 1.0, "monitor.p_tau",
          "must satisfy 0 < p_tau <= p_tau_d < 1");
  require(mon.kappa > 0.0 && mon.kappa < 1.0, "monitor.kappa", "must lie in (0,1)");
  require(mon.epsilon > 0.0, "monitor.epsilon", "must be positive");
  require(rec.beta >= 0.0 && rec.beta <= 1.0, "recovery.beta", "must lie in [0,1]");
  require(rec.gamma_g > 0.0 && rec.gamma_g <= 1.0, "recovery.gamma_g", "must lie in (0,1]");
  require(config.plan.episodes >= 1, "plan.episodes", "must be >= 1");
  require(config.plan.calibration_runs >= 10, "plan.calibration_runs", "must be >= 10");
  require(config.plan.jobs >= 1, "plan.jobs", "must be >= 1");
  return config;
}

AppConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_text(path), path.string());
}

std::string canonical_config(const AppConfig& config) {
  const SimConfig& sim = config.plan.sim;
  const MonitorSettings& mon = config.plan.monitor;
  const RecoveryConfig& rec = config.plan.recovery;
  ordered_json j;
  j["sim"] = {{"d", sim.d},
              {"horizon", sim.horizon},
              {"onset", sim.onset},
              {"alpha", sim.alpha},
              {"alpha_baseline", sim.alpha_baseline},
              {"sigma_q", sim.sigma_q},
              {"sigma_r", sim.sigma_r},
              {"delay_k", sim.delay_k},
              {"theta", sim.theta},
              {"sigma_r_delayed", config.plan.delayed_sigma_r}};
  j["monitor"] = {{"window", mon.window},
                  {"p_tau", mon.p_tau},
                  {"p_tau_d", mon.p_tau_d},
                  {"kappa", mon.kappa},
                  {"epsilon", mon.epsilon},
                  {"scale_mode", mon.scale_mode == ScaleMode::variance ? "variance"
                                                                       : "second_moment"}};
  j["recovery"] = {{"beta", rec.beta},
                   {"gamma_g", rec.gamma_g},
                   {"rollback", rec.rollback},
                   {"gain_modulation", rec.gain_modulation},
                   {"tool_fallback", rec.tool_fallback}};
  j["plan"] = {{"episodes", config.plan.episodes},
               {"calibration_runs", config.plan.calibration_runs},
               {"master_seed", config.plan.master_seed},
               {"jobs", config.plan.jobs}};
  return j.dump(2) + "\n";
}

std::string config_digest(const AppConfig& config) {
  const std::string text = canonical_config(config);
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  ordered_json j;
  j["artifact_version"] = manifest.artifact_version;
  j["config_digest"] = manifest.digest;
  j["master_seed"] = manifest.master_seed;
  if (manifest.timestamp) {
    j["timestamp"] = *manifest.timestamp;
  } else {
    j["timestamp"] = nullptr;
  }
  j["outputs"] = manifest.outputs;
  write_text(path, j.dump(2) + "\n");
}

void emit_episode_csv(const EpisodeTrace& trace, const std::filesystem::path& path) {
  std::string out = "t,nu,energy,drift_score,semantic_drift,event\n";
  for (const StepRecord& step : trace.steps) {
    out += std::to_string(step.t);
    out += ',';
    out += format_number(step.nu);
    out += ',';
    out += format_number(step.energy);
    out += ',';
    if (step.drift_score) out += format_number(*step.drift_score);
    out += ',';
    out += format_number(step.semantic);
    out += ',';
    out += event_name(step.event);
    out += '\n';
  }
  write_text(path, out);
}

EpisodeTrace load_episode_csv(const std::filesystem::path& path, Variant variant,
                              Scenario scenario, std::uint64_t seed) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty trace file: " + path.string());
  }
  EpisodeTrace trace;
  trace.variant = variant;
  trace.scenario = scenario;
  trace.seed = seed;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw std::runtime_error("malformed trace row in " + path.string());
    }
    StepRecord step;
    step.t = std::stoi(fields[0]);
    step.nu = std::stod(fields[1]);
    step.energy = std::stod(fields[2]);
    if (!fields[3].empty()) step.drift_score = std::stod(fields[3]);
    step.semantic = std::stod(fields[4]);
    step.event = event_from(fields[5]);
    trace.steps.push_back(step);
  }
  rebuild_bookkeeping(trace);
  return trace;
}

void write_calibration(const CalibrationResult& cal, const std::filesystem::path& path) {
  ordered_json j;
  j["variant"] = to_string(cal.variant);
  j["scenario"] = to_string(cal.scenario);
  j["episodes"] = cal.episodes;
  j["degenerate"] = cal.degenerate;
  j["mu_nu"] = cal.scale.mu_nu;
  j["scale"] = cal.scale.scale;
  j["epsilon"] = cal.scale.epsilon;
  j["scale_mode"] = cal.scale.mode == ScaleMode::variance ? "variance" : "second_moment";
  j["thresholds"] = {{"tau", cal.thresholds.tau},
                     {"tau_d", cal.thresholds.tau_d},
                     {"kappa", cal.thresholds.kappa}};
  j["nominal_sample"] = cal.scale.nominal_sample;
  write_text(path, j.dump(2) + "\n");
}

CalibrationResult load_calibration(const std::filesystem::path& path) {
  const ordered_json j = ordered_json::parse(read_text(path));
  CalibrationResult cal;
  cal.variant = variant_from(j.at("variant").get<std::string>());
  cal.scenario = scenario_from(j.at("scenario").get<std::string>());
  cal.episodes = j.at("episodes").get<int>();
  cal.degenerate = j.at("degenerate").get<bool>();
  cal.scale.mu_nu = j.at("mu_nu").get<double>();
  cal.scale.scale = j.at("scale").get<double>();
  cal.scale.epsilon = j.at("epsilon").get<double>();
  cal.scale.mode = j.at("scale_mode").get<std::string>() == "variance"
                       ? ScaleMode::variance
                       : ScaleMode::second_moment;
  cal.thresholds.tau = j.at("thresholds").at("tau").get<double>();
  cal.thresholds.tau_d = j.at("thresholds").at("tau_d").get<double>();
  cal.thresholds.kappa = j.at("thresholds").at("kappa").get<double>();
  cal.scale.nominal_sample = j.at("nominal_sample").get<std::vector<double>>();
  return cal;
}

void write_condition_meta(const ConditionMeta& meta, const std::filesystem::path& path) {
  ordered_json j;
  j["name"] = meta.condition.name;
  j["variant"] = to_string(meta.condition.variant);
  j["scenario"] = to_string(meta.condition.scenario);
  j["t_star"] = meta.t_star;
  j["episodes"] = meta.episodes;
  j["recovery"] = {{"alpha", meta.condition.recovery.alpha},
                   {"beta", meta.condition.recovery.beta},
                   {"gamma_g", meta.condition.recovery.gamma_g},
                   {"rollback", meta.condition.recovery.rollback},
                   {"gain_modulation", meta.condition.recovery.gain_modulation},
                   {"tool_fallback", meta.condition.recovery.tool_fallback}};
  j["seeds"] = meta.seeds;
  write_text(path, j.dump(2) + "\n");
}

ConditionMeta load_condition_meta(const std::filesystem::path& path) {
  const ordered_json j = ordered_json::parse(read_text(path));
  ConditionMeta meta;
  meta.condition.name = j.at("name").get<std::string>();
  meta.condition.variant = variant_from(j.at("variant").get<std::string>());
  meta.condition.scenario = scenario_from(j.at("scenario").get<std::string>());
  meta.t_star = j.at("t_star").get<int>();
  meta.episodes = j.at("episodes").get<int>();
  const auto& rec = j.at("recovery");
  meta.condition.recovery.alpha = rec.at("alpha").get<double>();
  meta.condition.recovery.beta = rec.at("beta").get<double>();
  meta.condition.recovery.gamma_g = rec.at("gamma_g").get<double>();
  meta.condition.recovery.rollback = rec.at("rollback").get<bool>();
  meta.condition.recovery.gain_modulation = rec.at("gain_modulation").get<bool>();
  meta.condition.recovery.tool_fallback = rec.at("tool_fallback").get<bool>();
  meta.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  return meta;
}

void emit_aggregate_csv(const ConditionSummary& summary, const std::filesystem::path& path) {
  std::string out =
      "t,nu_mean,nu_std,energy_mean,energy_std,drift_mean,drift_std,semantic_mean,semantic_std\n";
  const auto& c = summary.curves;
  for (std::size_t i = 0; i < c.nu_mean.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += format_number(c.nu_mean[i]);
    out += ',';
    out += format_number(c.nu_std[i]);
    out += ',';
    out += format_number(c.energy_mean[i]);
    out += ',';
    out += format_number(c.energy_std[i]);
    out += ',';
    if (c.drift_mean[i]) out += format_number(*c.drift_mean[i]);
    out += ',';
    if (c.drift_std[i]) out += format_number(*c.drift_std[i]);
    out += ',';
    out += format_number(c.semantic_mean[i]);
    out += ',';
    out += format_number(c.semantic_std[i]);
    out += '\n';
  }
  write_text(path, out);
}

void emit_scatter_csv(const ConditionSummary& summary, const std::filesystem::path& path) {
  std::string out = "episode,final_drift,final_semantic\n";
  for (const EpisodeRow& row : summary.rows) {
    out += std::to_string(row.index);
    out += ',';
    out += format_number(row.final_drift);
    out += ',';
    out += format_number(row.final_semantic);
    out += '\n';
  }
  write_text(path, out);
}

void emit_episode_rows_csv(const ConditionSummary& summary, const std::filesystem::path& path) {
  std::string out = "episode,seed,detected,t0,recovered,tr,latency,final_drift,final_semantic\n";
  for (const EpisodeRow& row : summary.rows) {
    out += std::to_string(row.index);
    out += ',';
    out += std::to_string(row.seed);
    out += ',';
    out += row.detected ? "1" : "0";
    out += ',';
    if (row.t0) out += std::to_string(*row.t0);
    out += ',';
    out += row.recovered ? "1" : "0";
    out += ',';
    if (row.tr) out += std::to_string(*row.tr);
    out += ',';
    if (row.latency) out += std::to_string(*row.latency);
    out += ',';
    out += format_number(row.final_drift);
    out += ',';
    out += format_number(row.final_semantic);
    out += '\n';
  }
  write_text(path, out);
}

namespace {

ordered_json nullable(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

} // namespace

void emit_summary(const std::vector<ConditionSummary>& summaries,
                  const std::filesystem::path& out_dir, const std::filesystem::path& path) {
  if (summaries.empty()) {
    throw std::invalid_argument("emit_summary: no condition summaries");
  }
  (void)out_dir; // paths are stored relative to the summary file by layout convention
  ordered_json records = ordered_json::array();
  for (const ConditionSummary& s : summaries) {
    const std::string base = "conditions/" + s.name + "/";
    ordered_json j;
    j["condition"] = s.name;
    j["variant"] = to_string(s.variant);
    j["scenario"] = to_string(s.scenario);
    j["episodes"] = s.episodes;
    j["detected"] = s.detected;
    j["recovered"] = s.recovered;
    j["pre_onset_detections"] = s.pre_onset_detections;
    j["det_rate"] = s.detection_rate;
    j["rec_rate"] = nullable(s.recovery_rate);
    j["mttr_mean"] = nullable(s.mttr_mean);
    j["mttr_std"] = nullable(s.mttr_std);
    j["mttr_count"] = s.mttr_count;
    j["latency_mean"] = nullable(s.latency_mean);
    j["aggregate_path"] = base + "aggregate.csv";
    j["scatter_path"] = base + "scatter.csv";
    j["episodes_path"] = base + "episodes.csv";
    records.push_back(j);
  }
  ordered_json root;
  root["conditions"] = records;
  write_text(path, root.dump(2) + "\n");
}

std::vector<ConditionSummary> load_summary_records(const std::filesystem::path& path) {
  const ordered_json root = ordered_json::parse(read_text(path));
  std::vector<ConditionSummary> out;
  for (const auto& j : root.at("conditions")) {
    ConditionSummary s;
    s.name = j.at("condition").get<std::string>();
    s.variant = variant_from(j.at("variant").get<std::string>());
    s.scenario = scenario_from(j.at("scenario").get<std::string>());
    s.episodes = j.at("episodes").get<int>();
    s.detected = j.at("detected").get<int>();
    s.recovered = j.at("recovered").get<int>();
    s.pre_onset_detections = j.at("pre_onset_detections").get<int>();
    s.detection_rate = j.at("det_rate").get<double>();
    if (!j.at("rec_rate").is_null()) s.recovery_rate = j.at("rec_rate").get<double>();
    if (!j.at("mttr_mean").is_null()) s.mttr_mean = j.at("mttr_mean").get<double>();
    if (!j.at("mttr_std").is_null()) s.mttr_std = j.at("mttr_std").get<double>();
    s.mttr_count = j.at("mttr_count").get<int>();
    if (!j.at("latency_mean").is_null()) s.latency_mean = j.at("latency_mean").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace driftlab
