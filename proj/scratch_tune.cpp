// Scratch parameter-tuning probe; not part of the build.
#include <cstdio>
#include <string>
#include <vector>

#include "driftlab/harness.hpp"

using namespace driftlab;

namespace {

struct Params {
  std::size_t d;
  double sigma_r, sigma_q, gamma_g, theta, sigma_r_delayed;
  int delay_k;
  std::uint64_t seed;
};

void probe(const Params& p) {
  ExperimentPlan plan;
  plan.episodes = 120;
  plan.calibration_runs = 200;
  plan.master_seed = p.seed;
  plan.jobs = 8;
  plan.sim.d = p.d;
  plan.sim.sigma_r = p.sigma_r;
  plan.sim.sigma_q = p.sigma_q;
  plan.sim.theta = p.theta;
  plan.sim.delay_k = p.delay_k;
  plan.delayed_sigma_r = p.sigma_r_delayed;
  plan.recovery.gamma_g = p.gamma_g;

  std::printf("=== d=%zu sr=%.3f sq=%.4f gg=%.3f theta=%.3f srd=%.4f k=%d seed=%llu\n", p.d,
              p.sigma_r, p.sigma_q, p.gamma_g, p.theta, p.sigma_r_delayed, p.delay_k,
              static_cast<unsigned long long>(p.seed));

  const CalibrationSet cals = run_all_calibrations(plan);
  for (const CalibrationResult* cal : {&cals.recovery_aware, &cals.baseline, &cals.delayed}) {
    const double var = cal->scale.scale - cal->scale.epsilon;
    std::printf("  cal[%s]: mu=%.4f sd=%.4f S=%.6g tau=%.4g tau_d=%.4g ktau_d=%.4g\n",
                to_string(cal->variant).c_str(), cal->scale.mu_nu, std::sqrt(var),
                cal->scale.scale, cal->thresholds.tau, cal->thresholds.tau_d,
                cal->thresholds.kappa * cal->thresholds.tau_d);
    // Express nominal mean drift score in threshold units.
    const double mean_e = (cal->scale.mu_nu * cal->scale.mu_nu + var) / cal->scale.scale;
    std::printf("    nominal mean energy=%.4g  tau_d/mean=%.4g\n", mean_e,
                cal->thresholds.tau_d / mean_e);
  }

  std::vector<std::vector<EpisodeTrace>> traces;
  const auto summaries = run_ablation(plan, cals, &traces);
  for (const auto& s : summaries) {
    std::printf(
        "  %-20s det=%5.3f (pre-onset %d) rec=%s mttr=%s(n=%d) latency=%s\n", s.name.c_str(),
        s.detection_rate, s.pre_onset_detections,
        s.recovery_rate ? std::to_string(*s.recovery_rate).c_str() : "--",
        s.mttr_mean ? std::to_string(*s.mttr_mean).c_str() : "--", s.mttr_count,
        s.latency_mean ? std::to_string(*s.latency_mean).c_str() : "--");
  }

  // Post-detection drift trajectories relative to the completion level, by
  // steps since first detection (mean over detected episodes).
  auto post_detection_profile = [&](std::size_t row, const CalibrationResult& cal) {
    const double exit_level = cal.thresholds.kappa * cal.thresholds.tau_d;
    std::vector<double> sum(22, 0.0);
    std::vector<int> count(22, 0);
    double min_ratio = 1e30;
    int dips = 0;
    for (const auto& tr : traces[row]) {
      if (!tr.t0) continue;
      for (const auto& step : tr.steps) {
        if (step.t <= *tr.t0 || !step.drift_score) continue;
        const double ratio = *step.drift_score / exit_level;
        const int j = step.t - *tr.t0;
        if (j < static_cast<int>(sum.size())) {
          sum[static_cast<std::size_t>(j)] += ratio;
          count[static_cast<std::size_t>(j)] += 1;
        }
        if (ratio < min_ratio) min_ratio = ratio;
        if (ratio <= 1.0) ++dips;
      }
    }
    std::printf("    min=%.3f dips=%d profile:", min_ratio, dips);
    for (std::size_t j = 1; j < sum.size(); j += 2) {
      if (count[j] > 0) std::printf(" %zu:%.3f", j, sum[j] / count[j]);
    }
    std::printf("\n");
  };
  std::printf("  full_controller D/exit:\n");
  post_detection_profile(1, cals.recovery_aware);
  std::printf("  no_gain_modulation D/exit:\n");
  post_detection_profile(3, cals.recovery_aware);
  std::printf("  no_tool_fallback D/exit:\n");
  post_detection_profile(4, cals.recovery_aware);
  std::printf("  delayed_evidence D/exit:\n");
  post_detection_profile(5, cals.delayed);

  // Paired final semantic drift: recovery-aware vs baseline (misroute rows).
  int lower = 0;
  for (int i = 0; i < plan.episodes; ++i) {
    if (traces[1][i].final_semantic < traces[0][i].final_semantic) ++lower;
  }
  std::printf("  paired s_T lower: %d/%d\n", lower, plan.episodes);

  // Fresh nominal false-alarm rate, recovery-aware variant, N=200.
  ExperimentPlan fresh = plan;
  fresh.episodes = 200;
  Condition nominal_cond{"fresh_nominal", Variant::recovery_aware, Scenario::nominal,
                         plan.recovery};
  const ConditionSummary fa = run_condition(fresh, nominal_cond, cals.recovery_aware);
  std::printf("  fresh nominal FA rate: %.3f\n", fa.detection_rate);
}

} // namespace

int main(int argc, char** argv) {
  std::vector<Params> grid;
  if (argc > 1 && std::string(argv[1]) == "grid") {
    for (double sr : {0.19, 0.205, 0.22}) {
      for (double gg : {0.1, 0.15, 0.2}) {
        grid.push_back({2048, sr, 0.002, gg, 0.06, 0.0225, 4, 42});
      }
    }
  } else if (argc > 7) {
    grid.push_back({static_cast<std::size_t>(std::stoul(argv[1])), std::stod(argv[2]),
                    std::stod(argv[3]), std::stod(argv[4]), std::stod(argv[5]),
                    std::stod(argv[6]), std::stoi(argv[7]),
                    argc > 8 ? std::stoull(argv[8]) : 42});
  } else {
    grid.push_back({2048, 0.205, 0.002, 0.15, 0.06, 0.0225, 4, 42});
  }
  for (const auto& p : grid) probe(p);
  return 0;
}
