#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "driftlab/simulator.hpp"

using namespace driftlab;

namespace {

SimConfig noise_free(Scenario scenario, std::size_t d = 6) {
  SimConfig cfg;
  cfg.d = d;
  cfg.horizon = 30;
  cfg.onset = 5;
  cfg.sigma_q = 0.0;
  cfg.sigma_r = 0.0;
  cfg.scenario = scenario;
  cfg.seed = 1234;
  return cfg;
}

RecoveryConfig recovery_all() {
  RecoveryConfig cfg;
  cfg.alpha = 0.35;
  cfg.beta = 0.20;
  cfg.gamma_g = 0.5;
  return cfg;
}

ScaleCalibration unit_scale() {
  ScaleCalibration cal;
  cal.scale = 1.0;
  return cal;
}

// Thresholds that never fire, for passive signal-shape checks.
const Thresholds kSilent{1e18, 1e18, 0.85};

bool same_steps(const EpisodeTrace& a, const EpisodeTrace& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const StepRecord& x = a.steps[i];
    const StepRecord& y = b.steps[i];
    if (x.t != y.t || x.nu != y.nu || x.energy != y.energy || x.semantic != y.semantic)
      return false;
    if (x.drift_score.has_value() != y.drift_score.has_value()) return false;
    if (x.drift_score && *x.drift_score != *y.drift_score) return false;
    if (x.event != y.event) return false;
  }
  return true;
}

} // namespace

TEST_CASE("rng determinism and substream derivation") {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.gaussian() == b.gaussian());
  }
  const std::uint64_t s1 = Rng::derive(42, 1, 0);
  const std::uint64_t s2 = Rng::derive(42, 1, 1);
  const std::uint64_t s3 = Rng::derive(42, 2, 0);
  CHECK(s1 != s2);
  CHECK(s1 != s3);
  CHECK(Rng::derive(42, 1, 0) == s1);
}

TEST_CASE("intent generation") {
  Rng rng(5);
  const IntentPair pair = generate_intents(rng, 2);
  CHECK(std::abs(pair.u.norm() - 1.0) <= 1e-9);
  CHECK(std::abs(pair.u_wrong.norm() - 1.0) <= 1e-9);
  CHECK(std::abs(pair.u.dot(pair.u_wrong)) <= 0.1);

  // Orthogonal axis pair satisfies the same invariant.
  const UnitVector u = UnitVector::axis(2, 0);
  const UnitVector w = UnitVector::axis(2, 1);
  CHECK(u.dot(w) == 0.0);

  double max_abs_cos = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const IntentPair p = generate_intents(rng, 8);
    max_abs_cos = std::max(max_abs_cos, std::abs(p.u.dot(p.u_wrong)));
  }
  CHECK(max_abs_cos <= 0.1);

  CHECK_THROWS_AS(generate_intents(rng, 1), std::invalid_argument);
}

TEST_CASE("predict is the identity") {
  Rng rng(6);
  const IntentPair pair = generate_intents(rng, 4);
  const UnitVector& once = predict(pair.u);
  CHECK(once == pair.u);
  CHECK(predict(once) == pair.u);
  CHECK(cosine_distance_innovation(predict(pair.u), pair.u) == 0.0);
}

TEST_CASE("evidence emission: pinned noise-free cases") {
  Rng rng(7);
  SimConfig cfg = noise_free(Scenario::nominal);
  const IntentPair pair = generate_intents(rng, cfg.d);

  Rng draw(11);
  CHECK(emit_evidence(cfg, 1, pair, false, -1, draw) == pair.u);

  cfg.scenario = Scenario::misroute;
  CHECK(emit_evidence(cfg, 4, pair, false, -1, draw) == pair.u);        // before onset
  CHECK(emit_evidence(cfg, 5, pair, false, -1, draw) == pair.u_wrong);  // onset
  CHECK(emit_evidence(cfg, 20, pair, false, -1, draw) == pair.u_wrong); // persistent
  CHECK(emit_evidence(cfg, 20, pair, true, 8, draw) == pair.u);         // fallback restores

  CHECK_THROWS_AS(emit_evidence(cfg, 0, pair, false, -1, draw), std::invalid_argument);
  CHECK_THROWS_AS(emit_evidence(cfg, 31, pair, false, -1, draw), std::invalid_argument);
}

TEST_CASE("evidence emission: delayed scenario rotates and lags") {
  Rng rng(13);
  SimConfig cfg = noise_free(Scenario::delayed);
  cfg.theta = 0.12;
  cfg.delay_k = 6;
  const IntentPair pair = generate_intents(rng, cfg.d);

  auto expect_intent = [&](int steps) {
    const double angle = cfg.theta * static_cast<double>(steps);
    std::vector<double> v(cfg.d);
    for (std::size_t i = 0; i < cfg.d; ++i) {
      v[i] = std::cos(angle) * pair.u[i] + std::sin(angle) * pair.u_wrong[i];
    }
    return UnitVector(std::move(v));
  };

  Rng draw(17);
  // Before onset: current intent.
  const UnitVector y3 = emit_evidence(cfg, 3, pair, false, -1, draw);
  CHECK(cosine_distance_innovation(y3, expect_intent(3)) <= 1e-12);
  // After onset: stale by delay_k, clamped at the episode start.
  const UnitVector y5 = emit_evidence(cfg, 5, pair, false, -1, draw);
  CHECK(cosine_distance_innovation(y5, expect_intent(0)) <= 1e-12);
  const UnitVector y20 = emit_evidence(cfg, 20, pair, false, -1, draw);
  CHECK(cosine_distance_innovation(y20, expect_intent(14)) <= 1e-12);
  // Fallback re-queries at the intent current when it engaged and holds it.
  const UnitVector y20f = emit_evidence(cfg, 20, pair, true, 9, draw);
  CHECK(cosine_distance_innovation(y20f, expect_intent(9)) <= 1e-12);
}

TEST_CASE("state update: pinned cases") {
  Rng rng(19);
  const IntentPair pair = generate_intents(rng, 5);
  Rng draw(23);

  CHECK(update_state(pair.u, pair.u_wrong, 0.0, 0.0, draw) == pair.u);       // frozen
  CHECK(update_state(pair.u, pair.u_wrong, 1.0, 0.0, draw) == pair.u_wrong); // full adoption
  CHECK(update_state(pair.u, pair.u, 0.37, 0.0, draw) == pair.u);            // fixed point

  CHECK_THROWS_AS(update_state(pair.u, pair.u_wrong, 1.5, 0.0, draw), std::invalid_argument);
}

TEST_CASE("noise-free nominal episode: zero innovation, no detection") {
  const SimConfig cfg = noise_free(Scenario::nominal);
  ScaleCalibration cal;
  cal.scale = 1e-6; // degenerate nominal calibration
  const Thresholds th{0.0, 0.0, 0.85};
  const EpisodeTrace trace =
      run_episode(cfg, Variant::recovery_aware, recovery_all(), 3, th, cal);

  CHECK(trace.steps.size() == 30);
  for (const StepRecord& step : trace.steps) {
    CHECK(step.nu == 0.0);
    CHECK(step.energy == 0.0);
    CHECK(step.semantic == 0.0);
    CHECK(step.event == MonitorEvent::none);
    if (step.t >= 3) {
      REQUIRE(step.drift_score.has_value());
      CHECK(*step.drift_score == 0.0);
    } else {
      CHECK_FALSE(step.drift_score.has_value());
    }
  }
  CHECK_FALSE(trace.detected);
}

TEST_CASE("noise-free misroute under the baseline matches an independent re-simulation") {
  SimConfig cfg = noise_free(Scenario::misroute, 4);
  cfg.alpha_baseline = 0.9;
  const EpisodeTrace trace =
      run_episode(cfg, Variant::baseline, recovery_all(), 3, kSilent, unit_scale());

  // Independent loop: plain-array EMA toward the misrouted intent with
  // explicit renormalization and 1 - dot innovations.
  Rng rng(cfg.seed);
  const IntentPair pair = generate_intents(rng, cfg.d);
  std::vector<double> x(pair.u.components());
  std::vector<double> expected_nu;
  for (int t = 1; t <= cfg.horizon; ++t) {
    const std::vector<double>& target =
        (t >= cfg.onset ? pair.u_wrong.components() : pair.u.components());
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * target[i];
    expected_nu.push_back(1.0 - dot);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = (1.0 - cfg.alpha_baseline) * x[i] + cfg.alpha_baseline * target[i];
      norm2 += x[i] * x[i];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : x) c *= inv;
  }

  for (int t = 1; t <= cfg.horizon; ++t) {
    CHECK(std::abs(trace.step(t).nu - expected_nu[static_cast<std::size_t>(t - 1)]) <= 1e-12);
  }
  // Onset innovation is the full orthogonal jump.
  CHECK(std::abs(trace.step(cfg.onset).nu - 1.0) <= 1e-12);
}

TEST_CASE("noise-free misroute: apparent stability shape under the baseline") {
  const SimConfig cfg = noise_free(Scenario::misroute, 8);
  const EpisodeTrace trace =
      run_episode(cfg, Variant::baseline, recovery_all(), 3, kSilent, unit_scale());

  // nu spikes at onset, then never increases again.
  CHECK(trace.step(cfg.onset).nu > 0.9);
  for (int t = cfg.onset; t < cfg.horizon; ++t) {
    CHECK(trace.step(t + 1).nu <= trace.step(t).nu + 1e-12);
  }
  // Semantic drift never decreases and ends far from the initial intent.
  for (int t = 1; t < cfg.horizon; ++t) {
    CHECK(trace.step(t + 1).semantic >= trace.step(t).semantic - 1e-12);
  }
  CHECK(trace.final_semantic > 0.5);
}

TEST_CASE("fallback restores the evidence channel from the step after engagement") {
  SimConfig cfg = noise_free(Scenario::misroute, 6);
  ScaleCalibration cal;
  cal.scale = 1e-6;
  const Thresholds th{0.0, 0.0, 0.85};
  const EpisodeTrace trace =
      run_episode(cfg, Variant::recovery_aware, recovery_all(), 3, th, cal, true);

  REQUIRE(trace.detected);
  const int t0 = *trace.t0;
  CHECK(t0 == cfg.onset); // degenerate thresholds fire on the onset window

  Rng rng(cfg.seed);
  const IntentPair pair = generate_intents(rng, cfg.d);
  for (int t = t0 + 1; t <= cfg.horizon; ++t) {
    const UnitVector& y = trace.evidence[static_cast<std::size_t>(t - 1)];
    CHECK(cosine_distance_innovation(y, pair.u) == 0.0);
  }
}

TEST_CASE("traces are bitwise deterministic for a fixed seed") {
  SimConfig cfg;
  cfg.d = 32;
  cfg.scenario = Scenario::misroute;
  cfg.sigma_q = 0.01;
  cfg.sigma_r = 0.2;
  cfg.seed = 777;
  const Thresholds th{0.5, 1.0, 0.85};
  ScaleCalibration cal;
  cal.scale = 0.01;

  const EpisodeTrace a = run_episode(cfg, Variant::recovery_aware, recovery_all(), 3, th, cal);
  const EpisodeTrace b = run_episode(cfg, Variant::recovery_aware, recovery_all(), 3, th, cal);
  CHECK(same_steps(a, b));
  CHECK(a.t0 == b.t0);
  CHECK(a.tr == b.tr);
  CHECK(a.max_norm_error == b.max_norm_error);
}

TEST_CASE("all vectors stay unit-norm in noisy episodes") {
  Rng seeds(3141);
  for (int i = 0; i < 50; ++i) {
    SimConfig cfg;
    cfg.d = 2 + static_cast<std::size_t>(seeds.uniform01() * 60);
    cfg.scenario = (i % 3 == 0)   ? Scenario::nominal
                   : (i % 3 == 1) ? Scenario::misroute
                                  : Scenario::delayed;
    cfg.sigma_q = seeds.uniform01() * 0.1;
    cfg.sigma_r = seeds.uniform01() * 0.5;
    cfg.seed = static_cast<std::uint64_t>(seeds.uniform01() * 1e9);
    ScaleCalibration cal;
    cal.scale = 0.01;
    const Thresholds th{0.5, 1.0, 0.85};
    const Variant variant = (i % 2 == 0) ? Variant::baseline : Variant::recovery_aware;
    const EpisodeTrace trace = run_episode(cfg, variant, recovery_all(), 3, th, cal);
    CHECK(trace.max_norm_error <= 1e-9);
  }
}

TEST_CASE("all-mechanisms-off ablation reproduces the baseline bitwise at equal gain") {
  SimConfig cfg;
  cfg.d = 24;
  cfg.scenario = Scenario::misroute;
  cfg.sigma_q = 0.01;
  cfg.sigma_r = 0.25;
  cfg.seed = 4242;
  cfg.alpha = 0.35;
  cfg.alpha_baseline = cfg.alpha; // equal gain for the equivalence check

  ScaleCalibration cal;
  cal.scale = 0.02;
  const Thresholds th{0.5, 1.5, 0.85};

  RecoveryConfig off = recovery_all();
  off.rollback = false;
  off.gain_modulation = false;
  off.tool_fallback = false;

  const EpisodeTrace base = run_episode(cfg, Variant::baseline, recovery_all(), 3, th, cal);
  const EpisodeTrace ablated = run_episode(cfg, Variant::recovery_aware, off, 3, th, cal);
  CHECK(same_steps(base, ablated));
}

TEST_CASE("sim config validation") {
  SimConfig cfg;
  cfg.d = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.onset = cfg.horizon;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.sigma_r = -0.1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.scenario = Scenario::delayed;
  cfg.delay_k = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}
