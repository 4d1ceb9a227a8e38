#include "driftlab/simulator.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace driftlab {

namespace {

constexpr std::uint64_t kSplitmixGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kSplitmixGamma);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.gaussian();
  return v;
}

UnitVector random_unit(Rng& rng, std::size_t d) {
  for (;;) {
    std::vector<double> v = gaussian_vector(rng, d);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 > 1e-12) return UnitVector(std::move(v));
  }
}

} // namespace

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (spare_) {
    const double value = *spare_;
    spare_.reset();
    return value;
  }
  double u1 = uniform01();
  while (u1 == 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t Rng::derive(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t state = master;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ (stream * kSplitmixGamma);
  mixed = splitmix64(state);
  state = mixed ^ (index * 0xD1B54A32D192ED03ULL);
  return splitmix64(state);
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::nominal: return "nominal";
    case Scenario::misroute: return "misroute";
    case Scenario::delayed: return "delayed";
  }
  return "unknown";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::recovery_aware: return "recovery_aware";
  }
  return "unknown";
}

void validate(const SimConfig& cfg) {
  if (cfg.d < 2) throw std::invalid_argument("SimConfig: d must be >= 2");
  if (cfg.horizon < 1) throw std::invalid_argument("SimConfig: horizon must be >= 1");
  if (!(cfg.onset >= 1 && cfg.onset < cfg.horizon)) {
    throw std::invalid_argument("SimConfig: onset must satisfy 1 <= onset < horizon");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("SimConfig: alpha must lie in (0,1]");
  }
  if (!(cfg.alpha_baseline > 0.0 && cfg.alpha_baseline <= 1.0)) {
    throw std::invalid_argument("SimConfig: alpha_baseline must lie in (0,1]");
  }
  if (cfg.sigma_q < 0.0 || cfg.sigma_r < 0.0) {
    throw std::invalid_argument("SimConfig: noise scales must be nonnegative");
  }
  if (cfg.scenario == Scenario::delayed && cfg.delay_k < 1) {
    throw std::invalid_argument("SimConfig: delay_k must be >= 1 in the delayed scenario");
  }
}

IntentPair generate_intents(Rng& rng, std::size_t d) {
  if (d < 2) throw std::invalid_argument("generate_intents: d must be >= 2");
  UnitVector u = random_unit(rng, d);
  for (;;) {
    std::vector<double> candidate = gaussian_vector(rng, d);
    double proj = 0.0;
    for (std::size_t i = 0; i < d; ++i) proj += candidate[i] * u[i];
    double residual2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      candidate[i] -= proj * u[i];
      residual2 += candidate[i] * candidate[i];
    }
    if (residual2 > 1e-12) {
      return IntentPair{std::move(u), UnitVector(std::move(candidate))};
    }
  }
}

const UnitVector& predict(const UnitVector& x_prev) { return x_prev; }

UnitVector rotated_intent(const IntentPair& intents, double theta, int t) {
  const double angle = theta * static_cast<double>(t);
  if (angle == 0.0) return intents.u;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  std::vector<double> v(intents.u.dim());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = c * intents.u[i] + s * intents.u_wrong[i];
  }
  return UnitVector(std::move(v));
}

UnitVector emit_evidence(const SimConfig& cfg, int t, const IntentPair& intents,
                         bool fallback_active, int fallback_since, Rng& rng) {
  if (t < 1 || t > cfg.horizon) {
    throw std::invalid_argument("emit_evidence: step outside the episode horizon");
  }
  UnitVector center = intents.u;
  switch (cfg.scenario) {
    case Scenario::nominal:
      break;
    case Scenario::misroute:
      if (t >= cfg.onset && !fallback_active) center = intents.u_wrong;
      break;
    case Scenario::delayed: {
      int effective = t;
      if (fallback_active) {
        // The re-routed query is issued once, against the intent current at
        // the re-route step, and served unchanged while fallback holds.
        effective = fallback_since >= 0 ? fallback_since : t;
      } else if (t >= cfg.onset) {
        effective = std::max(0, t - cfg.delay_k); // stale query, clamped at episode start
      }
      center = rotated_intent(intents, cfg.theta, effective);
      break;
    }
  }
  // The Gaussian draw is consumed even at sigma_r = 0 so paired runs stay on
  // the same stream; the center is returned bit-exactly in that case.
  std::vector<double> eta = gaussian_vector(rng, cfg.d);
  if (cfg.sigma_r == 0.0) return center;
  std::vector<double> v(cfg.d);
  for (std::size_t i = 0; i < cfg.d; ++i) {
    v[i] = center[i] + cfg.sigma_r * eta[i];
  }
  return UnitVector(std::move(v));
}

UnitVector update_state(const UnitVector& x, const UnitVector& y, double gain,
                        double sigma_q, Rng& rng) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("update_state: dimension mismatch");
  }
  if (!(gain >= 0.0 && gain <= 1.0)) {
    throw std::invalid_argument("update_state: gain must lie in [0,1]");
  }
  std::vector<double> w = gaussian_vector(rng, x.dim());
  std::vector<double> v(x.dim());
  if (gain == 1.0) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = y[i];
  } else {
    // x + gain * (y - x) so that y == x is an exact fixed point.
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] + gain * (y[i] - x[i]);
  }
  if (sigma_q != 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += sigma_q * w[i];
  }
  return UnitVector(std::move(v));
}

EpisodeTrace run_episode(const SimConfig& cfg, Variant variant, const RecoveryConfig& rcfg,
                         std::size_t window, const Thresholds& thresholds,
                         const ScaleCalibration& cal, bool keep_vectors) {
  validate(cfg);
  validate(rcfg);
  if (!(cal.scale > 0.0)) {
    throw std::invalid_argument("run_episode: calibration scale must be positive");
  }

  Rng rng(cfg.seed);
  const IntentPair intents = generate_intents(rng, cfg.d);

  EpisodeTrace trace;
  trace.variant = variant;
  trace.scenario = cfg.scenario;
  trace.seed = cfg.seed;
  trace.steps.reserve(static_cast<std::size_t>(cfg.horizon));

  DriftMonitor monitor(window, thresholds);
  RecoveryController controller(rcfg);
  const bool recovery_active = variant == Variant::recovery_aware;

  UnitVector x = intents.u; // initial latent state is the task intent
  if (recovery_active) {
    controller.record_snapshot(x, std::nullopt, thresholds.tau);
  }

  auto note_norm = [&trace](const UnitVector& v) {
    const double err = std::abs(1.0 - v.norm());
    if (err > trace.max_norm_error) trace.max_norm_error = err;
  };
  note_norm(x);

  int fallback_since = -1;
  for (int t = 1; t <= cfg.horizon; ++t) {
    const UnitVector& y_pred = predict(x);
    const bool fallback = recovery_active && controller.fallback_active();
    const UnitVector y = emit_evidence(cfg, t, intents, fallback, fallback_since, rng);
    note_norm(y);

    const double nu = cosine_distance_innovation(y_pred, y);
    const double energy = innovation_energy(nu, cal);
    const std::optional<double> score = monitor.push_and_score(energy);

    MonitorEvent event = MonitorEvent::none;
    if (score) {
      event = monitor.evaluate(*score, t);
    }
    if (event == MonitorEvent::drift_detected && !trace.t0) {
      trace.t0 = t; // first detection of the episode
    }

    double gain = recovery_active ? controller.active_gain() : cfg.alpha_baseline;
    if (recovery_active) {
      if (event == MonitorEvent::drift_detected) {
        x = controller.engage(x, t);
        gain = controller.active_gain(); // modulated gain applies from this step
        if (controller.fallback_active()) fallback_since = t;
      } else if (event == MonitorEvent::recovery_complete) {
        controller.complete(t);
        gain = controller.active_gain();
        fallback_since = -1;
      }
    }

    x = update_state(x, y, gain, cfg.sigma_q, rng);
    note_norm(x);
    const double semantic = semantic_drift(x, intents.u);

    if (recovery_active) {
      controller.record_snapshot(x, score, thresholds.tau);
    }

    StepRecord rec;
    rec.t = t;
    rec.nu = nu;
    rec.energy = energy;
    rec.drift_score = score;
    rec.semantic = semantic;
    rec.event = event;
    trace.steps.push_back(rec);

    if (keep_vectors) {
      trace.states.push_back(x);
      trace.evidence.push_back(y);
    }
  }

  trace.detected = trace.t0.has_value();
  trace.recovery_events = controller.events();
  for (const auto& ev : trace.recovery_events) {
    if (ev.tr) {
      trace.recovered = true;
      if (!trace.tr) trace.tr = *ev.tr;
    }
  }
  trace.final_semantic = trace.steps.back().semantic;
  trace.final_drift = trace.steps.back().drift_score.value_or(0.0);
  return trace;
}

std::vector<double> run_nominal_innovations(const SimConfig& cfg, double gain) {
  SimConfig nominal = cfg;
  nominal.scenario = Scenario::nominal;
  validate(nominal);
  Rng rng(nominal.seed);
  const IntentPair intents = generate_intents(rng, nominal.d);
  UnitVector x = intents.u;
  std::vector<double> nus;
  nus.reserve(static_cast<std::size_t>(nominal.horizon));
  for (int t = 1; t <= nominal.horizon; ++t) {
    const UnitVector& y_pred = predict(x);
    const UnitVector y = emit_evidence(nominal, t, intents, false, -1, rng);
    nus.push_back(cosine_distance_innovation(y_pred, y));
    x = update_state(x, y, gain, nominal.sigma_q, rng);
  }
  return nus;
}

} // namespace driftlab
