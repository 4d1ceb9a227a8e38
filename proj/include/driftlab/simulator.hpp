#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "driftlab/monitor.hpp"
#include "driftlab/recovery.hpp"
#include "driftlab/stability.hpp"

namespace driftlab {

/// Deterministic Gaussian source. mt19937_64 has a standard-pinned algorithm
/// and the Box-Muller transform below avoids the implementation-defined
/// std::normal_distribution, so streams are identical across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01();

  /// Standard normal draw (Box-Muller, one cached spare).
  double gaussian();

  /// Stable substream derivation: mixes (master, stream, index) through
  /// splitmix64 so episode streams are independent of execution order.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream,
                              std::uint64_t index);

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

enum class Scenario { nominal, misroute, delayed };
enum class Variant { baseline, recovery_aware };

std::string to_string(Scenario s);
std::string to_string(Variant v);

/// Episode generator configuration. Noise scales stand in for isotropic
/// process/evidence covariances; the perturbation starts at step onset and
/// persists to the horizon unless tool fallback reroutes the evidence.
struct SimConfig {
  std::size_t d = 2048;         // state dimension
  int horizon = 30;             // steps per episode (T)
  int onset = 5;                // perturbation step (t*)
  double alpha = 0.35;          // nominal update gain
  double alpha_baseline = 0.9;  // baseline variant adaptation gain
  double sigma_q = 0.002;       // process-noise scale
  double sigma_r = 0.205;       // evidence-noise scale
  Scenario scenario = Scenario::nominal;
  int delay_k = 4;              // evidence staleness, delayed scenario
  double theta = 0.06;          // per-step intent rotation, delayed scenario
  std::uint64_t seed = 0;
};

void validate(const SimConfig& cfg); // throws std::invalid_argument

/// True task intent plus the misrouted intent, orthogonalized against it.
/// The pair also spans the rotation plane of the delayed scenario.
struct IntentPair {
  UnitVector u;
  UnitVector u_wrong;
};

/// u uniform on the sphere; u_wrong uniform, then Gram-Schmidt-orthogonalized
/// against u, so |cos(u, u_wrong)| stays within numerical error of 0.
IntentPair generate_intents(Rng& rng, std::size_t d);

/// Identity transition: the predicted evidence is the current latent state.
const UnitVector& predict(const UnitVector& x_prev);

/// Intent direction of the delayed scenario at step t: u rotated by theta * t
/// in the (u, u_wrong) plane.
UnitVector rotated_intent(const IntentPair& intents, double theta, int t);

/// Evidence draw for step t: unit-normalized center + sigma_r * eta with eta a
/// standard spherical Gaussian. The center is the true intent (nominal), the
/// misrouted intent from onset (misroute), or the stale rotating intent from
/// onset (delayed). An active tool fallback re-routes the query: back to the
/// true intent under misroute, and to the intent as of the re-route step
/// (fallback_since) under the delayed scenario, where the re-issued query is
/// itself a fixed query. With sigma_r = 0 the center is returned bit-exactly.
UnitVector emit_evidence(const SimConfig& cfg, int t, const IntentPair& intents,
                         bool fallback_active, int fallback_since, Rng& rng);

/// State update: renormalize(x + gain * (y - x) + sigma_q * w), w a standard
/// spherical Gaussian. Exact at gain 0 (x) and gain 1 (y) when sigma_q = 0.
UnitVector update_state(const UnitVector& x, const UnitVector& y, double gain,
                        double sigma_q, Rng& rng);

struct StepRecord {
  int t = 0;
  double nu = 0.0;
  double energy = 0.0;
  std::optional<double> drift_score; // present iff the window is full
  double semantic = 0.0;
  MonitorEvent event = MonitorEvent::none;
};

/// Scalar record of one episode plus detection/recovery bookkeeping. Full
/// vector history is retained only on request (it is large at realistic d).
struct EpisodeTrace {
  Variant variant = Variant::baseline;
  Scenario scenario = Scenario::nominal;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps; // exactly horizon entries

  bool detected = false;
  std::optional<int> t0; // first detection step
  bool recovered = false;
  std::optional<int> tr;                     // first completion step
  std::vector<RecoveryEvent> recovery_events; // controller log (recovery-aware)

  double final_semantic = 0.0;
  double final_drift = 0.0;
  double max_norm_error = 0.0; // max |1 - |v|| over all states and evidence

  std::vector<UnitVector> states;   // filled when keep_vectors
  std::vector<UnitVector> evidence; // filled when keep_vectors

  const StepRecord& step(int t) const { return steps.at(static_cast<std::size_t>(t - 1)); }
};

/// Run one closed-loop episode with a drift window of `window` steps. The
/// baseline variant runs the monitor passively (events are logged, no
/// recovery action, adaptation at alpha_baseline); the recovery-aware variant
/// applies the recovery policy on detection. The trace is a pure function of
/// (cfg, variant, rcfg, window, thresholds, cal).
EpisodeTrace run_episode(const SimConfig& cfg, Variant variant, const RecoveryConfig& rcfg,
                         std::size_t window, const Thresholds& thresholds,
                         const ScaleCalibration& cal, bool keep_vectors = false);

/// Nominal-scenario episode with monitoring disabled; returns the innovation
/// sequence. Used for calibration so threshold fitting never observes its own
/// detections. Consumes the random stream exactly like run_episode.
std::vector<double> run_nominal_innovations(const SimConfig& cfg, double gain);

} // namespace driftlab
