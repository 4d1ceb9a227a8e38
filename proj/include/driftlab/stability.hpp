#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace driftlab {

/// Direction on the unit sphere in R^d, d >= 2.
///
/// Every monitored signal in this library is a cosine distance between unit
/// vectors, so construction normalizes once and callers may assume |v| = 1
/// within kUnitNormTol afterwards. Normalization is skipped when the squared
/// norm is already within representation error of 1; this makes repeated
/// renormalization of an unchanged vector bit-stable, which the simulator's
/// exact fixed-point cases rely on.
class UnitVector {
public:
  static constexpr double kUnitNormTol = 1e-9;

  explicit UnitVector(std::vector<double> components);

  /// Standard basis vector e_index in R^dim.
  static UnitVector axis(std::size_t dim, std::size_t index);

  std::size_t dim() const { return components_.size(); }
  const std::vector<double>& components() const { return components_; }
  double operator[](std::size_t i) const { return components_[i]; }

  double dot(const UnitVector& other) const;
  double norm() const;

  bool operator==(const UnitVector& other) const = default;

private:
  std::vector<double> components_;
};

enum class ScaleMode {
  variance,       // S = population variance of nominal innovations + epsilon
  second_moment,  // S = raw second moment of nominal innovations + epsilon
};

/// Normalization environment for innovation energy, fitted once from nominal
/// innovations and held fixed afterwards. The nominal sample is retained so
/// that the fit can be recomputed and checked exactly.
struct ScaleCalibration {
  double mu_nu = 0.0;    // mean nominal innovation
  double scale = 1.0;    // S > 0, energy normalizer
  double epsilon = 1e-6; // stabilizer, keeps S strictly positive
  ScaleMode mode = ScaleMode::variance;
  std::vector<double> nominal_sample;
};

/// One monitored step: innovation and its normalized energy.
struct InnovationSample {
  int t = 0;
  double nu = 0.0;     // cosine-distance innovation, in [0, 2]
  double energy = 0.0; // nu^2 / S
};

/// Probabilistic boundedness levels for the runtime-stability predicate.
struct StabilityBounds {
  double energy_bound = 0.0; // B > 0
  double drift_bound = 0.0;  // B_d > 0
  double delta = 0.0;        // allowed exceedance probability, in (0,1)
};

struct StabilityVerdict {
  bool stable = false;
  double energy_exceedance = 0.0; // fraction of energies above B
  double drift_exceedance = 0.0;  // fraction of drift scores above B_d
};

/// Cosine-distance innovation between predicted and realized evidence:
/// 1 - cos(pred, realized), computed as |pred - realized|^2 / 2 so that
/// identical inputs give exactly 0. Symmetric; range [0, 2].
double cosine_distance_innovation(const UnitVector& pred, const UnitVector& realized);

/// Deviation of the current latent state from the initial task state,
/// same cosine-distance form as the innovation. Diagnostic only.
double semantic_drift(const UnitVector& state, const UnitVector& initial_state);

/// nu^2 / S. Requires cal.scale > 0.
double innovation_energy(double nu, const ScaleCalibration& cal);

/// Fit the energy normalizer from nominal innovations: mean via a streaming
/// (Welford) pass, S = population variance + epsilon (or raw second moment +
/// epsilon in second_moment mode). Requires at least two samples and
/// epsilon > 0.
ScaleCalibration calibrate_scale(std::span<const double> nominal_nus, double epsilon,
                                 ScaleMode mode = ScaleMode::variance);

/// Re-run the fit on the stored nominal sample; byte-identical inputs give a
/// byte-identical S, so this checks that a calibration is self-consistent.
bool calibration_reproduces(const ScaleCalibration& cal);

/// Empirical runtime-stability check over an observed horizon: stable iff the
/// exceedance fraction of both signals stays within delta. Both sequences must
/// be nonempty (finite-horizon monitoring needs observed data).
StabilityVerdict check_runtime_stability(std::span<const double> energies,
                                         std::span<const double> drift_scores,
                                         const StabilityBounds& bounds);

} // namespace driftlab
