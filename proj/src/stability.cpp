#include "driftlab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace driftlab {

namespace {

double squared_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

} // namespace

UnitVector::UnitVector(std::vector<double> components)
    : components_(std::move(components)) {
  const std::size_t d = components_.size();
  if (d < 2) {
    throw std::invalid_argument("UnitVector: dimension must be >= 2");
  }
  const double n2 = squared_norm(components_);
  if (!std::isfinite(n2) || n2 == 0.0) {
    throw std::invalid_argument("UnitVector: zero or non-finite norm");
  }
  // Skip the division when the squared norm is already unit within summation
  // rounding; dividing by a factor this close to 1 would only churn low bits.
  const double band = 16.0 * static_cast<double>(d) * std::numeric_limits<double>::epsilon();
  if (std::abs(n2 - 1.0) > band) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : components_) x *= inv;
  }
}

UnitVector UnitVector::axis(std::size_t dim, std::size_t index) {
  if (index >= dim) {
    throw std::invalid_argument("UnitVector::axis: index out of range");
  }
  std::vector<double> v(dim, 0.0);
  v[index] = 1.0;
  return UnitVector(std::move(v));
}

double UnitVector::dot(const UnitVector& other) const {
  if (other.dim() != dim()) {
    throw std::invalid_argument("UnitVector::dot: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    s += components_[i] * other.components_[i];
  }
  return s;
}

double UnitVector::norm() const { return std::sqrt(squared_norm(components_)); }

double cosine_distance_innovation(const UnitVector& pred, const UnitVector& realized) {
  if (pred.dim() != realized.dim()) {
    throw std::invalid_argument("cosine_distance_innovation: dimension mismatch");
  }
  // For unit vectors 1 - cos(a, b) = |a - b|^2 / 2. The difference form is
  // exact at a == b and keeps full precision for nearly aligned inputs.
  double s = 0.0;
  for (std::size_t i = 0; i < pred.dim(); ++i) {
    const double diff = pred[i] - realized[i];
    s += diff * diff;
  }
  return std::clamp(s / 2.0, 0.0, 2.0);
}

double semantic_drift(const UnitVector& state, const UnitVector& initial_state) {
  return cosine_distance_innovation(state, initial_state);
}

double innovation_energy(double nu, const ScaleCalibration& cal) {
  if (!(cal.scale > 0.0)) {
    throw std::invalid_argument("innovation_energy: scale must be positive");
  }
  return nu * nu / cal.scale;
}

ScaleCalibration calibrate_scale(std::span<const double> nominal_nus, double epsilon,
                                 ScaleMode mode) {
  if (nominal_nus.size() < 2) {
    throw std::invalid_argument("calibrate_scale: need at least two nominal innovations");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("calibrate_scale: epsilon must be positive");
  }
  // Welford's streaming moments; the two-pass form is kept to the test oracle.
  double mean = 0.0;
  double m2 = 0.0;
  double second = 0.0;
  std::size_t n = 0;
  for (double x : nominal_nus) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
    second += x * x;
  }
  ScaleCalibration cal;
  cal.mu_nu = mean;
  cal.epsilon = epsilon;
  cal.mode = mode;
  const double dn = static_cast<double>(n);
  if (mode == ScaleMode::variance) {
    cal.scale = m2 / dn + epsilon;
  } else {
    cal.scale = second / dn + epsilon;
  }
  cal.nominal_sample.assign(nominal_nus.begin(), nominal_nus.end());
  return cal;
}

bool calibration_reproduces(const ScaleCalibration& cal) {
  if (cal.nominal_sample.size() < 2) return false;
  const ScaleCalibration refit =
      calibrate_scale(cal.nominal_sample, cal.epsilon, cal.mode);
  return refit.scale == cal.scale && refit.mu_nu == cal.mu_nu;
}

StabilityVerdict check_runtime_stability(std::span<const double> energies,
                                         std::span<const double> drift_scores,
                                         const StabilityBounds& bounds) {
  if (energies.empty() || drift_scores.empty()) {
    throw std::invalid_argument("check_runtime_stability: empty observation sequence");
  }
  if (!(bounds.delta > 0.0 && bounds.delta < 1.0)) {
    throw std::invalid_argument("check_runtime_stability: delta must lie in (0,1)");
  }
  std::size_t e_over = 0;
  for (double e : energies) {
    if (e > bounds.energy_bound) ++e_over;
  }
  std::size_t d_over = 0;
  for (double d : drift_scores) {
    if (d > bounds.drift_bound) ++d_over;
  }
  StabilityVerdict verdict;
  verdict.energy_exceedance = static_cast<double>(e_over) / static_cast<double>(energies.size());
  verdict.drift_exceedance = static_cast<double>(d_over) / static_cast<double>(drift_scores.size());
  verdict.stable = verdict.energy_exceedance <= bounds.delta &&
                   verdict.drift_exceedance <= bounds.delta;
  return verdict;
}

} // namespace driftlab
