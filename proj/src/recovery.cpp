#include "driftlab/recovery.hpp"

#include <cmath>
#include <stdexcept>

namespace driftlab {

void validate(const RecoveryConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("RecoveryConfig: alpha must lie in (0,1]");
  }
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) {
    throw std::invalid_argument("RecoveryConfig: beta must lie in [0,1]");
  }
  if (!(cfg.gamma_g > 0.0 && cfg.gamma_g <= 1.0)) {
    throw std::invalid_argument("RecoveryConfig: gamma_g must lie in (0,1]");
  }
}

std::optional<MttrStats> mttr_a(std::span<const RecoveryEvent> events) {
  std::vector<double> durations;
  for (const auto& ev : events) {
    if (ev.tr) {
      durations.push_back(static_cast<double>(*ev.tr - ev.t0));
    }
  }
  if (durations.empty()) return std::nullopt;
  double mean = 0.0;
  for (double d : durations) mean += d;
  mean /= static_cast<double>(durations.size());
  double var = 0.0;
  for (double d : durations) var += (d - mean) * (d - mean);
  var /= static_cast<double>(durations.size());
  return MttrStats{mean, std::sqrt(var), durations.size()};
}

UnitVector rollback_mix(const UnitVector& x, const UnitVector& snapshot, double beta) {
  if (x.dim() != snapshot.dim()) {
    throw std::invalid_argument("rollback_mix: dimension mismatch");
  }
  if (beta == 0.0) return x;
  if (beta == 1.0) return snapshot;
  std::vector<double> mixed(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    mixed[i] = (1.0 - beta) * x[i] + beta * snapshot[i];
  }
  return UnitVector(std::move(mixed));
}

RecoveryController::RecoveryController(RecoveryConfig cfg)
    : cfg_(cfg), active_gain_(cfg.alpha) {
  validate(cfg_);
}

void RecoveryController::record_snapshot(const UnitVector& x, std::optional<double> score,
                                         double tau) {
  if (recovering_) return;
  if (score && *score > tau) return;
  snapshot_ = x;
}

UnitVector RecoveryController::engage(const UnitVector& x, int t0) {
  if (recovering_) {
    throw std::logic_error("RecoveryController: engage while already recovering");
  }
  UnitVector out = x;
  if (cfg_.rollback && snapshot_) {
    out = rollback_mix(x, *snapshot_, cfg_.beta);
  }
  if (cfg_.gain_modulation) {
    active_gain_ = cfg_.gamma_g * cfg_.alpha;
  }
  if (cfg_.tool_fallback) {
    fallback_active_ = true;
  }
  recovering_ = true;
  events_.push_back(RecoveryEvent{t0, std::nullopt});
  return out;
}

void RecoveryController::complete(int tr) {
  if (!recovering_) {
    throw std::logic_error("RecoveryController: complete while not recovering");
  }
  if (events_.empty() || events_.back().tr) {
    throw std::logic_error("RecoveryController: no open recovery event");
  }
  if (tr < events_.back().t0) {
    throw std::logic_error("RecoveryController: recovery step precedes detection step");
  }
  events_.back().tr = tr;
  recovering_ = false;
  active_gain_ = cfg_.alpha;
  fallback_active_ = false;
}

} // namespace driftlab
