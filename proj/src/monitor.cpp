#include "driftlab/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace driftlab {

void validate(const Thresholds& th) {
  if (!(th.tau >= 0.0) || !(th.tau_d >= 0.0)) {
    throw std::invalid_argument("Thresholds: tau and tau_d must be nonnegative");
  }
  if (th.tau > th.tau_d) {
    throw std::invalid_argument("Thresholds: tau must not exceed tau_d");
  }
  if (!(th.kappa > 0.0 && th.kappa < 1.0)) {
    throw std::invalid_argument("Thresholds: kappa must lie in (0,1)");
  }
}

SlidingWindow::SlidingWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw std::invalid_argument("SlidingWindow: capacity must be positive");
  }
}

void SlidingWindow::push(double value) {
  buffer_.push_back(value);
  if (buffer_.size() > capacity_) {
    buffer_.pop_front();
  }
}

std::optional<double> SlidingWindow::mean() const {
  if (!full()) return std::nullopt;
  // Summed oldest-first so a brute-force recount over the raw sequence
  // reproduces the value bit for bit.
  double sum = 0.0;
  for (double v : buffer_) sum += v;
  return sum / static_cast<double>(capacity_);
}

DriftMonitor::DriftMonitor(std::size_t window, Thresholds thresholds)
    : window_(window), thresholds_(thresholds) {
  validate(thresholds_);
}

std::optional<double> DriftMonitor::push_and_score(double energy) {
  if (!(energy >= 0.0)) {
    throw std::invalid_argument("DriftMonitor: energy must be nonnegative");
  }
  window_.push(energy);
  auto score = window_.mean();
  if (score) last_score_ = *score;
  return score;
}

MonitorEvent DriftMonitor::evaluate(double score, int t) {
  if (!(score >= 0.0)) {
    throw std::invalid_argument("DriftMonitor: drift score must be nonnegative");
  }
  if (score > thresholds_.tau_d && !recovering_) {
    recovering_ = true;
    t0_ = t;
    return MonitorEvent::drift_detected;
  }
  if (score <= thresholds_.kappa * thresholds_.tau_d && recovering_) {
    recovering_ = false;
    tr_ = t;
    return MonitorEvent::recovery_complete;
  }
  return MonitorEvent::none;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("nearest_rank_percentile: empty sample");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("nearest_rank_percentile: p must lie in (0,1)");
  }
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Thresholds calibrate_thresholds(const std::vector<std::vector<double>>& nominal_episode_scores,
                                double p_tau, double p_tau_d, double kappa) {
  if (!(p_tau > 0.0 && p_tau <= p_tau_d && p_tau_d < 1.0)) {
    throw std::invalid_argument("calibrate_thresholds: need 0 < p_tau <= p_tau_d < 1");
  }
  std::vector<double> maxima;
  maxima.reserve(nominal_episode_scores.size());
  for (const auto& scores : nominal_episode_scores) {
    if (scores.empty()) continue;
    maxima.push_back(*std::max_element(scores.begin(), scores.end()));
  }
  if (maxima.empty()) {
    throw std::invalid_argument("calibrate_thresholds: no nonempty calibration episodes");
  }
  Thresholds th;
  th.tau = nearest_rank_percentile(maxima, p_tau);
  th.tau_d = nearest_rank_percentile(maxima, p_tau_d);
  th.kappa = kappa;
  validate(th);
  return th;
}

int detection_latency(int t0, int t_star) { return t0 - t_star; }

} // namespace driftlab
