#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "driftlab/recovery.hpp"
#include "driftlab/simulator.hpp"

using namespace driftlab;

namespace {

UnitVector random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.gaussian();
  return UnitVector(std::move(v));
}

RecoveryConfig full_config() {
  RecoveryConfig cfg;
  cfg.alpha = 0.35;
  cfg.beta = 0.20;
  cfg.gamma_g = 0.5;
  return cfg;
}

} // namespace

TEST_CASE("recovery config validation") {
  CHECK_NOTHROW(validate(full_config()));
  RecoveryConfig bad = full_config();
  bad.alpha = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = full_config();
  bad.beta = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = full_config();
  bad.gamma_g = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("snapshot recording is gated by mode and tau") {
  RecoveryController controller(full_config());
  const UnitVector v = UnitVector::axis(3, 0);
  const UnitVector w = UnitVector::axis(3, 1);

  controller.record_snapshot(v, 0.3, 0.5); // D <= tau: accepted
  REQUIRE(controller.snapshot().has_value());
  CHECK(*controller.snapshot() == v);

  controller.record_snapshot(w, 0.6, 0.5); // D > tau: rejected
  CHECK(*controller.snapshot() == v);

  controller.record_snapshot(w, std::nullopt, 0.5); // no score yet: accepted
  CHECK(*controller.snapshot() == w);

  controller.engage(v, 3);
  controller.record_snapshot(v, 0.1, 0.5); // recovering: frozen
  CHECK(*controller.snapshot() == w);
}

TEST_CASE("rollback mixing") {
  const UnitVector x = UnitVector::axis(2, 0);
  const UnitVector snap = UnitVector::axis(2, 1);

  CHECK(rollback_mix(x, snap, 0.0) == x);    // zero mixing: unchanged
  CHECK(rollback_mix(x, snap, 1.0) == snap); // full rollback: snapshot exactly

  // beta = 0.2 with orthogonal unit vectors: (0.8, 0.2) / sqrt(0.68).
  const UnitVector mixed = rollback_mix(x, snap, 0.2);
  const double norm = std::sqrt(0.8 * 0.8 + 0.2 * 0.2);
  CHECK(std::abs(mixed[0] - 0.8 / norm) <= 1e-12);
  CHECK(std::abs(mixed[1] - 0.2 / norm) <= 1e-12);
}

TEST_CASE("rollback output stays unit-norm") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform01() * 20);
    const UnitVector x = random_unit(rng, d);
    const UnitVector snap = random_unit(rng, d);
    const UnitVector mixed = rollback_mix(x, snap, rng.uniform01());
    CHECK(std::abs(mixed.norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("engage applies enabled mechanisms in order") {
  RecoveryConfig cfg = full_config();
  RecoveryController controller(cfg);
  const UnitVector snap = UnitVector::axis(2, 1);
  const UnitVector x = UnitVector::axis(2, 0);
  controller.record_snapshot(snap, std::nullopt, 1.0);

  CHECK(controller.active_gain() == cfg.alpha);
  const UnitVector out = controller.engage(x, 7);
  CHECK(controller.recovering());
  CHECK(controller.active_gain() == cfg.gamma_g * cfg.alpha);
  CHECK(controller.fallback_active());
  CHECK(out == rollback_mix(x, snap, cfg.beta));
  REQUIRE(controller.events().size() == 1);
  CHECK(controller.events().front().t0 == 7);
  CHECK_FALSE(controller.events().front().tr.has_value());

  CHECK_THROWS_AS(controller.engage(x, 8), std::logic_error);
}

TEST_CASE("disabled mechanisms are skipped without error") {
  RecoveryConfig cfg = full_config();
  cfg.rollback = false;
  cfg.gain_modulation = false;
  cfg.tool_fallback = false;
  RecoveryController controller(cfg);
  controller.record_snapshot(UnitVector::axis(2, 1), std::nullopt, 1.0);

  const UnitVector x = UnitVector::axis(2, 0);
  const UnitVector out = controller.engage(x, 5);
  CHECK(out == x); // pure bookkeeping
  CHECK(controller.recovering());
  CHECK(controller.active_gain() == cfg.alpha);
  CHECK_FALSE(controller.fallback_active());
}

TEST_CASE("rollback without a snapshot is a no-op") {
  RecoveryController controller(full_config());
  const UnitVector x = UnitVector::axis(2, 0);
  const UnitVector out = controller.engage(x, 2);
  CHECK(out == x);
  CHECK(controller.recovering());
}

TEST_CASE("completion restores gain and closes the event") {
  RecoveryConfig cfg = full_config();
  RecoveryController controller(cfg);
  controller.record_snapshot(UnitVector::axis(2, 1), std::nullopt, 1.0);

  CHECK_THROWS_AS(controller.complete(3), std::logic_error); // not recovering

  controller.engage(UnitVector::axis(2, 0), 8);
  CHECK(controller.active_gain() == 0.5 * 0.35);
  CHECK_THROWS_AS(controller.complete(7), std::logic_error); // tr < t0

  controller.complete(12);
  CHECK_FALSE(controller.recovering());
  CHECK(controller.active_gain() == 0.35);
  CHECK_FALSE(controller.fallback_active());
  REQUIRE(controller.events().size() == 1);
  CHECK(controller.events().front().t0 == 8);
  CHECK(*controller.events().front().tr == 12);

  // Second cycle: two closed events in order.
  controller.engage(UnitVector::axis(2, 0), 20);
  controller.complete(24);
  REQUIRE(controller.events().size() == 2);
  CHECK(controller.events()[1].t0 == 20);
  CHECK(*controller.events()[1].tr == 24);
  for (const auto& ev : controller.events()) {
    REQUIRE(ev.tr.has_value());
    CHECK(*ev.tr >= ev.t0);
  }
}

TEST_CASE("mttr over recovery events") {
  {
    const std::vector<RecoveryEvent> events{{5, 9}, {10, 14}};
    const auto stats = mttr_a(events);
    REQUIRE(stats.has_value());
    CHECK(stats->mean == 4.0);
    CHECK(stats->stddev == 0.0);
    CHECK(stats->count == 2);
  }
  {
    const std::vector<RecoveryEvent> events{{5, 9}, {10, 18}};
    const auto stats = mttr_a(events);
    REQUIRE(stats.has_value());
    CHECK(stats->mean == 6.0);
    CHECK(stats->stddev == 2.0);
    CHECK(stats->count == 2);
  }
  {
    const std::vector<RecoveryEvent> events{{5, std::nullopt}};
    CHECK_FALSE(mttr_a(events).has_value());
  }
  CHECK_FALSE(mttr_a({}).has_value());
}

TEST_CASE("mttr matches brute-force recomputation on random logs") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<RecoveryEvent> events;
    const int n = static_cast<int>(rng.uniform01() * 20);
    for (int i = 0; i < n; ++i) {
      RecoveryEvent ev;
      ev.t0 = static_cast<int>(rng.uniform01() * 100);
      if (rng.uniform01() < 0.7) ev.tr = ev.t0 + static_cast<int>(rng.uniform01() * 20);
      events.push_back(ev);
    }
    std::vector<double> durations;
    for (const auto& ev : events) {
      if (ev.tr) durations.push_back(static_cast<double>(*ev.tr - ev.t0));
    }
    const auto stats = mttr_a(events);
    if (durations.empty()) {
      CHECK_FALSE(stats.has_value());
      continue;
    }
    REQUIRE(stats.has_value());
    double mean = 0.0;
    for (double d : durations) mean += d;
    mean /= static_cast<double>(durations.size());
    double var = 0.0;
    for (double d : durations) var += (d - mean) * (d - mean);
    var /= static_cast<double>(durations.size());
    CHECK(stats->mean == mean);
    CHECK(stats->stddev == std::sqrt(var));
    CHECK(stats->count == durations.size());
  }
}
