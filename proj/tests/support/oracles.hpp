#pragma once

// Independent oracles and randomized property checks shared by the unit
// tests and the acceptance harness.

#include <cstdint>
#include <string>

namespace egogest::oracle {

struct HomographySuite {
  int dlt_trials = 0;
  double dlt_worst = 0.0;            // Frobenius, normalized recovery
  double inverse_worst = 0.0;        // compose(H, H^-1) vs I
  double successive_worst = 0.0;     // H12 * H01 vs H02
  double rate_scaling_worst = 0.0;   // |angle(f) * f - omega|
  double seconds = 0.0;
};

/// 100 seeded DLT round trips, 100 rotation inverses, 100 successive-rotation
/// compositions and the 1/f angle scaling at 10, 20 and 30 fps.
HomographySuite homography_suite(std::uint64_t seed);

struct PropertyResult {
  int cases = 0;
  int failures = 0;
  std::string first_failure;

  bool pass() const noexcept { return cases > 0 && failures == 0; }
};

/// Snippet starts against floor((L - S) / (S - O)) + 1 and stride checks.
PropertyResult snippet_count_property(std::uint64_t seed, int cases);
/// Neutral-majority survivors equal min(count, floor(r * mean other count)),
/// other snippets untouched and in order.
PropertyResult undersample_cap_property(std::uint64_t seed, int cases);
/// Confusion totals and per-class metrics against direct per-frame counting.
PropertyResult confusion_double_entry_property(std::uint64_t seed, int cases);
/// format_double / parse_double, sequence CSV and checkpoint JSON round trips
/// on random values.
PropertyResult serialization_round_trip_property(std::uint64_t seed, int cases);

}  // namespace egogest::oracle
