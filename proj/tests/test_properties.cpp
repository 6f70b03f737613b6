#include <doctest.h>

#include "support/oracles.hpp"

using namespace egogest::oracle;

TEST_SUITE("properties") {

TEST_CASE("homography oracle suite") {
  const auto s = homography_suite(2024);
  CHECK(s.dlt_trials == 100);
  CHECK(s.dlt_worst <= 1e-8);
  CHECK(s.inverse_worst <= 1e-10);
  CHECK(s.successive_worst <= 1e-10);
  CHECK(s.rate_scaling_worst <= 1e-9);
}

TEST_CASE("snippet count formula on 1000 random geometries") {
  const auto r = snippet_count_property(1, 1000);
  INFO(r.first_failure);
  CHECK(r.cases == 1000);
  CHECK(r.pass());
}

TEST_CASE("under-sampling cap on 1000 random snippet sets") {
  const auto r = undersample_cap_property(2, 1000);
  INFO(r.first_failure);
  CHECK(r.pass());
}

TEST_CASE("confusion double entry on 1000 random prediction sets") {
  const auto r = confusion_double_entry_property(3, 1000);
  INFO(r.first_failure);
  CHECK(r.pass());
}

TEST_CASE("serialization round trips on 1000 random records") {
  const auto r = serialization_round_trip_property(4, 1000);
  INFO(r.first_failure);
  CHECK(r.pass());
}

}  // TEST_SUITE
