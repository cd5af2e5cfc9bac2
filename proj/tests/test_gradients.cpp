#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "npcc/gradcheck.hpp"

using namespace npcc;

TEST_CASE("every layer and the end-to-end loss pass central finite differences") {
  const auto reports = runGradChecks(2024);
  REQUIRE(reports.size() >= 11);
  for (const auto& r : reports) {
    INFO(r.name, " max_rel_err=", r.max_rel_err, " tol=", r.tolerance);
    CHECK(r.checks >= 10);
    CHECK(r.max_rel_err < r.tolerance);
  }
}

TEST_CASE("gradient checks are seed-deterministic") {
  const auto a = runGradChecks(5);
  const auto b = runGradChecks(5);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].max_rel_err == b[i].max_rel_err);
}
