#include <doctest.h>

#include "properties.hpp"

using namespace hanet::testing;

TEST_CASE("invariant suite") {
  for (const auto& p : all_properties()) {
    CAPTURE(p.module);
    CAPTURE(p.name);
    CHECK(p.cases >= 50);
    const auto out = run_property(p);
    CHECK_MESSAGE(out.failed == 0, p.name << ": " << out.first_failure);
  }
}
