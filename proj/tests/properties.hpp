#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hanet/param_store.hpp"

namespace hanet::testing {

struct PropertyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void expect(bool condition, const std::string& what) {
  if (!condition) throw PropertyFailure(what);
}

// A randomized invariant. run() draws one case from the generator and
// throws PropertyFailure on a violation.
struct Property {
  std::string module;
  std::string name;
  std::size_t cases = 50;
  std::function<void(Rng&)> run;
};

const std::vector<Property>& all_properties();

struct PropertyOutcome {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::string first_failure;
};

// Runs every case of p with a per-case generator derived from seed.
PropertyOutcome run_property(const Property& p, std::uint64_t seed = 20240611);

}  // namespace hanet::testing
