#pragma once

// Randomized invariant suites. Each suite draws its instances from a seeded
// generator, so a (suite, seed) pair always reproduces the same report.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mixot {

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst observed value of the checked quantity.
  double worst = 0.0;
  /// Bound the worst value is compared against.
  double tolerance = 0.0;
  std::size_t trials = 0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const noexcept;
};

/// metric, geodesic, sparsity, fixed_point, solver, symmetry, sd, oracle, sandwich.
const std::vector<std::string>& suite_names();

/// Throws InvalidInput on an unknown suite name.
SuiteReport run_suite(std::string_view name, std::uint64_t seed);

/// {"suite", "seed", "passed", "checks": [{name, passed, worst, tolerance, trials, detail}]}.
std::string suite_report_json(const std::vector<SuiteReport>& reports);

}  // namespace mixot
