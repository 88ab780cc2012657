#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace useq {

/// A reference constant a scenario is expected to reproduce.
struct ExpectedConstant {
  std::string name;
  double value = 0.0;
  std::string exact;       // rational or closed form, when known
  std::string provenance;  // "derived" (regenerated and gating) or "paper-reference" (printed only)
  bool gating = true;
};

struct Scenario {
  std::string id;
  std::string description;
  std::string kernel;
  std::optional<std::string> companion;
  std::string dist;

  std::int64_t n = 2000;
  double x = 10000.0;
  std::int64_t reps = 2000;
  std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
  std::string theorem = "clt";
  std::string condition = "none";
  std::optional<std::string> method;  // projection method override

  double variance_tolerance = 0.10;
  double ks_threshold = 0.05;

  std::vector<ExpectedConstant> expected;
};

const std::vector<Scenario>& builtin_scenarios();
/// Throws ConfigError naming the known ids.
const Scenario& find_scenario(std::string_view id);

/// key=value lines; '#' starts a comment. Keys: kernel, companion, dist, n,
/// x, reps, tolerance.variance, tolerance.ks. Errors carry line:column.
Scenario load_config(const std::string& path);
Scenario parse_config(std::string_view text, const std::string& origin = "<config>");

/// Builds the kernels and source to check arities and pairings; throws
/// ConfigError naming both offending specs.
void validate_scenario(const Scenario& s);

}  // namespace useq
