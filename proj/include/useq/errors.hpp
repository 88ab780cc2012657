#pragma once

#include <stdexcept>
#include <string>

namespace useq {

/// Invalid specification, parameter, or kernel/source pairing.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation was asked to exceed a declared budget (enumeration size,
/// history cap, step budget, rejection attempts).
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Standardization was requested for a degenerate limit (zero variance).
class DegenerateLimit : public std::runtime_error {
 public:
  explicit DegenerateLimit(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace useq
