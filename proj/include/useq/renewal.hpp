#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "useq/kernels.hpp"
#include "useq/rng.hpp"
#include "useq/sources.hpp"

namespace useq {

enum class StopAt { minus, plus };

struct RenewalPolicy {
  /// Confirmation horizon for signed kernels; default 4 sqrt(n(x)) + 64.
  std::optional<std::int64_t> horizon;
  /// Step budget = max(min_steps, budget_factor * n(x)).
  double budget_factor = 64.0;
  std::int64_t min_steps = 4096;
  std::int64_t history_cap = 100'000;
  /// Which stopping time the companion value is read at.
  StopAt companion_at = StopAt::minus;
  /// Rejection attempts per conditioned outcome.
  std::int64_t max_attempts = 1'000'000;
};

struct RenewalOutcome {
  double x = 0.0;
  std::int64_t n_plus = 0;
  std::int64_t n_minus = 0;
  double u_at_nplus = 0.0;
  double u_at_nminus = 0.0;
  /// U_{N+(x)} - x
  double overshoot = 0.0;
  std::optional<double> companion_at_nplus;
  std::optional<double> companion_at_nminus;
  /// Companion at the policy's stopping time.
  std::optional<double> companion_value;
  bool nminus_exact = true;
  /// Rejection attempts consumed (conditioned runs).
  std::int64_t attempts = 1;
};

/// Streams f (and a companion on the same sample path) to the threshold.
class RenewalExperiment {
 public:
  /// `mu` is E f; throws ConfigError unless mu > 0.
  RenewalExperiment(const Kernel& kernel, const Kernel* companion, const SampleSource& source, double mu,
                    RenewalPolicy policy = {});

  RenewalOutcome run(double x, Rng& rng) const;

  const Kernel& kernel() const { return *kernel_; }
  const Kernel* companion() const { return companion_; }
  const SampleSource& source() const { return *source_; }
  double mu() const { return mu_; }
  bool nonnegative() const { return nonnegative_; }
  const RenewalPolicy& policy() const { return policy_; }
  std::int64_t step_budget(double x) const;
  std::int64_t horizon(double x) const;

 private:
  const Kernel* kernel_;
  const Kernel* companion_;
  const SampleSource* source_;
  double mu_;
  bool nonnegative_;
  RenewalPolicy policy_;
};

RenewalOutcome run_to_threshold(const Kernel& kernel, const Kernel* companion, const SampleSource& source, double mu,
                                double x, Rng& rng, const RenewalPolicy& policy = {});

/// Limit law of the overshoot of a nonnegative d = 1 kernel.
struct OvershootLaw {
  bool lattice = false;
  double span = 0.0;
  double mu = 0.0;
  /// Lattice: P(R = values[k]) = probs[k].
  std::vector<double> values;
  std::vector<double> probs;
  /// Nonlattice: P(R <= y) on a grid.
  std::vector<double> grid;
  std::vector<double> grid_cdf;

  /// P(R <= y).
  double cdf(double y) const;
  /// P(R = v) (lattice only, 0 off the lattice).
  double pmf(double v) const;
};

/// Lattice span of f(X) when f(X) is integer-valued on a discrete source (or
/// the kernel declares one), std::nullopt when nonlattice.
std::optional<double> lattice_span(const Kernel& kernel, const SampleSource& source);

OvershootLaw overshoot_limit_law(const Kernel& kernel, const SampleSource& source, double tail_tol = 1e-15);

struct Conditioning {
  enum class Kind { none, overshoot, exact_hit };
  Kind kind = Kind::none;
  int k = 0;

  static Conditioning parse(std::string_view text);  // "none", "overshoot=k", "exact-hit"
  std::string to_string() const;
};

/// Rejection sampler for conditioned outcomes. Validates the event against
/// the span arithmetic at construction time for each threshold.
class ConditionedRenewal {
 public:
  ConditionedRenewal(const RenewalExperiment& experiment, Conditioning condition);

  /// Throws ConfigError if the event has probability zero by span arithmetic.
  void check_threshold(double x) const;
  /// Throws BudgetExceeded once the policy's max_attempts are spent.
  RenewalOutcome run(double x, Rng& rng) const;
  bool accepts(const RenewalOutcome& o) const;
  const Conditioning& condition() const { return condition_; }

 private:
  const RenewalExperiment* experiment_;
  Conditioning condition_;
  double span_ = 1.0;
  std::optional<double> max_value_;
};

}  // namespace useq
