#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "useq/alphabet.hpp"
#include "useq/polynomial.hpp"
#include "useq/rational.hpp"
#include "useq/rng.hpp"

namespace useq {

struct FiniteLaw {
  Alphabet alphabet;
  std::vector<Rational> probs;  // probs[a] = P(X = letter a)
};
struct UniformUnitLaw {};    // uniform on (0, 1)
struct UniformCircleLaw {};  // uniform on [0, 2 pi)
struct GeometricLaw {
  Rational q;  // P(L = k) = q (1 - q)^(k - 1), k >= 1
};
struct GoldenBlockLaw {};  // P(L = 1) = p, P(L = 2) = p^2, p + p^2 = 1

using Law = std::variant<FiniteLaw, UniformUnitLaw, UniformCircleLaw, GeometricLaw, GoldenBlockLaw>;

/// Golden-ratio conjugate (sqrt 5 - 1) / 2.
inline const double kGoldenP = 0.61803398874989484820;

/// A real number with an exact rational value when the law permits one.
struct ExactValue {
  double value = 0.0;
  std::optional<Rational> exact;
};

/// Point mass of a discrete law.
struct Atom {
  double value;
  double prob;
  std::optional<Rational> exact_prob;
};

/// i.i.d. sample source. Immutable; every draw takes the caller's generator.
class SampleSource {
 public:
  SampleSource(Law law, std::string spec);

  /// Parses `bernoulli:0.5@binary`, `finite:0.2,0.3,0.5@{abc}`, `uniform01`,
  /// `uniform2pi`, `geom:0.5`, `golden-blocks`.
  static SampleSource parse(std::string_view spec);

  const Law& law() const { return law_; }
  const std::string& spec() const { return spec_; }

  double draw(Rng& rng) const;
  std::vector<double> sample(Rng& rng, std::size_t n) const;

  bool discrete() const;
  bool continuous() const { return !discrete(); }
  bool finite() const { return std::holds_alternative<FiniteLaw>(law_); }
  bool positive_integer_support() const;
  bool nonnegative_support() const;
  bool integer_support() const;
  /// Every parameter is rational, so polynomial moments are exact rationals.
  bool rational_moments() const;

  /// Continuous laws: F(x) = x * cdf_scale().
  double cdf_scale() const;
  double cdf(double x) const;
  double quantile(double u) const;

  /// Atoms of a discrete law, truncated once the remaining tail mass drops
  /// below `tail_tol`.
  std::vector<Atom> atoms(double tail_tol = 1e-17) const;

  /// E X^k.
  ExactValue moment(int k) const;
  double mean() const { return moment(1).value; }

  /// Finite alphabet, when the law is finite.
  const Alphabet* alphabet() const;

 private:
  Law law_;
  std::string spec_;
  std::vector<double> cumulative_;  // finite laws
};

/// A test function g for exact expectations: a polynomial in x, or a table
/// of values on finitely many support points (zero elsewhere).
using Integrand = std::variant<Polynomial<Rational>, std::map<double, double>>;

/// E g(X); exact rational when the law and g allow it. Throws ConfigError
/// for unsupported (law, g) pairings.
ExactValue exact_expectation(const SampleSource& source, const Integrand& g);

enum class ConditionedMethod { rejection, backward };

/// A block-length sequence L_1..L_B with sum exactly n, distributed as the
/// i.i.d. sequence conditioned on its partial sums hitting n.
std::vector<int> conditioned_block_sequence(const SampleSource& source, int n, Rng& rng,
                                            ConditionedMethod method = ConditionedMethod::backward,
                                            std::int64_t max_attempts = 1'000'000);

}  // namespace useq
