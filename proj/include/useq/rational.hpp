#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace useq {

/// Arbitrary-precision rational used by the exact projection paths.
using Rational = boost::multiprecision::cpp_rational;
using RationalMatrix = std::vector<std::vector<Rational>>;

/// Parses "0.5", "-1.25e-3", "3" or "1/3" into an exact rational.
/// Throws ConfigError on malformed input.
Rational parse_rational(std::string_view text);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// "p/q" (or "p" when the denominator is one).
std::string to_string(const Rational& r);

/// n! as an exact integer; n must be nonnegative.
Rational factorial(int n);

/// Binomial coefficient C(n, k) in 64-bit arithmetic; 0 when k < 0 or k > n.
/// Throws std::overflow_error if the value does not fit.
std::int64_t binomial(std::int64_t n, std::int64_t k);

}  // namespace useq
