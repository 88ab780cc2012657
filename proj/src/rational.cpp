#include "useq/rational.hpp"

#include <cctype>
#include <stdexcept>

#include "useq/errors.hpp"

namespace useq {

namespace {

boost::multiprecision::cpp_int parse_digits(std::string_view s, std::string_view whole) {
  if (s.empty()) throw ConfigError("malformed number '" + std::string(whole) + "'");
  boost::multiprecision::cpp_int v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ConfigError("malformed number '" + std::string(whole) + "'");
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  using boost::multiprecision::cpp_int;
  const std::string_view whole = text;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw ConfigError("zero denominator in '" + std::string(whole) + "'");
    return num / den;
  }
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  long exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view ex = text.substr(e + 1);
    bool eneg = false;
    if (!ex.empty() && (ex.front() == '-' || ex.front() == '+')) {
      eneg = ex.front() == '-';
      ex.remove_prefix(1);
    }
    if (ex.empty() || ex.size() > 6) throw ConfigError("malformed number '" + std::string(whole) + "'");
    exponent = parse_digits(ex, whole).convert_to<long>();
    if (eneg) exponent = -exponent;
    text = text.substr(0, e);
  }
  std::string digits;
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view ip = text.substr(0, dot), fp = text.substr(dot + 1);
    if (ip.empty() && fp.empty()) throw ConfigError("malformed number '" + std::string(whole) + "'");
    digits = std::string(ip) + std::string(fp);
    exponent -= static_cast<long>(fp.size());
  } else {
    digits = std::string(text);
  }
  cpp_int mant = parse_digits(digits, whole);
  cpp_int scale = 1;
  for (long k = 0; k < std::labs(exponent); ++k) scale *= 10;
  Rational r = exponent >= 0 ? Rational(mant * scale) : Rational(mant, scale);
  return negative ? Rational(-r) : r;
}

std::string to_string(const Rational& r) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

Rational factorial(int n) {
  if (n < 0) throw std::domain_error("factorial of negative number");
  boost::multiprecision::cpp_int f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return Rational(f);
}

std::int64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  // C(n, i) = C(n, i-1) * (n - i + 1) / i stays integral at every step.
  __int128 acc = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > static_cast<__int128>(INT64_MAX)) throw std::overflow_error("binomial coefficient overflows 64 bits");
  }
  return static_cast<std::int64_t>(acc);
}

}  // namespace useq
