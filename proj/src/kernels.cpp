#include "useq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "useq/errors.hpp"

namespace useq {

Alphabet parse_alphabet(std::string_view name) {
  if (name == "binary") return {"binary", "01"};
  if (name == "dna") return {"dna", "ACGT"};
  if (name.size() >= 3 && name.front() == '{' && name.back() == '}') {
    std::string letters(name.substr(1, name.size() - 2));
    std::string sorted = letters;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("alphabet '" + std::string(name) + "' repeats a letter");
    return {std::string(name), letters};
  }
  throw ConfigError("unknown alphabet '" + std::string(name) + "' (use binary, dna or {letters})");
}

Kernel::Kernel(std::string spec, KernelKind kind, int arity, Eval eval, KernelFlags flags,
               std::optional<std::vector<Factor>> factors, TieCounter ties)
    : spec_(std::move(spec)),
      kind_(kind),
      arity_(arity),
      eval_(std::move(eval)),
      flags_(flags),
      factors_(std::move(factors)),
      ties_(ties ? std::move(ties) : std::make_shared<std::atomic<std::size_t>>(0)) {
  if (arity_ < 1 || arity_ > kMaxArity)
    throw ConfigError("kernel arity must be in 1.." + std::to_string(kMaxArity));
  if (factors_ && static_cast<int>(factors_->size()) != arity_)
    throw ConfigError("separable kernel needs one factor per argument");
}

const std::vector<Factor>& Kernel::factors() const {
  if (!factors_) throw ConfigError("kernel '" + spec_ + "' is not separable");
  return *factors_;
}

bool Kernel::polynomial_factors() const {
  return factors_ && std::all_of(factors_->begin(), factors_->end(),
                                 [](const Factor& f) { return f.poly.has_value(); });
}

double Kernel::evaluate_factors(std::span<const double> xs) const {
  const auto& fs = factors();
  double p = 1.0;
  for (int j = 0; j < arity_; ++j) p *= fs[j].eval(xs[j]);
  return p;
}

std::int64_t binomial_checked(double x, int l) {
  if (x < 0 || x != std::floor(x)) throw ConfigError("block-count kernel needs nonnegative integer arguments");
  if (x > static_cast<double>(std::numeric_limits<std::int64_t>::max()))
    throw std::overflow_error("block length out of range");
  return binomial(static_cast<std::int64_t>(x), l);
}

Kernel make_pattern_kernel(std::string_view word, const Alphabet& alphabet) {
  if (word.empty()) throw ConfigError("pattern word must be nonempty");
  if (static_cast<int>(word.size()) > kMaxArity)
    throw ConfigError("pattern longer than " + std::to_string(kMaxArity));
  std::vector<int> target;
  for (char c : word) {
    int idx = alphabet.index_of(c);
    if (idx < 0)
      throw ConfigError(std::string("letter '") + c + "' is not in alphabet " + alphabet.name);
    target.push_back(idx);
  }
  std::vector<Factor> factors;
  for (int t : target) {
    const double v = t;
    factors.push_back({[v](double x) { return x == v ? 1.0 : 0.0; }, std::nullopt});
  }
  auto eval = [target](std::span<const double> xs) {
    for (std::size_t j = 0; j < target.size(); ++j)
      if (xs[j] != static_cast<double>(target[j])) return 0.0;
    return 1.0;
  };
  KernelFlags flags;
  flags.nonnegative = true;
  flags.integer_valued = true;
  Kernel k("pattern:" + std::string(word) + "@" + alphabet.name, KernelKind::pattern,
           static_cast<int>(word.size()), eval, flags, std::move(factors));
  k.set_alphabet(alphabet);
  return k;
}

Kernel make_perm_pattern_kernel(std::vector<int> pattern) {
  const int m = static_cast<int>(pattern.size());
  if (m == 0) throw ConfigError("permutation pattern must be nonempty");
  if (m > kMaxArity) throw ConfigError("permutation pattern longer than " + std::to_string(kMaxArity));
  std::vector<int> sorted = pattern;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < m; ++i)
    if (sorted[i] != i + 1) throw ConfigError("pattern is not a permutation of 1..m");

  auto counter = std::make_shared<std::atomic<std::size_t>>(0);
  std::ostringstream name;
  name << "permpattern:";
  for (int i = 0; i < m; ++i) name << (m >= 10 && i ? "," : "") << pattern[i];

  KernelFlags flags;
  flags.rank_based = true;
  flags.nonnegative = true;
  flags.integer_valued = true;
  auto eval = [pattern, counter](std::span<const double> xs) {
    const std::size_t m = pattern.size();
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (xs[a] == xs[b]) {
          counter->fetch_add(1, std::memory_order_relaxed);
          return 0.0;
        }
      }
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if ((xs[a] < xs[b]) != (pattern[a] < pattern[b])) return 0.0;
    return 1.0;
  };
  Kernel out(name.str(), KernelKind::perm_pattern, m, eval, flags, std::nullopt, counter);
  out.set_permutation(std::move(pattern));
  return out;
}

Kernel make_block_count_kernel(std::vector<int> lengths) {
  if (lengths.empty()) throw ConfigError("block-count kernel needs at least one length");
  if (static_cast<int>(lengths.size()) > kMaxArity)
    throw ConfigError("block-count kernel arity above " + std::to_string(kMaxArity));
  std::ostringstream name;
  name << "blocks:";
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int l = lengths[i];
    if (l < 1) throw ConfigError("block lengths must be positive integers");
    name << (i ? "," : "") << l;
    // C(x, l) = x (x-1) ... (x-l+1) / l!
    Polynomial<Rational> poly = Polynomial<Rational>::constant(Rational(1) / factorial(l));
    for (int r = 0; r < l; ++r) poly = poly * Polynomial<Rational>(std::vector<Rational>{Rational(-r), Rational(1)});
    factors.push_back({[l](double x) { return static_cast<double>(binomial_checked(x, l)); }, poly});
  }
  auto eval = [lengths](std::span<const double> xs) {
    std::int64_t prod = 1;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      std::int64_t c = binomial_checked(xs[i], lengths[i]);
      if (__builtin_mul_overflow(prod, c, &prod)) throw std::overflow_error("block-count kernel overflows 64 bits");
    }
    return static_cast<double>(prod);
  };
  KernelFlags flags;
  flags.nonnegative = true;
  flags.integer_valued = true;
  return Kernel(name.str(), KernelKind::blocks, static_cast<int>(lengths.size()), eval, flags, std::move(factors));
}

Kernel make_antisym_sine_kernel() {
  auto eval = [](std::span<const double> xs) { return std::sin(xs[0] - xs[1]); };
  return Kernel("antisym-sine", KernelKind::antisym_sine, 2, eval, KernelFlags{});
}

Kernel make_antisym_sign_kernel() {
  KernelFlags flags;
  flags.rank_based = true;
  flags.integer_valued = true;
  auto counter = std::make_shared<std::atomic<std::size_t>>(0);
  auto eval = [counter](std::span<const double> xs) {
    if (xs[0] == xs[1]) {
      counter->fetch_add(1, std::memory_order_relaxed);
      return 0.0;
    }
    return xs[0] < xs[1] ? 1.0 : -1.0;
  };
  return Kernel("antisym-sign", KernelKind::antisym_sign, 2, eval, flags, std::nullopt, counter);
}

Kernel make_identity_kernel() {
  KernelFlags flags;
  flags.inherits_support = true;
  std::vector<Factor> f{{[](double x) { return x; }, Polynomial<Rational>::monomial(1)}};
  return Kernel("identity", KernelKind::identity, 1, [](std::span<const double> xs) { return xs[0]; }, flags,
                std::move(f));
}

Kernel make_const1_kernel(int arity) {
  if (arity < 1 || arity > kMaxArity) throw ConfigError("const1 arity must be in 1..6");
  KernelFlags flags;
  flags.nonnegative = true;
  flags.integer_valued = true;
  if (arity == 1) flags.span_hint = 1.0;
  std::vector<Factor> f(arity, Factor{[](double) { return 1.0; }, Polynomial<Rational>::constant(1)});
  return Kernel(arity == 1 ? "const1" : "const1:" + std::to_string(arity), KernelKind::const1, arity,
                [](std::span<const double>) { return 1.0; }, flags, std::move(f));
}

namespace {

std::vector<int> parse_int_list(std::string_view body, std::string_view spec, bool allow_digit_run) {
  std::vector<int> out;
  if (body.empty()) throw ConfigError("empty argument list in kernel spec '" + std::string(spec) + "'");
  if (allow_digit_run && body.find(',') == std::string_view::npos) {
    for (char c : body) {
      if (c < '0' || c > '9') throw ConfigError("malformed kernel spec '" + std::string(spec) + "'");
      out.push_back(c - '0');
    }
    return out;
  }
  std::size_t start = 0;
  while (start <= body.size()) {
    auto end = body.find(',', start);
    if (end == std::string_view::npos) end = body.size();
    std::string_view tok = body.substr(start, end - start);
    if (tok.empty() || tok.size() > 6 || tok.find_first_not_of("0123456789") != std::string_view::npos)
      throw ConfigError("malformed integer '" + std::string(tok) + "' in kernel spec '" + std::string(spec) + "'");
    out.push_back(std::stoi(std::string(tok)));
    start = end + 1;
  }
  return out;
}

}  // namespace

Kernel parse_kernel(std::string_view spec) {
  if (spec == "antisym-sine") return make_antisym_sine_kernel();
  if (spec == "antisym-sign") return make_antisym_sign_kernel();
  if (spec == "identity") return make_identity_kernel();
  if (spec == "const1") return make_const1_kernel();
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unknown kernel spec '" + std::string(spec) + "'");
  std::string_view head = spec.substr(0, colon), body = spec.substr(colon + 1);
  if (head == "pattern") {
    auto at = body.rfind('@');
    if (at == std::string_view::npos)
      throw ConfigError("pattern kernel needs an alphabet, e.g. pattern:10@binary");
    return make_pattern_kernel(body.substr(0, at), parse_alphabet(body.substr(at + 1)));
  }
  if (head == "permpattern") return make_perm_pattern_kernel(parse_int_list(body, spec, true));
  if (head == "const1") {
    const auto arity = parse_int_list(body, spec, false);
    if (arity.size() != 1) throw ConfigError("const1 takes one arity, e.g. const1:2");
    return make_const1_kernel(arity[0]);
  }
  if (head == "blocks") return make_block_count_kernel(parse_int_list(body, spec, false));
  throw ConfigError("unknown kernel spec '" + std::string(spec) + "'");
}

}  // namespace useq
