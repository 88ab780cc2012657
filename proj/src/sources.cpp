#include "useq/sources.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "useq/errors.hpp"

namespace useq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Eulerian numbers A(k, m): sum_{n>=1} n^k r^(n-1) = A_k(r) / (1 - r)^(k+1).
std::vector<Rational> eulerian_row(int k) {
  std::vector<Rational> row{Rational(1)};
  for (int n = 1; n <= k; ++n) {
    std::vector<Rational> next(n, Rational(0));
    for (int m = 0; m < n; ++m) {
      Rational a = m < static_cast<int>(row.size()) ? row[m] : Rational(0);
      Rational b = m >= 1 && m - 1 < static_cast<int>(row.size()) ? row[m - 1] : Rational(0);
      next[m] = Rational(m + 1) * a + Rational(n - m) * b;
    }
    row = std::move(next);
  }
  return row;
}

Rational pow_rational(const Rational& base, int e) {
  Rational r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

SampleSource::SampleSource(Law law, std::string spec) : law_(std::move(law)), spec_(std::move(spec)) {
  if (auto* f = std::get_if<FiniteLaw>(&law_)) {
    if (static_cast<int>(f->probs.size()) != f->alphabet.size())
      throw ConfigError("probability vector length does not match alphabet " + f->alphabet.name);
    Rational total = 0;
    double acc = 0;
    for (const auto& p : f->probs) {
      if (p < 0) throw ConfigError("negative probability in '" + spec_ + "'");
      total += p;
      acc += to_double(p);
      cumulative_.push_back(acc);
    }
    if (std::abs(to_double(total) - 1.0) > 1e-12)
      throw ConfigError("probabilities in '" + spec_ + "' do not sum to 1");
  } else if (auto* g = std::get_if<GeometricLaw>(&law_)) {
    if (g->q <= 0 || g->q > 1) throw ConfigError("geometric parameter must lie in (0, 1]");
  }
}

SampleSource SampleSource::parse(std::string_view spec) {
  const std::string s(spec);
  if (spec == "uniform01") return SampleSource(UniformUnitLaw{}, s);
  if (spec == "uniform2pi") return SampleSource(UniformCircleLaw{}, s);
  if (spec == "golden-blocks") return SampleSource(GoldenBlockLaw{}, s);
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unknown distribution spec '" + s + "'");
  std::string_view head = spec.substr(0, colon), body = spec.substr(colon + 1);
  if (head == "geom") return SampleSource(GeometricLaw{parse_rational(body)}, s);
  if (head == "bernoulli" || head == "finite") {
    auto at = body.rfind('@');
    if (at == std::string_view::npos) throw ConfigError("finite law needs an alphabet, e.g. bernoulli:0.5@binary");
    Alphabet alpha = parse_alphabet(body.substr(at + 1));
    std::string_view params = body.substr(0, at);
    std::vector<Rational> probs;
    if (head == "bernoulli") {
      if (alpha.size() != 2) throw ConfigError("bernoulli needs a two-letter alphabet");
      Rational p = parse_rational(params);
      if (p < 0 || p > 1) throw ConfigError("bernoulli parameter must lie in [0, 1]");
      probs = {Rational(1) - p, p};
    } else {
      std::size_t start = 0;
      while (start <= params.size()) {
        auto end = params.find(',', start);
        if (end == std::string_view::npos) end = params.size();
        probs.push_back(parse_rational(params.substr(start, end - start)));
        start = end + 1;
      }
    }
    return SampleSource(FiniteLaw{alpha, std::move(probs)}, s);
  }
  throw ConfigError("unknown distribution spec '" + s + "'");
}

double SampleSource::draw(Rng& rng) const {
  return std::visit(
      overloaded{
          [&](const FiniteLaw&) {
            const double u = uniform01(rng);
            auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
            auto idx = std::min<std::ptrdiff_t>(it - cumulative_.begin(), cumulative_.size() - 1);
            return static_cast<double>(idx);
          },
          [&](const UniformUnitLaw&) { return uniform_open01(rng); },
          [&](const UniformCircleLaw&) { return 2.0 * std::numbers::pi * uniform01(rng); },
          [&](const GeometricLaw& g) {
            const double q = to_double(g.q);
            if (q >= 1.0) return 1.0;
            return 1.0 + std::floor(std::log(uniform_open01(rng)) / std::log1p(-q));
          },
          [&](const GoldenBlockLaw&) { return uniform01(rng) < kGoldenP ? 1.0 : 2.0; },
      },
      law_);
}

std::vector<double> SampleSource::sample(Rng& rng, std::size_t n) const {
  std::vector<double> out(n);
  for (auto& x : out) x = draw(rng);
  return out;
}

bool SampleSource::discrete() const {
  return !std::holds_alternative<UniformUnitLaw>(law_) && !std::holds_alternative<UniformCircleLaw>(law_);
}

bool SampleSource::positive_integer_support() const {
  return std::holds_alternative<GeometricLaw>(law_) || std::holds_alternative<GoldenBlockLaw>(law_);
}

bool SampleSource::nonnegative_support() const { return true; }

bool SampleSource::integer_support() const { return discrete(); }

bool SampleSource::rational_moments() const {
  return !std::holds_alternative<UniformCircleLaw>(law_) && !std::holds_alternative<GoldenBlockLaw>(law_);
}

double SampleSource::cdf_scale() const {
  if (std::holds_alternative<UniformUnitLaw>(law_)) return 1.0;
  if (std::holds_alternative<UniformCircleLaw>(law_)) return 1.0 / (2.0 * std::numbers::pi);
  throw ConfigError("cdf_scale requested for discrete law '" + spec_ + "'");
}

double SampleSource::cdf(double x) const { return std::clamp(x * cdf_scale(), 0.0, 1.0); }

double SampleSource::quantile(double u) const {
  if (continuous()) return u / cdf_scale();
  double acc = 0;
  auto at = atoms(1e-17);
  for (const auto& a : at) {
    acc += a.prob;
    if (u < acc) return a.value;
  }
  return at.back().value;
}

std::vector<Atom> SampleSource::atoms(double tail_tol) const {
  std::vector<Atom> out;
  std::visit(overloaded{
                 [&](const FiniteLaw& f) {
                   for (int a = 0; a < f.alphabet.size(); ++a)
                     out.push_back({static_cast<double>(a), to_double(f.probs[a]), f.probs[a]});
                 },
                 [&](const UniformUnitLaw&) { throw ConfigError("atoms requested for continuous law"); },
                 [&](const UniformCircleLaw&) { throw ConfigError("atoms requested for continuous law"); },
                 [&](const GeometricLaw& g) {
                   const double q = to_double(g.q);
                   Rational p = g.q;
                   double tail = 1.0;
                   for (int k = 1; tail > tail_tol && k < 100000; ++k) {
                     const double pk = to_double(p);
                     out.push_back({static_cast<double>(k), pk, p});
                     tail -= pk;
                     if (tail < 0 || q >= 1.0) break;
                     p *= (Rational(1) - g.q);
                   }
                 },
                 [&](const GoldenBlockLaw&) {
                   out.push_back({1.0, kGoldenP, std::nullopt});
                   out.push_back({2.0, kGoldenP * kGoldenP, std::nullopt});
                 },
             },
             law_);
  return out;
}

ExactValue SampleSource::moment(int k) const {
  if (k < 0) throw ConfigError("negative moment order");
  return std::visit(
      overloaded{
          [&](const FiniteLaw& f) {
            Rational acc = 0;
            for (int a = 0; a < f.alphabet.size(); ++a) acc += f.probs[a] * pow_rational(Rational(a), k);
            return ExactValue{to_double(acc), acc};
          },
          [&](const UniformUnitLaw&) {
            Rational r(1, k + 1);
            return ExactValue{to_double(r), r};
          },
          [&](const UniformCircleLaw&) {
            return ExactValue{std::pow(2.0 * std::numbers::pi, k) / (k + 1), std::nullopt};
          },
          [&](const GeometricLaw& g) {
            if (k == 0) return ExactValue{1.0, Rational(1)};
            const Rational r = Rational(1) - g.q;
            Rational acc = 0, pw = 1;
            for (const auto& a : eulerian_row(k)) {
              acc += a * pw;
              pw *= r;
            }
            acc /= pow_rational(g.q, k);
            return ExactValue{to_double(acc), acc};
          },
          [&](const GoldenBlockLaw&) {
            return ExactValue{kGoldenP + std::ldexp(kGoldenP * kGoldenP, k), std::nullopt};
          },
      },
      law_);
}

const Alphabet* SampleSource::alphabet() const {
  if (auto* f = std::get_if<FiniteLaw>(&law_)) return &f->alphabet;
  return nullptr;
}

ExactValue exact_expectation(const SampleSource& source, const Integrand& g) {
  if (auto* poly = std::get_if<Polynomial<Rational>>(&g)) {
    ExactValue out;
    Rational exact = 0;
    bool rational = source.rational_moments();
    long double acc = 0;
    for (std::size_t k = 0; k < poly->size(); ++k) {
      const Rational& c = poly->coeffs()[k];
      if (c == 0) continue;
      ExactValue m = source.moment(static_cast<int>(k));
      if (rational && m.exact) exact += c * *m.exact;
      acc += static_cast<long double>(to_double(c)) * m.value;
    }
    out.value = rational ? to_double(exact) : static_cast<double>(acc);
    if (rational) out.exact = exact;
    return out;
  }
  const auto& table = std::get<std::map<double, double>>(g);
  if (!source.discrete())
    throw ConfigError("tabulated integrand needs a discrete law; '" + source.spec() + "' is continuous");
  long double acc = 0;
  Rational exact = 0;
  bool rational = true;
  for (const auto& [x, v] : table) {
    double p = 0;
    std::optional<Rational> pe;
    if (auto* f = std::get_if<FiniteLaw>(&source.law())) {
      int idx = static_cast<int>(x);
      if (x == idx && idx >= 0 && idx < f->alphabet.size()) {
        pe = f->probs[idx];
        p = to_double(*pe);
      }
    } else if (auto* geo = std::get_if<GeometricLaw>(&source.law())) {
      if (x >= 1 && x == std::floor(x) && x < 1e6) {
        Rational pk = geo->q;
        for (int k = 1; k < static_cast<int>(x); ++k) pk *= (Rational(1) - geo->q);
        pe = pk;
        p = to_double(pk);
      }
    } else {
      if (x == 1.0) p = kGoldenP;
      if (x == 2.0) p = kGoldenP * kGoldenP;
    }
    if (v != std::floor(v) || !pe) rational = false;
    if (pe && rational) exact += *pe * Rational(static_cast<long long>(v));
    acc += static_cast<long double>(p) * v;
  }
  ExactValue out{static_cast<double>(acc), std::nullopt};
  if (rational) {
    out.exact = exact;
    out.value = to_double(exact);
  }
  return out;
}

std::vector<int> conditioned_block_sequence(const SampleSource& source, int n, Rng& rng, ConditionedMethod method,
                                            std::int64_t max_attempts) {
  if (!source.positive_integer_support())
    throw ConfigError("conditioned block sequences need a law on {1, 2, ...}; got '" + source.spec() + "'");
  if (n < 1) throw ConfigError("target must be at least 1");

  if (method == ConditionedMethod::rejection) {
    std::vector<int> blocks;
    for (std::int64_t attempt = 0; attempt < max_attempts; ++attempt) {
      blocks.clear();
      long sum = 0;
      while (sum < n) {
        int l = static_cast<int>(source.draw(rng));
        blocks.push_back(l);
        sum += l;
      }
      if (sum == n) return blocks;
    }
    throw BudgetExceeded("rejection sampler did not hit the target within the attempt budget");
  }

  // log u(m) = log P(some partial sum equals m), the renewal mass at m.
  const auto at = source.atoms(1e-17);
  const int kmax = static_cast<int>(at.back().value);
  std::vector<double> logp(kmax + 1, -std::numeric_limits<double>::infinity());
  for (const auto& a : at) logp[static_cast<int>(a.value)] = std::log(a.prob);
  std::vector<double> logu(n + 1, -std::numeric_limits<double>::infinity());
  logu[0] = 0.0;
  std::vector<double> terms;
  for (int m = 1; m <= n; ++m) {
    terms.clear();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= std::min(m, kmax); ++k) {
      double t = logp[k] + logu[m - k];
      terms.push_back(t);
      hi = std::max(hi, t);
    }
    if (!std::isfinite(hi)) continue;
    double s = 0;
    for (double t : terms) s += std::exp(t - hi);
    logu[m] = hi + std::log(s);
  }
  if (!std::isfinite(logu[n])) throw ConfigError("target " + std::to_string(n) + " is unreachable under the law");

  std::vector<int> blocks;
  int remaining = n;
  while (remaining > 0) {
    const double u = uniform01(rng);
    double acc = 0;
    int chosen = -1;
    for (int k = 1; k <= std::min(remaining, kmax); ++k) {
      if (!std::isfinite(logp[k]) || !std::isfinite(logu[remaining - k])) continue;
      acc += std::exp(logp[k] + logu[remaining - k] - logu[remaining]);
      chosen = k;
      if (u < acc) break;
    }
    blocks.push_back(chosen);
    remaining -= chosen;
  }
  return blocks;
}

}  // namespace useq
