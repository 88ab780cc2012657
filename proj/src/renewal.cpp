#include "useq/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "useq/errors.hpp"
#include "useq/limitlaw.hpp"
#include "useq/ucore.hpp"

namespace useq {

namespace {

constexpr int kQuantileGrid = 4096;

// Law of Y = f(X) as weighted points.
std::map<double, double> value_law(const Kernel& kernel, const SampleSource& source, double tail_tol) {
  std::map<double, double> law;
  double x[1];
  if (source.discrete()) {
    for (const auto& a : source.atoms(source.finite() ? 0.0 : tail_tol)) {
      if (a.prob <= 0) continue;
      x[0] = a.value;
      law[kernel(x)] += a.prob;
    }
  } else {
    for (int i = 0; i < kQuantileGrid; ++i) {
      x[0] = source.quantile((i + 0.5) / kQuantileGrid);
      law[kernel(x)] += 1.0 / kQuantileGrid;
    }
  }
  return law;
}

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-9 && std::abs(v) < 9e15; }

}  // namespace

RenewalExperiment::RenewalExperiment(const Kernel& kernel, const Kernel* companion, const SampleSource& source,
                                     double mu, RenewalPolicy policy)
    : kernel_(&kernel),
      companion_(companion),
      source_(&source),
      mu_(mu),
      nonnegative_(nonnegative_on(kernel, source)),
      policy_(policy) {
  if (!(mu > 0.0))
    throw ConfigError("renewal needs mu = E f > 0 for kernel '" + kernel.spec() + "' under '" + source.spec() +
                      "', got " + std::to_string(mu));
  validate_pairing(kernel, source);
  if (companion) validate_pairing(*companion, source);
}

std::int64_t RenewalExperiment::step_budget(double x) const {
  const double nx = renewal_scale(kernel_->arity(), mu_, std::max(x, 1.0));
  return std::max<std::int64_t>(policy_.min_steps, static_cast<std::int64_t>(std::ceil(policy_.budget_factor * nx)));
}

std::int64_t RenewalExperiment::horizon(double x) const {
  if (policy_.horizon) return *policy_.horizon;
  const double nx = renewal_scale(kernel_->arity(), mu_, std::max(x, 1.0));
  return static_cast<std::int64_t>(std::ceil(4.0 * std::sqrt(nx))) + 64;
}

RenewalOutcome RenewalExperiment::run(double x, Rng& rng) const {
  if (x < 0) throw ConfigError("threshold must be nonnegative");
  UStream u(*kernel_, policy_.history_cap);
  std::optional<UStream> uc;
  if (companion_) uc.emplace(*companion_, policy_.history_cap);
  const std::int64_t budget = step_budget(x);

  RenewalOutcome o;
  o.x = x;
  double prev_u = 0.0, prev_c = 0.0;
  auto finish = [&] {
    o.overshoot = o.u_at_nplus - x;
    o.companion_value = policy_.companion_at == StopAt::minus ? o.companion_at_nminus : o.companion_at_nplus;
    return o;
  };

  if (nonnegative_) {
    for (std::int64_t n = 1; n <= budget; ++n) {
      const double v = source_->draw(rng);
      u.push(v);
      if (uc) uc->push(v);
      if (u.value() > x) {
        o.n_plus = n;
        o.n_minus = n - 1;
        o.u_at_nplus = u.value();
        o.u_at_nminus = prev_u;
        if (uc) {
          o.companion_at_nplus = uc->value();
          o.companion_at_nminus = prev_c;
        }
        o.nminus_exact = true;
        return finish();
      }
      prev_u = u.value();
      if (uc) prev_c = uc->value();
    }
    throw BudgetExceeded("threshold " + std::to_string(x) + " not reached within " + std::to_string(budget) +
                         " steps");
  }

  // Signed kernel: N- is the last n with U_n <= x before U stays above x
  // for `horizon` consecutive steps.
  const std::int64_t h = horizon(x);
  bool crossed = false;
  std::int64_t last_le = 0;
  for (std::int64_t n = 1; n <= budget; ++n) {
    const double v = source_->draw(rng);
    u.push(v);
    if (uc) uc->push(v);
    if (u.value() <= x) {
      last_le = n;
      o.u_at_nminus = u.value();
      if (uc) o.companion_at_nminus = uc->value();
    } else {
      if (!crossed) {
        crossed = true;
        o.n_plus = n;
        o.u_at_nplus = u.value();
        if (uc) o.companion_at_nplus = uc->value();
      }
      if (n - last_le >= h) {
        o.n_minus = last_le;
        if (uc && last_le == 0) o.companion_at_nminus = 0.0;
        o.nminus_exact = false;
        return finish();
      }
    }
  }
  throw BudgetExceeded("threshold " + std::to_string(x) + " not confirmed within " + std::to_string(budget) +
                       " steps");
}

RenewalOutcome run_to_threshold(const Kernel& kernel, const Kernel* companion, const SampleSource& source, double mu,
                                double x, Rng& rng, const RenewalPolicy& policy) {
  return RenewalExperiment(kernel, companion, source, mu, policy).run(x, rng);
}

std::optional<double> lattice_span(const Kernel& kernel, const SampleSource& source) {
  if (kernel.arity() != 1) throw ConfigError("lattice span needs a kernel of arity 1");
  if (kernel.span_hint()) return kernel.span_hint();
  if (source.continuous()) return std::nullopt;
  std::int64_t g = 0;
  for (const auto& [y, p] : value_law(kernel, source, 1e-15)) {
    if (!is_integer(y))
      throw ConfigError("cannot determine the lattice span of non-integer values of '" + kernel.spec() + "'");
    g = std::gcd(g, std::llabs(static_cast<std::int64_t>(std::llround(y))));
  }
  if (g == 0) return std::nullopt;
  return static_cast<double>(g);
}

OvershootLaw overshoot_limit_law(const Kernel& kernel, const SampleSource& source, double tail_tol) {
  if (kernel.arity() != 1) throw ConfigError("overshoot law needs a kernel of arity 1");
  if (!nonnegative_on(kernel, source)) throw ConfigError("overshoot law needs a nonnegative kernel");
  const auto law = value_law(kernel, source, tail_tol);
  OvershootLaw out;
  for (const auto& [y, p] : law) out.mu += y * p;
  if (!(out.mu > 0)) throw ConfigError("overshoot law needs mu > 0");

  const auto span = lattice_span(kernel, source);
  if (span) {
    out.lattice = true;
    out.span = *span;
    // tail[k] = P(Y >= k h)
    for (int k = 1; k < 1'000'000; ++k) {
      const double level = k * out.span;
      double tail = 0;
      for (auto it = law.lower_bound(level - 1e-9 * out.span); it != law.end(); ++it) tail += it->second;
      if (tail <= tail_tol) break;
      out.values.push_back(level);
      out.probs.push_back(out.span / out.mu * tail);
    }
    return out;
  }
  // P(R <= y) = E min(Y, y) / mu
  const double top = law.rbegin()->first;
  constexpr int kSteps = 256;
  for (int i = 0; i <= kSteps; ++i) {
    const double y = top * i / kSteps;
    double acc = 0;
    for (const auto& [v, p] : law) acc += p * std::min(v, y);
    out.grid.push_back(y);
    out.grid_cdf.push_back(acc / out.mu);
  }
  return out;
}

double OvershootLaw::cdf(double y) const {
  if (lattice) {
    double acc = 0;
    for (std::size_t k = 0; k < values.size() && values[k] <= y + 1e-12; ++k) acc += probs[k];
    return acc;
  }
  if (y <= 0) return 0.0;
  if (y >= grid.back()) return 1.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), y);
  const std::size_t k = it - grid.begin();
  const double w = (y - grid[k - 1]) / (grid[k] - grid[k - 1]);
  return grid_cdf[k - 1] + w * (grid_cdf[k] - grid_cdf[k - 1]);
}

double OvershootLaw::pmf(double v) const {
  if (!lattice) return 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (std::abs(values[k] - v) < 1e-9 * std::max(1.0, span)) return probs[k];
  return 0.0;
}

Conditioning Conditioning::parse(std::string_view text) {
  Conditioning c;
  if (text.empty() || text == "none") return c;
  if (text == "exact-hit") {
    c.kind = Kind::exact_hit;
    return c;
  }
  constexpr std::string_view prefix = "overshoot=";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string num(text.substr(prefix.size()));
    std::size_t pos = 0;
    int k = 0;
    try {
      k = std::stoi(num, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (num.empty() || pos != num.size() || k < 1)
      throw ConfigError("overshoot conditioning needs a positive integer, got '" + num + "'");
    c.kind = Kind::overshoot;
    c.k = k;
    return c;
  }
  throw ConfigError("unknown conditioning '" + std::string(text) + "' (none|overshoot=k|exact-hit)");
}

std::string Conditioning::to_string() const {
  switch (kind) {
    case Kind::none:
      return "none";
    case Kind::exact_hit:
      return "exact-hit";
    case Kind::overshoot:
      return "overshoot=" + std::to_string(k);
  }
  return "?";
}

ConditionedRenewal::ConditionedRenewal(const RenewalExperiment& experiment, Conditioning condition)
    : experiment_(&experiment), condition_(condition) {
  if (condition_.kind == Conditioning::Kind::none) return;
  const Kernel& f = experiment.kernel();
  const SampleSource& src = experiment.source();
  if (f.arity() != 1) throw ConfigError("conditioning needs a kernel of arity 1");
  if (!experiment.nonnegative() || !integer_valued_on(f, src))
    throw ConfigError("conditioning needs an integer-valued nonnegative kernel, got '" + f.spec() + "' under '" +
                      src.spec() + "'");
  const auto span = lattice_span(f, src);
  if (!span) throw ConfigError("conditioning needs a lattice law");
  span_ = *span;
  if (src.finite() || (src.discrete() && std::holds_alternative<GoldenBlockLaw>(src.law()))) {
    double top = 0;
    double xv[1];
    for (const auto& a : src.atoms(0.0)) {
      xv[0] = a.value;
      if (a.prob > 0) top = std::max(top, f(xv));
    }
    max_value_ = top;
  } else if (src.continuous() && f.kind() == KernelKind::const1) {
    max_value_ = 1.0;
  }
}

void ConditionedRenewal::check_threshold(double x) const {
  if (condition_.kind == Conditioning::Kind::none) return;
  if (!is_integer(x)) throw ConfigError("conditioning needs an integer threshold");
  const auto h = static_cast<std::int64_t>(std::llround(span_));
  const auto xi = static_cast<std::int64_t>(std::llround(x));
  if (condition_.kind == Conditioning::Kind::exact_hit) {
    if (xi % h != 0)
      throw ConfigError("exact hit of x = " + std::to_string(xi) + " has probability zero: span " +
                        std::to_string(h) + " does not divide x");
    return;
  }
  if ((xi + condition_.k) % h != 0)
    throw ConfigError("overshoot " + std::to_string(condition_.k) + " at x = " + std::to_string(xi) +
                      " has probability zero: x + k must be a multiple of the span " + std::to_string(h));
  if (max_value_ && condition_.k > *max_value_)
    throw ConfigError("overshoot " + std::to_string(condition_.k) + " exceeds the largest value of f(X)");
}

bool ConditionedRenewal::accepts(const RenewalOutcome& o) const {
  switch (condition_.kind) {
    case Conditioning::Kind::none:
      return true;
    case Conditioning::Kind::exact_hit:
      return o.u_at_nminus == o.x;
    case Conditioning::Kind::overshoot:
      return std::abs(o.overshoot - condition_.k) < 0.5;
  }
  return false;
}

RenewalOutcome ConditionedRenewal::run(double x, Rng& rng) const {
  check_threshold(x);
  const std::int64_t cap = experiment_->policy().max_attempts;
  for (std::int64_t a = 1; a <= cap; ++a) {
    RenewalOutcome o = experiment_->run(x, rng);
    if (accepts(o)) {
      o.attempts = a;
      return o;
    }
  }
  throw BudgetExceeded("conditioning '" + condition_.to_string() + "' not met within " + std::to_string(cap) +
                       " attempts");
}

}  // namespace useq
