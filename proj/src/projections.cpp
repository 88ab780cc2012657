#include <algorithm>
#include <cmath>
#include <numeric>

#include "useq/errors.hpp"
#include "useq/ucore.hpp"

namespace useq {

namespace {

double rational_to_double(const Rational& r) { return to_double(r); }

Polynomial<double> to_double_poly(const Polynomial<Rational>& p) { return p.convert<double>(&rational_to_double); }

// E p(X) in floating point from the law's moments.
double expect_poly(const SampleSource& source, const Polynomial<double>& p) {
  long double acc = 0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p.coeffs()[k] != 0.0) acc += static_cast<long double>(p.coeffs()[k]) * source.moment(static_cast<int>(k)).value;
  return static_cast<double>(acc);
}

std::int64_t checked_pow(std::int64_t base, int e, std::int64_t cap) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > cap / std::max<std::int64_t>(base, 1)) return cap + 1;
    r *= base;
  }
  return r;
}

ProjectionModel enumerate_finite(const Kernel& kernel, const SampleSource& source, const ProjectionOptions& opt) {
  const auto& law = std::get<FiniteLaw>(source.law());
  const int A = law.alphabet.size();
  const int d = kernel.arity();
  const std::int64_t total = checked_pow(A, d, opt.budget);
  if (total > opt.budget)
    throw BudgetExceeded("exact enumeration needs " + std::to_string(A) + "^" + std::to_string(d) +
                         " tuples, above the budget of " + std::to_string(opt.budget));
  const bool rational = kernel.integer_valued();

  std::vector<double> p(A);
  for (int a = 0; a < A; ++a) p[a] = to_double(law.probs[a]);

  double mu = 0;
  Rational mu_q = 0;
  std::vector<std::vector<double>> cond(d, std::vector<double>(A, 0.0));
  RationalMatrix cond_q(d, std::vector<Rational>(A, Rational(0)));

  std::vector<int> t(d, 0);
  std::vector<double> x(d, 0.0);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    std::int64_t rem = idx;
    for (int j = d - 1; j >= 0; --j) {
      t[j] = static_cast<int>(rem % A);
      rem /= A;
      x[j] = t[j];
    }
    const double v = kernel(x);
    if (v == 0.0) continue;
    for (int i = 0; i < d; ++i) {
      double w = 1.0;
      for (int k = 0; k < d; ++k)
        if (k != i) w *= p[t[k]];
      cond[i][t[i]] += w * v;
      if (rational) {
        Rational wq = 1;
        for (int k = 0; k < d; ++k)
          if (k != i) wq *= law.probs[t[k]];
        cond_q[i][t[i]] += wq * Rational(static_cast<long long>(v));
      }
    }
    double w = 1.0;
    for (int k = 0; k < d; ++k) w *= p[t[k]];
    mu += w * v;
    if (rational) {
      Rational wq = 1;
      for (int k = 0; k < d; ++k) wq *= law.probs[t[k]];
      mu_q += wq * Rational(static_cast<long long>(v));
    }
  }

  ProjectionModel m;
  m.d = d;
  m.method = ProjectionMethod::exact;
  m.detail = "enumerated";
  m.kernel_spec = kernel.spec();
  m.source_spec = source.spec();
  m.mu = rational ? to_double(mu_q) : mu;
  if (rational) m.mu_exact = mu_q;
  for (int i = 0; i < d; ++i) {
    ProjectionFunction f;
    f.form = ProjectionFunction::Form::table;
    std::vector<Rational> exact_vals;
    for (int a = 0; a < A; ++a) {
      f.points.push_back(a);
      f.weights.push_back(p[a]);
      if (rational) {
        exact_vals.push_back(cond_q[i][a] - mu_q);
        f.values.push_back(to_double(exact_vals.back()));
      } else {
        f.values.push_back(cond[i][a] - mu);
      }
    }
    if (rational) f.exact_values = std::move(exact_vals);
    m.projections.push_back(std::move(f));
  }
  m.sigma = Eigen::MatrixXd::Zero(d, d);
  if (rational) {
    RationalMatrix s(d, std::vector<Rational>(d, Rational(0)));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        for (int a = 0; a < A; ++a)
          s[i][j] += law.probs[a] * (*m.projections[i].exact_values)[a] * (*m.projections[j].exact_values)[a];
        m.sigma(i, j) = to_double(s[i][j]);
      }
    m.sigma_exact = std::move(s);
  } else {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int a = 0; a < A; ++a) m.sigma(i, j) += p[a] * m.projections[i].values[a] * m.projections[j].values[a];
    m.error_bound = 1e-14;
  }
  m.sigma_std_error = Eigen::MatrixXd::Zero(d, d);
  return m;
}

ProjectionModel separable_moments(const Kernel& kernel, const SampleSource& source) {
  const int d = kernel.arity();
  const auto& factors = kernel.factors();
  const bool rational = source.rational_moments();

  ProjectionModel m;
  m.d = d;
  m.method = ProjectionMethod::exact;
  m.detail = "separable-moments";
  m.kernel_spec = kernel.spec();
  m.source_spec = source.spec();
  m.sigma = Eigen::MatrixXd::Zero(d, d);
  m.sigma_std_error = Eigen::MatrixXd::Zero(d, d);

  if (rational) {
    std::vector<Rational> eg(d);
    for (int k = 0; k < d; ++k) eg[k] = *exact_expectation(source, *factors[k].poly).exact;
    Rational mu = 1;
    for (const auto& e : eg) mu *= e;
    std::vector<Polynomial<Rational>> fi;
    for (int i = 0; i < d; ++i) {
      Rational c = 1;
      for (int k = 0; k < d; ++k)
        if (k != i) c *= eg[k];
      fi.push_back(*factors[i].poly * c - Polynomial<Rational>::constant(mu));
    }
    RationalMatrix s(d, std::vector<Rational>(d, Rational(0)));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        s[i][j] = *exact_expectation(source, fi[i] * fi[j]).exact;
        m.sigma(i, j) = to_double(s[i][j]);
      }
    m.mu = to_double(mu);
    m.mu_exact = mu;
    m.sigma_exact = std::move(s);
    for (int i = 0; i < d; ++i) {
      ProjectionFunction f;
      f.form = ProjectionFunction::Form::polynomial_x;
      f.poly = to_double_poly(fi[i]);
      f.exact_poly = fi[i];
      m.projections.push_back(std::move(f));
    }
    return m;
  }

  std::vector<double> eg(d);
  for (int k = 0; k < d; ++k) eg[k] = expect_poly(source, to_double_poly(*factors[k].poly));
  double mu = 1;
  for (double e : eg) mu *= e;
  for (int i = 0; i < d; ++i) {
    double c = 1;
    for (int k = 0; k < d; ++k)
      if (k != i) c *= eg[k];
    ProjectionFunction f;
    f.form = ProjectionFunction::Form::polynomial_x;
    f.poly = to_double_poly(*factors[i].poly) * c - Polynomial<double>::constant(mu);
    m.projections.push_back(std::move(f));
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m.sigma(i, j) = expect_poly(source, m.projections[i].poly * m.projections[j].poly);
  m.mu = mu;
  m.error_bound = 1e-13;
  return m;
}

ProjectionModel order_enumeration(const Kernel& kernel, const SampleSource& source, const ProjectionOptions& opt) {
  if (!kernel.rank_based()) throw ConfigError("order enumeration needs a rank-based kernel");
  if (!source.continuous()) throw ConfigError("rank-based kernel with discrete source '" + source.spec() + "'");
  const int d = kernel.arity();
  const int m2 = 2 * d - 1;
  const Rational orderings = factorial(m2);
  if (orderings > Rational(opt.budget))
    throw BudgetExceeded("order enumeration needs (2d-1)! = " + to_string(orderings) +
                         " orderings, above the budget of " + std::to_string(opt.budget));

  // mu and the polynomial projections in u = F(x).
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> vals(d);
  std::int64_t favourable_sum = 0;
  std::vector<Polynomial<Rational>> cond(d);
  std::vector<Polynomial<Rational>> basis(d);  // u^r (1-u)^(d-1-r) / (r! (d-1-r)!)
  for (int r = 0; r < d; ++r) {
    Polynomial<Rational> b = Polynomial<Rational>::constant(Rational(1) / (factorial(r) * factorial(d - 1 - r)));
    for (int k = 0; k < r; ++k) b = b * Polynomial<Rational>::monomial(1);
    for (int k = 0; k < d - 1 - r; ++k) b = b * Polynomial<Rational>(std::vector<Rational>{Rational(1), Rational(-1)});
    basis[r] = b;
  }
  do {
    for (int k = 0; k < d; ++k) vals[k] = perm[k];
    const double v = kernel(vals);
    if (v != std::floor(v)) throw ConfigError("order enumeration needs an integer-valued rank kernel");
    const auto vi = static_cast<long long>(v);
    favourable_sum += vi;
    for (int i = 0; i < d; ++i) cond[i] += basis[perm[i]] * Rational(vi);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const Rational mu = Rational(favourable_sum) / factorial(d);

  // Sigma_ij + mu^2 = E f(tuple with shared value at slot i) f(tuple with shared value at slot j):
  // average over all orderings of the 2d-1 distinct values.
  std::vector<int> ranks(m2);
  std::iota(ranks.begin(), ranks.end(), 0);
  std::vector<std::vector<long long>> acc(d, std::vector<long long>(d, 0));
  std::vector<double> t1(d), t2(d);
  std::vector<long long> f1(d), f2(d);
  do {
    for (int i = 0; i < d; ++i) {
      // first tuple: shared value (index 0) at slot i, values 1..d-1 elsewhere
      int next = 1;
      for (int k = 0; k < d; ++k) t1[k] = k == i ? ranks[0] : ranks[next++];
      f1[i] = static_cast<long long>(kernel(t1));
      // second tuple: shared value at slot i, values d..2d-2 elsewhere
      next = d;
      for (int k = 0; k < d; ++k) t2[k] = k == i ? ranks[0] : ranks[next++];
      f2[i] = static_cast<long long>(kernel(t2));
    }
    for (int i = 0; i < d; ++i)
      if (f1[i] != 0)
        for (int j = 0; j < d; ++j) acc[i][j] += f1[i] * f2[j];
  } while (std::next_permutation(ranks.begin(), ranks.end()));

  ProjectionModel m;
  m.d = d;
  m.method = ProjectionMethod::order;
  m.detail = "order-enumeration";
  m.kernel_spec = kernel.spec();
  m.source_spec = source.spec();
  m.mu = to_double(mu);
  m.mu_exact = mu;
  m.sigma = Eigen::MatrixXd::Zero(d, d);
  m.sigma_std_error = Eigen::MatrixXd::Zero(d, d);
  RationalMatrix s(d, std::vector<Rational>(d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      s[i][j] = Rational(acc[i][j]) / orderings - mu * mu;
      m.sigma(i, j) = to_double(s[i][j]);
    }
  m.sigma_exact = std::move(s);
  for (int i = 0; i < d; ++i) {
    ProjectionFunction f;
    f.form = ProjectionFunction::Form::polynomial_cdf;
    Polynomial<Rational> fi = cond[i] - Polynomial<Rational>::constant(mu);
    f.poly = to_double_poly(fi);
    f.exact_poly = fi;
    f.cdf_scale = source.cdf_scale();
    m.projections.push_back(std::move(f));
  }
  return m;
}

struct Grid {
  std::vector<double> points;
  std::vector<double> weights;
};

Grid projection_grid(const SampleSource& source, int k) {
  Grid g;
  if (source.continuous()) {
    for (int i = 0; i < k; ++i) {
      g.points.push_back(source.quantile((i + 0.5) / k));
      g.weights.push_back(1.0 / k);
    }
    return g;
  }
  double total = 0;
  for (const auto& a : source.atoms(source.finite() ? 0.0 : 1e-9)) {
    g.points.push_back(a.value);
    g.weights.push_back(a.prob);
    total += a.prob;
  }
  for (auto& w : g.weights) w /= total;
  return g;
}

ProjectionModel monte_carlo(const Kernel& kernel, const SampleSource& source, const ProjectionOptions& opt) {
  const int d = kernel.arity();
  const Grid grid = projection_grid(source, opt.grid_points);
  const int K = static_cast<int>(grid.points.size());
  const std::int64_t inner = std::max<std::int64_t>(64, opt.budget / std::max(K, 1));

  Rng rng = make_rng(opt.seed, 0);
  // Common inner draws for every grid point and slot.
  std::vector<std::vector<double>> tuples(inner, std::vector<double>(d));
  for (auto& t : tuples)
    for (auto& v : t) v = source.draw(rng);

  Rng mu_rng = make_rng(opt.seed, 1);
  const std::int64_t mu_draws = std::max<std::int64_t>(inner * 4, opt.budget);
  long double s1 = 0, s2 = 0;
  std::vector<double> tup(d);
  for (std::int64_t b = 0; b < mu_draws; ++b) {
    for (auto& v : tup) v = source.draw(mu_rng);
    const double f = kernel(tup);
    s1 += f;
    s2 += static_cast<long double>(f) * f;
  }
  const double mu = static_cast<double>(s1 / mu_draws);
  const double mu_var = std::max(0.0, static_cast<double>(s2 / mu_draws) - mu * mu);
  const double mu_se = std::sqrt(mu_var / mu_draws);

  ProjectionModel m;
  m.d = d;
  m.method = ProjectionMethod::monte_carlo;
  m.detail = "monte-carlo";
  m.kernel_spec = kernel.spec();
  m.source_spec = source.spec();
  m.mu = mu;
  m.mu_std_error = mu_se;

  double worst_se = mu_se;
  for (int i = 0; i < d; ++i) {
    ProjectionFunction f;
    f.form = ProjectionFunction::Form::table;
    f.points = grid.points;
    f.weights = grid.weights;
    for (int k = 0; k < K; ++k) {
      long double a1 = 0, a2 = 0;
      for (auto& t : tuples) {
        std::copy(t.begin(), t.end(), tup.begin());
        tup[i] = grid.points[k];
        const double v = kernel(tup);
        a1 += v;
        a2 += static_cast<long double>(v) * v;
      }
      const double mean = static_cast<double>(a1 / inner);
      const double var = std::max(0.0, static_cast<double>(a2 / inner) - mean * mean) * inner / (inner - 1);
      const double se = std::sqrt(var / inner + mu_se * mu_se);
      f.values.push_back(mean - mu);
      f.std_errors.push_back(se);
      worst_se = std::max(worst_se, se);
    }
    m.projections.push_back(std::move(f));
  }
  m.sigma = Eigen::MatrixXd::Zero(d, d);
  m.sigma_std_error = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < K; ++k) {
        const auto& fi = m.projections[i];
        const auto& fj = m.projections[j];
        m.sigma(i, j) += grid.weights[k] * fi.values[k] * fj.values[k];
        m.sigma_std_error(i, j) +=
            grid.weights[k] * (std::abs(fi.values[k]) * fj.std_errors[k] + std::abs(fj.values[k]) * fi.std_errors[k] +
                               fi.std_errors[k] * fj.std_errors[k]);
      }
  m.error_bound = worst_se;
  return m;
}

}  // namespace

std::string to_string(ProjectionMethod m) {
  switch (m) {
    case ProjectionMethod::exact:
      return "exact";
    case ProjectionMethod::order:
      return "order";
    case ProjectionMethod::monte_carlo:
      return "mc";
  }
  return "?";
}

ProjectionMethod parse_projection_method(std::string_view s) {
  if (s == "exact") return ProjectionMethod::exact;
  if (s == "order") return ProjectionMethod::order;
  if (s == "mc" || s == "monte-carlo") return ProjectionMethod::monte_carlo;
  throw ConfigError("unknown projection method '" + std::string(s) + "' (exact|order|mc)");
}

double ProjectionFunction::operator()(double x) const {
  switch (form) {
    case Form::polynomial_x:
      return poly(x);
    case Form::polynomial_cdf:
      return poly(std::clamp(x * cdf_scale, 0.0, 1.0));
    case Form::table: {
      for (std::size_t k = 0; k < points.size(); ++k)
        if (points[k] == x) return values[k];
      // Nearest grid point for stratified continuous grids.
      auto it = std::min_element(points.begin(), points.end(),
                                 [x](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
      return values[it - points.begin()];
    }
  }
  return 0.0;
}

void validate_pairing(const Kernel& kernel, const SampleSource& source) {
  if (kernel.rank_based() && source.discrete())
    throw ConfigError("rank-based kernel '" + kernel.spec() + "' cannot be paired with discrete source '" +
                      source.spec() + "'");
  if (kernel.kind() == KernelKind::pattern) {
    const Alphabet* a = source.alphabet();
    if (!a || !(*a == *kernel.alphabet()))
      throw ConfigError("pattern kernel '" + kernel.spec() + "' needs a finite source over the same alphabet, got '" +
                        source.spec() + "'");
  }
  if (kernel.kind() == KernelKind::blocks && !source.positive_integer_support())
    throw ConfigError("block-count kernel '" + kernel.spec() + "' needs a source on {1, 2, ...}, got '" +
                      source.spec() + "'");
}

bool nonnegative_on(const Kernel& kernel, const SampleSource& source) {
  return kernel.nonnegative() || (kernel.flags().inherits_support && source.nonnegative_support());
}

bool integer_valued_on(const Kernel& kernel, const SampleSource& source) {
  return kernel.integer_valued() || (kernel.flags().inherits_support && source.integer_support());
}

ProjectionModel hoeffding_projections(const Kernel& kernel, const SampleSource& source, ProjectionMethod method,
                                      const ProjectionOptions& options) {
  validate_pairing(kernel, source);
  switch (method) {
    case ProjectionMethod::exact:
      if (source.finite()) return enumerate_finite(kernel, source, options);
      if (kernel.polynomial_factors()) return separable_moments(kernel, source);
      throw ConfigError("no exact projection route for kernel '" + kernel.spec() + "' under '" + source.spec() +
                        "' (try --method order or mc)");
    case ProjectionMethod::order:
      return order_enumeration(kernel, source, options);
    case ProjectionMethod::monte_carlo:
      return monte_carlo(kernel, source, options);
  }
  throw ConfigError("unknown projection method");
}

ProjectionModel auto_projections(const Kernel& kernel, const SampleSource& source, const ProjectionOptions& options) {
  validate_pairing(kernel, source);
  if (source.finite() || kernel.polynomial_factors())
    return hoeffding_projections(kernel, source, ProjectionMethod::exact, options);
  if (kernel.rank_based() && source.continuous())
    return hoeffding_projections(kernel, source, ProjectionMethod::order, options);
  return hoeffding_projections(kernel, source, ProjectionMethod::monte_carlo, options);
}

std::optional<RationalMatrix> sigma_by_integration(const ProjectionModel& model) {
  for (const auto& f : model.projections)
    if (f.form != ProjectionFunction::Form::polynomial_cdf || !f.exact_poly) return std::nullopt;
  RationalMatrix s(model.d, std::vector<Rational>(model.d));
  for (int i = 0; i < model.d; ++i)
    for (int j = 0; j < model.d; ++j)
      s[i][j] = (*model.projections[i].exact_poly * *model.projections[j].exact_poly).integrate_unit();
  return s;
}

namespace {

// Both projections as polynomials in the same variable, or std::nullopt.
std::optional<std::pair<Polynomial<double>, Polynomial<double>>> common_polys(const ProjectionFunction& b,
                                                                              const ProjectionFunction& a,
                                                                              bool& in_cdf) {
  using Form = ProjectionFunction::Form;
  if (b.form == Form::table || a.form == Form::table) return std::nullopt;
  if (b.form == a.form) {
    in_cdf = b.form == Form::polynomial_cdf;
    return std::make_pair(b.poly, a.poly);
  }
  // Mixed: rewrite the x-polynomial in u = x * scale.
  in_cdf = true;
  if (b.form == Form::polynomial_x) return std::make_pair(b.poly.compose_scale(1.0 / a.cdf_scale), a.poly);
  return std::make_pair(b.poly, a.poly.compose_scale(1.0 / b.cdf_scale));
}

double cross_entry(const ProjectionFunction& b, const ProjectionFunction& a, const SampleSource& source) {
  using Form = ProjectionFunction::Form;
  if (b.form == Form::table && a.form == Form::table) {
    if (b.points != a.points) throw ConfigError("cross covariance of tables on different grids");
    double s = 0;
    for (std::size_t k = 0; k < b.points.size(); ++k) s += b.weights[k] * b.values[k] * a.values[k];
    return s;
  }
  if (b.form == Form::table || a.form == Form::table) {
    const auto& t = b.form == Form::table ? b : a;
    const auto& p = b.form == Form::table ? a : b;
    double s = 0;
    for (std::size_t k = 0; k < t.points.size(); ++k) s += t.weights[k] * t.values[k] * p(t.points[k]);
    return s;
  }
  bool in_cdf = false;
  auto polys = common_polys(b, a, in_cdf);
  const auto prod = polys->first * polys->second;
  if (in_cdf) return prod.integrate_unit();
  return expect_poly(source, prod);
}

}  // namespace

Eigen::MatrixXd cross_covariance(const ProjectionModel& b, const ProjectionModel& a, const SampleSource& source) {
  Eigen::MatrixXd c(b.d, a.d);
  for (int i = 0; i < b.d; ++i)
    for (int j = 0; j < a.d; ++j) c(i, j) = cross_entry(b.projections[i], a.projections[j], source);
  return c;
}

std::optional<RationalMatrix> cross_covariance_exact(const ProjectionModel& b, const ProjectionModel& a,
                                                     const SampleSource& source) {
  using Form = ProjectionFunction::Form;
  RationalMatrix c(b.d, std::vector<Rational>(a.d));
  for (int i = 0; i < b.d; ++i) {
    for (int j = 0; j < a.d; ++j) {
      const auto& fb = b.projections[i];
      const auto& fa = a.projections[j];
      if (fb.form == Form::table && fa.form == Form::table) {
        if (!fb.exact_values || !fa.exact_values || !source.finite() || fb.points != fa.points) return std::nullopt;
        const auto& law = std::get<FiniteLaw>(source.law());
        Rational s = 0;
        for (std::size_t k = 0; k < fb.points.size(); ++k)
          s += law.probs[k] * (*fb.exact_values)[k] * (*fa.exact_values)[k];
        c[i][j] = s;
      } else if (fb.form == fa.form && fb.exact_poly && fa.exact_poly) {
        const auto prod = *fb.exact_poly * *fa.exact_poly;
        if (fb.form == Form::polynomial_cdf) {
          c[i][j] = prod.integrate_unit();
        } else {
          if (!source.rational_moments()) return std::nullopt;
          c[i][j] = *exact_expectation(source, prod).exact;
        }
      } else {
        return std::nullopt;
      }
    }
  }
  return c;
}

ResidualDiagnostic residual_check(const Kernel& kernel, const SampleSource& source, const ProjectionModel& model,
                                  int probes, int max_n, std::uint64_t seed) {
  const int d = kernel.arity();
  ResidualDiagnostic out;
  if (!model.exact()) throw ConfigError("residual check needs an exact projection model");
  Rng rng = make_rng(seed, 0);

  const bool exact = source.finite() && model.mu_exact && kernel.integer_valued() &&
                     std::all_of(model.projections.begin(), model.projections.end(),
                                 [](const ProjectionFunction& f) { return f.exact_values.has_value(); });
  out.identity_exact = exact;

  auto fj = [&](int j, double x) { return model.projections[j](x); };
  auto fj_exact = [&](int j, double x) { return (*model.projections[j].exact_values)[static_cast<int>(x)]; };
  auto residual_kernel = [&](std::span<const double> xs) {
    double v = kernel(xs) - model.mu;
    for (int j = 0; j < d; ++j) v -= fj(j, xs[j]);
    return v;
  };

  double scale = 1.0;
  for (int p = 0; p < probes; ++p) {
    const int n = d + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, max_n - d + 1)));
    const auto xs = source.sample(rng, n);
    if (exact) {
      // Both sides in rational arithmetic.
      Rational lhs = Rational(static_cast<long long>(std::llround(u_oracle(kernel, xs)))) -
                     Rational(binomial(n, d)) * *model.mu_exact;
      for (int j = 0; j < d; ++j)
        for (int i = 1; i <= n; ++i) lhs -= Rational(hoeffding_weight(n, d, j + 1, i)) * fj_exact(j, xs[i - 1]);
      Rational rhs = 0;
      std::vector<double> tuple(d);
      std::vector<int> idx(d);
      for (int i = 0; i < d; ++i) idx[i] = i;
      while (true) {
        for (int j = 0; j < d; ++j) tuple[j] = xs[idx[j]];
        Rational v = Rational(static_cast<long long>(kernel(tuple))) - *model.mu_exact;
        for (int j = 0; j < d; ++j) v -= fj_exact(j, tuple[j]);
        rhs += v;
        int i = d - 1;
        while (i >= 0 && idx[i] == n - d + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < d; ++j) idx[j] = idx[j - 1] + 1;
      }
      out.max_identity_error = std::max(out.max_identity_error, std::abs(to_double(lhs - rhs)));
      if (lhs != rhs) out.max_identity_error = std::max(out.max_identity_error, 1e-300);
    } else {
      double lhs = u_oracle(kernel, xs) - static_cast<double>(binomial(n, d)) * model.mu;
      for (int j = 0; j < d; ++j)
        for (int i = 1; i <= n; ++i) lhs -= static_cast<double>(hoeffding_weight(n, d, j + 1, i)) * fj(j, xs[i - 1]);
      Kernel star("residual", KernelKind::custom, d, residual_kernel, KernelFlags{});
      const double rhs = u_oracle(star, xs);
      scale = std::max(scale, std::abs(lhs));
      out.max_identity_error = std::max(out.max_identity_error, std::abs(lhs - rhs));
    }
    ++out.prefixes_checked;
  }

  // Projections of the residual kernel must vanish.
  std::vector<double> tuple(d);
  if (source.finite()) {
    const auto& law = std::get<FiniteLaw>(source.law());
    const int A = law.alphabet.size();
    std::int64_t total = 1;
    for (int k = 0; k < d; ++k) total *= A;
    for (int i = 0; i < d; ++i) {
      for (int a = 0; a < A; ++a) {
        Rational acc = 0;
        double acc_d = 0;
        for (std::int64_t idx = 0; idx < total; ++idx) {
          std::int64_t rem = idx;
          for (int j = d - 1; j >= 0; --j) {
            tuple[j] = static_cast<double>(rem % A);
            rem /= A;
          }
          if (tuple[i] != a) continue;
          if (exact) {
            Rational w = 1;
            for (int k = 0; k < d; ++k)
              if (k != i) w *= law.probs[static_cast<int>(tuple[k])];
            Rational v = Rational(static_cast<long long>(kernel(tuple))) - *model.mu_exact;
            for (int j = 0; j < d; ++j) v -= fj_exact(j, tuple[j]);
            acc += w * v;
          } else {
            double w = 1;
            for (int k = 0; k < d; ++k)
              if (k != i) w *= to_double(law.probs[static_cast<int>(tuple[k])]);
            acc_d += w * residual_kernel(tuple);
          }
        }
        const double r = exact ? std::abs(to_double(acc)) : std::abs(acc_d);
        out.max_residual_projection = std::max(out.max_residual_projection, r);
      }
    }
    out.residual_projection_tolerance = exact ? 0.0 : 1e-12;
  } else {
    constexpr int kProbePoints = 8;
    constexpr int kInner = 20000;
    double worst_ratio = 0;
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < kProbePoints; ++k) {
        const double x = source.draw(rng);
        long double s1 = 0, s2 = 0;
        for (int b = 0; b < kInner; ++b) {
          for (int j = 0; j < d; ++j) tuple[j] = j == i ? x : source.draw(rng);
          const double v = residual_kernel(tuple);
          s1 += v;
          s2 += static_cast<long double>(v) * v;
        }
        const double mean = static_cast<double>(s1 / kInner);
        const double se = std::sqrt(std::max(0.0, static_cast<double>(s2 / kInner) - mean * mean) / kInner);
        out.max_residual_projection = std::max(out.max_residual_projection, std::abs(mean));
        const double tol = 5.0 * se + 1e-12;
        worst_ratio = std::max(worst_ratio, std::abs(mean) / tol);
        out.residual_projection_tolerance = std::max(out.residual_projection_tolerance, tol);
      }
    }
    out.passed = worst_ratio <= 1.0;
  }

  const double identity_tol = exact ? 0.0 : 1e-9 * scale;
  const bool identity_ok = out.max_identity_error <= identity_tol;
  if (source.finite())
    out.passed = identity_ok && out.max_residual_projection <= out.residual_projection_tolerance;
  else
    out.passed = out.passed && identity_ok;
  return out;
}

}  // namespace useq
