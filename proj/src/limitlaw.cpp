#include "useq/limitlaw.hpp"

#include <algorithm>
#include <cmath>

#include "useq/errors.hpp"

namespace useq {

namespace {

double fact(int n) { return to_double(factorial(n)); }

void check_pos_mu(double mu) {
  if (!(mu > 0.0)) throw ConfigError("renewal limits need mu > 0, got mu = " + std::to_string(mu));
}

// Coefficient of s^k t^(2d-1-k) in the integral of psi_i(u,s) psi_j(u,t) over [0, s].
std::vector<Rational> cov_template(int i, int j, int d) {
  std::vector<Rational> out(2 * d, Rational(0));
  const int a = i + j - 2, b = d - i, c = d - j;
  const Rational pre = Rational(1) / (factorial(i - 1) * factorial(j - 1) * factorial(d - i) * factorial(d - j));
  for (int k = 0; k <= c; ++k) {
    Rational term = pre * Rational(binomial(c, k)) * factorial(a + k) * factorial(b) / factorial(a + k + b + 1);
    if (k % 2) term = -term;
    out[d + j - 1 + k] += term;
  }
  return out;
}

Rational cross_weight(int i, int j, int dt, int d) {
  return factorial(i + j - 2) * factorial(dt + d - i - j) /
         (factorial(i - 1) * factorial(dt - i) * factorial(j - 1) * factorial(d - j) * factorial(dt + d - 1));
}

std::vector<double> probe_points(const SampleSource& source) {
  std::vector<double> pts;
  if (source.continuous()) {
    constexpr int k = 257;
    for (int i = 0; i < k; ++i) pts.push_back(source.quantile((i + 0.5) / k));
  } else {
    for (const auto& a : source.atoms(source.finite() ? 0.0 : 1e-12)) {
      pts.push_back(a.value);
      if (pts.size() >= 200) break;
    }
  }
  return pts;
}

}  // namespace

double psi(int j, int d, double s, double t) {
  if (d < 1 || j < 1 || j > d) throw ConfigError("psi: need 1 <= j <= d");
  return std::pow(s, j - 1) * std::pow(t - s, d - j) / (fact(j - 1) * fact(d - j));
}

Rational sigma2_weight(int i, int j, int d) {
  return factorial(i + j - 2) * factorial(2 * d - i - j) /
         (factorial(i - 1) * factorial(j - 1) * factorial(d - i) * factorial(d - j) * factorial(2 * d - 1));
}

double sigma2(const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  double s = 0;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) s += to_double(sigma2_weight(i, j, d)) * sigma(i - 1, j - 1);
  return s;
}

Rational sigma2(const RationalMatrix& sigma) {
  const int d = static_cast<int>(sigma.size());
  Rational s = 0;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) s += sigma2_weight(i, j, d) * sigma[i - 1][j - 1];
  return s;
}

double sigma2(const ProjectionModel& model) {
  if (model.sigma_exact) return to_double(sigma2(*model.sigma_exact));
  return sigma2(model.sigma);
}

double CovPolynomial::operator()(double s, double t) const {
  if (s > t) std::swap(s, t);
  double acc = 0;
  for (std::size_t k = 0; k < coeffs.size(); ++k)
    if (coeffs[k] != 0.0) acc += coeffs[k] * std::pow(s, static_cast<double>(k)) * std::pow(t, 2.0 * d - 1 - k);
  return acc;
}

CovPolynomial cov_polynomial(const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  CovPolynomial p;
  p.d = d;
  p.coeffs.assign(2 * d, 0.0);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) {
      const auto tmpl = cov_template(i, j, d);
      for (int k = 0; k < 2 * d; ++k) p.coeffs[k] += to_double(tmpl[k]) * sigma(i - 1, j - 1);
    }
  return p;
}

CovPolynomial cov_polynomial(const RationalMatrix& sigma) {
  const int d = static_cast<int>(sigma.size());
  std::vector<Rational> ex(2 * d, Rational(0));
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) {
      const auto tmpl = cov_template(i, j, d);
      for (int k = 0; k < 2 * d; ++k) ex[k] += tmpl[k] * sigma[i - 1][j - 1];
    }
  CovPolynomial p;
  p.d = d;
  for (const auto& c : ex) p.coeffs.push_back(to_double(c));
  p.exact = std::move(ex);
  return p;
}

double cov_z(double s, double t, const Eigen::MatrixXd& sigma) { return cov_polynomial(sigma)(s, t); }

DegeneracyReport degeneracy_report(const ProjectionModel& model) {
  DegeneracyReport r;
  r.exact = model.exact();
  if (r.exact) {
    r.tolerance = 1e-10;
    bool exactly_zero = true;
    for (const auto& f : model.projections) {
      if (f.form == ProjectionFunction::Form::table) {
        for (double v : f.values) r.max_abs_projection = std::max(r.max_abs_projection, std::abs(v));
        if (f.exact_values)
          exactly_zero = exactly_zero && std::all_of(f.exact_values->begin(), f.exact_values->end(),
                                                     [](const Rational& q) { return q == 0; });
        else
          exactly_zero = false;
      } else {
        r.max_abs_projection = std::max(r.max_abs_projection, max_abs_coeff(f.poly));
        exactly_zero = exactly_zero && f.exact_poly && f.exact_poly->is_zero();
      }
    }
    r.degenerate = r.max_abs_projection <= r.tolerance;
    r.statement = r.degenerate ? (exactly_zero ? "degenerate (exact)" : "degenerate") : "nondegenerate";
    return r;
  }
  r.tolerance = 3.0;
  for (const auto& f : model.projections)
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      r.max_abs_projection = std::max(r.max_abs_projection, std::abs(f.values[k]));
      const double se = f.std_errors[k];
      const double z = se > 0 ? std::abs(f.values[k]) / se : (f.values[k] == 0.0 ? 0.0 : INFINITY);
      r.max_z = std::max(r.max_z, z);
    }
  r.degenerate = r.max_z <= r.tolerance;
  r.statement = r.degenerate ? "degenerate with confidence (every |f_i| within 3 standard errors)"
                             : "nondegenerate (some |f_i| beyond 3 standard errors)";
  return r;
}

bool degeneracy(const ProjectionModel& model) {
  if (!model.exact())
    throw ConfigError("exact degeneracy verdict needs exact projections; use degeneracy_report for monte-carlo");
  return degeneracy_report(model).degenerate;
}

LimitLaw make_limit_law(const ProjectionModel& model) {
  LimitLaw law;
  law.d = model.d;
  law.mu = model.mu;
  if (model.sigma_exact) {
    law.sigma2_exact = sigma2(*model.sigma_exact);
    law.sigma2 = to_double(*law.sigma2_exact);
    law.cov = cov_polynomial(*model.sigma_exact);
  } else {
    law.sigma2 = std::max(0.0, sigma2(model.sigma));
    law.cov = cov_polynomial(model.sigma);
  }
  law.degeneracy = degeneracy_report(model);
  law.degenerate = law.degeneracy.degenerate;
  return law;
}

double cross_cov_z1(const Eigen::MatrixXd& cross) {
  const int dt = static_cast<int>(cross.rows()), d = static_cast<int>(cross.cols());
  double s = 0;
  for (int i = 1; i <= dt; ++i)
    for (int j = 1; j <= d; ++j) s += to_double(cross_weight(i, j, dt, d)) * cross(i - 1, j - 1);
  return s;
}

Rational cross_cov_z1(const RationalMatrix& cross) {
  const int dt = static_cast<int>(cross.size()), d = static_cast<int>(cross.front().size());
  Rational s = 0;
  for (int i = 1; i <= dt; ++i)
    for (int j = 1; j <= d; ++j) s += cross_weight(i, j, dt, d) * cross[i - 1][j - 1];
  return s;
}

double gamma2(int d, double mu, const Eigen::MatrixXd& sigma, int d_tilde, double mu_tilde,
              const Eigen::MatrixXd& sigma_tilde, const Eigen::MatrixXd& cross) {
  check_pos_mu(mu);
  const double c = fact(d - 1) * mu_tilde / (fact(d_tilde - 1) * mu);
  const double vz = sigma2(sigma), vzt = sigma2(sigma_tilde), cv = cross_cov_z1(cross);
  double var = vzt - 2.0 * c * cv + c * c * vz;
  const double scale = std::max({std::abs(vzt), std::abs(c * cv), std::abs(c * c * vz), 1e-300});
  if (var < 0 && var > -1e-10 * scale) var = 0;
  return std::pow(fact(d) / mu, (2.0 * d_tilde - 1.0) / d) * var;
}

double gamma2_partial_sum(double mu, double var_f, double mu_tilde, const Eigen::MatrixXd& sigma_tilde,
                          const Eigen::VectorXd& cov_f_ftilde) {
  check_pos_mu(mu);
  const int dt = static_cast<int>(sigma_tilde.rows());
  const double first = std::pow(mu, 1.0 - 2 * dt) * sigma2(sigma_tilde);
  const double second = 2.0 * std::pow(mu, -2.0 * dt) * mu_tilde / (fact(dt - 1) * fact(dt)) * cov_f_ftilde.sum();
  const double third = std::pow(mu, -2.0 * dt - 1) * mu_tilde * mu_tilde / (fact(dt - 1) * fact(dt - 1)) * var_f;
  return first - second + third;
}

JointLimitLaw make_joint_limit_law(const ProjectionModel& f, const ProjectionModel& f_tilde,
                                   const SampleSource& source) {
  check_pos_mu(f.mu);
  JointLimitLaw j;
  j.d = f.d;
  j.d_tilde = f_tilde.d;
  j.mu = f.mu;
  j.mu_tilde = f_tilde.mu;
  j.cross_cov = cross_covariance(f_tilde, f, source);
  j.var_z = sigma2(f);
  j.var_z_tilde = sigma2(f_tilde);
  j.cov_z_tilde_z = cross_cov_z1(j.cross_cov);
  j.c = fact(j.d - 1) * j.mu_tilde / (fact(j.d_tilde - 1) * j.mu);

  const auto cross_exact = cross_covariance_exact(f_tilde, f, source);
  if (j.d == 1 && f.mu_exact && f_tilde.mu_exact && f.sigma_exact && f_tilde.sigma_exact && cross_exact) {
    const Rational& mu = *f.mu_exact;
    const Rational c = *f_tilde.mu_exact / (factorial(j.d_tilde - 1) * mu);
    const Rational var = sigma2(*f_tilde.sigma_exact) - 2 * c * cross_cov_z1(*cross_exact) + c * c * sigma2(*f.sigma_exact);
    Rational scale = 1;
    for (int k = 0; k < 2 * j.d_tilde - 1; ++k) scale /= mu;
    j.gamma2_exact = scale * var;
    j.gamma2 = to_double(*j.gamma2_exact);
  } else {
    j.gamma2 = gamma2(j.d, j.mu, f.sigma, j.d_tilde, j.mu_tilde, f_tilde.sigma, j.cross_cov);
  }
  if (f.exact() && f_tilde.exact())
    j.degenerate_pair = gamma_zero_condition(f, f_tilde, source);
  else
    j.degenerate_pair = j.gamma2 <= 1e-12;
  return j;
}

bool gamma_zero_condition(const ProjectionModel& f, const ProjectionModel& f_tilde, const SampleSource& source,
                          double tol) {
  if (!f.exact() || !f_tilde.exact())
    throw ConfigError("the vanishing condition for gamma^2 needs exact projections");
  const auto pts = probe_points(source);
  const int d = f.d, dt = f_tilde.d;

  double scale = 1.0;
  for (double x : pts) {
    for (const auto& p : f.projections) scale = std::max(scale, std::abs(p(x)));
    for (const auto& p : f_tilde.projections) scale = std::max(scale, std::abs(p(x)));
  }
  const double eps = tol * scale;

  // (big, small) roles: the side with the larger arity is expressed through the other.
  const bool tilde_big = dt >= d;
  const ProjectionModel& big = tilde_big ? f_tilde : f;
  const ProjectionModel& small = tilde_big ? f : f_tilde;
  const int D = big.d, m = small.d;
  if (std::abs(small.mu) <= 1e-300) {
    // mu of the small side vanishes: gamma^2 = 0 forces the companion projections to vanish.
    if (tilde_big) return false;
    for (double x : pts)
      for (const auto& p : f_tilde.projections)
        if (std::abs(p(x)) > eps) return false;
    return true;
  }
  const double ratio = big.mu / small.mu;
  for (int i = 1; i <= D; ++i) {
    for (double x : pts) {
      double rhs = 0;
      for (int jj = 1; jj <= m; ++jj) {
        const std::int64_t w = binomial(m - 1, jj - 1) * binomial(D - m, i - jj);
        if (w == 0) continue;
        rhs += static_cast<double>(w) / static_cast<double>(binomial(D - 1, i - 1)) * small.projections[jj - 1](x);
      }
      if (std::abs(big.projections[i - 1](x) - ratio * rhs) > eps) return false;
    }
  }
  return true;
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::clt: return "clt";
    case Theorem::fclt: return "fclt";
    case Theorem::tnn: return "tnn";
    case Theorem::tr: return "tr";
    case Theorem::tvtau0: return "tvtau0";
    case Theorem::tvtau: return "tvtau";
    case Theorem::cvtau: return "cvtau";
    case Theorem::trpe: return "trpe";
    case Theorem::trpv: return "trpv";
    case Theorem::tvpe: return "tvpe";
    case Theorem::tvpv: return "tvpv";
  }
  return "?";
}

Theorem parse_theorem(std::string_view s) {
  for (Theorem t : {Theorem::clt, Theorem::fclt, Theorem::tnn, Theorem::tr, Theorem::tvtau0, Theorem::tvtau,
                    Theorem::cvtau, Theorem::trpe, Theorem::trpv, Theorem::tvpe, Theorem::tvpv})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown theorem id '" + std::string(s) + "'");
}

double renewal_scale(int d, double mu, double x) {
  check_pos_mu(mu);
  return std::pow(fact(d) / mu * x, 1.0 / d);
}

Recipe centering_and_scaling(Theorem theorem, const RecipeParams& p, double size) {
  const int d = p.d, dt = p.d_tilde;
  const double x = size, n = size;
  Recipe r;
  switch (theorem) {
    case Theorem::clt:
      r.center = static_cast<double>(binomial(static_cast<std::int64_t>(n), d)) * p.mu;
      r.scale = std::pow(n, d - 0.5) * std::sqrt(p.sigma2);
      return r;
    case Theorem::fclt:
      r.center = std::pow(n * p.t, d) * p.mu / fact(d);
      r.scale = std::pow(n, d - 0.5);
      return r;
    default:
      break;
  }
  check_pos_mu(p.mu);
  const double ratio = fact(d) / p.mu;
  const double tr_var = std::pow(ratio, 2.0 + 1.0 / d) * p.sigma2 / (d * d);
  const double stopped_mean = std::pow(ratio, static_cast<double>(dt) / d) * p.mu_tilde / fact(dt) *
                              std::pow(x, static_cast<double>(dt) / d);
  switch (theorem) {
    case Theorem::tnn:
      r.center = 0;
      r.scale = std::pow(x, 1.0 / d);
      r.limit = std::pow(ratio, 1.0 / d);
      break;
    case Theorem::tr:
      r.center = renewal_scale(d, p.mu, x);
      r.scale = std::pow(x, 1.0 / (2 * d)) * std::sqrt(tr_var);
      break;
    case Theorem::tvtau0:
      r.center = 0;
      r.scale = std::pow(x, static_cast<double>(dt) / d);
      r.limit = stopped_mean / r.scale;
      break;
    case Theorem::tvtau:
      r.center = stopped_mean;
      r.scale = std::pow(x, static_cast<double>(dt) / d - 1.0 / (2 * d)) * std::sqrt(p.gamma2);
      break;
    case Theorem::cvtau:
      if (d != 1) throw ConfigError("cvtau recipe needs d = 1");
      r.center = std::pow(p.mu, -dt) * p.mu_tilde / fact(dt) * std::pow(x, dt);
      r.scale = std::pow(x, dt - 0.5) * std::sqrt(p.gamma2);
      break;
    case Theorem::trpe:
      r.center = 0;
      r.scale = renewal_scale(d, p.mu, x);
      r.limit = 1;
      break;
    case Theorem::trpv:
      r.center = 0;
      r.scale = tr_var * std::pow(x, 1.0 / d);
      r.limit = 1;
      break;
    case Theorem::tvpe:
      r.center = 0;
      r.scale = stopped_mean;
      r.limit = 1;
      break;
    case Theorem::tvpv:
      r.center = 0;
      r.scale = p.gamma2 * std::pow(x, (2.0 * dt - 1.0) / d);
      r.limit = 1;
      break;
    default:
      break;
  }
  return r;
}

}  // namespace useq
