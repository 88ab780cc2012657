#include "useq/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "useq/errors.hpp"

namespace useq {

void MomentAccumulator::add(double x) {
  MomentAccumulator one;
  one.n_ = 1;
  one.mean_ = x;
  merge(one);
}

void MomentAccumulator::merge(const MomentAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double delta = o.mean_ - mean_;
  const double d2 = delta * delta, d3 = d2 * delta, d4 = d2 * d2;
  const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
  const double m3 = m3_ + o.m3_ + d3 * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * o.m2_ - nb * m2_) / n;
  const double m4 = m4_ + o.m4_ + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                    6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) + 4.0 * delta * (na * o.m3_ - nb * m3_) / n;
  mean_ += delta * nb / n;
  m2_ = m2;
  m3_ = m3;
  m4_ = m4;
  n_ += o.n_;
}

double MomentAccumulator::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

double MomentAccumulator::central_moment(int k) const {
  if (n_ == 0) return 0.0;
  const double n = static_cast<double>(n_);
  switch (k) {
    case 1:
      return 0.0;
    case 2:
      return m2_ / n;
    case 3:
      return m3_ / n;
    case 4:
      return m4_ / n;
  }
  throw ConfigError("central moments are kept up to order 4");
}

double MomentAccumulator::raw_moment(int k) const {
  const double m = mean_, c2 = central_moment(2), c3 = central_moment(3), c4 = central_moment(4);
  switch (k) {
    case 1:
      return m;
    case 2:
      return c2 + m * m;
    case 3:
      return c3 + 3 * m * c2 + m * m * m;
    case 4:
      return c4 + 4 * m * c3 + 6 * m * m * c2 + m * m * m * m;
  }
  throw ConfigError("raw moments are kept up to order 4");
}

double MomentAccumulator::skewness() const {
  const double c2 = central_moment(2);
  return c2 > 0 ? central_moment(3) / std::pow(c2, 1.5) : 0.0;
}

double MomentAccumulator::excess_kurtosis() const {
  const double c2 = central_moment(2);
  return c2 > 0 ? central_moment(4) / (c2 * c2) - 3.0 : 0.0;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_critical(double level) {
  if (!(level > 0 && level < 1)) throw ConfigError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2);
}

double ks_distance_normal(std::vector<double> xs) {
  if (xs.empty()) return 1.0;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double mean_half_width(const MomentAccumulator& acc, double level) {
  if (acc.count() < 2) return INFINITY;
  return normal_critical(level) * std::sqrt(acc.variance() / acc.count());
}

double variance_half_width(const MomentAccumulator& acc, double level) {
  if (acc.count() < 4) return INFINITY;
  const double n = static_cast<double>(acc.count());
  const double s2 = acc.central_moment(2);
  const double v = std::max(0.0, acc.central_moment(4) - s2 * s2 * (n - 3) / (n - 1)) / n;
  return normal_critical(level) * std::sqrt(v);
}

CovarianceEstimate covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("covariance needs two equal series of length >= 2");
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  MomentAccumulator prod;
  for (std::size_t i = 0; i < n; ++i) prod.add((a[i] - ma) * (b[i] - mb));
  return {prod.mean() * n / (n - 1), std::sqrt(prod.variance() / n)};
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  const auto c = covariance(a, b);
  const double va = covariance(a, a).value, vb = covariance(b, b).value;
  if (va <= 0 || vb <= 0) return NAN;
  return c.value / std::sqrt(va * vb);
}

double chi_square_pvalue(double stat, double dof) {
  if (!(dof > 0)) throw ConfigError("chi-square needs positive degrees of freedom");
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), std::max(0.0, stat)));
}

double total_variation(const std::map<double, double>& empirical, const std::map<double, double>& reference) {
  std::map<double, double> diff;
  for (const auto& [k, p] : empirical) diff[k] += p;
  for (const auto& [k, p] : reference) diff[k] -= p;
  double s = 0;
  for (const auto& [k, v] : diff) s += std::abs(v);
  return 0.5 * s;
}

}  // namespace useq
