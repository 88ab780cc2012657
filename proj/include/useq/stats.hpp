#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace useq {

/// Streaming central moments up to order 4 with pairwise merging, so any
/// sharding of a sample merges to the same aggregate up to rounding.
class MomentAccumulator {
 public:
  void add(double x);
  void merge(const MomentAccumulator& other);

  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance.
  double variance() const;
  /// Central moment of order k (2..4), normalised by n.
  double central_moment(int k) const;
  /// E x^k about zero, k = 1..4.
  double raw_moment(int k) const;
  double skewness() const;
  double excess_kurtosis() const;

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

double normal_cdf(double x);
/// Two-sided standard normal critical value for confidence `level`.
double normal_critical(double level);

/// sup |F_n - Phi|.
double ks_distance_normal(std::vector<double> xs);

/// Half-width of the confidence interval for the mean.
double mean_half_width(const MomentAccumulator& acc, double level);
/// Half-width of the confidence interval for the variance (delta method
/// with the fourth central moment).
double variance_half_width(const MomentAccumulator& acc, double level);

/// Standard error of the sample covariance of two zero-free series.
struct CovarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
CovarianceEstimate covariance(std::span<const double> a, std::span<const double> b);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

/// Upper tail P(chi^2_dof > stat).
double chi_square_pvalue(double stat, double dof);

/// 1/2 sum |p_emp - p_ref| over the union of supports.
double total_variation(const std::map<double, double>& empirical, const std::map<double, double>& reference);

}  // namespace useq
