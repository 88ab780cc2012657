#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "useq/rational.hpp"
#include "useq/sources.hpp"
#include "useq/ucore.hpp"

namespace useq {

/// psi_j(s,t) = s^(j-1) (t-s)^(d-j) / ((j-1)! (d-j)!).
double psi(int j, int d, double s, double t);

/// Weight of sigma_ij in Var Z_1.
Rational sigma2_weight(int i, int j, int d);
double sigma2(const Eigen::MatrixXd& sigma);
Rational sigma2(const RationalMatrix& sigma);
double sigma2(const ProjectionModel& model);

/// Cov(Z_s, Z_t) for s <= t as a homogeneous polynomial of degree 2d-1:
/// coeffs[k] multiplies s^k t^(2d-1-k).
struct CovPolynomial {
  int d = 0;
  std::vector<double> coeffs;
  std::optional<std::vector<Rational>> exact;

  /// Symmetric in (s, t).
  double operator()(double s, double t) const;
};

CovPolynomial cov_polynomial(const Eigen::MatrixXd& sigma);
CovPolynomial cov_polynomial(const RationalMatrix& sigma);
double cov_z(double s, double t, const Eigen::MatrixXd& sigma);

/// Outcome of a degeneracy check. Exact models give a plain verdict;
/// monte-carlo models only report "degenerate with confidence".
struct DegeneracyReport {
  bool exact = true;
  bool degenerate = false;
  double max_abs_projection = 0.0;
  /// Largest |f_i(x)| / standard error over the grid (monte-carlo).
  double max_z = 0.0;
  double tolerance = 0.0;
  std::string statement;
};

/// Exact verdict; throws ConfigError for monte-carlo projections.
bool degeneracy(const ProjectionModel& model);
/// Works for every method: exact models get |f_i| <= 1e-10 on the support,
/// monte-carlo models |f_i| <= 3 standard errors on the whole grid.
DegeneracyReport degeneracy_report(const ProjectionModel& model);

struct LimitLaw {
  int d = 0;
  double mu = 0.0;
  double sigma2 = 0.0;
  std::optional<Rational> sigma2_exact;
  CovPolynomial cov;
  bool degenerate = false;
  DegeneracyReport degeneracy;
};

LimitLaw make_limit_law(const ProjectionModel& model);

struct JointLimitLaw {
  int d = 0;
  int d_tilde = 0;
  double mu = 0.0;
  double mu_tilde = 0.0;
  Eigen::MatrixXd cross_cov;  // d_tilde x d, Cov(ftilde_i, f_j)
  double var_z = 0.0;
  double var_z_tilde = 0.0;
  double cov_z_tilde_z = 0.0;
  /// (d-1)! mu_tilde / ((d_tilde-1)! mu)
  double c = 0.0;
  double gamma2 = 0.0;
  std::optional<Rational> gamma2_exact;
  bool degenerate_pair = false;
};

/// Cov(Ztilde_1, Z_1) from the cross covariance (rows: ftilde, cols: f).
double cross_cov_z1(const Eigen::MatrixXd& cross);
Rational cross_cov_z1(const RationalMatrix& cross);

/// (d!/mu)^((2 dt - 1)/d) Var(Ztilde_1 - c Z_1). Throws ConfigError for mu <= 0.
double gamma2(int d, double mu, const Eigen::MatrixXd& sigma, int d_tilde, double mu_tilde,
              const Eigen::MatrixXd& sigma_tilde, const Eigen::MatrixXd& cross);

/// The d = 1 closed form in terms of Var f, Cov(f, ftilde_i) and Sigma~.
double gamma2_partial_sum(double mu, double var_f, double mu_tilde, const Eigen::MatrixXd& sigma_tilde,
                          const Eigen::VectorXd& cov_f_ftilde);

JointLimitLaw make_joint_limit_law(const ProjectionModel& f, const ProjectionModel& f_tilde,
                                   const SampleSource& source);

/// Pointwise check on the support that the companion projections are the
/// mixed combination of the f projections that forces gamma^2 = 0.
bool gamma_zero_condition(const ProjectionModel& f, const ProjectionModel& f_tilde, const SampleSource& source,
                          double tol = 1e-10);

enum class Theorem { clt, fclt, tnn, tr, tvtau0, tvtau, cvtau, trpe, trpv, tvpe, tvpv };

std::string to_string(Theorem t);
Theorem parse_theorem(std::string_view s);

struct RecipeParams {
  int d = 1;
  double mu = 0.0;
  double sigma2 = 0.0;
  int d_tilde = 1;
  double mu_tilde = 0.0;
  double gamma2 = 0.0;
  double t = 1.0;  // time for fclt
};

/// (statistic - center) / scale is the standardized statistic and `limit`
/// its predicted limit: 0 (with unit variance) for the distributional
/// recipes, the almost-sure limit for tnn/tvtau0, and 1 for the moment
/// recipes, where scale is the predicted mean (trpe, tvpe) or the predicted
/// variance (trpv, tvpv) and the statistic is the sample mean or variance.
struct Recipe {
  double center = 0.0;
  double scale = 1.0;
  double limit = 0.0;
};

/// `size` is n for clt/fclt and the threshold x otherwise.
Recipe centering_and_scaling(Theorem theorem, const RecipeParams& params, double size);

/// n(x) = (d!/mu)^(1/d) x^(1/d).
double renewal_scale(int d, double mu, double x);

}  // namespace useq
