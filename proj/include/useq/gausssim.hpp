#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "useq/rng.hpp"

namespace useq {

/// Symmetric PSD square root through an eigendecomposition. Eigenvalues
/// down to -tol * max(1, |lambda_max|) are clipped to zero; anything more
/// negative throws ConfigError.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol = 1e-10);

/// 0, 1/steps, ..., T.
std::vector<double> uniform_grid(int steps, double horizon = 1.0);
/// 0, 1/(points-1), ..., 1.
std::vector<double> dyadic_grid(int points = 17);

/// Samples Z on a time grid through the driving processes W_j: Gaussian
/// increments with covariance dt * Sigma, then the endpoint term minus the
/// trapezoid integral of d/du psi_j(u, t) W_j(u).
class ZPathSampler {
 public:
  ZPathSampler(const Eigen::MatrixXd& sigma, std::vector<double> grid);
  std::vector<double> sample(Rng& rng) const;
  const std::vector<double>& grid() const { return grid_; }

 private:
  friend class JointPathSampler;
  int d_;
  Eigen::MatrixXd root_;
  std::vector<double> grid_;
};

/// Exact Gaussian vector (Z_{t_1}, ..., Z_{t_m}) from the covariance polynomial.
class ZGridSampler {
 public:
  ZGridSampler(const Eigen::MatrixXd& sigma, std::vector<double> times);
  std::vector<double> sample(Rng& rng) const;
  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }

 private:
  std::vector<double> times_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd root_;
};

/// Joint paths (Z, Ztilde) driven by common increments whose covariance is
/// the stacked matrix [[Sigma, cross^T], [cross, Sigma~]].
class JointPathSampler {
 public:
  JointPathSampler(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& sigma_tilde, const Eigen::MatrixXd& cross,
                   std::vector<double> grid);
  std::pair<std::vector<double>, std::vector<double>> sample(Rng& rng) const;
  const std::vector<double>& grid() const { return grid_; }

 private:
  int d_;
  int d_tilde_;
  Eigen::MatrixXd root_;
  std::vector<double> grid_;
};

std::vector<double> simulate_Z_path(const Eigen::MatrixXd& sigma, const std::vector<double>& grid, Rng& rng);
std::vector<double> simulate_Z_exact_grid(const Eigen::MatrixXd& sigma, const std::vector<double>& times, Rng& rng);
std::pair<std::vector<double>, std::vector<double>> simulate_joint_limit(const Eigen::MatrixXd& sigma,
                                                                         const Eigen::MatrixXd& sigma_tilde,
                                                                         const Eigen::MatrixXd& cross,
                                                                         const std::vector<double>& grid, Rng& rng);

}  // namespace useq
