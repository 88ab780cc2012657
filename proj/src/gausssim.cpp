#include "useq/gausssim.hpp"

#include <cmath>
#include <random>

#include "useq/errors.hpp"
#include "useq/limitlaw.hpp"
#include "useq/rational.hpp"

namespace useq {

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty() || grid.front() != 0.0) throw ConfigError("time grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw ConfigError("time grid must be strictly increasing");
}

void check_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) throw ConfigError(std::string(what) + " must be a nonempty square matrix");
}

// Terms of -d/du psi_j(u, t) as sum_k coef * t^tpow * u^upow, plus the endpoint weight.
struct PsiTerm {
  int j;
  int upow;
  int tpow;
  double coef;
};

std::vector<PsiTerm> derivative_terms(int d) {
  std::vector<PsiTerm> out;
  for (int j = 1; j <= d; ++j) {
    const double pre = 1.0 / to_double(factorial(j - 1) * factorial(d - j));
    for (int k = 0; k <= d - j; ++k) {
      const int p = j - 1 + k;  // power of u in psi_j
      if (p == 0) continue;
      double c = pre * static_cast<double>(binomial(d - j, k)) * p;
      if (k % 2) c = -c;
      out.push_back({j, p - 1, d - j - k, c});
    }
  }
  return out;
}

// Evaluates Z along the grid for one block of driving processes W (columns offset..offset+d-1).
void integrate_block(int d, int offset, const std::vector<double>& grid, const Eigen::MatrixXd& w,
                     std::vector<double>& out) {
  const auto terms = derivative_terms(d);
  const int m = static_cast<int>(grid.size());
  // integrals[j][p] of u^p W_j(u) du
  std::vector<std::vector<double>> integral(d, std::vector<double>(std::max(d - 1, 1), 0.0));
  const double end_weight = 1.0 / to_double(factorial(d - 1));
  out.assign(m, 0.0);
  for (int k = 1; k < m; ++k) {
    const double t0 = grid[k - 1], t1 = grid[k], dt = t1 - t0;
    for (int j = 0; j < d; ++j) {
      double p0 = 1.0, p1 = 1.0;
      for (int p = 0; p < d - 1; ++p) {
        integral[j][p] += 0.5 * dt * (p0 * w(k - 1, offset + j) + p1 * w(k, offset + j));
        p0 *= t0;
        p1 *= t1;
      }
    }
    double z = end_weight * std::pow(t1, d - 1) * w(k, offset + d - 1);
    for (const auto& term : terms) z -= term.coef * std::pow(t1, term.tpow) * integral[term.j - 1][term.upow];
    out[k] = z;
  }
}

Eigen::MatrixXd brownian(const Eigen::MatrixXd& root, const std::vector<double>& grid, Rng& rng) {
  const int D = static_cast<int>(root.rows());
  const int m = static_cast<int>(grid.size());
  std::normal_distribution<double> normal;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, D);
  Eigen::VectorXd xi(D);
  for (int k = 1; k < m; ++k) {
    for (int a = 0; a < D; ++a) xi(a) = normal(rng);
    w.row(k) = w.row(k - 1) + std::sqrt(grid[k] - grid[k - 1]) * (root * xi).transpose();
  }
  return w;
}

}  // namespace

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol) {
  check_square(m, "covariance");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw ConfigError("eigendecomposition failed");
  Eigen::VectorXd lambda = es.eigenvalues();
  const double top = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -tol * top)
      throw ConfigError("covariance matrix is not positive semidefinite (eigenvalue " + std::to_string(lambda(i)) +
                        ")");
    lambda(i) = std::sqrt(std::max(0.0, lambda(i)));
  }
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> uniform_grid(int steps, double horizon) {
  if (steps < 1 || !(horizon > 0)) throw ConfigError("grid needs steps >= 1 and a positive horizon");
  std::vector<double> g(steps + 1);
  for (int k = 0; k <= steps; ++k) g[k] = horizon * k / steps;
  return g;
}

std::vector<double> dyadic_grid(int points) {
  if (points < 2) throw ConfigError("dyadic grid needs at least two points");
  return uniform_grid(points - 1, 1.0);
}

ZPathSampler::ZPathSampler(const Eigen::MatrixXd& sigma, std::vector<double> grid)
    : d_(static_cast<int>(sigma.rows())), root_(psd_sqrt(sigma)), grid_(std::move(grid)) {
  check_grid(grid_);
}

std::vector<double> ZPathSampler::sample(Rng& rng) const {
  const Eigen::MatrixXd w = brownian(root_, grid_, rng);
  std::vector<double> z;
  integrate_block(d_, 0, grid_, w, z);
  return z;
}

ZGridSampler::ZGridSampler(const Eigen::MatrixXd& sigma, std::vector<double> times) : times_(std::move(times)) {
  check_square(sigma, "Sigma");
  if (times_.empty() || times_.size() > 512) throw ConfigError("exact-grid sampler takes 1..512 time points");
  for (double t : times_)
    if (t < 0) throw ConfigError("negative time point");
  const auto poly = cov_polynomial(sigma);
  const int m = static_cast<int>(times_.size());
  cov_.resize(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) cov_(a, b) = poly(times_[a], times_[b]);
  root_ = psd_sqrt(cov_, 1e-9);
}

std::vector<double> ZGridSampler::sample(Rng& rng) const {
  const int m = static_cast<int>(times_.size());
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(m);
  for (int a = 0; a < m; ++a) xi(a) = normal(rng);
  const Eigen::VectorXd z = root_ * xi;
  std::vector<double> out(m);
  for (int a = 0; a < m; ++a) out[a] = times_[a] == 0.0 ? 0.0 : z(a);
  return out;
}

JointPathSampler::JointPathSampler(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& sigma_tilde,
                                   const Eigen::MatrixXd& cross, std::vector<double> grid)
    : d_(static_cast<int>(sigma.rows())), d_tilde_(static_cast<int>(sigma_tilde.rows())), grid_(std::move(grid)) {
  check_square(sigma, "Sigma");
  check_square(sigma_tilde, "Sigma~");
  if (cross.rows() != d_tilde_ || cross.cols() != d_) throw ConfigError("cross covariance must be d~ x d");
  check_grid(grid_);
  Eigen::MatrixXd stacked(d_ + d_tilde_, d_ + d_tilde_);
  stacked.topLeftCorner(d_, d_) = sigma;
  stacked.bottomRightCorner(d_tilde_, d_tilde_) = sigma_tilde;
  stacked.bottomLeftCorner(d_tilde_, d_) = cross;
  stacked.topRightCorner(d_, d_tilde_) = cross.transpose();
  root_ = psd_sqrt(stacked);
}

std::pair<std::vector<double>, std::vector<double>> JointPathSampler::sample(Rng& rng) const {
  const Eigen::MatrixXd w = brownian(root_, grid_, rng);
  std::pair<std::vector<double>, std::vector<double>> out;
  integrate_block(d_, 0, grid_, w, out.first);
  integrate_block(d_tilde_, d_, grid_, w, out.second);
  return out;
}

std::vector<double> simulate_Z_path(const Eigen::MatrixXd& sigma, const std::vector<double>& grid, Rng& rng) {
  return ZPathSampler(sigma, grid).sample(rng);
}

std::vector<double> simulate_Z_exact_grid(const Eigen::MatrixXd& sigma, const std::vector<double>& times, Rng& rng) {
  return ZGridSampler(sigma, times).sample(rng);
}

std::pair<std::vector<double>, std::vector<double>> simulate_joint_limit(const Eigen::MatrixXd& sigma,
                                                                         const Eigen::MatrixXd& sigma_tilde,
                                                                         const Eigen::MatrixXd& cross,
                                                                         const std::vector<double>& grid, Rng& rng) {
  return JointPathSampler(sigma, sigma_tilde, cross, grid).sample(rng);
}

}  // namespace useq
