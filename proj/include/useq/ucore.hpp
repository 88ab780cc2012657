#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "useq/kernels.hpp"
#include "useq/polynomial.hpp"
#include "useq/rational.hpp"
#include "useq/sources.hpp"

namespace useq {

// ---------------------------------------------------------------------------
// Evaluation of U_n = sum over i_1 < ... < i_d <= n of f(X_{i_1}, ..., X_{i_d})
// ---------------------------------------------------------------------------

/// Streaming state of U_n. Single owner; replications keep their own.
struct UProcessState {
  std::int64_t n = 0;
  double value = 0.0;
  /// Exact running value for integer-valued kernels.
  std::optional<std::int64_t> exact_value;
  /// U*_n = max over m <= n of |U_m|.
  double running_max_abs = 0.0;
  /// Separable engine: p_j = sum over i_1 < .. < i_j <= n of prod_{r <= j} g_r(x_{i_r}).
  std::vector<double> dp_row;
  std::vector<std::int64_t> dp_row_exact;
  /// Generic engine: retained prefix.
  std::vector<double> history;
  std::int64_t history_cap = 100'000;
};

UProcessState make_state(const Kernel& kernel, std::int64_t history_cap = 100'000);

/// Brute force over all C(n, d) increasing index tuples.
double u_oracle(const Kernel& kernel, std::span<const double> xs);

/// O(d) update p_j += p_{j-1} g_j(x), j = d..1. Throws ConfigError for
/// non-separable kernels.
void u_stream_separable(UProcessState& state, const Kernel& kernel, double x);

/// Adds the C(n-1, d-1) tuples ending at the new item. Throws BudgetExceeded
/// beyond the history cap.
void u_stream_generic(UProcessState& state, const Kernel& kernel, double x);

/// Streaming evaluator that picks the fastest exact engine for a kernel:
/// separable DP, an order-statistic tree for rank-based pair kernels, or the
/// generic engine.
class UStream {
 public:
  enum class Engine { separable, rank_pair, generic };

  explicit UStream(const Kernel& kernel, std::int64_t history_cap = 100'000);
  UStream(const Kernel& kernel, Engine engine, std::int64_t history_cap = 100'000);
  UStream(UStream&&) noexcept;
  UStream& operator=(UStream&&) noexcept;
  ~UStream();

  void push(double x);
  double value() const { return state_.value; }
  std::int64_t n() const { return state_.n; }
  double max_abs() const { return state_.running_max_abs; }
  const UProcessState& state() const { return state_; }
  Engine engine() const { return engine_; }
  const Kernel& kernel() const { return *kernel_; }

  static Engine preferred_engine(const Kernel& kernel);

 private:
  struct RankTree;
  const Kernel* kernel_;
  Engine engine_;
  UProcessState state_;
  std::unique_ptr<RankTree> tree_;
  double less_weight_ = 0.0;     // f(earlier < new)
  double greater_weight_ = 0.0;  // f(earlier > new)
};

/// a_{n,j}(i) = C(i-1, j-1) C(n-i, d-j), the number of d-tuples over [n]
/// with index i in slot j.
std::int64_t hoeffding_weight(std::int64_t n, int d, int j, std::int64_t i);

// ---------------------------------------------------------------------------
// Projections mu, f_i and Sigma
// ---------------------------------------------------------------------------

enum class ProjectionMethod { exact, order, monte_carlo };

std::string to_string(ProjectionMethod m);
ProjectionMethod parse_projection_method(std::string_view s);

/// One projection f_i, represented as a table over support points or as a
/// polynomial in x (or in the uniform cdf u = F(x) for rank-based kernels).
struct ProjectionFunction {
  enum class Form { table, polynomial_x, polynomial_cdf };
  Form form = Form::table;

  // table form
  std::vector<double> points;
  std::vector<double> weights;  // probability (or quadrature) weight per point
  std::vector<double> values;
  std::vector<double> std_errors;  // monte-carlo only
  std::optional<std::vector<Rational>> exact_values;

  // polynomial forms
  Polynomial<double> poly;
  std::optional<Polynomial<Rational>> exact_poly;
  double cdf_scale = 1.0;

  double operator()(double x) const;
};

struct ProjectionModel {
  int d = 0;
  ProjectionMethod method = ProjectionMethod::exact;
  std::string detail;  // "enumerated", "separable-moments", "order-enumeration", "monte-carlo"
  std::string kernel_spec;
  std::string source_spec;

  double mu = 0.0;
  std::optional<Rational> mu_exact;
  double mu_std_error = 0.0;

  std::vector<ProjectionFunction> projections;
  Eigen::MatrixXd sigma;
  std::optional<RationalMatrix> sigma_exact;
  /// Componentwise standard errors of sigma (monte-carlo).
  Eigen::MatrixXd sigma_std_error;
  double error_bound = 0.0;

  bool exact() const { return method != ProjectionMethod::monte_carlo; }
};

struct ProjectionOptions {
  /// Enumeration cap (|A|^d or (2d-1)!) for exact methods; total inner
  /// sample count (split over the grid) for monte-carlo.
  std::int64_t budget = 1'000'000;
  std::uint64_t seed = 0x5eed;
  int grid_points = 256;
};

ProjectionModel hoeffding_projections(const Kernel& kernel, const SampleSource& source, ProjectionMethod method,
                                      const ProjectionOptions& options = {});

/// Exact when possible (finite enumeration, separable polynomial moments,
/// order enumeration), otherwise monte-carlo.
ProjectionModel auto_projections(const Kernel& kernel, const SampleSource& source,
                                 const ProjectionOptions& options = {});

/// Sigma recomputed as integral over [0,1] of f_i(u) f_j(u) du from the
/// polynomial projections of an order-enumerated model.
std::optional<RationalMatrix> sigma_by_integration(const ProjectionModel& model);

/// Cov(b_i(X), a_j(X)) for two projection models of the same source:
/// rows follow `b`, columns follow `a`.
Eigen::MatrixXd cross_covariance(const ProjectionModel& b, const ProjectionModel& a, const SampleSource& source);
std::optional<RationalMatrix> cross_covariance_exact(const ProjectionModel& b, const ProjectionModel& a,
                                                     const SampleSource& source);

/// Rejects pairings the engines cannot honour (rank-based on discrete
/// sources, alphabet mismatches, block counts off positive integers).
void validate_pairing(const Kernel& kernel, const SampleSource& source);

/// f(X) >= 0 almost surely under the source.
bool nonnegative_on(const Kernel& kernel, const SampleSource& source);
/// f(X) integer-valued almost surely under the source.
bool integer_valued_on(const Kernel& kernel, const SampleSource& source);

struct ResidualDiagnostic {
  int prefixes_checked = 0;
  /// max |U_n(f) - C(n,d) mu - sum_j sum_i a_{n,j}(i) f_j(X_i) - U_n(f*)|
  double max_identity_error = 0.0;
  bool identity_exact = false;  // checked in rational arithmetic
  /// max |(f*)_i(x)| over probe points, with its tolerance.
  double max_residual_projection = 0.0;
  double residual_projection_tolerance = 0.0;
  bool passed = false;
};

ResidualDiagnostic residual_check(const Kernel& kernel, const SampleSource& source, const ProjectionModel& model,
                                  int probes = 20, int max_n = 12, std::uint64_t seed = 1);

}  // namespace useq
