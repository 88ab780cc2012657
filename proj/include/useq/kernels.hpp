#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "useq/alphabet.hpp"
#include "useq/polynomial.hpp"
#include "useq/rational.hpp"

namespace useq {

enum class KernelKind { pattern, perm_pattern, blocks, antisym_sine, antisym_sign, identity, const1, custom };

/// One factor g_j of a separable kernel f = g_1(x_1) * ... * g_d(x_d).
struct Factor {
  std::function<double(double)> eval;
  /// Exact polynomial form in the sample value, when one exists.
  std::optional<Polynomial<Rational>> poly;
};

struct KernelFlags {
  bool rank_based = false;
  bool nonnegative = false;
  bool integer_valued = false;
  /// Kernel values are the sample values themselves (identity); sign and
  /// integrality then follow the source.
  bool inherits_support = false;
  std::optional<double> span_hint;
};

/// Real-valued map on d-tuples of sample points. Immutable after
/// construction; the tie counter is the only mutable (atomic) state.
class Kernel {
 public:
  using Eval = std::function<double(std::span<const double>)>;

  using TieCounter = std::shared_ptr<std::atomic<std::size_t>>;

  Kernel(std::string spec, KernelKind kind, int arity, Eval eval, KernelFlags flags,
         std::optional<std::vector<Factor>> factors = std::nullopt, TieCounter ties = nullptr);

  const std::string& spec() const { return spec_; }
  KernelKind kind() const { return kind_; }
  int arity() const { return arity_; }
  const KernelFlags& flags() const { return flags_; }
  bool rank_based() const { return flags_.rank_based; }
  bool nonnegative() const { return flags_.nonnegative; }
  bool integer_valued() const { return flags_.integer_valued; }
  std::optional<double> span_hint() const { return flags_.span_hint; }

  bool separable() const { return factors_.has_value(); }
  const std::vector<Factor>& factors() const;
  /// True when every factor carries an exact polynomial form.
  bool polynomial_factors() const;

  double operator()(std::span<const double> xs) const { return eval_(xs); }
  double evaluate(std::span<const double> xs) const { return eval_(xs); }

  /// Product of factor evaluations (separable kernels only).
  double evaluate_factors(std::span<const double> xs) const;

  /// Alphabet of a substring-pattern kernel.
  const std::optional<Alphabet>& alphabet() const { return alphabet_; }
  /// Pattern permutation (1-based values) of a permutation-pattern kernel.
  const std::vector<int>& permutation() const { return permutation_; }

  /// Number of evaluations that met tied arguments (rank-based kernels).
  std::size_t tie_count() const { return ties_->load(std::memory_order_relaxed); }

  // Set by the factories.
  void set_alphabet(Alphabet a) { alphabet_ = std::move(a); }
  void set_permutation(std::vector<int> p) { permutation_ = std::move(p); }

 private:
  std::string spec_;
  KernelKind kind_;
  int arity_;
  Eval eval_;
  KernelFlags flags_;
  std::optional<std::vector<Factor>> factors_;
  std::optional<Alphabet> alphabet_;
  std::vector<int> permutation_;
  TieCounter ties_;
};

constexpr int kMaxArity = 6;

Kernel make_pattern_kernel(std::string_view word, const Alphabet& alphabet);
Kernel make_perm_pattern_kernel(std::vector<int> pattern);
Kernel make_block_count_kernel(std::vector<int> lengths);
Kernel make_antisym_sine_kernel();
/// sign(x_2 - x_1): rank-based, antisymmetric, nondegenerate under continuous laws.
Kernel make_antisym_sign_kernel();
Kernel make_identity_kernel();
/// f = 1 on d-tuples (d = 1 unless given as `const1:d`).
Kernel make_const1_kernel(int arity = 1);

/// Parses `pattern:10@binary`, `permpattern:21`, `permpattern:1,3,2`,
/// `blocks:2`, `blocks:1,2`, `antisym-sine`, `antisym-sign`, `identity`, `const1`.
Kernel parse_kernel(std::string_view spec);

/// C(x, l) for a nonnegative integer x, 64-bit with overflow detection.
std::int64_t binomial_checked(double x, int l);

}  // namespace useq
