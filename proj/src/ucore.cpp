#include "useq/ucore.hpp"

#include <cmath>
#include <ext/pb_ds/assoc_container.hpp>
#include <ext/pb_ds/tree_policy.hpp>
#include <limits>

#include "useq/errors.hpp"

namespace useq {

namespace {

std::int64_t to_exact(double v) {
  if (v != std::floor(v) || std::abs(v) > 9.0e18) throw std::overflow_error("kernel value is not a 64-bit integer");
  return static_cast<std::int64_t>(v);
}

void add_exact(std::optional<std::int64_t>& acc, std::int64_t inc) {
  if (!acc) return;
  std::int64_t out;
  if (__builtin_add_overflow(*acc, inc, &out)) throw std::overflow_error("U-statistic overflows 64 bits");
  *acc = out;
}

void record(UProcessState& s, double value) {
  s.value = value;
  s.running_max_abs = std::max(s.running_max_abs, std::abs(value));
}

// Calls fn(indices) for every increasing k-subset of [0, n).
template <typename Fn>
void for_each_combination(std::int64_t n, int k, Fn&& fn) {
  if (k == 0) {
    fn(std::span<const std::int64_t>{});
    return;
  }
  if (n < k) return;
  std::vector<std::int64_t> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(std::span<const std::int64_t>(idx));
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

UProcessState make_state(const Kernel& kernel, std::int64_t history_cap) {
  UProcessState s;
  s.history_cap = history_cap;
  if (kernel.integer_valued()) s.exact_value = 0;
  if (kernel.separable()) {
    s.dp_row.assign(kernel.arity() + 1, 0.0);
    s.dp_row[0] = 1.0;
    if (kernel.integer_valued()) {
      s.dp_row_exact.assign(kernel.arity() + 1, 0);
      s.dp_row_exact[0] = 1;
    }
  }
  return s;
}

double u_oracle(const Kernel& kernel, std::span<const double> xs) {
  const int d = kernel.arity();
  std::vector<double> tuple(d);
  long double acc = 0;
  for_each_combination(static_cast<std::int64_t>(xs.size()), d, [&](std::span<const std::int64_t> idx) {
    for (int j = 0; j < d; ++j) tuple[j] = xs[idx[j]];
    acc += kernel(tuple);
  });
  return static_cast<double>(acc);
}

void u_stream_separable(UProcessState& s, const Kernel& kernel, double x) {
  const auto& factors = kernel.factors();
  const int d = kernel.arity();
  if (static_cast<int>(s.dp_row.size()) != d + 1) throw ConfigError("state was not initialised for this kernel");
  const bool exact = !s.dp_row_exact.empty();
  for (int j = d; j >= 1; --j) {
    const double g = factors[j - 1].eval(x);
    if (g == 0.0) continue;
    s.dp_row[j] += s.dp_row[j - 1] * g;
    if (exact) {
      std::int64_t prod, sum;
      if (__builtin_mul_overflow(s.dp_row_exact[j - 1], to_exact(g), &prod) ||
          __builtin_add_overflow(s.dp_row_exact[j], prod, &sum))
        throw std::overflow_error("U-statistic overflows 64 bits");
      s.dp_row_exact[j] = sum;
    }
  }
  ++s.n;
  if (exact) {
    s.exact_value = s.dp_row_exact[d];
    record(s, static_cast<double>(s.dp_row_exact[d]));
  } else {
    record(s, s.dp_row[d]);
  }
}

void u_stream_generic(UProcessState& s, const Kernel& kernel, double x) {
  if (static_cast<std::int64_t>(s.history.size()) >= s.history_cap)
    throw BudgetExceeded("generic U engine history cap of " + std::to_string(s.history_cap) + " items reached");
  const int d = kernel.arity();
  std::vector<double> tuple(d);
  tuple[d - 1] = x;
  long double inc = 0;
  std::int64_t inc_exact = 0;
  const bool exact = s.exact_value.has_value();
  for_each_combination(static_cast<std::int64_t>(s.history.size()), d - 1, [&](std::span<const std::int64_t> idx) {
    for (int j = 0; j < d - 1; ++j) tuple[j] = s.history[idx[j]];
    const double v = kernel(tuple);
    inc += v;
    if (exact && v != 0.0) inc_exact += to_exact(v);
  });
  s.history.push_back(x);
  ++s.n;
  if (exact) {
    add_exact(s.exact_value, inc_exact);
    record(s, static_cast<double>(*s.exact_value));
  } else {
    record(s, s.value + static_cast<double>(inc));
  }
}

struct UStream::RankTree {
  using Key = std::pair<double, std::int64_t>;
  __gnu_pbds::tree<Key, __gnu_pbds::null_type, std::less<Key>, __gnu_pbds::rb_tree_tag,
                   __gnu_pbds::tree_order_statistics_node_update>
      tree;
};

UStream::Engine UStream::preferred_engine(const Kernel& kernel) {
  if (kernel.separable()) return Engine::separable;
  if (kernel.rank_based() && kernel.arity() == 2) return Engine::rank_pair;
  return Engine::generic;
}

UStream::UStream(const Kernel& kernel, std::int64_t history_cap)
    : UStream(kernel, preferred_engine(kernel), history_cap) {}

UStream::UStream(const Kernel& kernel, Engine engine, std::int64_t history_cap)
    : kernel_(&kernel), engine_(engine), state_(make_state(kernel, history_cap)) {
  if (engine_ == Engine::separable && !kernel.separable())
    throw ConfigError("kernel '" + kernel.spec() + "' is not separable");
  if (engine_ == Engine::rank_pair) {
    if (!kernel.rank_based() || kernel.arity() != 2)
      throw ConfigError("rank-pair engine needs a rank-based kernel of arity 2");
    tree_ = std::make_unique<RankTree>();
    const double lo_hi[2] = {0.0, 1.0};
    const double hi_lo[2] = {1.0, 0.0};
    less_weight_ = kernel(lo_hi);
    greater_weight_ = kernel(hi_lo);
  }
}

UStream::UStream(UStream&&) noexcept = default;
UStream& UStream::operator=(UStream&&) noexcept = default;
UStream::~UStream() = default;

void UStream::push(double x) {
  switch (engine_) {
    case Engine::separable:
      u_stream_separable(state_, *kernel_, x);
      return;
    case Engine::generic:
      u_stream_generic(state_, *kernel_, x);
      return;
    case Engine::rank_pair: {
      auto& t = tree_->tree;
      const auto below = static_cast<std::int64_t>(t.order_of_key({x, std::numeric_limits<std::int64_t>::min()}));
      const auto not_above = static_cast<std::int64_t>(t.order_of_key({x, std::numeric_limits<std::int64_t>::max()}));
      const auto above = static_cast<std::int64_t>(t.size()) - not_above;
      const double inc = less_weight_ * static_cast<double>(below) + greater_weight_ * static_cast<double>(above);
      t.insert({x, state_.n});
      ++state_.n;
      if (state_.exact_value) {
        add_exact(state_.exact_value, to_exact(less_weight_) * below + to_exact(greater_weight_) * above);
        record(state_, static_cast<double>(*state_.exact_value));
      } else {
        record(state_, state_.value + inc);
      }
      return;
    }
  }
}

std::int64_t hoeffding_weight(std::int64_t n, int d, int j, std::int64_t i) {
  if (j < 1 || j > d || i < 1 || i > n) return 0;
  const std::int64_t a = binomial(i - 1, j - 1), b = binomial(n - i, d - j);
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("hoeffding weight overflows 64 bits");
  return out;
}

}  // namespace useq
