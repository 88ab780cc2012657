#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "useq/errors.hpp"
#include "useq/kernels.hpp"

using namespace useq;

namespace {
double ev(const Kernel& k, std::vector<double> xs) { return k.evaluate(xs); }
}  // namespace

TEST_CASE("word kernel over binary") {
  const Kernel k = parse_kernel("pattern:10@binary");
  CHECK(k.arity() == 2);
  CHECK(ev(k, {1, 0}) == 1.0);
  CHECK(ev(k, {0, 1}) == 0.0);
  CHECK(k.nonnegative());
  CHECK(k.integer_valued());
  CHECK(k.separable());
}

TEST_CASE("single letter and three letter words") {
  const Kernel a = parse_kernel("pattern:a@{ab}");
  CHECK(ev(a, {0}) == 1.0);  // letter index of 'a'
  CHECK(ev(a, {1}) == 0.0);
  const Kernel k = parse_kernel("pattern:110@binary");
  CHECK(ev(k, {1, 1, 0}) == 1.0);
  CHECK(ev(k, {1, 0, 1}) == 0.0);
}

TEST_CASE("word kernel rejects bad input") {
  CHECK_THROWS_AS(make_pattern_kernel("", parse_alphabet("binary")), ConfigError);
  CHECK_THROWS_AS(parse_kernel("pattern:12@binary"), ConfigError);
  CHECK_THROWS_AS(parse_kernel("pattern:10"), ConfigError);
  CHECK_THROWS_AS(parse_alphabet("{aa}"), ConfigError);
}

TEST_CASE("permutation patterns") {
  const Kernel inv = parse_kernel("permpattern:21");
  CHECK(ev(inv, {0.7, 0.2}) == 1.0);
  CHECK(ev(inv, {0.2, 0.7}) == 0.0);
  CHECK(ev(parse_kernel("permpattern:123"), {0.1, 0.4, 0.8}) == 1.0);
  CHECK(ev(parse_kernel("permpattern:132"), {0.1, 0.9, 0.5}) == 1.0);
  CHECK(inv.rank_based());
  CHECK_THROWS_AS(parse_kernel("permpattern:22"), ConfigError);
  CHECK_THROWS_AS(parse_kernel("permpattern:13"), ConfigError);
}

TEST_CASE("ties give zero and are counted") {
  const Kernel inv = parse_kernel("permpattern:21");
  const auto before = inv.tie_count();
  CHECK(ev(inv, {0.5, 0.5}) == 0.0);
  CHECK(inv.tie_count() == before + 1);
}

TEST_CASE("block counts") {
  CHECK(ev(parse_kernel("blocks:2"), {3}) == 3.0);
  CHECK(ev(parse_kernel("blocks:1,1"), {2, 3}) == 6.0);
  CHECK(ev(parse_kernel("blocks:2"), {1}) == 0.0);
  CHECK_THROWS_AS(parse_kernel("blocks:0"), ConfigError);
  CHECK_THROWS_AS(parse_kernel("blocks:x"), ConfigError);
  CHECK_THROWS_AS(ev(parse_kernel("blocks:2"), {2.5}), ConfigError);
}

TEST_CASE("block count overflow is detected") {
  const Kernel k = parse_kernel("blocks:30,30,30");
  CHECK_THROWS_AS(ev(k, {62, 62, 62}), std::overflow_error);
}

TEST_CASE("antisymmetric sine") {
  const Kernel k = parse_kernel("antisym-sine");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
  CHECK(ev(k, {std::numbers::pi / 2, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(ev(k, {a, a}) == 0.0);
    CHECK(ev(k, {a, b}) == -ev(k, {b, a}));
  }
  CHECK_FALSE(k.separable());
  CHECK_FALSE(k.rank_based());
}

TEST_CASE("constant and identity kernels") {
  CHECK(ev(parse_kernel("const1"), {17}) == 1.0);
  const Kernel c2 = parse_kernel("const1:2");
  CHECK(c2.arity() == 2);
  CHECK(ev(c2, {3, 4}) == 1.0);
  CHECK(ev(parse_kernel("identity"), {5}) == 5.0);
  CHECK_THROWS_AS(parse_kernel("const1:7"), ConfigError);
  CHECK_THROWS_AS(parse_kernel("nonsense"), ConfigError);
}

TEST_CASE("separable kernels equal the product of their factors") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> bit(0, 1), len(1, 6), letter(0, 3);
  for (const char* spec : {"pattern:10@binary", "pattern:110@binary", "blocks:1,2", "blocks:2,1,3"}) {
    const Kernel k = parse_kernel(spec);
    const bool dna = false;
    (void)dna;
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> xs(k.arity());
      for (auto& x : xs) x = k.kind() == KernelKind::pattern ? bit(rng) : len(rng);
      CHECK(k.evaluate(xs) == k.evaluate_factors(xs));
    }
  }
  const Kernel dna = parse_kernel("pattern:GATC@dna");
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs(4);
    for (auto& x : xs) x = letter(rng);
    CHECK(dna.evaluate(xs) == dna.evaluate_factors(xs));
  }
  const Kernel id = parse_kernel("identity");
  std::uniform_real_distribution<double> u(0, 10);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs{u(rng)};
    CHECK(std::abs(id.evaluate(xs) - id.evaluate_factors(xs)) <= 1e-12);
  }
}

TEST_CASE("rank-based kernels are invariant under monotone maps") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const char* spec : {"permpattern:21", "permpattern:132", "permpattern:3142", "antisym-sign"}) {
    const Kernel k = parse_kernel(spec);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> xs(k.arity()), cube, ex;
      for (auto& x : xs) x = u(rng);
      for (double x : xs) {
        cube.push_back(x * x * x);
        ex.push_back(std::exp(x));
      }
      CHECK(k.evaluate(xs) == k.evaluate(cube));
      CHECK(k.evaluate(xs) == k.evaluate(ex));
    }
  }
}

TEST_CASE("identity permutation on sorted distinct values") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int m = 1; m <= kMaxArity; ++m) {
    std::vector<int> p(m);
    for (int i = 0; i < m; ++i) p[i] = i + 1;
    const Kernel k = make_perm_pattern_kernel(p);
    std::vector<double> xs(m);
    for (auto& x : xs) x = u(rng);
    std::sort(xs.begin(), xs.end());
    CHECK(k.evaluate(xs) == 1.0);
  }
}
