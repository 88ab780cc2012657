#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "useq/errors.hpp"
#include "useq/kernels.hpp"
#include "useq/sources.hpp"
#include "useq/ucore.hpp"

using namespace useq;

namespace {

std::vector<double> stream_values(const Kernel& k, const std::vector<double>& xs, bool separable) {
  UProcessState st = make_state(k);
  std::vector<double> out;
  for (double x : xs) {
    if (separable)
      u_stream_separable(st, k, x);
    else
      u_stream_generic(st, k, x);
    out.push_back(st.value);
  }
  return out;
}

std::vector<double> oracle_values(const Kernel& k, const std::vector<double>& xs) {
  std::vector<double> out;
  for (std::size_t n = 1; n <= xs.size(); ++n) out.push_back(u_oracle(k, std::span(xs.data(), n)));
  return out;
}

// Integer table kernel on {0..m-1}^d, optionally a product of per-slot tables.
Kernel random_kernel(std::mt19937_64& rng, int d, int m, bool separable) {
  std::uniform_int_distribution<int> val(-3, 3);
  if (separable) {
    std::vector<std::vector<int>> g(d, std::vector<int>(m));
    for (auto& row : g)
      for (auto& v : row) v = val(rng);
    std::vector<Factor> factors;
    for (int j = 0; j < d; ++j) {
      auto row = g[j];
      factors.push_back({[row](double x) { return static_cast<double>(row[static_cast<int>(x)]); }, std::nullopt});
    }
    auto eval = [g](std::span<const double> xs) {
      double p = 1;
      for (std::size_t j = 0; j < g.size(); ++j) p *= g[j][static_cast<int>(xs[j])];
      return p;
    };
    KernelFlags flags;
    flags.integer_valued = true;
    return Kernel("random-separable", KernelKind::custom, d, eval, flags, std::move(factors));
  }
  int cells = 1;
  for (int j = 0; j < d; ++j) cells *= m;
  std::vector<int> table(cells);
  for (auto& v : table) v = val(rng);
  auto eval = [table, m](std::span<const double> xs) {
    int idx = 0;
    for (double x : xs) idx = idx * m + static_cast<int>(x);
    return static_cast<double>(table[idx]);
  };
  KernelFlags flags;
  flags.integer_valued = true;
  return Kernel("random-table", KernelKind::custom, d, eval, flags);
}

}  // namespace

TEST_CASE("oracle examples") {
  CHECK(u_oracle(parse_kernel("permpattern:21"), std::vector<double>{3, 1, 2}) == 2);
  CHECK(u_oracle(parse_kernel("pattern:10@binary"), std::vector<double>{1, 0, 1, 0}) == 3);
  CHECK(u_oracle(parse_kernel("const1:2"), std::vector<double>{1, 2, 3, 4, 5}) == 10);
  CHECK(u_oracle(parse_kernel("const1:3"), std::vector<double>{1, 2}) == 0);
}

TEST_CASE("separable engine examples") {
  CHECK(stream_values(parse_kernel("pattern:10@binary"), {1, 0, 1, 0}, true) == std::vector<double>{0, 1, 1, 3});
  CHECK(stream_values(parse_kernel("blocks:2"), {3, 1}, true) == std::vector<double>{3, 3});
  const auto v = stream_values(parse_kernel("const1:3"), std::vector<double>(9, 0.0), true);
  for (int k = 1; k <= 9; ++k) CHECK(v[k - 1] == static_cast<double>(binomial(k, 3)));
  UProcessState st = make_state(parse_kernel("antisym-sine"));
  CHECK_THROWS_AS(u_stream_separable(st, parse_kernel("antisym-sine"), 1.0), ConfigError);
}

TEST_CASE("dp row starts with one") {
  const Kernel k = parse_kernel("pattern:110@binary");
  UProcessState st = make_state(k);
  for (double x : {1.0, 1.0, 0.0, 1.0}) {
    u_stream_separable(st, k, x);
    CHECK(st.dp_row[0] == 1.0);
    CHECK(st.value == st.dp_row[3]);
  }
}

TEST_CASE("generic engine examples") {
  const Kernel s = parse_kernel("antisym-sine");
  const double a = 0.3, b = 2.1, c = 5.0;
  const auto v = stream_values(s, {a, b, c}, false);
  CHECK(v[2] == doctest::Approx(std::sin(a - b) + std::sin(a - c) + std::sin(b - c)).epsilon(1e-14));
  const auto w = stream_values(parse_kernel("permpattern:132"), {0.1, 0.5, 0.3}, false);
  CHECK(w[0] == 0);
  CHECK(w[1] == 0);
  CHECK(w[2] == 1);
}

TEST_CASE("generic engine refuses beyond the history cap") {
  const Kernel k = parse_kernel("antisym-sine");
  UProcessState st = make_state(k, 5);
  for (int i = 0; i < 5; ++i) u_stream_generic(st, k, i);
  CHECK_THROWS_AS(u_stream_generic(st, k, 6.0), BudgetExceeded);
}

TEST_CASE("engines agree with the oracle on random integer kernels") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dd(1, 4), nn(0, 12), mm(2, 4);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = dd(rng), m = mm(rng), n = nn(rng);
    const bool sep = rep % 2 == 0;
    const Kernel k = random_kernel(rng, d, m, sep);
    std::uniform_int_distribution<int> letter(0, m - 1);
    std::vector<double> xs(n);
    for (auto& x : xs) x = letter(rng);
    const auto oracle = oracle_values(k, xs);
    CHECK(stream_values(k, xs, false) == oracle);
    if (sep) CHECK(stream_values(k, xs, true) == oracle);
  }
}

TEST_CASE("rank-pair engine agrees with the oracle") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (const char* spec : {"permpattern:21", "permpattern:12", "antisym-sign"}) {
    const Kernel k = parse_kernel(spec);
    REQUIRE(UStream::preferred_engine(k) == UStream::Engine::rank_pair);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> xs(40);
      for (auto& x : xs) x = u(rng);
      UStream s(k);
      for (std::size_t n = 0; n < xs.size(); ++n) {
        s.push(xs[n]);
        CHECK(s.value() == u_oracle(k, std::span(xs.data(), n + 1)));
      }
    }
  }
}

TEST_CASE("running maximum is nondecreasing") {
  const Kernel k = parse_kernel("antisym-sine");
  Rng rng = make_rng(3, 0);
  const auto src = SampleSource::parse("uniform2pi");
  UStream s(k);
  double prev = 0, seen = 0;
  for (int i = 0; i < 200; ++i) {
    s.push(src.draw(rng));
    seen = std::max(seen, std::abs(s.value()));
    CHECK(s.max_abs() >= prev);
    CHECK(s.max_abs() == seen);
    prev = s.max_abs();
  }
}

TEST_CASE("law of large numbers for inversions") {
  const Kernel k = parse_kernel("permpattern:21");
  const auto src = SampleSource::parse("uniform01");
  const int n = 5000;
  int good = 0;
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng = make_rng(99, seed);
    UStream s(k);
    for (int i = 0; i < n; ++i) s.push(src.draw(rng));
    good += std::abs(s.value() / static_cast<double>(binomial(n, 2)) - 0.5) < 0.02;
  }
  CHECK(good >= 190);
}

TEST_CASE("Vandermonde sums of the slot weights") {
  for (int d = 1; d <= 5; ++d)
    for (int j = 1; j <= d; ++j)
      for (std::int64_t n = d; n <= 50; ++n) {
        std::int64_t s = 0;
        for (std::int64_t i = 1; i <= n; ++i) s += hoeffding_weight(n, d, j, i);
        CHECK(s == binomial(n, d));
      }
  for (std::int64_t i = 1; i <= 10; ++i) CHECK(hoeffding_weight(10, 1, 1, i) == 1);
}

TEST_CASE("projections of the 10 word") {
  const auto m = hoeffding_projections(parse_kernel("pattern:10@binary"), SampleSource::parse("bernoulli:0.5@binary"),
                                       ProjectionMethod::exact);
  REQUIRE(m.sigma_exact);
  const auto& s = *m.sigma_exact;
  CHECK(*m.mu_exact == Rational(1, 4));
  CHECK(s[0][0] == Rational(1, 16));
  CHECK(s[1][1] == Rational(1, 16));
  CHECK(s[0][1] == Rational(-1, 16));
  CHECK(s[1][0] == Rational(-1, 16));
}

TEST_CASE("projections of the inversion kernel") {
  const Kernel k = parse_kernel("permpattern:21");
  const auto src = SampleSource::parse("uniform01");
  const auto m = hoeffding_projections(k, src, ProjectionMethod::order);
  REQUIRE(m.sigma_exact);
  CHECK(*m.mu_exact == Rational(1, 2));
  CHECK((*m.sigma_exact)[0][0] == Rational(1, 12));
  CHECK((*m.sigma_exact)[1][1] == Rational(1, 12));
  CHECK((*m.sigma_exact)[0][1] == Rational(-1, 12));
  // closed-form integration of the polynomial projections
  const auto integ = sigma_by_integration(m);
  REQUIRE(integ);
  CHECK(*integ == *m.sigma_exact);
  // f_1(u) = u - 1/2, f_2(u) = 1/2 - u
  CHECK(m.projections[0](0.3) == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(m.projections[1](0.3) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("order enumeration matches integration for longer patterns") {
  for (const char* spec : {"permpattern:132", "permpattern:2413", "antisym-sign"}) {
    const auto m = hoeffding_projections(parse_kernel(spec), SampleSource::parse("uniform01"), ProjectionMethod::order);
    CHECK(*sigma_by_integration(m) == *m.sigma_exact);
  }
}

TEST_CASE("constant kernel has zero projections") {
  const auto m = hoeffding_projections(parse_kernel("const1:3"), SampleSource::parse("geom:0.5"),
                                       ProjectionMethod::exact);
  CHECK(*m.mu_exact == 1);
  for (const auto& row : *m.sigma_exact)
    for (const auto& v : row) CHECK(v == 0);
}

TEST_CASE("projections are centered") {
  struct Case {
    const char* kernel;
    const char* dist;
    ProjectionMethod method;
  };
  const Case cases[] = {{"pattern:10@binary", "bernoulli:0.5@binary", ProjectionMethod::exact},
                        {"pattern:GAT@dna", "finite:0.1,0.2,0.3,0.4@dna", ProjectionMethod::exact},
                        {"permpattern:21", "uniform01", ProjectionMethod::order},
                        {"permpattern:312", "uniform01", ProjectionMethod::order},
                        {"blocks:2", "geom:0.5", ProjectionMethod::exact},
                        {"blocks:1,2", "golden-blocks", ProjectionMethod::exact}};
  for (const auto& c : cases) {
    const auto src = SampleSource::parse(c.dist);
    const auto m = hoeffding_projections(parse_kernel(c.kernel), src, c.method);
    for (const auto& f : m.projections) {
      double mean = 0;
      if (src.continuous()) {
        // Gauss-Legendre is overkill here; the midpoint rule on 20000 cells is
        // exact enough for polynomials of degree <= 2d - 2.
        const int cells = 20000;
        for (int i = 0; i < cells; ++i) mean += f((i + 0.5) / cells) / cells;
        CHECK(std::abs(mean) <= 1e-9);
      } else {
        for (const auto& a : src.atoms(1e-18)) mean += a.prob * f(a.value);
        CHECK(std::abs(mean) <= 1e-12);
      }
    }
  }
}

TEST_CASE("geometric block kernels have exact moments") {
  const auto src = SampleSource::parse("geom:0.5");
  const auto m = hoeffding_projections(parse_kernel("identity"), src, ProjectionMethod::exact);
  CHECK(*m.mu_exact == 2);
  CHECK((*m.sigma_exact)[0][0] == 2);
  const auto b = hoeffding_projections(parse_kernel("blocks:2"), src, ProjectionMethod::exact);
  CHECK(*b.mu_exact == 2);
  CHECK((*b.sigma_exact)[0][0] == 22);
}

TEST_CASE("monte-carlo projections bracket the exact values") {
  const auto src = SampleSource::parse("uniform01");
  const Kernel k = parse_kernel("permpattern:21");
  ProjectionOptions opt;
  opt.budget = 400'000;
  const auto m = hoeffding_projections(k, src, ProjectionMethod::monte_carlo, opt);
  CHECK_FALSE(m.exact());
  CHECK(std::abs(m.mu - 0.5) <= 4 * m.mu_std_error);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double truth = (i == j ? 1.0 : -1.0) / 12;
      CHECK(std::abs(m.sigma(i, j) - truth) <= 4 * m.sigma_std_error(i, j) + 1e-3);
    }
}

TEST_CASE("sigma is symmetric positive semidefinite") {
  for (const char* spec : {"permpattern:2413", "permpattern:321"}) {
    const auto m = hoeffding_projections(parse_kernel(spec), SampleSource::parse("uniform01"), ProjectionMethod::order);
    CHECK((m.sigma - m.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.sigma);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("invalid pairings are rejected") {
  CHECK_THROWS_AS(validate_pairing(parse_kernel("permpattern:21"), SampleSource::parse("bernoulli:0.5@binary")),
                  ConfigError);
  CHECK_THROWS_AS(validate_pairing(parse_kernel("pattern:10@binary"), SampleSource::parse("uniform01")), ConfigError);
  CHECK_THROWS_AS(validate_pairing(parse_kernel("pattern:AC@dna"), SampleSource::parse("bernoulli:0.5@binary")),
                  ConfigError);
  CHECK_THROWS_AS(validate_pairing(parse_kernel("blocks:2"), SampleSource::parse("uniform01")), ConfigError);
  CHECK_THROWS_AS(hoeffding_projections(parse_kernel("antisym-sine"), SampleSource::parse("uniform2pi"),
                                        ProjectionMethod::exact),
                  ConfigError);
}

TEST_CASE("enumeration budget is enforced") {
  ProjectionOptions opt;
  opt.budget = 10;
  CHECK_THROWS_AS(hoeffding_projections(parse_kernel("pattern:ACGT@dna"), SampleSource::parse("finite:0.25,0.25,0.25,0.25@dna"),
                                        ProjectionMethod::exact, opt),
                  BudgetExceeded);
  CHECK_THROWS_AS(
      hoeffding_projections(parse_kernel("permpattern:321"), SampleSource::parse("uniform01"), ProjectionMethod::order, opt),
      BudgetExceeded);
}

TEST_CASE("auto projections choose exact methods when possible") {
  CHECK(auto_projections(parse_kernel("pattern:10@binary"), SampleSource::parse("bernoulli:0.5@binary")).method ==
        ProjectionMethod::exact);
  CHECK(auto_projections(parse_kernel("permpattern:21"), SampleSource::parse("uniform01")).method ==
        ProjectionMethod::order);
  CHECK(auto_projections(parse_kernel("antisym-sine"), SampleSource::parse("uniform2pi")).method ==
        ProjectionMethod::monte_carlo);
}

TEST_CASE("Hoeffding identity holds exactly for the 10 word") {
  const Kernel k = parse_kernel("pattern:10@binary");
  const auto src = SampleSource::parse("bernoulli:0.5@binary");
  const auto m = hoeffding_projections(k, src, ProjectionMethod::exact);
  const auto diag = residual_check(k, src, m, 20, 20);
  CHECK(diag.identity_exact);
  CHECK(diag.max_identity_error == 0.0);
  CHECK(diag.max_residual_projection == 0.0);
  CHECK(diag.passed);
}

TEST_CASE("Hoeffding identity for continuous and block sources") {
  const auto u = SampleSource::parse("uniform01");
  const Kernel inv = parse_kernel("permpattern:21");
  const auto d1 = residual_check(inv, u, hoeffding_projections(inv, u, ProjectionMethod::order));
  CHECK(d1.passed);
  const auto g = SampleSource::parse("geom:0.5");
  const Kernel b = parse_kernel("blocks:1,2");
  const auto d2 = residual_check(b, g, hoeffding_projections(b, g, ProjectionMethod::exact));
  CHECK(d2.passed);
}

TEST_CASE("projection method names") {
  CHECK(to_string(ProjectionMethod::monte_carlo) == "mc");
  CHECK(parse_projection_method("monte-carlo") == ProjectionMethod::monte_carlo);
  CHECK(parse_projection_method("order") == ProjectionMethod::order);
  CHECK_THROWS_AS(parse_projection_method("guess"), ConfigError);
}
