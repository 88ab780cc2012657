#include <doctest.h>

#include <cmath>

#include "useq/errors.hpp"
#include "useq/kernels.hpp"
#include "useq/renewal.hpp"
#include "useq/stats.hpp"

using namespace useq;

namespace {

// f(L) = 2L on the golden two-point law: values {2, 4}, span 2.
Kernel doubled() {
  KernelFlags flags;
  flags.nonnegative = true;
  flags.integer_valued = true;
  std::vector<Factor> f{{[](double x) { return 2 * x; }, Polynomial<Rational>::monomial(1, Rational(2))}};
  return Kernel("doubled", KernelKind::custom, 1, [](std::span<const double> xs) { return 2 * xs[0]; }, flags,
                std::move(f));
}

// Signed d = 1 kernel with mean 1/4 on uniform(0, 1).
Kernel shifted() {
  std::vector<Factor> f{{[](double x) { return x - 0.25; },
                         Polynomial<Rational>(std::vector<Rational>{Rational(-1, 4), Rational(1)})}};
  return Kernel("shifted", KernelKind::custom, 1, [](std::span<const double> xs) { return xs[0] - 0.25; },
                KernelFlags{}, std::move(f));
}

}  // namespace

TEST_CASE("sandwich and unit gap for nonnegative kernels") {
  struct Case {
    const char* kernel;
    const char* dist;
    double mu;
    double x;
  };
  for (const Case& c : {Case{"identity", "geom:0.5", 2.0, 1000}, Case{"pattern:10@binary", "bernoulli:0.5@binary", 0.25, 5000},
                        Case{"blocks:2", "geom:0.5", 2.0, 777}, Case{"permpattern:21", "uniform01", 0.5, 3000}}) {
    const Kernel k = parse_kernel(c.kernel);
    const auto src = SampleSource::parse(c.dist);
    const RenewalExperiment exp(k, nullptr, src, c.mu);
    CHECK(exp.nonnegative());
    for (int i = 0; i < 50; ++i) {
      Rng rng = make_rng(1, i);
      const auto o = exp.run(c.x, rng);
      CHECK(o.n_plus == o.n_minus + 1);
      CHECK(o.u_at_nminus <= c.x);
      CHECK(o.u_at_nplus > c.x);
      CHECK(o.overshoot > 0);
      CHECK(o.overshoot == o.u_at_nplus - c.x);
      CHECK(o.nminus_exact);
    }
  }
}

TEST_CASE("threshold zero") {
  const Kernel k = parse_kernel("const1:2");
  const auto src = SampleSource::parse("uniform01");
  Rng rng = make_rng(2, 0);
  const auto o = run_to_threshold(k, nullptr, src, 1.0, 0.0, rng);
  CHECK(o.n_plus == 2);
  CHECK(o.n_minus == 1);
}

TEST_CASE("signed kernels use the confirmation horizon") {
  const Kernel k = shifted();
  const auto src = SampleSource::parse("uniform01");
  const RenewalExperiment exp(k, nullptr, src, 0.25);
  CHECK_FALSE(exp.nonnegative());
  for (int i = 0; i < 50; ++i) {
    Rng rng = make_rng(3, i);
    const auto o = exp.run(200, rng);
    CHECK_FALSE(o.nminus_exact);
    CHECK(o.u_at_nminus <= 200);
    CHECK(o.u_at_nplus > 200);
    CHECK(o.n_minus >= o.n_plus - 1);
  }
  CHECK(exp.horizon(200) == static_cast<std::int64_t>(std::ceil(4 * std::sqrt(800.0))) + 64);
}

TEST_CASE("invalid experiments") {
  const Kernel k = parse_kernel("identity");
  const auto src = SampleSource::parse("geom:0.5");
  CHECK_THROWS_AS(RenewalExperiment(k, nullptr, src, 0.0), ConfigError);
  const RenewalExperiment exp(k, nullptr, src, 2.0);
  Rng rng = make_rng(4, 0);
  CHECK_THROWS_AS(exp.run(-1, rng), ConfigError);
  // a wrong mean shrinks the step budget below what the threshold needs
  const RenewalExperiment wrong(k, nullptr, src, 1000.0);
  CHECK_THROWS_AS(wrong.run(1e6, rng), BudgetExceeded);
}

TEST_CASE("law of large numbers, d = 1") {
  const Kernel k = parse_kernel("identity");
  const auto src = SampleSource::parse("geom:0.5");
  const RenewalExperiment exp(k, nullptr, src, 2.0);
  double acc = 0;
  for (int i = 0; i < 100; ++i) {
    Rng rng = make_rng(5, i);
    acc += exp.run(1e4, rng).n_minus / 1e4;
  }
  CHECK(std::abs(acc / 100 - 0.5) <= 0.01);
}

TEST_CASE("law of large numbers, d = 2") {
  const Kernel k = parse_kernel("pattern:10@binary");
  const auto src = SampleSource::parse("bernoulli:0.5@binary");
  const RenewalExperiment exp(k, nullptr, src, 0.25);
  const double x = 125'000;  // n(x) = 1000
  MomentAccumulator plus, minus;
  for (int i = 0; i < 100; ++i) {
    Rng rng = make_rng(6, i);
    const auto o = exp.run(x, rng);
    plus.add(o.n_plus / std::sqrt(x));
    minus.add(o.n_minus / std::sqrt(x));
  }
  CHECK(std::abs(plus.mean() / std::sqrt(8.0) - 1) <= 0.03);
  CHECK(std::abs(minus.mean() / std::sqrt(8.0) - 1) <= 0.03);
}

TEST_CASE("companion is read on the same sample path") {
  const Kernel k = parse_kernel("identity");
  const Kernel one = parse_kernel("const1");
  const auto src = SampleSource::parse("geom:0.5");
  const RenewalExperiment exp(k, &one, src, 2.0);
  for (int i = 0; i < 20; ++i) {
    Rng rng = make_rng(7, i);
    const auto o = exp.run(500, rng);
    REQUIRE(o.companion_value);
    CHECK(*o.companion_value == static_cast<double>(o.n_minus));
    CHECK(*o.companion_at_nplus == static_cast<double>(o.n_plus));
  }
}

TEST_CASE("overshoot laws") {
  const auto geo = SampleSource::parse("geom:0.5");
  const auto g = overshoot_limit_law(parse_kernel("identity"), geo);
  CHECK(g.lattice);
  CHECK(g.span == 1.0);
  for (int k = 1; k <= 20; ++k) CHECK(g.pmf(k) == doctest::Approx(std::ldexp(1.0, -k)).epsilon(1e-14));

  const auto c = overshoot_limit_law(parse_kernel("const1"), geo);
  CHECK(c.pmf(1) == doctest::Approx(1.0));
  CHECK(c.values.size() == 1);

  const auto u = overshoot_limit_law(parse_kernel("identity"), SampleSource::parse("uniform01"));
  CHECK_FALSE(u.lattice);
  for (double y : {0.1, 0.25, 0.5, 0.8, 0.95}) CHECK(std::abs(u.cdf(y) - (2 * y - y * y)) <= 1e-3);
  CHECK(u.cdf(0) == 0);
  CHECK(u.cdf(1.5) == 1);

  const auto d = overshoot_limit_law(doubled(), SampleSource::parse("golden-blocks"));
  CHECK(d.span == 2.0);
  const double mu = 2 * (kGoldenP + 2 * kGoldenP * kGoldenP);
  CHECK(d.pmf(2) == doctest::Approx(2 / mu).epsilon(1e-12));
  CHECK(d.pmf(4) == doctest::Approx(2 / mu * kGoldenP * kGoldenP).epsilon(1e-12));
  CHECK(d.pmf(3) == 0.0);

  CHECK_THROWS_AS(overshoot_limit_law(parse_kernel("pattern:10@binary"), SampleSource::parse("bernoulli:0.5@binary")),
                  ConfigError);
  CHECK_THROWS_AS(overshoot_limit_law(shifted(), SampleSource::parse("uniform01")), ConfigError);
}

TEST_CASE("empirical overshoot matches the limit law") {
  const Kernel k = parse_kernel("identity");
  const auto src = SampleSource::parse("geom:0.5");
  const RenewalExperiment exp(k, nullptr, src, 2.0);
  std::map<double, double> emp, ref;
  const int reps = 4000;
  for (int i = 0; i < reps; ++i) {
    Rng rng = make_rng(8, i);
    emp[exp.run(2000, rng).overshoot] += 1.0 / reps;
  }
  for (int j = 1; j <= 40; ++j) ref[j] = std::ldexp(1.0, -j);
  CHECK(total_variation(emp, ref) <= 0.03);
}

TEST_CASE("conditioning strings") {
  CHECK(Conditioning::parse("none").kind == Conditioning::Kind::none);
  const auto o = Conditioning::parse("overshoot=3");
  CHECK(o.kind == Conditioning::Kind::overshoot);
  CHECK(o.k == 3);
  CHECK(o.to_string() == "overshoot=3");
  CHECK(Conditioning::parse("exact-hit").kind == Conditioning::Kind::exact_hit);
  CHECK_THROWS_AS(Conditioning::parse("overshoot=0"), ConfigError);
  CHECK_THROWS_AS(Conditioning::parse("overshoot=x"), ConfigError);
  CHECK_THROWS_AS(Conditioning::parse("sometimes"), ConfigError);
}

TEST_CASE("conditioned runs") {
  const Kernel k = parse_kernel("identity");
  const auto src = SampleSource::parse("geom:0.5");
  const RenewalExperiment exp(k, nullptr, src, 2.0);
  for (const char* text : {"overshoot=1", "exact-hit"}) {
    const ConditionedRenewal cr(exp, Conditioning::parse(text));
    std::int64_t attempts = 0;
    const int reps = 2000;
    for (int i = 0; i < reps; ++i) {
      Rng rng = make_rng(9, i);
      const auto o = cr.run(3000, rng);
      CHECK(cr.accepts(o));
      attempts += o.attempts;
      if (std::string(text) == "exact-hit") CHECK(o.u_at_nminus == 3000);
      else CHECK(o.overshoot == 1);
    }
    CHECK(std::abs(static_cast<double>(reps) / attempts - 0.5) <= 0.025);
  }
}

TEST_CASE("span arithmetic") {
  const Kernel k = doubled();
  const auto src = SampleSource::parse("golden-blocks");
  const RenewalExperiment exp(k, nullptr, src, 2 * (kGoldenP + 2 * kGoldenP * kGoldenP));
  const ConditionedRenewal one(exp, Conditioning::parse("overshoot=1"));
  CHECK_THROWS_AS(one.check_threshold(100), ConfigError);  // U is even, so R(100) is even
  CHECK_NOTHROW(one.check_threshold(101));
  const ConditionedRenewal two(exp, Conditioning::parse("overshoot=2"));
  CHECK_NOTHROW(two.check_threshold(100));
  CHECK_THROWS_AS(two.check_threshold(101), ConfigError);
  const ConditionedRenewal hit(exp, Conditioning::parse("exact-hit"));
  CHECK_NOTHROW(hit.check_threshold(100));
  CHECK_THROWS_AS(hit.check_threshold(101), ConfigError);
  const ConditionedRenewal big(exp, Conditioning::parse("overshoot=6"));
  CHECK_THROWS_AS(big.check_threshold(100), ConfigError);
  CHECK_THROWS_AS(one.check_threshold(100.5), ConfigError);
  Rng rng = make_rng(10, 0);
  const auto o = one.run(101, rng);
  CHECK(o.overshoot == 1);

  const RenewalExperiment cont(parse_kernel("identity"), nullptr, SampleSource::parse("uniform01"), 0.5);
  CHECK_THROWS_AS(ConditionedRenewal(cont, Conditioning::parse("exact-hit")), ConfigError);
}

TEST_CASE("lattice spans") {
  CHECK(*lattice_span(parse_kernel("identity"), SampleSource::parse("geom:0.5")) == 1.0);
  CHECK(*lattice_span(doubled(), SampleSource::parse("golden-blocks")) == 2.0);
  CHECK(*lattice_span(parse_kernel("blocks:2"), SampleSource::parse("golden-blocks")) == 1.0);
  CHECK_FALSE(lattice_span(parse_kernel("identity"), SampleSource::parse("uniform01")));
}
