#include <doctest.h>

#include <cmath>

#include "useq/errors.hpp"
#include "useq/gausssim.hpp"
#include "useq/limitlaw.hpp"
#include "useq/stats.hpp"

using namespace useq;

namespace {

Eigen::MatrixXd antisym(double v) {
  Eigen::MatrixXd s(2, 2);
  s << v, -v, -v, v;
  return s;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t k) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

}  // namespace

TEST_CASE("grids") {
  const auto g = uniform_grid(4);
  CHECK(g == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  const auto dy = dyadic_grid(17);
  CHECK(dy.size() == 17);
  CHECK(dy.front() == 0.0);
  CHECK(dy.back() == 1.0);
  CHECK(dy[8] == 0.5);
  CHECK_THROWS_AS(uniform_grid(0), ConfigError);
  CHECK_THROWS_AS(ZPathSampler(antisym(1), {0.5, 1}), ConfigError);
  CHECK_THROWS_AS(ZPathSampler(antisym(1), {0, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(ZGridSampler(antisym(1), std::vector<double>(600, 1.0)), ConfigError);
}

TEST_CASE("psd square root") {
  const Eigen::MatrixXd s = antisym(2.0);
  const Eigen::MatrixXd r = psd_sqrt(s);
  CHECK((r * r.transpose() - s).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(psd_sqrt(bad), ConfigError);
  Eigen::MatrixXd nearly = antisym(1.0);
  nearly(0, 0) -= 1e-13;
  CHECK_NOTHROW(psd_sqrt(nearly));
}

TEST_CASE("zero covariance gives the zero path") {
  const ZPathSampler p(Eigen::MatrixXd::Zero(3, 3), uniform_grid(64));
  Rng rng = make_rng(1, 0);
  for (double v : p.sample(rng)) CHECK(v == 0.0);
  const ZGridSampler g(Eigen::MatrixXd::Zero(2, 2), {0.0, 0.5, 1.0});
  for (double v : g.sample(rng)) CHECK(v == 0.0);
}

TEST_CASE("time zero maps to zero") {
  const ZGridSampler g(antisym(1.0 / 16), dyadic_grid(5));
  const ZPathSampler p(antisym(1.0 / 16), uniform_grid(32));
  Rng rng = make_rng(2, 0);
  for (int i = 0; i < 20; ++i) {
    CHECK(g.sample(rng)[0] == 0.0);
    CHECK(p.sample(rng)[0] == 0.0);
  }
}

TEST_CASE("d=1 path is a Brownian motion") {
  Eigen::MatrixXd s(1, 1);
  s << 2.5;
  const ZPathSampler p(s, uniform_grid(8));
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 100'000; ++i) {
    Rng rng = make_rng(3, i);
    rows.push_back(p.sample(rng));
  }
  for (std::size_t a : {2u, 4u, 8u})
    for (std::size_t b : {4u, 8u}) {
      const auto c = covariance(column(rows, a), column(rows, b));
      const double truth = 2.5 * std::min(a, b) / 8.0;
      CHECK(std::abs(c.value - truth) <= 4 * c.std_error);
    }
}

TEST_CASE("exact-grid sampler: single point and pair") {
  const Eigen::MatrixXd s10 = antisym(1.0 / 16);
  const double s2 = sigma2(s10);
  const ZGridSampler one(s10, {1.0});
  MomentAccumulator acc;
  for (int i = 0; i < 100'000; ++i) {
    Rng rng = make_rng(4, i);
    acc.add(one.sample(rng)[0]);
  }
  CHECK(std::abs(acc.variance() / s2 - 1) <= 0.03);

  const ZGridSampler two(s10, {0.5, 1.0});
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 100'000; ++i) {
    Rng rng = make_rng(5, i);
    rows.push_back(two.sample(rng));
  }
  const double truth = cov_z(0.5, 1.0, s10);
  CHECK(std::abs(covariance(column(rows, 0), column(rows, 1)).value / truth - 1) <= 0.03);
  CHECK(two.covariance()(0, 1) == doctest::Approx(truth).epsilon(1e-14));
}

TEST_CASE("antisymmetric d=2 path has the tB(t) - 2 int B structure") {
  // Direct simulation of tB(t) - 2 int_0^t B on a fine grid, independent of
  // the sampler's construction.
  const int steps = 1024, draws = 20'000;
  const std::vector<std::size_t> at{256, 512, 1024};
  std::vector<std::vector<double>> direct, sampled;
  const ZPathSampler p(antisym(1.0), uniform_grid(steps));
  for (int i = 0; i < draws; ++i) {
    Rng rng = make_rng(6, i);
    std::normal_distribution<double> g;
    double b = 0, integral = 0;
    std::vector<double> row;
    std::size_t next = 0;
    for (int k = 1; k <= steps; ++k) {
      const double prev = b;
      b += g(rng) * std::sqrt(1.0 / steps);
      integral += 0.5 * (prev + b) / steps;
      if (next < at.size() && static_cast<std::size_t>(k) == at[next]) {
        const double t = static_cast<double>(k) / steps;
        row.push_back(t * b - 2 * integral);
        ++next;
      }
    }
    direct.push_back(row);
    Rng rng2 = make_rng(7, i);
    const auto path = p.sample(rng2);
    sampled.push_back({path[at[0]], path[at[1]], path[at[2]]});
  }
  for (std::size_t a = 0; a < at.size(); ++a)
    for (std::size_t b = a; b < at.size(); ++b) {
      const auto x = covariance(column(direct, a), column(direct, b));
      const auto y = covariance(column(sampled, a), column(sampled, b));
      CHECK(std::abs(x.value - y.value) <= 4 * std::hypot(x.std_error, y.std_error));
    }
  MomentAccumulator acc;
  for (const auto& r : direct) acc.add(r[2]);
  CHECK(std::abs(acc.variance() - 1.0 / 3) <= 0.03 / 3);
}

TEST_CASE("path and exact-grid methods agree") {
  const Eigen::MatrixXd s = antisym(1.0 / 16);
  const ZPathSampler path(s, uniform_grid(1024));
  const ZGridSampler grid(s, {0.25, 0.5, 1.0});
  const std::vector<std::size_t> at{256, 512, 1024};
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 40'000; ++i) {
    Rng r1 = make_rng(8, i), r2 = make_rng(9, i);
    const auto p = path.sample(r1);
    a.push_back({p[at[0]], p[at[1]], p[at[2]]});
    b.push_back(grid.sample(r2));
  }
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = x; y < 3; ++y) {
      const auto ca = covariance(column(a, x), column(a, y));
      const auto cb = covariance(column(b, x), column(b, y));
      CHECK(std::abs(ca.value - cb.value) <= 4 * std::hypot(ca.std_error, cb.std_error));
    }
}

TEST_CASE("scaling sigma by four doubles the spread") {
  const Eigen::MatrixXd s = antisym(1.0 / 12);
  const ZGridSampler one(s, {1.0}), four(4 * s, {1.0});
  MomentAccumulator a, b;
  for (int i = 0; i < 50'000; ++i) {
    Rng r1 = make_rng(10, i), r2 = make_rng(11, i);
    a.add(one.sample(r1)[0]);
    b.add(four.sample(r2)[0]);
  }
  CHECK(std::sqrt(b.variance() / a.variance()) == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("Z_1 is Gaussian") {
  Eigen::MatrixXd s(3, 3);
  s << 2, -1, 0.5, -1, 1.5, 0, 0.5, 0, 1;
  const ZPathSampler p(s, uniform_grid(256));
  const double sd = std::sqrt(sigma2(s));
  std::vector<double> z;
  for (int i = 0; i < 100'000; ++i) {
    Rng rng = make_rng(12, i);
    z.push_back(p.sample(rng).back() / sd);
  }
  CHECK(ks_distance_normal(z) < 1.9495 / std::sqrt(static_cast<double>(z.size())));
}

TEST_CASE("joint sampler") {
  const Eigen::MatrixXd s = antisym(0.25);
  SUBCASE("identical kernels give identical paths") {
    const JointPathSampler j(s, s, s, uniform_grid(64));
    Rng rng = make_rng(13, 0);
    const auto [z, zt] = j.sample(rng);
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(std::abs(z[k] - zt[k]) <= 1e-8);
  }
  SUBCASE("zero cross covariance and zero sigma") {
    Eigen::MatrixXd st(1, 1);
    st << 3.0;
    const JointPathSampler j(Eigen::MatrixXd::Zero(2, 2), st, Eigen::MatrixXd::Zero(1, 2), uniform_grid(16));
    MomentAccumulator acc;
    for (int i = 0; i < 50'000; ++i) {
      Rng rng = make_rng(14, i);
      const auto [z, zt] = j.sample(rng);
      CHECK(z.back() == 0.0);
      acc.add(zt.back() - 0.7 * z.back());
    }
    CHECK(acc.variance() == doctest::Approx(3.0).epsilon(0.03));
  }
  SUBCASE("geometric block structure") {
    Eigen::MatrixXd sf(1, 1), st(1, 1), cross(1, 1);
    sf << 2;
    st << 22;
    cross << 6;
    const double c = 1.0;  // (d-1)! mu~ / ((d~-1)! mu) with mu = mu~ = 2
    const double target = 6.0 / std::pow(1.0 / 2.0, 1.0);
    MomentAccumulator acc;
    const JointPathSampler j(sf, st, cross, uniform_grid(8));
    for (int i = 0; i < 100'000; ++i) {
      Rng rng = make_rng(15, i);
      const auto [z, zt] = j.sample(rng);
      acc.add(zt.back() - c * z.back());
    }
    CHECK(std::abs(acc.variance() - target) <= 3 * target * std::sqrt(2.0 / 100'000));
  }
  SUBCASE("indefinite stacked covariance is rejected") {
    Eigen::MatrixXd one(1, 1), cross(1, 1);
    one << 1;
    cross << 5;
    CHECK_THROWS_AS(JointPathSampler(one, one, cross, uniform_grid(4)), ConfigError);
  }
}
