#include <doctest.h>

#include <cmath>
#include <fstream>

#include "useq/errors.hpp"
#include "useq/harness.hpp"
#include "useq/scenario.hpp"

using namespace useq;

TEST_CASE("registry") {
  std::vector<std::string> ids;
  for (const auto& s : builtin_scenarios()) ids.push_back(s.id);
  for (const char* id : {"estring-10", "eperm-inversions", "e22-antisym", "eperm1-blocks", "eperm2-golden",
                         "antisym-sine-degenerate"})
    CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
  CHECK(find_scenario("estring-10").kernel == "pattern:10@binary");
  CHECK_THROWS_AS(find_scenario("nope"), ConfigError);
  for (const auto& s : builtin_scenarios()) CHECK_NOTHROW(validate_scenario(s));
}

TEST_CASE("derived constants regenerate") {
  for (const auto& s : builtin_scenarios()) {
    const Prepared p = prepare(s);
    std::vector<Check> checks;
    const auto table = constants_table(s, p, &checks);
    CHECK(table.size() == s.expected.size());
    for (const auto& c : checks)
      if (c.gating) CHECK_MESSAGE(c.passed, s.id << " " << c.name);
  }
}

TEST_CASE("reference constants are printed but never gate") {
  const Scenario& s = find_scenario("eperm2-golden");
  int refs = 0;
  for (const auto& e : s.expected)
    if (e.provenance == "paper-reference") {
      ++refs;
      CHECK_FALSE(e.gating);
    }
  CHECK(refs == 2);
  const auto table = constants_table(s, prepare(s), nullptr);
  bool seen_centering = false, seen_gamma = false;
  for (const auto& row : table) {
    if (row["name"] == "paper_centering_coefficient") {
      seen_centering = true;
      CHECK(row["expected"].get<double>() == doctest::Approx((3 - std::sqrt(5.0)) / 2));
      CHECK_FALSE(row["gating"].get<bool>());
    }
    if (row["name"] == "paper_gamma2") {
      seen_gamma = true;
      CHECK(row["expected"].get<double>() == doctest::Approx(std::pow(5.0, -1.5)));
    }
  }
  CHECK(seen_centering);
  CHECK(seen_gamma);
}

TEST_CASE("config parsing") {
  const Scenario s = parse_config(
      "# custom\n"
      "kernel = pattern:110@binary\n"
      "dist = bernoulli:0.5@binary\n"
      "n = 500\n"
      "reps = 300\n"
      "tolerance.variance = 0.2\n",
      "t.conf");
  CHECK(s.kernel == "pattern:110@binary");
  CHECK(s.n == 500);
  CHECK(s.reps == 300);
  CHECK(s.variance_tolerance == 0.2);
  CHECK(s.theorem == "clt");

  const Scenario r = parse_config("kernel = identity\ndist = geom:0.5\nx = 1000\n");
  CHECK(r.theorem == "renewal");
  const Scenario st = parse_config("kernel = identity\ncompanion = blocks:2\ndist = geom:0.5\nx = 100\n");
  CHECK(st.theorem == "stopped");
}

TEST_CASE("config errors carry positions") {
  auto message = [](std::string_view text) -> std::string {
    try {
      parse_config(text, "bad.conf");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("kernel = identity\nfoo = 1\n").rfind("bad.conf:2:", 0) == 0);
  CHECK(message("kernel = identity\ndist = geom:0.5\nn = 12x\n").rfind("bad.conf:3:", 0) == 0);
  CHECK(message("kernel = identity\ndist = geom:0.5\nreps = 2.5\n").rfind("bad.conf:3:", 0) == 0);
  CHECK(message("kernel identity\n").rfind("bad.conf:1:", 0) == 0);
  CHECK(message("kernel = identity\ndist = geom:0.5\ntolerance.ks = -1\n").rfind("bad.conf:3:", 0) == 0);
  CHECK_FALSE(message("kernel = permpattern:21\ndist = bernoulli:0.5@binary\n").empty());
  CHECK_FALSE(message("dist = geom:0.5\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/useq.conf"), ConfigError);
}

TEST_CASE("load config from a file") {
  const std::string path = "scenario_test.conf";
  {
    std::ofstream f(path);
    f << "kernel = permpattern:21\ndist = uniform01\nn = 100\n";
  }
  const Scenario s = load_config(path);
  CHECK(s.kernel == "permpattern:21");
  CHECK(s.n == 100);
  std::remove(path.c_str());
}
