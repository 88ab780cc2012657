#include "useq/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "useq/errors.hpp"
#include "useq/kernels.hpp"
#include "useq/sources.hpp"
#include "useq/ucore.hpp"

namespace useq {

namespace {

std::vector<Scenario> make_registry() {
  std::vector<Scenario> v;
  {
    Scenario s;
    s.id = "estring-10";
    s.description = "occurrences of the substring pattern 10 in a fair binary string";
    s.kernel = "pattern:10@binary";
    s.dist = "bernoulli:0.5@binary";
    s.n = 2000;
    s.x = 500000;  // n(x) = 2000
    s.reps = 2000;
    s.theorem = "clt";
    s.expected = {{"mu", 0.25, "1/4", "derived", true}, {"sigma2", 1.0 / 48, "1/48", "derived", true}};
    v.push_back(s);
  }
  {
    Scenario s;
    s.id = "eperm-inversions";
    s.description = "inversions of a uniform random permutation";
    s.kernel = "permpattern:21";
    s.dist = "uniform01";
    s.n = 2000;
    s.reps = 2000;
    s.theorem = "clt";
    s.expected = {{"mu", 0.5, "1/2", "derived", true}, {"sigma2", 1.0 / 36, "1/36", "derived", true}};
    v.push_back(s);
  }
  {
    Scenario s;
    s.id = "e22-antisym";
    s.description = "antisymmetric pair kernel sign(x2 - x1) with sigma_11 = sigma_22 = -sigma_12";
    s.kernel = "antisym-sign";
    s.dist = "uniform01";
    s.n = 2000;
    s.reps = 2000;
    s.theorem = "fclt";
    s.expected = {{"mu", 0.0, "0", "derived", true},
                  {"sigma_11", 1.0 / 3, "1/3", "derived", true},
                  {"sigma2", 1.0 / 9, "1/9", "derived", true}};
    v.push_back(s);
  }
  {
    Scenario s;
    s.id = "eperm1-blocks";
    s.description = "block lengths Ge(1/2); pairs inside blocks counted at the block sum n";
    s.kernel = "identity";
    s.companion = "blocks:2";
    s.dist = "geom:0.5";
    s.n = 5000;
    s.x = 5000;
    s.reps = 5000;
    s.theorem = "stopped";
    s.condition = "exact-hit";
    s.expected = {{"mu", 2.0, "2", "derived", true},
                  {"sigma2", 2.0, "2", "derived", true},
                  {"mu_tilde", 2.0, "2", "derived", true},
                  {"gamma2", 6.0, "6", "derived", true}};
    v.push_back(s);
  }
  {
    Scenario s;
    const double sqrt5 = std::sqrt(5.0);
    s.id = "eperm2-golden";
    s.description = "block lengths 1 or 2 with P(1) = p, P(2) = p^2, p the golden-ratio conjugate";
    s.kernel = "identity";
    s.companion = "blocks:2";
    s.dist = "golden-blocks";
    s.n = 5000;
    s.x = 5000;
    s.reps = 5000;
    s.theorem = "stopped";
    s.condition = "exact-hit";
    s.expected = {{"mu", (5 - sqrt5) / 2, "(5 - sqrt 5)/2", "derived", true},
                  {"centering_coefficient", (5 - sqrt5) / 10, "(5 - sqrt 5)/10", "derived", true},
                  {"gamma2", std::pow(5.0, -1.5), "5^(-3/2)", "derived", true},
                  {"paper_centering_coefficient", (3 - sqrt5) / 2, "(3 - sqrt 5)/2", "paper-reference", false},
                  {"paper_gamma2", std::pow(5.0, -1.5), "5^(-3/2)", "paper-reference", false}};
    v.push_back(s);
  }
  {
    Scenario s;
    s.id = "antisym-sine-degenerate";
    s.description = "sin(x1 - x2) on the circle: every projection vanishes";
    s.kernel = "antisym-sine";
    s.dist = "uniform2pi";
    s.n = 2000;
    s.reps = 2000;
    s.theorem = "degeneracy";
    s.method = "mc";
    s.expected = {{"mu", 0.0, "0", "derived", true}, {"sigma2", 0.0, "0", "derived", true}};
    v.push_back(s);
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const std::string& origin, int line, int col, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
}

double parse_number(const std::string& text, const std::string& origin, int line, int col, const std::string& key) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (text.empty() || pos != text.size() || !std::isfinite(v))
    fail(origin, line, col, "malformed number '" + text + "' for key '" + key + "'");
  return v;
}

std::int64_t parse_count(const std::string& text, const std::string& origin, int line, int col,
                         const std::string& key, std::int64_t minimum) {
  const double v = parse_number(text, origin, line, col, key);
  if (v != std::floor(v) || v < static_cast<double>(minimum) || v > 9e15)
    fail(origin, line, col, "key '" + key + "' needs an integer >= " + std::to_string(minimum) + ", got '" + text + "'");
  return static_cast<std::int64_t>(v);
}

}  // namespace

const std::vector<Scenario>& builtin_scenarios() {
  static const std::vector<Scenario> registry = make_registry();
  return registry;
}

const Scenario& find_scenario(std::string_view id) {
  for (const auto& s : builtin_scenarios())
    if (s.id == id) return s;
  std::string known;
  for (const auto& s : builtin_scenarios()) known += (known.empty() ? "" : ", ") + s.id;
  throw ConfigError("unknown scenario '" + std::string(id) + "' (known: " + known + ")");
}

void validate_scenario(const Scenario& s) {
  const Kernel f = parse_kernel(s.kernel);
  const SampleSource src = SampleSource::parse(s.dist);
  try {
    validate_pairing(f, src);
    if (s.companion) validate_pairing(parse_kernel(*s.companion), src);
  } catch (const ConfigError& e) {
    throw ConfigError("kernel '" + s.kernel + "' and dist '" + s.dist + "' are incompatible: " + e.what());
  }
}

Scenario parse_config(std::string_view text, const std::string& origin) {
  Scenario s;
  s.id = "config";
  s.description = "loaded from " + origin;
  s.kernel.clear();
  s.dist.clear();
  bool have_n = false, have_x = false;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string body = raw;
    if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
    if (trim(body).empty()) continue;
    const auto eq = body.find('=');
    const int first_col = static_cast<int>(body.find_first_not_of(" \t")) + 1;
    if (eq == std::string::npos) fail(origin, line, first_col, "expected key=value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto value_off = body.find_first_not_of(" \t", eq + 1);
    const int value_col = static_cast<int>(value_off == std::string::npos ? eq + 1 : value_off) + 1;
    if (key.empty()) fail(origin, line, first_col, "empty key");
    if (value.empty()) fail(origin, line, value_col, "empty value for key '" + key + "'");

    if (key == "kernel") {
      s.kernel = value;
    } else if (key == "companion") {
      s.companion = value;
    } else if (key == "dist") {
      s.dist = value;
    } else if (key == "n") {
      s.n = parse_count(value, origin, line, value_col, key, 1);
      have_n = true;
    } else if (key == "x") {
      s.x = parse_number(value, origin, line, value_col, key);
      if (s.x < 0) fail(origin, line, value_col, "threshold x must be nonnegative");
      have_x = true;
    } else if (key == "reps") {
      s.reps = parse_count(value, origin, line, value_col, key, 2);
    } else if (key == "tolerance.variance") {
      s.variance_tolerance = parse_number(value, origin, line, value_col, key);
      if (s.variance_tolerance < 0) fail(origin, line, value_col, "tolerance.variance must be nonnegative");
    } else if (key == "tolerance.ks") {
      s.ks_threshold = parse_number(value, origin, line, value_col, key);
      if (s.ks_threshold < 0) fail(origin, line, value_col, "tolerance.ks must be nonnegative");
    } else {
      fail(origin, line, first_col,
           "unknown key '" + key + "' (kernel, companion, dist, n, x, reps, tolerance.variance, tolerance.ks)");
    }
  }
  if (s.kernel.empty()) fail(origin, line + 1, 1, "missing required key 'kernel'");
  if (s.dist.empty()) fail(origin, line + 1, 1, "missing required key 'dist'");
  if (s.companion) {
    s.theorem = "stopped";
  } else if (have_x && !have_n) {
    s.theorem = "renewal";
  }
  validate_scenario(s);
  return s;
}

Scenario load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace useq
