#include "useq/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "useq/errors.hpp"
#include "useq/gausssim.hpp"

#ifndef USEQ_ARTIFACT_VERSION
#define USEQ_ARTIFACT_VERSION "0.1.0"
#endif

namespace useq {

std::string artifact_version() { return USEQ_ARTIFACT_VERSION; }

int resolve_threads(std::optional<int> flag) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--threads must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("USEQ_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096) throw ConfigError(std::string("USEQ_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double variance_tolerance(const Scenario& s, const HarnessOptions& o) {
  return o.variance_tolerance.value_or(s.variance_tolerance);
}
double ks_threshold(const Scenario& s, const HarnessOptions& o) { return o.ks_threshold.value_or(s.ks_threshold); }

Check make_check(std::string name, double value, double lo, double hi, bool gating = true, std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.lower = lo;
  c.upper = hi;
  c.gating = gating;
  c.passed = std::isfinite(value) && value >= lo && value <= hi;
  c.note = std::move(note);
  return c;
}

json base_config(const Scenario& s, const std::string& theorem, std::uint64_t seed, std::int64_t reps,
                 const HarnessOptions& o) {
  json c;
  c["scenario"] = s.id;
  c["kernel"] = s.kernel;
  c["companion"] = s.companion ? json(*s.companion) : json(nullptr);
  c["dist"] = s.dist;
  c["theorem"] = theorem;
  c["reps"] = reps;
  c["seed"] = seed;
  c["confidence_level"] = o.level;
  c["tolerance"] = {{"variance", variance_tolerance(s, o)}, {"ks", ks_threshold(s, o)}};
  c["projection"] = {{"method", s.method ? json(*s.method) : json("auto")},
                     {"budget", o.projection.budget},
                     {"seed", o.projection.seed},
                     {"grid_points", o.projection.grid_points}};
  return c;
}

MCReport start_report(const Scenario& s, const std::string& theorem, std::int64_t reps, std::uint64_t seed,
                      const HarnessOptions& o) {
  if (reps < 2) throw ConfigError("at least two replications are needed");
  MCReport r;
  r.scenario = s.id;
  r.theorem = theorem;
  r.reps = reps;
  r.seed = seed;
  r.threads = o.threads;
  r.config = base_config(s, theorem, seed, reps, o);
  return r;
}

// Moments, KS and the variance-ratio / KS checks of a standardized sample.
void summarize(MCReport& r, const std::vector<double>& xs, double predicted_variance, double tol, double ks_thr,
               double level, bool gate_ks = true) {
  r.moments = MomentAccumulator();
  for (double v : xs) r.moments.add(v);
  r.mean_half_width = mean_half_width(r.moments, level);
  r.variance_half_width = variance_half_width(r.moments, level);
  r.ks = ks_distance_normal(xs);
  r.predicted_variance = predicted_variance;
  r.variance_ratio = r.moments.variance() / predicted_variance;
  r.checks.push_back(make_check("variance_ratio", r.variance_ratio, 1 - tol, 1 + tol));
  r.checks.push_back(make_check("ks_distance", r.ks, 0, ks_thr, gate_ks));

  const double z = normal_critical(level);
  const double normal_moments[] = {0.0, 1.0, 0.0, 3.0};
  r.moment_table = json::array();
  for (int k = 1; k <= 4; ++k) {
    MomentAccumulator pk;
    for (double v : xs) pk.add(std::pow(v, k));
    const double hw = z * std::sqrt(pk.variance() / static_cast<double>(xs.size()));
    r.moment_table.push_back({{"order", k},
                              {"empirical", num(pk.mean())},
                              {"half_width", num(hw)},
                              {"normal", normal_moments[k - 1]},
                              {"within_interval", std::abs(pk.mean() - normal_moments[k - 1]) <= hw}});
  }
}

void finish(MCReport& r, Clock::time_point start) {
  r.passed = true;
  for (const auto& c : r.checks)
    if (c.gating && !c.passed) r.passed = false;
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
}

ProjectionModel project(const Kernel& k, const SampleSource& src, const std::optional<std::string>& method,
                        const ProjectionOptions& opt) {
  if (method) return hoeffding_projections(k, src, parse_projection_method(*method), opt);
  return auto_projections(k, src, opt);
}

std::optional<Rational> exact_of(const std::string& text) {
  try {
    return parse_rational(text);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

std::map<double, double> empirical_law(const std::vector<double>& xs) {
  std::map<double, double> m;
  for (double v : xs) m[v] += 1.0 / static_cast<double>(xs.size());
  return m;
}

}  // namespace

nlohmann::json MCReport::to_json(bool runtime) const {
  json j;
  j["schema"] = "useq.report/1";
  j["artifact_version"] = artifact_version();
  j["scenario"] = scenario;
  j["theorem"] = theorem;
  j["replications"] = reps;
  j["master_seed"] = seed;
  j["config"] = config;
  j["statistic"] = {{"mean", num(moments.mean())},
                    {"mean_half_width", num(mean_half_width)},
                    {"variance", num(moments.variance())},
                    {"variance_half_width", num(variance_half_width)},
                    {"predicted_variance", num(predicted_variance)},
                    {"variance_ratio", num(variance_ratio)},
                    {"ks_distance", num(ks)},
                    {"count", moments.count()}};
  j["moments"] = moment_table;
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name},
                  {"value", num(c.value)},
                  {"lower", num(c.lower)},
                  {"upper", num(c.upper)},
                  {"gating", c.gating},
                  {"passed", c.passed},
                  {"note", c.note}});
  j["checks"] = cs;
  j["details"] = details;
  j["passed"] = passed;
  if (runtime) j["runtime"] = {{"threads", threads}, {"wall_seconds", wall_seconds}};
  return j;
}

void MCReport::write_csv(std::ostream& out) const {
  out << "rep,statistic,overshoot\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << i << ',' << format_number(samples[i]) << ',';
    if (i < overshoots.size()) out << format_number(overshoots[i]);
    out << '\n';
  }
}

const Check* MCReport::find_check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

Prepared prepare(const Scenario& s, const ProjectionOptions& options) {
  Kernel f = parse_kernel(s.kernel);
  SampleSource src = SampleSource::parse(s.dist);
  std::optional<Kernel> ft;
  if (s.companion) ft = parse_kernel(*s.companion);
  validate_scenario(s);
  ProjectionModel model = project(f, src, s.method, options);
  LimitLaw law = make_limit_law(model);
  std::optional<ProjectionModel> mt;
  std::optional<JointLimitLaw> joint;
  if (ft) {
    mt = project(*ft, src, s.method, options);
    joint = make_joint_limit_law(model, *mt, src);
  }
  return Prepared{std::move(f), std::move(ft), std::move(src), std::move(model), std::move(mt), std::move(law),
                  std::move(joint)};
}

nlohmann::json constants_table(const Scenario& s, const Prepared& p, std::vector<Check>* checks) {
  json table = json::array();
  for (const auto& e : s.expected) {
    std::optional<double> computed;
    std::optional<Rational> computed_exact;
    if (e.name == "mu") {
      computed = p.model.mu;
      computed_exact = p.model.mu_exact;
    } else if (e.name == "sigma2") {
      computed = p.law.sigma2;
      computed_exact = p.law.sigma2_exact;
    } else if (e.name == "sigma_11") {
      computed = p.model.sigma(0, 0);
      if (p.model.sigma_exact) computed_exact = (*p.model.sigma_exact)[0][0];
    } else if (e.name == "mu_tilde" && p.joint) {
      computed = p.joint->mu_tilde;
      if (p.model_tilde) computed_exact = p.model_tilde->mu_exact;
    } else if (e.name == "gamma2" && p.joint) {
      computed = p.joint->gamma2;
      computed_exact = p.joint->gamma2_exact;
    } else if (e.name == "centering_coefficient" && p.joint) {
      const int d = p.joint->d, dt = p.joint->d_tilde;
      computed = p.joint->mu_tilde / to_double(factorial(dt)) *
                 std::pow(to_double(factorial(d)) / p.joint->mu, static_cast<double>(dt) / d);
    }
    json row = {{"name", e.name},
                {"expected", e.value},
                {"expected_exact", e.exact},
                {"provenance", e.provenance},
                {"gating", e.gating && p.model.exact()}};
    if (computed) row["computed"] = num(*computed);
    if (computed_exact) row["computed_exact"] = to_string(*computed_exact);
    if (!p.model.exact() && computed) row["comparison"] = "monte-carlo estimate, not gated";
    if (!e.gating || !computed || !p.model.exact()) {
      if (checks && computed && e.gating)
        checks->push_back(make_check("constant:" + e.name, std::abs(*computed - e.value), 0, INFINITY, false,
                                     "monte-carlo estimate"));
      table.push_back(row);
      continue;
    }
    bool ok;
    double deviation;
    const auto expected_exact = exact_of(e.exact);
    if (computed_exact && expected_exact) {
      ok = *computed_exact == *expected_exact;
      deviation = std::abs(to_double(*computed_exact - *expected_exact));
      row["comparison"] = "exact";
    } else {
      deviation = std::abs(*computed - e.value);
      ok = deviation <= 1e-12 * std::max(1.0, std::abs(e.value));
      row["comparison"] = "float, 1e-12 relative";
    }
    row["passed"] = ok;
    if (checks) {
      Check c = make_check("constant:" + e.name, deviation, 0, 1e-12 * std::max(1.0, std::abs(e.value)));
      c.passed = ok;
      checks->push_back(c);
    }
    table.push_back(row);
  }
  return table;
}

MCReport mc_clt_ustat(const Scenario& s, std::int64_t n, std::int64_t reps, std::uint64_t seed,
                      const HarnessOptions& opt) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "clt", reps, seed, opt);
  r.config["n"] = n;
  const Prepared p = prepare(s, opt.projection);
  if (p.law.degenerate)
    throw DegenerateLimit("scenario '" + s.id + "' has a degenerate limit (" + p.law.degeneracy.statement +
                          "); standardization refused, see the degeneracy flag of `useq limits`");
  if (n < p.f.arity()) throw ConfigError("n must be at least the kernel arity");
  r.details["constants"] = constants_table(s, p, &r.checks);
  const Recipe rc = centering_and_scaling(Theorem::clt, {p.f.arity(), p.model.mu, p.law.sigma2}, static_cast<double>(n));
  r.details["center"] = rc.center;
  r.details["scale"] = rc.scale;
  r.details["sigma2"] = p.law.sigma2;

  r.samples = parallel_map<double>(reps, opt.threads, [&](std::int64_t rep) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(rep));
    UStream u(p.f);
    for (std::int64_t i = 0; i < n; ++i) u.push(p.source.draw(rng));
    return (u.value() - rc.center) / rc.scale;
  });
  summarize(r, r.samples, 1.0, variance_tolerance(s, opt), ks_threshold(s, opt), opt.level);
  if (!opt.keep_samples) r.samples.clear();
  finish(r, start);
  return r;
}

MCReport mc_fclt(const Scenario& s, std::int64_t n, const std::vector<double>& grid, std::int64_t reps,
                 std::uint64_t seed, const HarnessOptions& opt) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "fclt", reps, seed, opt);
  r.config["n"] = n;
  r.config["grid"] = grid;
  if (grid.empty()) throw ConfigError("fclt needs a nonempty time grid");
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (grid[k] < 0 || (k > 0 && grid[k] <= grid[k - 1])) throw ConfigError("fclt grid must be increasing and >= 0");
  const Prepared p = prepare(s, opt.projection);
  if (p.law.degenerate)
    throw DegenerateLimit("scenario '" + s.id + "' has a degenerate limit; standardization refused");
  r.details["constants"] = constants_table(s, p, &r.checks);
  const int d = p.f.arity();
  const std::size_t m = grid.size();
  std::vector<std::int64_t> stops(m);
  for (std::size_t k = 0; k < m; ++k) stops[k] = static_cast<std::int64_t>(std::floor(n * grid[k] + 1e-9));
  const std::int64_t last = stops.back();

  const auto rows = parallel_map<std::vector<double>>(reps, opt.threads, [&](std::int64_t rep) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(rep));
    UStream u(p.f);
    std::vector<double> out(m);
    std::size_t k = 0;
    for (std::int64_t i = 0; i <= last; ++i) {
      if (i > 0) u.push(p.source.draw(rng));
      while (k < m && stops[k] == i) {
        const Recipe rc = centering_and_scaling(Theorem::fclt, {d, p.model.mu, p.law.sigma2, 1, 0, 0, grid[k]},
                                                static_cast<double>(n));
        out[k] = (u.value() - rc.center) / rc.scale;
        ++k;
      }
    }
    return out;
  });

  std::vector<std::vector<double>> cols(m, std::vector<double>(reps));
  for (std::int64_t i = 0; i < reps; ++i)
    for (std::size_t k = 0; k < m; ++k) cols[k][i] = rows[i][k];

  json cov = json::array();
  double worst = 0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      const auto est = covariance(cols[a], cols[b]);
      const double pred = p.law.cov(grid[a], grid[b]);
      const double zdev = est.std_error > 0 ? std::abs(est.value - pred) / est.std_error
                                            : (std::abs(est.value - pred) > 1e-12 ? INFINITY : 0.0);
      worst = std::max(worst, zdev);
      cov.push_back({{"s", grid[a]},
                     {"t", grid[b]},
                     {"empirical", num(est.value)},
                     {"std_error", num(est.std_error)},
                     {"predicted", num(pred)},
                     {"deviation_in_se", num(zdev)}});
    }
  r.details["covariance"] = cov;
  r.checks.push_back(make_check("max_covariance_deviation_se", worst, 0, 3.0));

  json per_time = json::array();
  for (std::size_t k = 0; k < m; ++k) {
    const double v = p.law.cov(grid[k], grid[k]);
    if (grid[k] == 0.0) {
      double mx = 0;
      for (double x : cols[k]) mx = std::max(mx, std::abs(x));
      r.checks.push_back(make_check("zero_time_column", mx, 0, 0));
      continue;
    }
    std::vector<double> z(cols[k]);
    for (auto& x : z) x /= std::sqrt(v);
    per_time.push_back({{"t", grid[k]}, {"ks_distance", ks_distance_normal(z)}});
  }
  r.details["ks_by_time"] = per_time;

  // The summary statistic is Z at the last grid time.
  std::vector<double> z(cols.back());
  const double vt = p.law.cov(grid.back(), grid.back());
  for (auto& x : z) x /= std::sqrt(vt);
  summarize(r, z, 1.0, variance_tolerance(s, opt), ks_threshold(s, opt), opt.level, false);
  // Covariance deviations already gate the variance at each time.
  r.checks[r.checks.size() - 2].gating = false;
  if (opt.keep_samples) r.samples = std::move(z);
  finish(r, start);
  return r;
}

MCReport mc_renewal_clt(const Scenario& s, double x, std::int64_t reps, std::uint64_t seed,
                        const HarnessOptions& opt) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "renewal", reps, seed, opt);
  r.config["x"] = x;
  const Prepared p = prepare(s, opt.projection);
  if (p.law.degenerate)
    throw DegenerateLimit("scenario '" + s.id + "' has a degenerate limit; standardization refused");
  r.details["constants"] = constants_table(s, p, &r.checks);
  const int d = p.f.arity();
  const RenewalExperiment exp(p.f, nullptr, p.source, p.model.mu);
  const RecipeParams rp{d, p.model.mu, p.law.sigma2};
  const Recipe tr = centering_and_scaling(Theorem::tr, rp, x);
  const Recipe tnn = centering_and_scaling(Theorem::tnn, rp, x);
  const Recipe trpe = centering_and_scaling(Theorem::trpe, rp, x);
  const Recipe trpv = centering_and_scaling(Theorem::trpv, rp, x);

  const auto outs = parallel_map<RenewalOutcome>(reps, opt.threads, [&](std::int64_t rep) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(rep));
    return exp.run(x, rng);
  });
  MomentAccumulator nminus, nplus;
  std::vector<double> z(reps);
  std::int64_t heuristic = 0;
  for (std::int64_t i = 0; i < reps; ++i) {
    nminus.add(static_cast<double>(outs[i].n_minus));
    nplus.add(static_cast<double>(outs[i].n_plus));
    z[i] = (static_cast<double>(outs[i].n_minus) - tr.center) / tr.scale;
    if (!outs[i].nminus_exact) ++heuristic;
    r.overshoots.push_back(outs[i].overshoot);
  }
  const double tol = variance_tolerance(s, opt);
  summarize(r, z, 1.0, tol, ks_threshold(s, opt), opt.level);
  const double lln = nminus.mean() / tnn.scale / tnn.limit;
  r.checks.push_back(make_check("lln_ratio", lln, 1 - 0.015, 1 + 0.015));
  r.checks.push_back(make_check("mean_ratio", nminus.mean() / trpe.scale, 1 - tol, 1 + tol));
  r.checks.push_back(make_check("variance_asymptotic_ratio", nminus.variance() / trpv.scale, 1 - tol, 1 + tol));
  r.details["n_of_x"] = renewal_scale(d, p.model.mu, x);
  r.details["n_minus"] = {{"mean", nminus.mean()}, {"variance", nminus.variance()}};
  r.details["n_plus"] = {{"mean", nplus.mean()}, {"variance", nplus.variance()}};
  r.details["n_minus_over_x_scale"] = nminus.mean() / tnn.scale;
  r.details["lln_limit"] = tnn.limit;
  r.details["predicted_variance_n"] = trpv.scale;
  r.details["nminus_heuristic_count"] = heuristic;
  if (opt.keep_samples) r.samples = std::move(z);
  else r.overshoots.clear();
  finish(r, start);
  return r;
}

MCReport mc_stopped_clt(const Scenario& s, double x, std::int64_t reps, std::uint64_t seed,
                        const Conditioning& condition, const HarnessOptions& opt) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "stopped", reps, seed, opt);
  r.config["x"] = x;
  r.config["condition"] = condition.to_string();
  const Prepared p = prepare(s, opt.projection);
  if (!p.f_tilde) throw ConfigError("scenario '" + s.id + "' has no companion kernel");
  const JointLimitLaw& jl = *p.joint;
  if (jl.degenerate_pair && !opt.degeneracy_branch)
    throw DegenerateLimit("companion gives gamma^2 = 0 for scenario '" + s.id +
                          "'; rerun with the degeneracy branch to check the collapse");
  r.details["constants"] = constants_table(s, p, &r.checks);
  const int d = jl.d, dt = jl.d_tilde;

  RenewalPolicy policy;
  const RenewalExperiment exp(p.f, &*p.f_tilde, p.source, p.model.mu, policy);
  const ConditionedRenewal cond(exp, condition);
  cond.check_threshold(x);

  const RecipeParams rp{d, jl.mu, p.law.sigma2, dt, jl.mu_tilde, jl.gamma2};
  const Recipe rc = centering_and_scaling(d == 1 ? Theorem::cvtau : Theorem::tvtau, rp, x);
  const double base_scale = std::pow(x, static_cast<double>(dt) / d - 1.0 / (2 * d));
  r.details["gamma2"] = jl.gamma2;
  r.details["c"] = jl.c;
  r.details["center"] = rc.center;
  r.details["cross_cov"] = json::array();
  for (int i = 0; i < jl.cross_cov.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < jl.cross_cov.cols(); ++j) row.push_back(jl.cross_cov(i, j));
    r.details["cross_cov"].push_back(row);
  }

  const auto outs = parallel_map<RenewalOutcome>(reps, opt.threads, [&](std::int64_t rep) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(rep));
    return cond.run(x, rng);
  });

  std::vector<double> scaled(reps), z(reps);
  MomentAccumulator companion;
  std::int64_t attempts = 0;
  for (std::int64_t i = 0; i < reps; ++i) {
    const double v = *outs[i].companion_value;
    companion.add(v);
    scaled[i] = (v - rc.center) / base_scale;
    r.overshoots.push_back(outs[i].overshoot);
    attempts += outs[i].attempts;
  }
  const double tol = variance_tolerance(s, opt);
  if (jl.degenerate_pair) {
    // gamma^2 = 0: Var(Utilde - center) / x^((2 dt - 1)/d) must collapse.
    MomentAccumulator acc;
    for (double v : scaled) acc.add(v);
    r.moments = acc;
    r.predicted_variance = 0;
    r.checks.push_back(make_check("collapsed_variance", acc.variance(), 0, tol));
    r.details["degenerate_pair"] = true;
    if (opt.keep_samples) r.samples = scaled;
  } else {
    for (std::int64_t i = 0; i < reps; ++i) z[i] = scaled[i] / std::sqrt(jl.gamma2);
    summarize(r, z, 1.0, tol, ks_threshold(s, opt), opt.level);
    MomentAccumulator sc;
    for (double v : scaled) sc.add(v);
    r.details["scaled_variance"] = sc.variance();
    r.details["scaled_variance_interval"] = {jl.gamma2 * (1 - tol), jl.gamma2 * (1 + tol)};
    const double corr = pearson_correlation(z, r.overshoots);
    r.details["overshoot_correlation"] = num(corr);
    if (std::isfinite(corr)) r.checks.push_back(make_check("overshoot_correlation", std::abs(corr), 0, 0.05));
    if (opt.keep_samples) r.samples = z;
  }
  r.details["lln_ratio"] = companion.mean() / (centering_and_scaling(Theorem::tvtau0, rp, x).limit *
                                               std::pow(x, static_cast<double>(dt) / d));
  r.details["acceptance_rate"] = static_cast<double>(reps) / static_cast<double>(attempts);

  if (d == 1 && condition.kind == Conditioning::Kind::none) {
    const auto law = overshoot_limit_law(p.f, p.source);
    if (law.lattice) {
      std::map<double, double> ref;
      for (std::size_t k = 0; k < law.values.size(); ++k) ref[law.values[k]] = law.probs[k];
      const double tv = total_variation(empirical_law(r.overshoots), ref);
      r.details["overshoot_total_variation"] = tv;
      r.checks.push_back(make_check("overshoot_total_variation", tv, 0, 0.02));
    }
  }
  if (!opt.keep_samples) r.overshoots.clear();
  finish(r, start);
  return r;
}

MCReport mc_degeneracy(const Scenario& s, std::uint64_t seed, const HarnessOptions& opt) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "degeneracy", 2, seed, opt);
  Scenario mc = s;
  mc.method = "mc";
  HarnessOptions o = opt;
  o.projection.seed = seed;
  const Prepared p = prepare(mc, o.projection);
  const auto& rep = p.law.degeneracy;
  r.details["degeneracy"] = {{"statement", rep.statement},
                             {"max_abs_projection", rep.max_abs_projection},
                             {"max_z", num(rep.max_z)},
                             {"tolerance_se", rep.tolerance},
                             {"mu", p.model.mu},
                             {"mu_std_error", p.model.mu_std_error},
                             {"sigma2", p.law.sigma2}};
  Check flag = make_check("degenerate_with_confidence", rep.max_z, 0, rep.tolerance);
  flag.note = rep.statement;
  r.checks.push_back(flag);
  bool refused = false;
  std::string message;
  try {
    mc_clt_ustat(mc, std::max<std::int64_t>(s.n, 2), 2, seed, o);
  } catch (const DegenerateLimit& e) {
    refused = true;
    message = e.what();
  }
  r.details["clt_refusal"] = message;
  Check c = make_check("clt_refused", refused ? 1.0 : 0.0, 1, 1);
  r.checks.push_back(c);
  finish(r, start);
  return r;
}

MCReport gaussian_cross_validation(const Scenario& s, std::int64_t draws, std::uint64_t seed,
                                   const HarnessOptions& opt, int path_steps, int grid_points) {
  const auto start = Clock::now();
  MCReport r = start_report(s, "gaussian", draws, seed, opt);
  r.config["path_steps"] = path_steps;
  r.config["grid_points"] = grid_points;
  const Prepared p = prepare(s, opt.projection);
  const Eigen::MatrixXd& sigma = p.model.sigma;
  const auto times = dyadic_grid(grid_points);
  const auto fine = uniform_grid(path_steps);
  std::vector<std::size_t> index(times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    index[k] = static_cast<std::size_t>(std::llround(times[k] * path_steps));

  const ZPathSampler path(sigma, fine);
  const ZGridSampler exact(sigma, times);
  const std::uint64_t path_seed = derive_seed(seed, 0), grid_seed = derive_seed(seed, 1);
  const auto path_rows = parallel_map<std::vector<double>>(draws, opt.threads, [&](std::int64_t i) {
    Rng rng = make_rng(path_seed, static_cast<std::uint64_t>(i));
    const auto z = path.sample(rng);
    std::vector<double> out(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) out[k] = z[index[k]];
    return out;
  });
  const auto grid_rows = parallel_map<std::vector<double>>(draws, opt.threads, [&](std::int64_t i) {
    Rng rng = make_rng(grid_seed, static_cast<std::uint64_t>(i));
    return exact.sample(rng);
  });

  const std::size_t m = times.size();
  std::vector<std::vector<double>> pc(m, std::vector<double>(draws)), gc(m, std::vector<double>(draws));
  for (std::int64_t i = 0; i < draws; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      pc[k][i] = path_rows[i][k];
      gc[k][i] = grid_rows[i][k];
    }
  double worst = 0;
  json cov = json::array();
  for (std::size_t a = 0; a < m; ++a) {
    if (times[a] == 0.0) continue;
    for (std::size_t b = a; b < m; ++b) {
      const auto ep = covariance(pc[a], pc[b]);
      const auto eg = covariance(gc[a], gc[b]);
      const double se = std::sqrt(ep.std_error * ep.std_error + eg.std_error * eg.std_error);
      const double dev = se > 0 ? std::abs(ep.value - eg.value) / se : 0.0;
      worst = std::max(worst, dev);
      cov.push_back({{"s", times[a]},
                     {"t", times[b]},
                     {"path", num(ep.value)},
                     {"exact_grid", num(eg.value)},
                     {"predicted", p.law.cov(times[a], times[b])},
                     {"deviation_in_se", num(dev)}});
    }
  }
  r.details["covariance"] = cov;
  r.checks.push_back(make_check("max_method_deviation_se", worst, 0, 3.0));

  double zero_time = 0;
  for (std::int64_t i = 0; i < draws; ++i) zero_time = std::max({zero_time, std::abs(pc[0][i]), std::abs(gc[0][i])});
  r.checks.push_back(make_check("zero_time", zero_time, 0, 0));

  if (p.law.sigma2 > 0) {
    std::vector<double> z(pc.back());
    for (auto& v : z) v /= std::sqrt(p.law.sigma2);
    const double ks_crit = 1.9495 / std::sqrt(static_cast<double>(draws));  // level 0.001
    summarize(r, z, 1.0, 0.03, ks_crit, opt.level);
  }

  if (p.joint) {
    const auto& jl = *p.joint;
    const JointPathSampler joint(sigma, p.model_tilde->sigma, jl.cross_cov, fine);
    const std::uint64_t joint_seed = derive_seed(seed, 2);
    const auto diffs = parallel_map<double>(draws, opt.threads, [&](std::int64_t i) {
      Rng rng = make_rng(joint_seed, static_cast<std::uint64_t>(i));
      const auto [z, zt] = joint.sample(rng);
      return zt.back() - jl.c * z.back();
    });
    MomentAccumulator acc;
    for (double v : diffs) acc.add(v);
    const double pred = jl.gamma2 / std::pow(to_double(factorial(jl.d)) / jl.mu, (2.0 * jl.d_tilde - 1) / jl.d);
    const double se = std::sqrt(std::max(0.0, acc.central_moment(4) - std::pow(acc.central_moment(2), 2)) /
                                static_cast<double>(draws));
    const double dev = se > 0 ? std::abs(acc.variance() - pred) / se : std::abs(acc.variance() - pred);
    r.details["joint"] = {{"empirical_variance", acc.variance()},
                          {"predicted_variance", pred},
                          {"std_error", se},
                          {"deviation_in_se", dev}};
    r.checks.push_back(make_check("joint_variance_deviation_se", dev, 0, 3.0));
  }
  finish(r, start);
  return r;
}

}  // namespace useq
