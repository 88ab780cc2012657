#include "useq/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "useq/errors.hpp"
#include "useq/gausssim.hpp"
#include "useq/harness.hpp"

namespace useq {

namespace {

using json = nlohmann::json;

struct Source {
  std::string scenario;
  std::string kernel;
  std::string dist;
  std::string companion;
  std::string config;
};

void add_source_options(CLI::App* app, Source& s, bool companion = true) {
  app->add_option("--scenario", s.scenario, "built-in scenario id");
  app->add_option("--kernel", s.kernel, "kernel spec, e.g. pattern:10@binary");
  app->add_option("--dist", s.dist, "source spec, e.g. bernoulli:0.5@binary");
  if (companion) app->add_option("--companion", s.companion, "companion kernel spec");
  app->add_option("--config", s.config, "key=value config file");
}

Scenario resolve(const Source& s) {
  Scenario out;
  if (!s.config.empty()) {
    out = load_config(s.config);
  } else if (!s.scenario.empty()) {
    out = find_scenario(s.scenario);
  } else {
    if (s.kernel.empty() || s.dist.empty())
      throw ConfigError("give --scenario, --config, or both --kernel and --dist");
    out.id = "custom";
    out.kernel = s.kernel;
    out.dist = s.dist;
    out.expected.clear();
  }
  if (!s.kernel.empty() && s.config.empty() && !s.scenario.empty()) out.kernel = s.kernel;
  if (!s.dist.empty() && s.config.empty() && !s.scenario.empty()) out.dist = s.dist;
  if (!s.companion.empty()) out.companion = s.companion;
  validate_scenario(out);
  return out;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

json rational_matrix_json(const RationalMatrix& m) {
  json a = json::array();
  for (const auto& r : m) {
    json row = json::array();
    for (const auto& v : r) row.push_back(to_string(v));
    a.push_back(row);
  }
  return a;
}

json limits_json(const Scenario& s, const Prepared& p, const ProjectionOptions& po) {
  json j;
  j["schema"] = "useq.limits/1";
  j["artifact_version"] = artifact_version();
  j["config"] = {{"scenario", s.id},
                 {"kernel", s.kernel},
                 {"dist", s.dist},
                 {"companion", s.companion ? json(*s.companion) : json(nullptr)},
                 {"method", s.method ? json(*s.method) : json("auto")},
                 {"budget", po.budget},
                 {"seed", po.seed}};
  j["d"] = p.model.d;
  j["method"] = to_string(p.model.method);
  j["detail"] = p.model.detail;
  j["mu"] = p.model.mu;
  if (p.model.mu_exact) j["mu_exact"] = to_string(*p.model.mu_exact);
  if (!p.model.exact()) j["mu_std_error"] = p.model.mu_std_error;
  j["sigma"] = matrix_json(p.model.sigma);
  if (p.model.sigma_exact) j["sigma_exact"] = rational_matrix_json(*p.model.sigma_exact);
  if (!p.model.exact()) j["sigma_std_error"] = matrix_json(p.model.sigma_std_error);
  j["error_bound"] = p.model.error_bound;
  j["sigma2"] = p.law.sigma2;
  if (p.law.sigma2_exact) j["sigma2_exact"] = to_string(*p.law.sigma2_exact);
  j["cov_coefficients"] = p.law.cov.coeffs;
  j["degenerate"] = p.law.degenerate;
  j["degeneracy"] = {{"exact", p.law.degeneracy.exact},
                     {"statement", p.law.degeneracy.statement},
                     {"max_abs_projection", p.law.degeneracy.max_abs_projection}};
  if (p.joint) {
    const auto& jl = *p.joint;
    json c;
    c["d_tilde"] = jl.d_tilde;
    c["mu_tilde"] = jl.mu_tilde;
    c["c"] = jl.c;
    c["cross_cov"] = matrix_json(jl.cross_cov);
    c["gamma2"] = jl.gamma2;
    if (jl.gamma2_exact) c["gamma2_exact"] = to_string(*jl.gamma2_exact);
    c["degenerate_pair"] = jl.degenerate_pair;
    j["companion"] = c;
  }
  j["constants"] = constants_table(s, p, nullptr);
  return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"useq: asymmetric U-statistics, their limit laws and renewal experiments", "useq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  // limits
  Source lsrc;
  std::string lmethod = "auto", lout;
  ProjectionOptions lpo;
  auto* limits = app.add_subcommand("limits", "projections, sigma^2, covariance polynomial and gamma^2 as JSON");
  add_source_options(limits, lsrc);
  limits->add_option("--method", lmethod, "exact|order|mc|auto")->check(CLI::IsMember({"exact", "order", "mc", "auto"}));
  limits->add_option("--budget", lpo.budget, "enumeration cap or monte-carlo sample count")->check(CLI::PositiveNumber);
  limits->add_option("--seed", lpo.seed, "seed for monte-carlo projections");
  limits->add_option("--out", lout, "write JSON here instead of stdout");

  // zpath
  Source zsrc;
  int zgrid = 2048, zpoints = 17;
  std::int64_t zdraws = 1000;
  std::uint64_t zseed = 1;
  std::string zformat = "json", zmethod = "path", zout;
  std::optional<int> zthreads;
  auto* zpath = app.add_subcommand("zpath", "simulate the Gaussian limit process");
  add_source_options(zpath, zsrc, false);
  zpath->add_option("--grid", zgrid, "time steps of the path sampler")->check(CLI::PositiveNumber);
  zpath->add_option("--points", zpoints, "evenly spaced points of the exact-grid sampler")->check(CLI::Range(2, 512));
  zpath->add_option("--draws", zdraws, "number of sample paths")->check(CLI::PositiveNumber);
  zpath->add_option("--seed", zseed, "master seed");
  zpath->add_option("--method", zmethod, "path|exact-grid")->check(CLI::IsMember({"path", "exact-grid"}));
  zpath->add_option("--format", zformat, "csv (draw,t,value) or json summary")->check(CLI::IsMember({"csv", "json"}));
  zpath->add_option("--threads", zthreads, "worker threads (default: USEQ_THREADS, then all cores)");
  zpath->add_option("--out", zout, "output file (default stdout)");

  // renewal
  Source rsrc;
  double rx = 1e4;
  std::int64_t rreps = 1000;
  std::uint64_t rseed = 1;
  std::string rcond = "none", rout;
  std::optional<int> rthreads;
  auto* renewal = app.add_subcommand("renewal", "stopping times, overshoot and stopped companion values as CSV");
  add_source_options(renewal, rsrc);
  renewal->add_option("--x", rx, "threshold")->check(CLI::NonNegativeNumber);
  renewal->add_option("--reps", rreps, "replications")->check(CLI::PositiveNumber);
  renewal->add_option("--condition", rcond, "none|overshoot=k|exact-hit");
  renewal->add_option("--seed", rseed, "master seed");
  renewal->add_option("--threads", rthreads, "worker threads");
  renewal->add_option("--out", rout, "CSV file (default stdout)");

  // verify
  std::string vscenario, vconfig, vtheorem, vout, vcsv, vcond;
  std::optional<std::int64_t> vn, vreps, vdraws;
  std::optional<double> vx, vvar_tol, vks_tol;
  std::vector<double> vgrid;
  std::uint64_t vseed = 1;
  std::optional<int> vthreads;
  bool vdegenerate_branch = false;
  auto* verify = app.add_subcommand("verify", "Monte-Carlo check of a limit theorem on a scenario");
  verify->add_option("scenario", vscenario, "built-in scenario id");
  verify->add_option("--config", vconfig, "key=value config file instead of a built-in scenario");
  verify->add_option("--theorem", vtheorem, "clt|fclt|renewal|stopped|degeneracy|gaussian")
      ->check(CLI::IsMember({"clt", "fclt", "renewal", "stopped", "degeneracy", "gaussian"}));
  verify->add_option("--n", vn, "sample size")->check(CLI::PositiveNumber);
  verify->add_option("--x", vx, "threshold")->check(CLI::NonNegativeNumber);
  verify->add_option("--grid", vgrid, "fclt time grid")->delimiter(',');
  verify->add_option("--reps", vreps, "replications")->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));
  verify->add_option("--draws", vdraws, "draws for --theorem gaussian")->check(CLI::PositiveNumber);
  verify->add_option("--condition", vcond, "none|overshoot=k|exact-hit");
  verify->add_option("--seed", vseed, "master seed");
  verify->add_option("--threads", vthreads, "worker threads (default: USEQ_THREADS, then all cores)");
  verify->add_option("--variance-tolerance", vvar_tol, "relative tolerance of the variance ratio")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--ks-threshold", vks_tol, "largest accepted KS distance")->check(CLI::NonNegativeNumber);
  verify->add_flag("--degeneracy-branch", vdegenerate_branch, "allow gamma^2 = 0 companions and check the collapse");
  verify->add_option("--out", vout, "report JSON file");
  verify->add_option("--csv", vcsv, "raw standardized samples (rep,statistic,overshoot)");

  auto* scenarios = app.add_subcommand("scenarios", "list built-in scenarios");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << artifact_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "useq: " << e.what() << '\n';
    return 2;
  }

  try {
    if (scenarios->parsed()) {
      for (const auto& s : builtin_scenarios()) out << s.id << '\t' << s.description << '\n';
      return 0;
    }

    if (limits->parsed()) {
      Scenario s = resolve(lsrc);
      if (lmethod != "auto") s.method = lmethod;
      const Prepared p = prepare(s, lpo);
      emit(lout, limits_json(s, p, lpo).dump(2) + "\n", out);
      return 0;
    }

    if (zpath->parsed()) {
      const Scenario s = resolve(zsrc);
      const Prepared p = prepare(s);
      const int threads = resolve_threads(zthreads);
      std::vector<double> times;
      std::vector<std::vector<double>> rows;
      if (zmethod == "path") {
        const ZPathSampler sampler(p.model.sigma, uniform_grid(zgrid));
        times = sampler.grid();
        rows = parallel_map<std::vector<double>>(zdraws, threads, [&](std::int64_t i) {
          Rng rng = make_rng(zseed, static_cast<std::uint64_t>(i));
          return sampler.sample(rng);
        });
      } else {
        const ZGridSampler sampler(p.model.sigma, dyadic_grid(zpoints));
        times = sampler.times();
        rows = parallel_map<std::vector<double>>(zdraws, threads, [&](std::int64_t i) {
          Rng rng = make_rng(zseed, static_cast<std::uint64_t>(i));
          return sampler.sample(rng);
        });
      }
      if (zformat == "csv") {
        std::ostringstream os;
        os << "draw,t,value\n";
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t k = 0; k < times.size(); ++k)
            os << i << ',' << format_number(times[k]) << ',' << format_number(rows[i][k]) << '\n';
        emit(zout, os.str(), out);
        return 0;
      }
      // Summary on (at most) 17 evenly spaced grid times.
      std::vector<std::size_t> pick;
      const std::size_t m = times.size();
      const std::size_t want = std::min<std::size_t>(17, m);
      for (std::size_t k = 0; k < want; ++k) pick.push_back(want == 1 ? m - 1 : k * (m - 1) / (want - 1));
      json j;
      j["schema"] = "useq.zpath/1";
      j["artifact_version"] = artifact_version();
      j["config"] = {{"scenario", s.id}, {"kernel", s.kernel}, {"dist", s.dist}, {"method", zmethod},
                     {"grid", zgrid},    {"points", zpoints},  {"draws", zdraws}, {"seed", zseed}};
      json t = json::array(), emp = json::array(), pred = json::array();
      for (std::size_t a : pick) {
        t.push_back(times[a]);
        json er = json::array(), pr = json::array();
        for (std::size_t b : pick) {
          std::vector<double> xa(rows.size()), xb(rows.size());
          for (std::size_t i = 0; i < rows.size(); ++i) {
            xa[i] = rows[i][a];
            xb[i] = rows[i][b];
          }
          er.push_back(rows.size() >= 2 ? covariance(xa, xb).value : 0.0);
          pr.push_back(p.law.cov(times[a], times[b]));
        }
        emp.push_back(er);
        pred.push_back(pr);
      }
      j["times"] = t;
      j["empirical_covariance"] = emp;
      j["predicted_covariance"] = pred;
      emit(zout, j.dump(2) + "\n", out);
      return 0;
    }

    if (renewal->parsed()) {
      const Scenario s = resolve(rsrc);
      const Prepared p = prepare(s);
      const int threads = resolve_threads(rthreads);
      const RenewalExperiment exp(p.f, p.f_tilde ? &*p.f_tilde : nullptr, p.source, p.model.mu);
      const ConditionedRenewal cond(exp, Conditioning::parse(rcond));
      cond.check_threshold(rx);
      const auto outs = parallel_map<RenewalOutcome>(rreps, threads, [&](std::int64_t i) {
        Rng rng = make_rng(rseed, static_cast<std::uint64_t>(i));
        return cond.run(rx, rng);
      });
      std::ostringstream os;
      os << "rep,n_minus,n_plus,overshoot,companion_value\n";
      for (std::size_t i = 0; i < outs.size(); ++i) {
        os << i << ',' << outs[i].n_minus << ',' << outs[i].n_plus << ',' << format_number(outs[i].overshoot) << ',';
        if (outs[i].companion_value) os << format_number(*outs[i].companion_value);
        os << '\n';
      }
      emit(rout, os.str(), out);
      return 0;
    }

    if (verify->parsed()) {
      Scenario s;
      if (!vconfig.empty())
        s = load_config(vconfig);
      else if (!vscenario.empty())
        s = find_scenario(vscenario);
      else
        throw ConfigError("verify needs a scenario id or --config");
      const std::string theorem = vtheorem.empty() ? s.theorem : vtheorem;
      HarnessOptions opt;
      opt.threads = resolve_threads(vthreads);
      opt.variance_tolerance = vvar_tol;
      opt.ks_threshold = vks_tol;
      opt.keep_samples = true;
      opt.degeneracy_branch = vdegenerate_branch;
      const std::int64_t reps = vreps.value_or(s.reps);

      MCReport report;
      if (theorem == "clt") {
        report = mc_clt_ustat(s, vn.value_or(s.n), reps, vseed, opt);
      } else if (theorem == "fclt") {
        report = mc_fclt(s, vn.value_or(s.n), vgrid.empty() ? s.grid : vgrid, reps, vseed, opt);
      } else if (theorem == "renewal") {
        report = mc_renewal_clt(s, vx.value_or(s.x), reps, vseed, opt);
      } else if (theorem == "stopped") {
        const Conditioning c = Conditioning::parse(vcond.empty() ? s.condition : vcond);
        report = mc_stopped_clt(s, vx.value_or(s.x), reps, vseed, c, opt);
      } else if (theorem == "degeneracy") {
        report = mc_degeneracy(s, vseed, opt);
      } else {
        report = gaussian_cross_validation(s, vdraws.value_or(100000), vseed, opt);
      }
      const std::string text = report.to_json().dump(2) + "\n";
      if (!vout.empty()) emit(vout, text, out);
      if (!vcsv.empty()) {
        std::ofstream f(vcsv);
        if (!f) throw ConfigError("cannot write '" + vcsv + "'");
        report.write_csv(f);
      }
      if (vout.empty()) {
        out << text;
      } else {
        out << report.scenario << ' ' << report.theorem << ": " << (report.passed ? "PASS" : "FAIL") << '\n';
        for (const auto& c : report.checks)
          out << "  " << (c.passed ? "ok  " : (c.gating ? "FAIL" : "info")) << ' ' << c.name << " = "
              << format_number(c.value) << " in [" << format_number(c.lower) << ", " << format_number(c.upper)
              << "]\n";
      }
      return report.passed ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    err << "useq: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateLimit& e) {
    err << "useq: " << e.what() << '\n';
    return 2;
  } catch (const BudgetExceeded& e) {
    err << "useq: budget exceeded: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "useq: error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace useq
