#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "useq/kernels.hpp"
#include "useq/limitlaw.hpp"
#include "useq/renewal.hpp"
#include "useq/scenario.hpp"
#include "useq/sources.hpp"
#include "useq/stats.hpp"
#include "useq/ucore.hpp"

namespace useq {

std::string artifact_version();

/// Runs fn(i) for i in [0, count) on `threads` workers and returns the
/// results in index order. The first exception is rethrown after joining.
template <typename T, typename F>
std::vector<T> parallel_map(std::int64_t count, int threads, F&& fn) {
  std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, std::max<std::int64_t>(count, 1)));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex mutex;
  auto work = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// --threads value, else USEQ_THREADS, else the hardware concurrency.
int resolve_threads(std::optional<int> flag);

/// 17 significant digits.
std::string format_number(double v);

struct HarnessOptions {
  int threads = 1;
  double level = 0.99;
  std::optional<double> variance_tolerance;
  std::optional<double> ks_threshold;
  ProjectionOptions projection;
  bool keep_samples = true;
  /// Lets mc_stopped_clt run a gamma^2 = 0 companion and check the collapse.
  bool degeneracy_branch = false;
};

struct Check {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool gating = true;
  bool passed = false;
  std::string note;
};

struct MCReport {
  std::string scenario;
  std::string theorem;
  std::int64_t reps = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;

  MomentAccumulator moments;  // of the standardized statistic
  double mean_half_width = 0.0;
  double variance_half_width = 0.0;
  double ks = 0.0;
  double predicted_variance = 1.0;
  double variance_ratio = 0.0;
  nlohmann::json moment_table = nlohmann::json::array();

  std::vector<Check> checks;
  nlohmann::json details = nlohmann::json::object();
  std::vector<double> samples;
  std::vector<double> overshoots;

  bool passed = false;
  double wall_seconds = 0.0;
  int threads = 1;

  /// `runtime` adds thread count and wall-clock, which vary between runs.
  nlohmann::json to_json(bool runtime = true) const;
  /// rep,statistic,overshoot
  void write_csv(std::ostream& out) const;
  const Check* find_check(const std::string& name) const;
};

/// Kernels, source, projections and limit laws of a scenario.
struct Prepared {
  Kernel f;
  std::optional<Kernel> f_tilde;
  SampleSource source;
  ProjectionModel model;
  std::optional<ProjectionModel> model_tilde;
  LimitLaw law;
  std::optional<JointLimitLaw> joint;
};

Prepared prepare(const Scenario& s, const ProjectionOptions& options = {});

/// Expected constants of the scenario against the computed ones.
nlohmann::json constants_table(const Scenario& s, const Prepared& p, std::vector<Check>* checks);

MCReport mc_clt_ustat(const Scenario& s, std::int64_t n, std::int64_t reps, std::uint64_t seed,
                      const HarnessOptions& opt = {});
MCReport mc_fclt(const Scenario& s, std::int64_t n, const std::vector<double>& grid, std::int64_t reps,
                 std::uint64_t seed, const HarnessOptions& opt = {});
MCReport mc_renewal_clt(const Scenario& s, double x, std::int64_t reps, std::uint64_t seed,
                        const HarnessOptions& opt = {});
MCReport mc_stopped_clt(const Scenario& s, double x, std::int64_t reps, std::uint64_t seed,
                        const Conditioning& condition, const HarnessOptions& opt = {});
/// Monte-carlo degeneracy flag plus the refusal of CLT standardization.
MCReport mc_degeneracy(const Scenario& s, std::uint64_t seed, const HarnessOptions& opt = {});
/// Path sampler against the exact-grid sampler (and the joint limit when
/// the scenario has a companion).
MCReport gaussian_cross_validation(const Scenario& s, std::int64_t draws, std::uint64_t seed,
                                   const HarnessOptions& opt = {}, int path_steps = 2048, int grid_points = 17);

}  // namespace useq
