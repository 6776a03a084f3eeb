#pragma once

// Execution-phase runs (greedy trained policy or a fixed UCB weight) and the
// seed-paired comparison of all six methods.
//
// Seeding: a run with env seed s on benchmark b draws its initial design from
// substream(s, "run/design/<b>") and its inner-optimizer probes from
// substream(s, "run/inner/<b>/<method>"). Every method therefore starts from
// the same initial design for a given s.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlabo/acquisition.hpp"
#include "rlabo/bo_env.hpp"
#include "rlabo/errors.hpp"
#include "rlabo/neural.hpp"
#include "rlabo/parallel.hpp"
#include "rlabo/rng.hpp"

namespace rlabo {

inline constexpr std::string_view kPolicyMethod = "policy";

inline std::string fixed_method_label(const AcquisitionSpec& spec) {
  return "fixed-" + std::string(spec.beta_label());
}

/// The six compared methods: five fixed weights in ascending order, then the policy.
inline std::vector<std::string> comparison_methods() {
  std::vector<std::string> out;
  for (const auto& s : candidate_set()) out.push_back(fixed_method_label(s));
  out.emplace_back(kPolicyMethod);
  return out;
}

struct TraceRecord {
  int t = 0;                  // 0 for initial-design rows, 1..T for BO steps
  std::optional<int> action;  // empty on initial-design rows
  Point x;
  double y = 0.0;
  double best_so_far = 0.0;
  Eigen::VectorXd state;  // state the action was chosen from (BO steps only)
  double reward = 0.0;
};

struct RunTrace {
  std::string method;
  std::string benchmark;
  std::uint64_t seed = 0;
  int init_design_size = 0;
  std::vector<TraceRecord> records;
  double best = 0.0;

  /// Best-so-far after the initial design (index 0) and after each step.
  std::vector<double> best_curve() const {
    std::vector<double> out;
    for (const auto& r : records) {
      if (r.t == 0) {
        if (out.empty()) out.push_back(r.best_so_far);
        else out.back() = r.best_so_far;
      } else {
        out.push_back(r.best_so_far);
      }
    }
    return out;
  }
};

inline void check_policy_shape(const PolicyParams& policy, int dim) {
  if (policy.state_dim() != state_length(dim) ||
      policy.actor.out_dim() != static_cast<int>(kNumActions) || policy.critic.out_dim() != 1) {
    throw ConfigError("checkpoint architecture (state " + std::to_string(policy.state_dim()) +
                      ", actions " + std::to_string(policy.actor.out_dim()) +
                      ") does not match environment (state " + std::to_string(state_length(dim)) +
                      ", actions " + std::to_string(kNumActions) + ")");
  }
}

using ActionSelector = std::function<int(const StateVector&)>;

inline RunTrace run_with(const EnvConfig& cfg, const std::string& method,
                         const ActionSelector& select, const InnerOptimizerConfig& inner = {}) {
  const std::string bench(cfg.benchmark.name());
  Rng design_rng = substream(cfg.seed, "run/design/" + bench);
  Rng inner_rng = substream(cfg.seed, "run/inner/" + bench + "/" + method);
  BoEnv env(cfg, inner);
  StateVector s = env.reset(design_rng);

  RunTrace trace;
  trace.method = method;
  trace.benchmark = bench;
  trace.seed = cfg.seed;
  trace.init_design_size = cfg.init_design_size;
  double best = -kInf;
  const auto& obs = env.observations();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    best = std::max(best, obs.values()[i]);
    trace.records.push_back({0, std::nullopt, obs.points()[i], obs.values()[i], best, {}, 0.0});
  }
  while (!env.done()) {
    const int a = select(s);
    StepResult step = env.step(action_spec(static_cast<std::size_t>(a)), inner_rng);
    best = std::max(best, step.y);
    trace.records.push_back(
        {env.timestep(), a, std::move(step.x), step.y, best, s.values(), step.reward});
    s = std::move(step.next);
  }
  trace.best = best;
  return trace;
}

/// Greedy (argmax) execution of a trained policy.
inline RunTrace run_policy(const PolicyParams& policy, const EnvConfig& cfg,
                           const InnerOptimizerConfig& inner = {}) {
  check_policy_shape(policy, cfg.benchmark.dim());
  return run_with(
      cfg, std::string(kPolicyMethod),
      [&](const StateVector& s) { return argmax_action(actor_forward(policy, s.values())); },
      inner);
}

inline RunTrace run_fixed(const AcquisitionSpec& spec, const EnvConfig& cfg,
                          const InnerOptimizerConfig& inner = {}) {
  return run_with(
      cfg, fixed_method_label(spec), [&](const StateVector&) { return spec.index; }, inner);
}

/// Linear-interpolation quantile of a sample (sorted copy).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// First step at which a run's best-so-far closes 90% of its own total
/// improvement over the initial design (0 if it never improves).
inline int steps_to_90pct(const std::vector<double>& curve) {
  const double start = curve.front();
  const double target = start + 0.9 * (curve.back() - start);
  for (std::size_t t = 0; t < curve.size(); ++t) {
    if (curve[t] >= target) return static_cast<int>(t);
  }
  return static_cast<int>(curve.size()) - 1;
}

struct CurveStats {
  std::vector<double> mean, q25, q75;  // index = step (0 = after initial design)
};

struct SummaryRow {
  std::string benchmark;
  std::string method;
  double mean_final_best = 0.0;
  double iqr_final_best = 0.0;
  double mean_steps_to_90pct = 0.0;
  int rank = 0;
};

struct BenchmarkComparison {
  BenchmarkId benchmark;
  std::vector<std::string> methods;
  std::vector<RunTrace> traces;  // method-major, then seed
  std::vector<CurveStats> curves;
  std::vector<SummaryRow> summary;

  const SummaryRow& row(std::string_view method) const {
    for (const auto& r : summary) {
      if (r.method == method) return r;
    }
    throw std::out_of_range("no summary row for method " + std::string(method));
  }
};

struct ComparisonReport {
  std::vector<BenchmarkComparison> benchmarks;
};

struct CompareConfig {
  int seeds = 20;
  int horizon = 30;
  int init_design_size = 3;
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline std::uint64_t comparison_run_seed(std::uint64_t root, int k) {
  return derive_seed(root, "compare/run", static_cast<std::uint64_t>(k));
}

inline BenchmarkComparison summarize(BenchmarkId id, const std::vector<std::string>& methods,
                                     std::vector<RunTrace> traces, int seeds) {
  BenchmarkComparison bc{id, methods, std::move(traces), {}, {}};
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<std::vector<double>> curves;
    for (int k = 0; k < seeds; ++k) {
      curves.push_back(bc.traces[m * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(k)]
                           .best_curve());
    }
    CurveStats cs;
    const std::size_t steps = curves.front().size();
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> col;
      for (const auto& c : curves) col.push_back(c[t]);
      double mean = 0.0;
      for (double v : col) mean += v;
      cs.mean.push_back(mean / static_cast<double>(col.size()));
      cs.q25.push_back(quantile(col, 0.25));
      cs.q75.push_back(quantile(col, 0.75));
    }
    double steps90 = 0.0;
    for (const auto& c : curves) steps90 += steps_to_90pct(c);
    std::vector<double> finals;
    for (const auto& c : curves) finals.push_back(c.back());
    bc.summary.push_back({std::string(benchmark_name(id)), methods[m], cs.mean.back(),
                          quantile(finals, 0.75) - quantile(finals, 0.25),
                          steps90 / static_cast<double>(curves.size()), 0});
    bc.curves.push_back(std::move(cs));
  }
  std::vector<std::size_t> order(methods.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bc.summary[a].mean_final_best > bc.summary[b].mean_final_best;
  });
  for (std::size_t r = 0; r < order.size(); ++r) bc.summary[order[r]].rank = static_cast<int>(r) + 1;
  return bc;
}

/// Six methods x `seeds` paired runs on each benchmark.
inline ComparisonReport compare(std::span<const BenchmarkId> benchmarks,
                                const std::map<BenchmarkId, PolicyParams>& policies,
                                const CompareConfig& cfg, const InnerOptimizerConfig& inner = {}) {
  if (cfg.seeds < 1) throw std::invalid_argument("compare: seeds must be >= 1");
  for (auto id : benchmarks) {
    auto it = policies.find(id);
    if (it == policies.end()) {
      throw ConfigError("missing checkpoint for benchmark " + std::string(benchmark_name(id)));
    }
    check_policy_shape(it->second, Benchmark(id).dim());
  }
  const auto methods = comparison_methods();
  const auto seeds = static_cast<std::size_t>(cfg.seeds);
  const std::size_t per_bench = methods.size() * seeds;

  std::vector<RunTrace> traces(benchmarks.size() * per_bench);
  parallel_for(traces.size(), cfg.jobs, [&](std::size_t i) {
    const std::size_t b = i / per_bench;
    const std::size_t m = (i % per_bench) / seeds;
    const auto k = static_cast<int>(i % seeds);
    const EnvConfig env{Benchmark(benchmarks[b]), cfg.horizon, cfg.init_design_size,
                        comparison_run_seed(cfg.seed, k)};
    if (m < kNumActions) {
      traces[i] = run_fixed(action_spec(m), env, inner);
    } else {
      traces[i] = run_policy(policies.at(benchmarks[b]), env, inner);
    }
  });

  ComparisonReport report;
  for (std::size_t b = 0; b < benchmarks.size(); ++b) {
    std::vector<RunTrace> slice(std::make_move_iterator(traces.begin() + static_cast<std::ptrdiff_t>(b * per_bench)),
                                std::make_move_iterator(traces.begin() + static_cast<std::ptrdiff_t>((b + 1) * per_bench)));
    report.benchmarks.push_back(summarize(benchmarks[b], methods, std::move(slice), cfg.seeds));
  }
  return report;
}

}  // namespace rlabo
