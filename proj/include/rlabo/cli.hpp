#pragma once

// Command-line front end: train, run, compare, bench.
//
// Exit status: 0 success, 1 numerical failure, 2 usage or configuration error.
// Output directories default to $RLABO_OUT (or ./runs) when --out is absent.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rlabo/acquisition.hpp"
#include "rlabo/benchmarks.hpp"
#include "rlabo/errors.hpp"
#include "rlabo/io.hpp"
#include "rlabo/ppo.hpp"
#include "rlabo/runner.hpp"

namespace rlabo::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kNumerical = 1, kUsage = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::filesystem::path output_root() {
  if (const char* env = std::getenv("RLABO_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

inline Benchmark require_benchmark(const std::string& name) {
  if (auto id = parse_benchmark(name)) return Benchmark(*id);
  throw UsageError("unknown benchmark '" + name + "'; valid names: " + valid_benchmark_names());
}

inline std::vector<BenchmarkId> parse_benchmark_list(const std::string& text) {
  if (text == "all") return {kAllBenchmarks.begin(), kAllBenchmarks.end()};
  std::vector<BenchmarkId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(require_benchmark(item).id());
  }
  if (out.empty()) throw UsageError("no benchmarks given; valid names: " + valid_benchmark_names());
  return out;
}

inline Point parse_point(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse point '" + text + "'");
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json manifest(std::string_view command, const json& config, std::uint64_t seed,
                     const std::filesystem::path& out_dir, const std::vector<std::string>& outputs) {
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back((out_dir / o).string());
  return json{{"command", command},
              {"tool_version", kToolVersion},
              {"config", config},
              {"seed", seed},
              {"started_at", utc_timestamp()},
              {"outputs", outs}};
}

}  // namespace detail

struct TrainArgs {
  std::string benchmark;
  std::string config_file;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
  int updates = 0, episodes = 0, horizon = 0, epochs = 0, minibatch = 0, init_design = 0;
  double learning_rate = 0, gamma = 0, clip = 0, value_weight = 0, entropy_weight = 0;
  bool quiet = false;
};

inline int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  std::string bench_name = a.benchmark;
  if (!a.config_file.empty()) {
    const json j = read_json_file(a.config_file);
    apply_json(j, cfg);
    const json& flat = j.contains("config") ? j.at("config") : j;
    if (bench_name.empty() && flat.contains("benchmark")) bench_name = flat.at("benchmark").get<std::string>();
  }
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--jobs")) cfg.jobs = a.jobs;
  if (given("--updates")) cfg.updates = a.updates;
  if (given("--episodes")) cfg.episodes_per_update = a.episodes;
  if (given("--horizon")) cfg.horizon = a.horizon;
  if (given("--epochs")) cfg.epochs = a.epochs;
  if (given("--minibatch")) cfg.minibatch_size = a.minibatch;
  if (given("--init-design")) cfg.init_design_size = a.init_design;
  if (given("--learning-rate")) cfg.learning_rate = a.learning_rate;
  if (given("--gamma")) cfg.gamma = a.gamma;
  if (given("--clip")) cfg.clip = a.clip;
  if (given("--value-weight")) cfg.value_weight = a.value_weight;
  if (given("--entropy-weight")) cfg.entropy_weight = a.entropy_weight;
  if (bench_name.empty()) throw UsageError("--benchmark is required; valid names: " + valid_benchmark_names());
  const Benchmark bench = detail::require_benchmark(bench_name);
  validate(cfg);

  const std::filesystem::path dir =
      a.out.empty() ? detail::output_root() / (bench_name + "-s" + std::to_string(cfg.seed))
                    : std::filesystem::path(a.out);
  const json flat = to_json(cfg, bench);
  write_text_file(dir / "manifest.json",
                  detail::manifest("train", flat, cfg.seed, dir,
                                   {"checkpoint.json", "learning_curve.csv", "manifest.json"})
                          .dump(2) +
                      "\n");

  const TrainResult res = train(bench, cfg, [&](const UpdateStats& s) {
    if (a.quiet) return;
    err << "update " << (s.update + 1) << "/" << cfg.updates
        << "  mean episode reward " << format_double(s.mean_episode_reward)
        << "  loss " << format_double(s.first_epoch_loss.total);
    if (s.failed_episodes > 0) err << "  failed episodes " << s.failed_episodes;
    err << "\n";
  });
  save_checkpoint(dir / "checkpoint.json", res.params,
                  {bench_name, cfg.seed, config_hash(flat)});
  write_text_file(dir / "learning_curve.csv", learning_curve_csv(res.curve));
  out << "wrote " << (dir / "checkpoint.json").string() << "\n";
  return kOk;
}

struct RunArgs {
  std::string benchmark;
  std::string checkpoint;
  std::string fixed_beta;
  std::string out;
  std::uint64_t seed = 0;
  int horizon = 30;
  int init_design = 3;
};

inline int cmd_run(const RunArgs& a, std::ostream& out) {
  if (a.checkpoint.empty() == a.fixed_beta.empty()) {
    throw UsageError("exactly one of --checkpoint or --fixed-beta is required");
  }
  const Benchmark bench = detail::require_benchmark(a.benchmark);
  const EnvConfig env{bench, a.horizon, a.init_design, a.seed};
  validate(env);
  std::optional<AcquisitionSpec> spec;
  if (!a.fixed_beta.empty()) {
    spec = parse_beta(a.fixed_beta);
    if (!spec) {
      throw UsageError("--fixed-beta '" + a.fixed_beta + "' is not a candidate; valid betas: " +
                       valid_beta_labels());
    }
  }
  const std::string method = spec ? fixed_method_label(*spec) : std::string(kPolicyMethod);
  const std::filesystem::path dir =
      a.out.empty() ? detail::output_root() /
                          ("run-" + a.benchmark + "-" + method + "-s" + std::to_string(a.seed))
                    : std::filesystem::path(a.out);
  json config{{"benchmark", a.benchmark},
              {"horizon", a.horizon},
              {"init_design_size", a.init_design},
              {"seed", a.seed}};
  if (spec) config["fixed_beta"] = std::string(spec->beta_label());
  else config["checkpoint"] = a.checkpoint;
  write_text_file(dir / "manifest.json",
                  detail::manifest("run", config, a.seed, dir,
                                   {"trace.csv", "trace.jsonl", "manifest.json"})
                          .dump(2) +
                      "\n");

  const RunTrace trace =
      spec ? run_fixed(*spec, env) : run_policy(load_checkpoint(a.checkpoint).params, env);
  write_text_file(dir / "trace.csv", trace_csv(trace));
  write_text_file(dir / "trace.jsonl", episode_trace_jsonl(trace));
  out << "best y* = " << format_double(trace.best) << "\n";
  return kOk;
}

struct CompareArgs {
  std::string benchmarks = "all";
  std::string checkpoints;
  std::string config_file;
  std::string out;
  int seeds = 20;
  int horizon = 30;
  int init_design = 3;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// `<dir>/<name>.json`, else `<dir>/<name>/checkpoint.json`.
inline std::optional<std::filesystem::path> find_checkpoint(const std::filesystem::path& dir,
                                                            std::string_view name) {
  const auto flat = dir / (std::string(name) + ".json");
  if (std::filesystem::is_regular_file(flat)) return flat;
  const auto nested = dir / std::string(name) / "checkpoint.json";
  if (std::filesystem::is_regular_file(nested)) return nested;
  return std::nullopt;
}

inline int cmd_compare(const CompareArgs& in, const CLI::App& sub, std::ostream& out) {
  CompareArgs a = in;
  if (!a.config_file.empty()) {
    const json j0 = read_json_file(a.config_file);
    const json& j = j0.contains("config") ? j0.at("config") : j0;
    auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
    if (!given("--benchmarks") && j.contains("benchmarks")) a.benchmarks = j.at("benchmarks").get<std::string>();
    if (!given("--checkpoints") && j.contains("checkpoints")) a.checkpoints = j.at("checkpoints").get<std::string>();
    if (!given("--seeds") && j.contains("seeds")) a.seeds = j.at("seeds").get<int>();
    if (!given("--horizon") && j.contains("horizon")) a.horizon = j.at("horizon").get<int>();
    if (!given("--init-design") && j.contains("init_design_size")) a.init_design = j.at("init_design_size").get<int>();
    if (!given("--seed") && j.contains("seed")) a.seed = j.at("seed").get<std::uint64_t>();
    if (!given("--jobs") && j.contains("jobs")) a.jobs = j.at("jobs").get<int>();
  }
  if (a.checkpoints.empty()) throw UsageError("--checkpoints <dir> is required");
  if (a.seeds < 1 || a.horizon < 1 || a.init_design < 1 || a.jobs < 1) {
    throw UsageError("--seeds, --horizon, --init-design and --jobs must be >= 1");
  }
  const auto ids = detail::parse_benchmark_list(a.benchmarks);
  std::map<BenchmarkId, PolicyParams> policies;
  for (auto id : ids) {
    const auto path = find_checkpoint(a.checkpoints, benchmark_name(id));
    if (!path) {
      throw UsageError("missing checkpoint for benchmark " + std::string(benchmark_name(id)) +
                       " under " + a.checkpoints);
    }
    policies.emplace(id, load_checkpoint(*path).params);
  }

  const std::filesystem::path dir =
      a.out.empty() ? detail::output_root() / ("compare-s" + std::to_string(a.seed))
                    : std::filesystem::path(a.out);
  std::vector<std::string> outputs;
  for (auto id : ids) {
    outputs.push_back(std::string(benchmark_name(id)) + ".csv");
    outputs.push_back("curves/" + std::string(benchmark_name(id)) + ".csv");
  }
  outputs.emplace_back("summary.csv");
  outputs.emplace_back("manifest.json");
  const json config{{"benchmarks", a.benchmarks},   {"checkpoints", a.checkpoints},
                    {"seeds", a.seeds},             {"horizon", a.horizon},
                    {"init_design_size", a.init_design}, {"seed", a.seed},
                    {"jobs", a.jobs}};
  write_text_file(dir / "manifest.json",
                  detail::manifest("compare", config, a.seed, dir, outputs).dump(2) + "\n");

  const ComparisonReport report =
      compare(ids, policies, {a.seeds, a.horizon, a.init_design, a.seed, a.jobs});
  for (const auto& bc : report.benchmarks) {
    const std::string name(benchmark_name(bc.benchmark));
    write_text_file(dir / (name + ".csv"), comparison_traces_csv(bc));
    write_text_file(dir / "curves" / (name + ".csv"), comparison_curves_csv(bc));
  }
  write_text_file(dir / "summary.csv", summary_csv(report));
  for (const auto& bc : report.benchmarks) {
    const auto& p = bc.row(kPolicyMethod);
    out << benchmark_name(bc.benchmark) << ": policy rank " << p.rank << " of "
        << bc.methods.size() << ", mean final best " << format_double(p.mean_final_best) << "\n";
  }
  return kOk;
}

inline int cmd_bench(const std::string& name, const std::vector<std::string>& points,
                     std::ostream& out) {
  const Benchmark b = detail::require_benchmark(name);
  if (points.empty()) {
    out << b.name() << " dim " << b.dim() << " domain";
    for (const auto& iv : b.bounds()) out << " [" << format_double(iv.lo) << ", " << format_double(iv.hi) << "]";
    out << "\nknown maximum " << format_double(b.known_maximum()) << "\n";
    return kOk;
  }
  for (const auto& text : points) {
    const Point x = detail::parse_point(text);
    try {
      out << text << " -> " << format_double(b.evaluate(x)) << "\n";
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Reinforcement-learned acquisition-function selection for Bayesian optimization",
               "rlabo"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train an acquisition-selection policy");
  train_cmd->add_option("--benchmark", ta.benchmark, "ackley|levy|griewank|schwefel|eggholder");
  train_cmd->add_option("--config", ta.config_file, "Flat JSON config (or a previous manifest)");
  train_cmd->add_option("--seed", ta.seed, "Root seed");
  train_cmd->add_option("--out", ta.out, "Output directory");
  train_cmd->add_option("--jobs", ta.jobs, "Parallel episode workers");
  train_cmd->add_option("--updates", ta.updates, "Policy updates (M)");
  train_cmd->add_option("--episodes", ta.episodes, "Episodes per update (N)");
  train_cmd->add_option("--horizon", ta.horizon, "BO steps per episode (T)");
  train_cmd->add_option("--epochs", ta.epochs, "Epochs per update (K)");
  train_cmd->add_option("--minibatch", ta.minibatch, "Minibatch size (0: N*T/4)");
  train_cmd->add_option("--init-design", ta.init_design, "Initial design size");
  train_cmd->add_option("--learning-rate", ta.learning_rate, "Adam step size");
  train_cmd->add_option("--gamma", ta.gamma, "Discount");
  train_cmd->add_option("--clip", ta.clip, "Clip parameter");
  train_cmd->add_option("--value-weight", ta.value_weight, "Value loss weight");
  train_cmd->add_option("--entropy-weight", ta.entropy_weight, "Entropy loss weight");
  train_cmd->add_flag("--quiet", ta.quiet, "No per-update progress");

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Run one BO episode with a policy or a fixed UCB weight");
  run_cmd->add_option("--benchmark", ra.benchmark)->required();
  run_cmd->add_option("--checkpoint", ra.checkpoint, "Trained policy checkpoint");
  run_cmd->add_option("--fixed-beta", ra.fixed_beta, "0|1|2.576|6.635776|inf");
  run_cmd->add_option("--seed", ra.seed);
  run_cmd->add_option("--horizon", ra.horizon);
  run_cmd->add_option("--init-design", ra.init_design);
  run_cmd->add_option("--out", ra.out);

  CompareArgs ca;
  auto* cmp_cmd = app.add_subcommand("compare", "Paired comparison of the policy and fixed weights");
  cmp_cmd->add_option("--benchmarks", ca.benchmarks, "Comma list or 'all'");
  cmp_cmd->add_option("--checkpoints", ca.checkpoints, "Directory of per-benchmark checkpoints");
  cmp_cmd->add_option("--config", ca.config_file);
  cmp_cmd->add_option("--seeds", ca.seeds);
  cmp_cmd->add_option("--horizon", ca.horizon);
  cmp_cmd->add_option("--init-design", ca.init_design);
  cmp_cmd->add_option("--seed", ca.seed);
  cmp_cmd->add_option("--jobs", ca.jobs);
  cmp_cmd->add_option("--out", ca.out);

  std::string bench_name;
  std::vector<std::string> points;
  auto* bench_cmd = app.add_subcommand("bench", "Evaluate a benchmark at given points");
  bench_cmd->add_option("--benchmark", bench_name)->required();
  bench_cmd->add_option("--point", points, "Comma-separated coordinates; repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta, *train_cmd, out, err);
    if (run_cmd->parsed()) return cmd_run(ra, out);
    if (cmp_cmd->parsed()) return cmd_compare(ca, *cmp_cmd, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_name, points, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}

}  // namespace rlabo::cli
