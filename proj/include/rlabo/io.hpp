#pragma once

// Persistence: checkpoint JSON, flat config JSON, CSV outputs.
//
// CSV floats use 17 significant digits, '.' decimal point and no locale, so a
// value read back parses to the identical double. Non-finite values print as
// "inf", "-inf" or "nan".

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "json.hpp"

#include "rlabo/acquisition.hpp"
#include "rlabo/benchmarks.hpp"
#include "rlabo/errors.hpp"
#include "rlabo/neural.hpp"
#include "rlabo/ppo.hpp"
#include "rlabo/rng.hpp"
#include "rlabo/runner.hpp"

namespace rlabo {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Configs

/// Flat JSON form of a training run; field names mirror TrainConfig/EnvConfig.
inline json to_json(const TrainConfig& c, const Benchmark& b) {
  return json{{"benchmark", std::string(b.name())},
              {"updates", c.updates},
              {"episodes_per_update", c.episodes_per_update},
              {"horizon", c.horizon},
              {"epochs", c.epochs},
              {"gamma", c.gamma},
              {"clip", c.clip},
              {"value_weight", c.value_weight},
              {"entropy_weight", c.entropy_weight},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"minibatch_size", c.minibatch_size},
              {"normalize_advantages", c.normalize_advantages},
              {"init_design_size", c.init_design_size},
              {"seed", c.seed},
              {"jobs", c.jobs}};
}

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Applies recognized fields of a flat config object. A run manifest is also
/// accepted: its "config" member is used.
inline void apply_json(const json& in, TrainConfig& c) {
  const json& j = in.contains("config") && in.at("config").is_object() ? in.at("config") : in;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::read_field(j, "updates", c.updates);
  detail::read_field(j, "episodes_per_update", c.episodes_per_update);
  detail::read_field(j, "horizon", c.horizon);
  detail::read_field(j, "epochs", c.epochs);
  detail::read_field(j, "gamma", c.gamma);
  detail::read_field(j, "clip", c.clip);
  detail::read_field(j, "value_weight", c.value_weight);
  detail::read_field(j, "entropy_weight", c.entropy_weight);
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "adam_beta1", c.adam_beta1);
  detail::read_field(j, "adam_beta2", c.adam_beta2);
  detail::read_field(j, "adam_epsilon", c.adam_epsilon);
  detail::read_field(j, "minibatch_size", c.minibatch_size);
  detail::read_field(j, "normalize_advantages", c.normalize_advantages);
  detail::read_field(j, "init_design_size", c.init_design_size);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "jobs", c.jobs);
}

/// Hash of everything that affects training results (the worker count does not).
inline std::string config_hash(const json& flat_config) {
  json j = flat_config;
  j.erase("jobs");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                        const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError("checkpoint: " + what + " should have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("checkpoint: " + what + " should have " + std::to_string(cols) +
                        " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Eigen::VectorXd vector_from_json(const json& j, Eigen::Index n, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw ConfigError("checkpoint: " + what + " should have length " + std::to_string(n));
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

inline json mlp_to_json(const Mlp& m) {
  json layers = json::array();
  layers.push_back({{"weight", matrix_to_json(m.w1)}, {"bias", vector_to_json(m.b1)}});
  layers.push_back({{"weight", matrix_to_json(m.w2)}, {"bias", vector_to_json(m.b2)}});
  layers.push_back({{"weight", matrix_to_json(m.w3)}, {"bias", vector_to_json(m.b3)}});
  return layers;
}

inline Mlp mlp_from_json(const json& j, int in_dim, int hidden1, int hidden2, int out_dim,
                         const std::string& name) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("checkpoint: " + name + " needs 3 layers");
  Mlp m;
  const std::array<int, 4> dims = {in_dim, hidden1, hidden2, out_dim};
  std::array<Eigen::MatrixXd*, 3> ws = {&m.w1, &m.w2, &m.w3};
  std::array<Eigen::VectorXd*, 3> bs = {&m.b1, &m.b2, &m.b3};
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string what = name + " layer " + std::to_string(l);
    if (!j[l].contains("weight") || !j[l].contains("bias")) {
      throw ConfigError("checkpoint: " + what + " needs weight and bias");
    }
    *ws[l] = matrix_from_json(j[l]["weight"], dims[l + 1], dims[l], what + " weight");
    *bs[l] = vector_from_json(j[l]["bias"], dims[l + 1], what + " bias");
  }
  return m;
}

}  // namespace detail

struct CheckpointMeta {
  std::string benchmark;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline json checkpoint_to_json(const PolicyParams& p, const CheckpointMeta& meta) {
  return json{{"arch",
               {{"in_dim", p.state_dim()},
                {"hidden", {kHiddenUnits, kHiddenUnits}},
                {"actions", p.actor.out_dim()}}},
              {"actor", detail::mlp_to_json(p.actor)},
              {"critic", detail::mlp_to_json(p.critic)},
              {"meta",
               {{"benchmark", meta.benchmark},
                {"seed", meta.seed},
                {"training_config_hash", meta.config_hash}}}};
}

struct Checkpoint {
  PolicyParams params;
  CheckpointMeta meta;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    const json& arch = j.at("arch");
    const int in_dim = arch.at("in_dim").get<int>();
    const auto hidden = arch.at("hidden").get<std::vector<int>>();
    const int actions = arch.at("actions").get<int>();
    if (hidden.size() != 2 || in_dim < 1 || actions < 1) {
      throw ConfigError("checkpoint: arch must have two hidden layers");
    }
    Checkpoint c;
    c.params.actor = detail::mlp_from_json(j.at("actor"), in_dim, hidden[0], hidden[1], actions, "actor");
    c.params.critic = detail::mlp_from_json(j.at("critic"), in_dim, hidden[0], hidden[1], 1, "critic");
    if (j.contains("meta")) {
      const json& m = j.at("meta");
      c.meta.benchmark = m.value("benchmark", "");
      c.meta.seed = m.value("seed", std::uint64_t{0});
      c.meta.config_hash = m.value("training_config_hash", "");
    }
    if (!c.params.flatten().allFinite()) throw ConfigError("checkpoint: non-finite parameters");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const PolicyParams& p,
                            const CheckpointMeta& meta) {
  write_text_file(path, checkpoint_to_json(p, meta).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string learning_curve_csv(const LearningCurve& curve) {
  std::string out = "episode,cumulative_reward,five_episode_avg\n";
  for (std::size_t i = 0; i < curve.episode_rewards.size(); ++i) {
    out += std::to_string(i) + "," + format_double(curve.episode_rewards[i]) + "," +
           format_double(curve.five_episode_avg[i / 5]) + "\n";
  }
  return out;
}

inline constexpr std::string_view kTraceHeader = "benchmark,method,seed,t,beta,x1,x2,y,best_so_far\n";

/// Rows for one trace; initial-design rows carry t = 0 and beta "init".
inline std::string trace_csv_rows(const RunTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    out += trace.benchmark + "," + trace.method + "," + std::to_string(trace.seed) + "," +
           std::to_string(r.t) + ",";
    out += r.action ? std::string(action_spec(static_cast<std::size_t>(*r.action)).beta_label())
                    : std::string("init");
    for (Eigen::Index k = 0; k < r.x.size(); ++k) out += "," + format_double(r.x[k]);
    out += "," + format_double(r.y) + "," + format_double(r.best_so_far) + "\n";
  }
  return out;
}

inline std::string trace_csv(const RunTrace& trace) {
  return std::string(kTraceHeader) + trace_csv_rows(trace);
}

inline std::string comparison_traces_csv(const BenchmarkComparison& bc) {
  std::string out(kTraceHeader);
  for (const auto& t : bc.traces) out += trace_csv_rows(t);
  return out;
}

inline std::string comparison_curves_csv(const BenchmarkComparison& bc) {
  std::string out = "benchmark,method,t,mean_best,q25_best,q75_best\n";
  const std::string name(benchmark_name(bc.benchmark));
  for (std::size_t m = 0; m < bc.methods.size(); ++m) {
    const auto& c = bc.curves[m];
    for (std::size_t t = 0; t < c.mean.size(); ++t) {
      out += name + "," + bc.methods[m] + "," + std::to_string(t) + "," + format_double(c.mean[t]) +
             "," + format_double(c.q25[t]) + "," + format_double(c.q75[t]) + "\n";
    }
  }
  return out;
}

inline std::string summary_csv(const ComparisonReport& report) {
  std::string out = "benchmark,method,mean_final_best,iqr_final_best,mean_steps_to_90pct,rank\n";
  for (const auto& bc : report.benchmarks) {
    for (const auto& r : bc.summary) {
      out += r.benchmark + "," + r.method + "," + format_double(r.mean_final_best) + "," +
             format_double(r.iqr_final_best) + "," + format_double(r.mean_steps_to_90pct) + "," +
             std::to_string(r.rank) + "\n";
    }
  }
  return out;
}

/// JSON-lines episode trace: one object per step.
inline std::string episode_trace_jsonl(const RunTrace& trace, int episode = 0) {
  std::string out;
  for (const auto& r : trace.records) {
    if (!r.action) continue;
    const auto& spec = action_spec(static_cast<std::size_t>(*r.action));
    json x = json::array();
    for (Eigen::Index k = 0; k < r.x.size(); ++k) x.push_back(r.x[k]);
    json state = json::array();
    for (Eigen::Index k = 0; k < r.state.size(); ++k) state.push_back(r.state[k]);
    json rec{{"episode", episode},
             {"t", r.t},
             {"state", state},
             {"beta", {{"beta", std::string(spec.beta_label())}, {"index", spec.index}}},
             {"x", x},
             {"y", r.y},
             {"reward", r.reward},
             {"incumbent", r.best_so_far}};
    out += rec.dump() + "\n";
  }
  return out;
}

}  // namespace rlabo
