#pragma once

// One Bayesian-optimization run viewed as an MDP episode.
//
// State: [log(unit-cube lengthscale), (n0 + t) / (n0 + T), var(x_1), ..., var(x_d)]
// where n0 is the initial design size, t the number of completed steps and
// var(x_k) the population (1/n) variance of the observed points' k-th
// unit-cube coordinate. The spread features describe the observed inputs,
// not the observed values.
//
// Reward for step t (1-based, initial design excluded):
//   r_t = max(y_t - incumbent, 0) / (ln(t + 1) + 1)
// with the incumbent taken over every earlier observation, initial design
// included.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

#include "rlabo/acquisition.hpp"
#include "rlabo/benchmarks.hpp"
#include "rlabo/errors.hpp"
#include "rlabo/gp.hpp"
#include "rlabo/rng.hpp"

namespace rlabo {

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(Eigen::VectorXd values) : values_(std::move(values)) {}

  double lengthscale_feat() const { return values_[0]; }
  double count_feat() const { return values_[1]; }
  double spread_feat(int k) const { return values_[2 + k]; }
  int spread_dims() const { return static_cast<int>(values_.size()) - 2; }
  Eigen::Index size() const { return values_.size(); }
  const Eigen::VectorXd& values() const { return values_; }

  friend bool operator==(const StateVector& a, const StateVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

inline constexpr int state_length(int dim) { return 2 + dim; }

struct EnvConfig {
  Benchmark benchmark{BenchmarkId::Ackley};
  int horizon = 30;
  int init_design_size = 3;
  std::uint64_t seed = 0;
};

inline void validate(const EnvConfig& cfg) {
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (cfg.init_design_size < 1) throw std::invalid_argument("init_design_size must be >= 1");
}

struct Transition {
  StateVector state;
  int action = 0;
  double reward = 0.0;
  double old_action_prob = 1.0;
  int episode = 0;
  int t = 0;
};

inline StateVector encode_state(const GpModel& model, const ObservationSet& obs,
                                const Bounds& bounds, int t, int horizon, int init_design_size) {
  const auto d = static_cast<Eigen::Index>(bounds.size());
  Eigen::VectorXd s(2 + d);
  s[0] = std::log(model.lengthscale());
  s[1] = static_cast<double>(init_design_size + t) / static_cast<double>(init_design_size + horizon);
  const auto n = static_cast<double>(obs.size());
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& b = bounds[static_cast<std::size_t>(k)];
    double mean = 0.0;
    for (const auto& p : obs.points()) mean += (p[k] - b.lo) / b.width();
    mean /= n;
    double var = 0.0;
    for (const auto& p : obs.points()) {
      const double u = (p[k] - b.lo) / b.width() - mean;
      var += u * u;
    }
    s[2 + k] = var / n;
  }
  return StateVector(std::move(s));
}

/// Improvement over the incumbent of `before`, discounted by ln(t + 1) + 1.
inline double compute_reward(double y, const ObservationSet& before, int t) {
  if (t < 1) throw std::invalid_argument("compute_reward: t is 1-based");
  if (before.empty()) throw std::invalid_argument("compute_reward: no incumbent");
  const double gain = y - before.incumbent();
  return gain > 0.0 ? gain / (std::log(static_cast<double>(t) + 1.0) + 1.0) : 0.0;
}

struct StepResult {
  StateVector next;
  double reward;
  double y;
  Point x;
};

/// Mutable episode state. Copying a BoEnv snapshots it; stepping a copy with a
/// copy of the same generator reproduces the transition exactly.
class BoEnv {
 public:
  explicit BoEnv(EnvConfig cfg, InnerOptimizerConfig inner = {}, GpOptions gp = {})
      : cfg_(std::move(cfg)), inner_(inner), gp_options_(gp) {
    validate(cfg_);
  }

  /// Samples and evaluates the initial design, fits the GP, encodes s_1.
  const StateVector& reset(Rng& design_rng) {
    obs_ = ObservationSet{};
    for (auto& x : sample_uniform(bounds(), static_cast<std::size_t>(cfg_.init_design_size),
                                  design_rng)) {
      const double y = cfg_.benchmark.evaluate(x);
      obs_.append(std::move(x), y);
    }
    t_ = 0;
    model_.emplace(fit(obs_, bounds(), gp_options_));
    state_ = encode_state(*model_, obs_, bounds(), t_, cfg_.horizon, cfg_.init_design_size);
    return state_;
  }

  /// Maximizes the chosen UCB, evaluates the objective, refits, re-encodes.
  StepResult step(const AcquisitionSpec& action, Rng& inner_rng) {
    if (!model_) throw StateError("step called before reset");
    if (done()) throw StateError("episode exhausted: horizon " + std::to_string(cfg_.horizon));
    AfMaximum cand = maximize_af(*model_, action, bounds(), inner_rng, inner_);
    const double y = cfg_.benchmark.evaluate(cand.x);
    const int t = t_ + 1;
    const double r = compute_reward(y, obs_, t);
    obs_.append(cand.x, y);
    model_.emplace(fit(obs_, bounds(), gp_options_));
    t_ = t;
    state_ = encode_state(*model_, obs_, bounds(), t_, cfg_.horizon, cfg_.init_design_size);
    return {state_, r, y, std::move(cand.x)};
  }

  const EnvConfig& config() const { return cfg_; }
  const Bounds& bounds() const { return cfg_.benchmark.bounds(); }
  const ObservationSet& observations() const { return obs_; }
  const GpModel& model() const {
    if (!model_) throw StateError("model requested before reset");
    return *model_;
  }
  const StateVector& state() const { return state_; }
  int timestep() const { return t_; }
  bool done() const { return t_ >= cfg_.horizon; }

 private:
  EnvConfig cfg_;
  InnerOptimizerConfig inner_;
  GpOptions gp_options_;
  ObservationSet obs_;
  std::optional<GpModel> model_;
  StateVector state_;
  int t_ = 0;
};

}  // namespace rlabo
