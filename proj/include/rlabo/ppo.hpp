#pragma once

// Clipped-surrogate policy optimization of the acquisition selector.
//
// Loss over a batch of transitions (sums, not means):
//   L      = L_clip + w1 * L_se + w2 * L_ent
//   L_clip = -sum min(rho A, clip(rho, 1 - eps, 1 + eps) A),  rho = pi(a|s) / pi_old(a|s)
//   L_se   = sum (R - V(s))^2
//   L_ent  = -sum H(pi(.|s)),  H = -sum_a pi_a ln pi_a
// with R the discounted return to the end of the episode and A = R - V_old(s).
// The optimizer step uses the gradient of L divided by the minibatch size.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlabo/acquisition.hpp"
#include "rlabo/bo_env.hpp"
#include "rlabo/errors.hpp"
#include "rlabo/neural.hpp"
#include "rlabo/parallel.hpp"
#include "rlabo/rng.hpp"

namespace rlabo {

struct TrainConfig {
  int updates = 40;              // M
  int episodes_per_update = 10;  // N
  int horizon = 30;              // T
  int epochs = 10;               // K
  double gamma = 0.99;
  double clip = 0.2;
  double value_weight = 0.5;     // w1
  double entropy_weight = 0.01;  // w2
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int minibatch_size = 0;  // 0 selects N*T/4
  bool normalize_advantages = true;
  int init_design_size = 3;
  std::uint64_t seed = 0;
  int jobs = 1;

  int effective_minibatch() const {
    if (minibatch_size > 0) return minibatch_size;
    return std::max(1, episodes_per_update * horizon / 4);
  }
};

inline void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid training config: ") + what);
  };
  require(c.updates >= 1, "updates must be >= 1");
  require(c.episodes_per_update >= 1, "episodes_per_update must be >= 1");
  require(c.horizon >= 1, "horizon must be >= 1");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.gamma > 0.0 && c.gamma <= 1.0, "gamma must be in (0, 1]");
  require(c.clip > 0.0 && c.clip < 1.0, "clip must be in (0, 1)");
  require(c.value_weight >= 0.0 && c.entropy_weight >= 0.0, "loss weights must be >= 0");
  require(c.learning_rate >= 0.0, "learning_rate must be >= 0");
  require(c.minibatch_size >= 0, "minibatch_size must be >= 0");
  require(c.init_design_size >= 1, "init_design_size must be >= 1");
  require(c.jobs >= 1, "jobs must be >= 1");
}

/// R_t = r_t + gamma R_{t+1}, R_T = r_T.
inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

inline std::vector<double> advantages(std::span<const double> returns,
                                      std::span<const double> values) {
  if (returns.size() != values.size()) {
    throw std::invalid_argument("advantages: returns and values differ in length");
  }
  std::vector<double> out(returns.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = returns[i] - values[i];
  return out;
}

struct RolloutBatch {
  std::vector<Transition> transitions;
  std::vector<double> returns;
  std::vector<double> advantages;

  std::size_t size() const { return transitions.size(); }

  Eigen::MatrixXd states(std::span<const std::size_t> idx) const {
    if (idx.empty()) return {};
    Eigen::MatrixXd s(transitions[idx[0]].state.size(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      s.col(static_cast<Eigen::Index>(j)) = transitions[idx[j]].state.values();
    }
    return s;
  }
};

struct LossTerms {
  double clip = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

struct LossGradient {
  LossTerms loss;
  PolicyParams grad;
};

namespace detail {

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

}  // namespace detail

/// Loss terms over the transitions `idx` and, if requested, their exact gradient.
inline LossGradient evaluate_loss(const RolloutBatch& batch, std::span<const std::size_t> idx,
                                  const PolicyParams& p, double eps, double w1, double w2,
                                  bool with_gradient = true) {
  if (batch.returns.size() != batch.size() || batch.advantages.size() != batch.size()) {
    throw std::invalid_argument("rollout batch is missing returns or advantages");
  }
  LossGradient out{{}, PolicyParams::zeros(p.state_dim())};
  if (idx.empty()) return out;
  const Eigen::MatrixXd states = batch.states(idx);
  const Eigen::MatrixXd probs = actor_forward_batch(p, states);
  const Eigen::RowVectorXd values = critic_forward_batch(p, states);
  const auto b = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(probs.rows(), b);
  Eigen::MatrixXd dvalues(1, b);

  for (Eigen::Index j = 0; j < b; ++j) {
    const Transition& tr = batch.transitions[idx[static_cast<std::size_t>(j)]];
    const double adv = batch.advantages[idx[static_cast<std::size_t>(j)]];
    const double ret = batch.returns[idx[static_cast<std::size_t>(j)]];
    const auto a = static_cast<Eigen::Index>(tr.action);
    const Eigen::VectorXd pi = probs.col(j);

    const double rho = pi[a] / tr.old_action_prob;
    const double unclipped = rho * adv;
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps) * adv;
    out.loss.clip -= std::min(unclipped, clipped);

    const double err = ret - values[j];
    out.loss.value += err * err;

    double entropy = 0.0;
    for (Eigen::Index k = 0; k < pi.size(); ++k) entropy -= pi[k] * detail::safe_log(pi[k]);
    out.loss.entropy -= entropy;

    if (!with_gradient) continue;
    if (unclipped <= clipped) {
      // d(-rho A)/dz_k = -A rho (1[k == a] - pi_k)
      for (Eigen::Index k = 0; k < pi.size(); ++k) {
        dlogits(k, j) += -adv * rho * ((k == a ? 1.0 : 0.0) - pi[k]);
      }
    }
    // d(-H)/dz_k = pi_k (ln pi_k + H)
    for (Eigen::Index k = 0; k < pi.size(); ++k) {
      dlogits(k, j) += w2 * pi[k] * (detail::safe_log(pi[k]) + entropy);
    }
    dvalues(0, j) = -2.0 * w1 * err;
  }
  out.loss.total = out.loss.clip + w1 * out.loss.value + w2 * out.loss.entropy;
  if (with_gradient) out.grad = backprop(p, states, dlogits, dvalues);
  return out;
}

inline double clip_loss(const RolloutBatch& batch, const PolicyParams& p, double eps) {
  const auto idx = detail::all_indices(batch.size());
  return evaluate_loss(batch, idx, p, eps, 0.0, 0.0, false).loss.clip;
}

inline double value_loss(const RolloutBatch& batch, const PolicyParams& p) {
  const auto idx = detail::all_indices(batch.size());
  return evaluate_loss(batch, idx, p, 0.2, 0.0, 0.0, false).loss.value;
}

inline double entropy_loss(const RolloutBatch& batch, const PolicyParams& p) {
  const auto idx = detail::all_indices(batch.size());
  return evaluate_loss(batch, idx, p, 0.2, 0.0, 0.0, false).loss.entropy;
}

inline double combine_losses(const LossTerms& t, double w1, double w2) {
  return t.clip + w1 * t.value + w2 * t.entropy;
}

inline double total_loss(const RolloutBatch& batch, const PolicyParams& p, double eps, double w1,
                         double w2) {
  const auto idx = detail::all_indices(batch.size());
  return evaluate_loss(batch, idx, p, eps, w1, w2, false).loss.total;
}

/// Block means of consecutive groups of five episodes; the last block may be
/// shorter. Non-finite entries (failed episodes) are skipped.
inline std::vector<double> five_episode_average(std::span<const double> episode_rewards) {
  std::vector<double> out;
  for (std::size_t start = 0; start < episode_rewards.size(); start += 5) {
    const std::size_t end = std::min(start + 5, episode_rewards.size());
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = start; i < end; ++i) {
      if (std::isfinite(episode_rewards[i])) {
        sum += episode_rewards[i];
        ++count;
      }
    }
    out.push_back(count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

struct LearningCurve {
  std::vector<double> episode_rewards;  // cumulative (undiscounted) reward per episode
  std::vector<double> five_episode_avg;
};

struct UpdateStats {
  int update = 0;
  double mean_episode_reward = 0.0;
  int failed_episodes = 0;
  LossTerms first_epoch_loss;
};

struct TrainResult {
  PolicyParams params;
  LearningCurve curve;
  std::size_t transitions_collected = 0;
  int failed_episodes = 0;
};

struct EpisodeRollout {
  std::vector<Transition> transitions;
  double cumulative_reward = 0.0;
  bool failed = false;
  std::string error;
};

/// One sampled-policy episode. Substreams are keyed by the global episode index.
inline EpisodeRollout collect_episode(const PolicyParams& policy, const EnvConfig& env_cfg,
                                      std::uint64_t seed, int episode,
                                      const InnerOptimizerConfig& inner = {}) {
  EpisodeRollout out;
  const auto e = static_cast<std::uint64_t>(episode);
  Rng design_rng = substream(seed, "episode/design", e);
  Rng inner_rng = substream(seed, "episode/inner", e);
  Rng action_rng = substream(seed, "episode/action", e);
  try {
    BoEnv env(env_cfg, inner);
    StateVector s = env.reset(design_rng);
    while (!env.done()) {
      const Eigen::VectorXd probs = actor_forward(policy, s.values());
      const int a = sample_action(probs, action_rng);
      StepResult step = env.step(action_spec(static_cast<std::size_t>(a)), inner_rng);
      out.transitions.push_back({s, a, step.reward,
                                 std::max(probs[a], kProbFloor), episode, env.timestep()});
      out.cumulative_reward += step.reward;
      s = std::move(step.next);
    }
  } catch (const NumericalError& err) {
    out.failed = true;
    out.error = err.what();
    out.transitions.clear();
  }
  return out;
}

/// Collect N episodes with the frozen policy, compute returns and advantages
/// once, then K epochs of minibatch Adam on the composite loss; M times.
inline TrainResult train(const Benchmark& benchmark, const TrainConfig& cfg,
                         const std::function<void(const UpdateStats&)>& on_update = {},
                         const InnerOptimizerConfig& inner = {}) {
  validate(cfg);
  const EnvConfig env_cfg{benchmark, cfg.horizon, cfg.init_design_size, cfg.seed};
  Rng init_rng = substream(cfg.seed, "policy/init");
  TrainResult result;
  result.params = PolicyParams::initialize(state_length(benchmark.dim()), init_rng);
  Adam adam(result.params.size(),
            {cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon});
  Eigen::VectorXd theta = result.params.flatten();

  for (int m = 0; m < cfg.updates; ++m) {
    const auto n_eps = static_cast<std::size_t>(cfg.episodes_per_update);
    std::vector<EpisodeRollout> rollouts(n_eps);
    const PolicyParams& frozen = result.params;
    parallel_for(n_eps, cfg.jobs, [&](std::size_t n) {
      rollouts[n] = collect_episode(frozen, env_cfg, cfg.seed,
                                    m * cfg.episodes_per_update + static_cast<int>(n), inner);
    });

    UpdateStats stats;
    stats.update = m;
    RolloutBatch batch;
    double reward_sum = 0.0;
    for (auto& r : rollouts) {
      if (r.failed) {
        ++stats.failed_episodes;
        result.curve.episode_rewards.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      result.curve.episode_rewards.push_back(r.cumulative_reward);
      reward_sum += r.cumulative_reward;
      std::vector<double> rewards;
      for (const auto& tr : r.transitions) rewards.push_back(tr.reward);
      const auto rets = discounted_returns(rewards, cfg.gamma);
      batch.returns.insert(batch.returns.end(), rets.begin(), rets.end());
      for (auto& tr : r.transitions) batch.transitions.push_back(std::move(tr));
    }
    result.failed_episodes += stats.failed_episodes;
    if (2 * stats.failed_episodes > cfg.episodes_per_update) {
      throw NumericalError("update " + std::to_string(m) + ": " +
                           std::to_string(stats.failed_episodes) + " of " +
                           std::to_string(cfg.episodes_per_update) +
                           " episodes failed numerically");
    }
    result.transitions_collected += batch.size();
    stats.mean_episode_reward =
        reward_sum / static_cast<double>(cfg.episodes_per_update - stats.failed_episodes);

    // Advantages from the pre-update critic, frozen for all K epochs.
    const auto all = detail::all_indices(batch.size());
    const Eigen::RowVectorXd v_old = critic_forward_batch(result.params, batch.states(all));
    std::vector<double> values(v_old.data(), v_old.data() + v_old.size());
    batch.advantages = advantages(batch.returns, values);
    if (cfg.normalize_advantages && batch.size() > 1) {
      const double n = static_cast<double>(batch.size());
      double mean = 0.0;
      for (double a : batch.advantages) mean += a;
      mean /= n;
      double var = 0.0;
      for (double a : batch.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / n);
      for (double& a : batch.advantages) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
    }

    Rng shuffle_rng = substream(cfg.seed, "update/minibatch", static_cast<std::uint64_t>(m));
    const auto mb = static_cast<std::size_t>(cfg.effective_minibatch());
    std::vector<std::size_t> order = all;
    for (int k = 0; k < cfg.epochs; ++k) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
      for (std::size_t start = 0; start < order.size(); start += mb) {
        const std::size_t len = std::min(mb, order.size() - start);
        const std::span<const std::size_t> idx(order.data() + start, len);
        LossGradient lg = evaluate_loss(batch, idx, result.params, cfg.clip, cfg.value_weight,
                                        cfg.entropy_weight);
        if (k == 0 && start == 0) stats.first_epoch_loss = lg.loss;
        Eigen::VectorXd g = lg.grad.flatten() / static_cast<double>(len);
        adam.step(theta, g);
        result.params.assign(theta);
      }
    }
    if (on_update) on_update(stats);
  }
  result.curve.five_episode_avg = five_episode_average(result.curve.episode_rewards);
  return result;
}

}  // namespace rlabo
