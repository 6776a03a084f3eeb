#pragma once

// Actor and critic networks: two independent in -> 64 -> 64 -> out MLPs with
// tanh hidden units and a linear output layer. The actor's 5 outputs are
// logits of a softmax over the UCB candidates; the critic has one output,
// the state value. Gradients are derived by hand for this fixed shape.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "rlabo/acquisition.hpp"
#include "rlabo/rng.hpp"

namespace rlabo {

inline constexpr int kHiddenUnits = 64;

namespace detail {

// tanh(W x + b) down each column. Written through exp, which Eigen
// vectorizes for doubles while its tanh is scalar; agrees with std::tanh to
// a few ulp and saturates cleanly (exp overflow gives exactly 1).
inline Eigen::MatrixXd tanh_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                  const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = w * x;
  z.colwise() += b;
  return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

}  // namespace detail

struct Mlp {
  Eigen::MatrixXd w1, w2, w3;  // (out x in) per layer
  Eigen::VectorXd b1, b2, b3;

  static Mlp zeros(int in_dim, int out_dim, int hidden = kHiddenUnits) {
    Mlp m;
    m.w1 = Eigen::MatrixXd::Zero(hidden, in_dim);
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
    m.b2 = Eigen::VectorXd::Zero(hidden);
    m.w3 = Eigen::MatrixXd::Zero(out_dim, hidden);
    m.b3 = Eigen::VectorXd::Zero(out_dim);
    return m;
  }

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w3.rows()); }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
                                    b3.size());
  }

  bool same_shape(const Mlp& o) const {
    return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
           w3.rows() == o.w3.rows() && w3.cols() == o.w3.cols();
  }

  /// Columns of x are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd h1 = detail::tanh_layer(w1, b1, x);
    const Eigen::MatrixXd h2 = detail::tanh_layer(w2, b2, h1);
    return (w3 * h2).colwise() + b3;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.same_shape(b) && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 &&
           a.w3 == b.w3 && a.b3 == b.b3;
  }
};

namespace detail {

// Glorot-uniform weights scaled by gain; zero biases.
inline void init_layer(Eigen::MatrixXd& w, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
  }
}

struct MlpCache {
  Eigen::MatrixXd x, h1, h2;
};

inline Eigen::MatrixXd forward_cached(const Mlp& m, const Eigen::MatrixXd& x, MlpCache& c) {
  c.x = x;
  c.h1 = tanh_layer(m.w1, m.b1, x);
  c.h2 = tanh_layer(m.w2, m.b2, c.h1);
  return (m.w3 * c.h2).colwise() + m.b3;
}

/// Accumulates d(loss)/d(params) into g given d(loss)/d(output).
inline void backward(const Mlp& m, const MlpCache& c, const Eigen::MatrixXd& upstream, Mlp& g) {
  g.w3.noalias() += upstream * c.h2.transpose();
  g.b3 += upstream.rowwise().sum();
  const Eigen::MatrixXd d2 =
      ((m.w3.transpose() * upstream).array() * (1.0 - c.h2.array().square())).matrix();
  g.w2.noalias() += d2 * c.h1.transpose();
  g.b2 += d2.rowwise().sum();
  const Eigen::MatrixXd d1 =
      ((m.w2.transpose() * d2).array() * (1.0 - c.h1.array().square())).matrix();
  g.w1.noalias() += d1 * c.x.transpose();
  g.b1 += d1.rowwise().sum();
}

template <typename M, typename Fn>
void for_each_block(M& m, Fn&& fn) {
  fn(m.w1.data(), m.w1.size());
  fn(m.b1.data(), m.b1.size());
  fn(m.w2.data(), m.w2.size());
  fn(m.b2.data(), m.b2.size());
  fn(m.w3.data(), m.w3.size());
  fn(m.b3.data(), m.b3.size());
}

}  // namespace detail

/// The full trainable vector: actor followed by critic.
struct PolicyParams {
  Mlp actor;
  Mlp critic;

  static PolicyParams zeros(int state_dim) {
    return {Mlp::zeros(state_dim, static_cast<int>(kNumActions)), Mlp::zeros(state_dim, 1)};
  }

  /// Glorot-uniform hidden layers; both output layers scaled by 0.01 so the
  /// initial policy is close to uniform and the initial value close to 0.
  static PolicyParams initialize(int state_dim, Rng& rng) {
    PolicyParams p = zeros(state_dim);
    for (Mlp* m : {&p.actor, &p.critic}) {
      detail::init_layer(m->w1, rng, 1.0);
      detail::init_layer(m->w2, rng, 1.0);
      detail::init_layer(m->w3, rng, 0.01);
    }
    return p;
  }

  int state_dim() const { return actor.in_dim(); }
  std::size_t size() const { return actor.parameter_count() + critic.parameter_count(); }
  bool same_shape(const PolicyParams& o) const {
    return actor.same_shape(o.actor) && critic.same_shape(o.critic);
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
    Eigen::Index pos = 0;
    auto copy_out = [&](const double* data, Eigen::Index n) {
      out.segment(pos, n) = Eigen::Map<const Eigen::VectorXd>(data, n);
      pos += n;
    };
    detail::for_each_block(actor, copy_out);
    detail::for_each_block(critic, copy_out);
    return out;
  }

  void assign(const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(size())) {
      throw std::invalid_argument("flat parameter vector has wrong length");
    }
    Eigen::Index pos = 0;
    auto copy_in = [&](double* data, Eigen::Index n) {
      Eigen::Map<Eigen::VectorXd>(data, n) = flat.segment(pos, n);
      pos += n;
    };
    detail::for_each_block(actor, copy_in);
    detail::for_each_block(critic, copy_in);
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Numerically stable softmax down each column.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().rowwise() / p.colwise().sum().array();
}

inline constexpr double kProbFloor = 1e-12;

inline void check_finite_state(const Eigen::MatrixXd& s) {
  if (!s.allFinite()) throw std::invalid_argument("state contains non-finite entries");
}

/// Action probabilities, one column per state column.
inline Eigen::MatrixXd actor_forward_batch(const PolicyParams& p, const Eigen::MatrixXd& states) {
  check_finite_state(states);
  if (states.rows() != p.state_dim()) throw std::invalid_argument("state length mismatch");
  return softmax_columns(p.actor.forward(states));
}

inline Eigen::VectorXd actor_forward(const PolicyParams& p, const Eigen::VectorXd& s) {
  return actor_forward_batch(p, s).col(0);
}

inline Eigen::RowVectorXd critic_forward_batch(const PolicyParams& p,
                                               const Eigen::MatrixXd& states) {
  check_finite_state(states);
  if (states.rows() != p.state_dim()) throw std::invalid_argument("state length mismatch");
  return p.critic.forward(states).row(0);
}

inline double critic_forward(const PolicyParams& p, const Eigen::VectorXd& s) {
  return critic_forward_batch(p, s)(0);
}

/// Inverse-CDF draw from one uniform variate.
inline int sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum && probs[i] > 0.0) return static_cast<int>(i);
  }
  return last_positive;
}

/// Index of the largest probability; lowest index on ties.
inline int argmax_action(const Eigen::VectorXd& probs) {
  int best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  }
  return best;
}

/// Exact gradient of a scalar loss given its derivatives with respect to the
/// actor logits (actions x batch) and critic outputs (1 x batch).
inline PolicyParams backprop(const PolicyParams& p, const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& actor_upstream,
                             const Eigen::MatrixXd& critic_upstream) {
  if (states.rows() != p.state_dim() || actor_upstream.rows() != p.actor.out_dim() ||
      critic_upstream.rows() != 1 || actor_upstream.cols() != states.cols() ||
      critic_upstream.cols() != states.cols()) {
    throw std::invalid_argument("backprop: shape mismatch");
  }
  PolicyParams g = PolicyParams::zeros(p.state_dim());
  detail::MlpCache ca, cc;
  detail::forward_cached(p.actor, states, ca);
  detail::forward_cached(p.critic, states, cc);
  detail::backward(p.actor, ca, actor_upstream, g.actor);
  detail::backward(p.critic, cc, critic_upstream, g.critic);
  return g;
}

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment first-order optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, AdamConfig cfg = {})
      : cfg_(cfg),
        m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    if (grad.size() != theta.size() || theta.size() != m_.size()) {
      throw std::invalid_argument("Adam: size mismatch");
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    theta.array() -= cfg_.learning_rate * (m_.array() / c1) /
                     ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace rlabo
