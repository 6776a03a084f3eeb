#pragma once

#include <Eigen/Core>

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <vector>

#include "rlabo/benchmarks.hpp"
#include "rlabo/gp.hpp"
#include "rlabo/rng.hpp"

namespace rlabo::testing {

inline Bounds unit_square() { return {Interval{0.0, 1.0}, Interval{0.0, 1.0}}; }

/// n uniform points in `bounds` with values from `f`.
template <typename F>
ObservationSet random_observations(const Bounds& bounds, std::size_t n, Rng& rng, F&& f) {
  ObservationSet obs;
  for (auto& x : sample_uniform(bounds, n, rng)) {
    const double y = f(x);
    obs.append(std::move(x), y);
  }
  return obs;
}

/// Smooth test surface on the unit square with O(1) values.
inline double smooth_surface(const Point& x) {
  return std::sin(3.0 * x[0]) + std::cos(2.0 * x[1]) + 0.5 * x[0] * x[1];
}

/// Fourth-order central difference of f(params) along flat coordinate i.
/// Restores the parameter before returning.
template <typename Params, typename F>
double central_difference(Params& p, Eigen::VectorXd& theta, Eigen::Index i, F&& f,
                          double h = 1e-3) {
  const double keep = theta[i];
  auto at = [&](double offset) {
    theta[i] = keep + offset;
    p.assign(theta);
    return f();
  };
  const double d = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
  theta[i] = keep;
  p.assign(theta);
  return d;
}

/// Relative error with an absolute floor, for finite-difference comparisons.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace rlabo::testing

namespace rlabo::testing {

// Quadratic forms over an explicit inverse cancel badly once the kernel
// matrix is ill-conditioned (large lengthscales, condition ~1e8), so the
// elimination runs in quad precision where the compiler has it.
#if defined(__SIZEOF_FLOAT128__)
using WideReal = __float128;
#else
using WideReal = long double;
#endif

/// Brute-force GP reference: forms the full jittered kernel matrix of a
/// fitted model in long double, inverts it by Gauss-Jordan elimination with
/// partial pivoting in WideReal, and evaluates posterior and log marginal
/// likelihood directly from the explicit inverse.
class DenseGpOracle {
 public:
  explicit DenseGpOracle(const GpModel& m)
      : x_(m.data().x), y_(m.data().y), offset_(m.data().y_offset), scale_(m.data().y_scale),
        ls_(m.lengthscale()), s2_(m.signal_variance()), bounds_(m.bounds()) {
    const auto n = static_cast<std::size_t>(x_.rows());
    using W = WideReal;
    auto wabs = [](W v) { return v < 0 ? -v : v; };
    std::vector<std::vector<W>> a(n, std::vector<W>(2 * n, W(0)));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] = kern(row(i), row(j));
      a[i][i] += static_cast<long double>(m.noise_jitter());
      a[i][n + i] = 1;
    }
    long double log_det = 0.0L;
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r) {
        if (wabs(a[r][c]) > wabs(a[piv][c])) piv = r;
      }
      std::swap(a[c], a[piv]);
      const W d = a[c][c];
      log_det += logl(fabsl(static_cast<long double>(d)));
      for (auto& v : a[c]) v /= d;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == c) continue;
        const W f = a[r][c];
        if (f == 0) continue;
        for (std::size_t k = 0; k < 2 * n; ++k) a[r][k] -= f * a[c][k];
      }
    }
    inv_.assign(n, std::vector<W>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) inv_[i][j] = a[i][n + j];
    }
    W quad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) quad += W(y_[static_cast<Eigen::Index>(i)]) * inv_[i][j] * W(y_[static_cast<Eigen::Index>(j)]);
    }
    lml_ = static_cast<double>(-0.5L * static_cast<long double>(quad) - 0.5L * log_det -
                               0.5L * static_cast<long double>(n) * logl(2.0L * 3.14159265358979323846264338327950288L));
  }

  Posterior posterior(const Point& x) const {
    const auto n = static_cast<std::size_t>(x_.rows());
    std::vector<long double> u(static_cast<std::size_t>(x.size()));
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] = (static_cast<long double>(x[static_cast<Eigen::Index>(k)]) - bounds_[k].lo) /
             static_cast<long double>(bounds_[k].width());
    }
    std::vector<long double> kx(n);
    for (std::size_t i = 0; i < n; ++i) kx[i] = kern(row(i), u);
    WideReal mean = 0, quad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        mean += WideReal(kx[i]) * inv_[i][j] * WideReal(y_[static_cast<Eigen::Index>(j)]);
        quad += WideReal(kx[i]) * inv_[i][j] * WideReal(kx[j]);
      }
    }
    const WideReal wvar = WideReal(s2_) - quad;
    const long double var = wvar > 0 ? static_cast<long double>(wvar) : 0.0L;
    return {static_cast<double>(offset_ + scale_ * static_cast<long double>(mean)),
            static_cast<double>(scale_ * sqrtl(var))};
  }

  double log_marginal_likelihood() const { return lml_; }

 private:
  std::vector<long double> row(std::size_t i) const {
    std::vector<long double> r(static_cast<std::size_t>(x_.cols()));
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    return r;
  }

  long double kern(const std::vector<long double>& a, const std::vector<long double>& b) const {
    long double r2 = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) r2 += (a[k] - b[k]) * (a[k] - b[k]);
    const long double z = sqrtl(3.0L) * sqrtl(r2) / static_cast<long double>(ls_);
    return static_cast<long double>(s2_) * (1.0L + z) * expl(-z);
  }

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  long double offset_, scale_;
  double ls_, s2_;
  Bounds bounds_;
  std::vector<std::vector<WideReal>> inv_;
  double lml_ = 0.0;
};

}  // namespace rlabo::testing

#include "rlabo/ppo.hpp"

namespace rlabo::testing {

/// Random PPO batch of `n` transitions on a 4-dimensional state. Old action
/// probabilities are chosen so no ratio sits within `margin` of a clip kink,
/// which keeps central differences away from the nondifferentiable points.
inline RolloutBatch random_batch(const PolicyParams& p, std::size_t n, double eps, Rng& rng,
                                 double margin = 0.02) {
  RolloutBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd s(p.state_dim());
    for (auto& v : s) v = rng.uniform(-2.0, 2.0);
    const int a = static_cast<int>(rng.below(5));
    const double pi = actor_forward(p, s)[a];
    double rho = 1.0;
    do {
      rho = rng.uniform(0.5, 1.5);
    } while (std::abs(rho - (1.0 - eps)) < margin || std::abs(rho - (1.0 + eps)) < margin);
    batch.transitions.push_back({StateVector(s), a, 0.0, pi / rho, 0, static_cast<int>(i)});
    batch.returns.push_back(rng.uniform(-2.0, 3.0));
    batch.advantages.push_back(rng.uniform(-1.5, 1.5));
  }
  return batch;
}

inline PolicyParams random_policy(int state_dim, Rng& rng, double scale = 0.3) {
  PolicyParams p = PolicyParams::zeros(state_dim);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p.size()));
  for (auto& v : theta) v = rng.uniform(-scale, scale);
  p.assign(theta);
  return p;
}

}  // namespace rlabo::testing
