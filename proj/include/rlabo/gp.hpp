#pragma once

// Gaussian-process surrogate with an isotropic Matern-3/2 kernel.
//
// Inputs are mapped to the unit cube through the domain bounds before any
// kernel evaluation; targets are mean-centered and scaled to unit standard
// deviation. Both the lengthscale and signal variance therefore live in
// normalized units, and the lengthscale handed to the state encoder is
// scale-free. Posterior queries take and return raw (domain, objective) units.
//
// Hyperparameters are refit from scratch on every call to fit(): a static
// lengthscale would carry no information about the run into the state.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rlabo/benchmarks.hpp"
#include "rlabo/errors.hpp"

namespace rlabo {

class ObservationSet {
 public:
  ObservationSet() = default;

  void append(Point x, double y) {
    if (!points_.empty() && x.size() != points_.front().size()) {
      throw std::invalid_argument("observation dimension mismatch");
    }
    if (points_.empty() || y > incumbent_) incumbent_ = y;
    points_.push_back(std::move(x));
    values_.push_back(y);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }

  /// Max over values; -inf when empty.
  double incumbent() const { return incumbent_; }

 private:
  std::vector<Point> points_;
  std::vector<double> values_;
  double incumbent_ = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline double matern32_r(double r, double lengthscale, double signal_variance) {
  const double z = std::numbers::sqrt3 * r / lengthscale;
  return signal_variance * (1.0 + z) * std::exp(-z);
}

}  // namespace detail

/// k(r) = s2 (1 + sqrt(3) r / l) exp(-sqrt(3) r / l), r = |x1 - x2|.
inline double matern32(const Point& x1, const Point& x2, double lengthscale,
                       double signal_variance) {
  if (!(lengthscale > 0.0) || !(signal_variance > 0.0)) {
    throw std::invalid_argument("matern32: lengthscale and signal variance must be positive");
  }
  if (x1.size() != x2.size()) throw std::invalid_argument("matern32: dimension mismatch");
  return detail::matern32_r((x1 - x2).norm(), lengthscale, signal_variance);
}

/// Kernel matrix over the rows of x.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, double lengthscale,
                                     double signal_variance) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = detail::matern32_r((x.row(i) - x.row(j)).norm(), lengthscale, signal_variance);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

struct GpOptions {
  double initial_jitter = 1e-8;   // relative to signal variance
  double max_jitter = 1e-2;
  double duplicate_tolerance = 1e-10;  // unit-cube distance
  int lengthscale_starts = 8;
  double min_lengthscale_factor = 1e-2;  // times unit-cube diagonal
  double max_lengthscale_factor = 10.0;
  double search_tolerance = 1e-3;  // in log-lengthscale
  int max_evals_per_start = 40;
};

struct Posterior {
  double mean;
  double std;
};

/// Training data after unit-cube scaling, duplicate collapse and target
/// standardization.
struct NormalizedData {
  Bounds bounds;
  Eigen::MatrixXd x;  // n x d, unit cube
  Eigen::VectorXd y;  // standardized
  double y_offset = 0.0;
  double y_scale = 1.0;
};

inline NormalizedData normalize(const ObservationSet& obs, const Bounds& bounds,
                                double duplicate_tolerance = 1e-10) {
  if (obs.empty()) throw std::invalid_argument("GP fit needs at least one observation");
  check_bounds(bounds);
  const auto d = static_cast<Eigen::Index>(bounds.size());
  std::vector<Eigen::VectorXd> kept;
  std::vector<double> kept_y;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Point& p = obs.points()[i];
    if (p.size() != d) throw std::invalid_argument("observation dimension does not match bounds");
    Eigen::VectorXd u(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto& b = bounds[static_cast<std::size_t>(k)];
      u[k] = (p[k] - b.lo) / b.width();
    }
    bool duplicate = false;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if ((kept[j] - u).norm() < duplicate_tolerance) {
        kept_y[j] = std::max(kept_y[j], obs.values()[i]);
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      kept.push_back(std::move(u));
      kept_y.push_back(obs.values()[i]);
    }
  }

  NormalizedData out;
  out.bounds = bounds;
  const auto n = static_cast<Eigen::Index>(kept.size());
  out.x.resize(n, d);
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.x.row(i) = kept[static_cast<std::size_t>(i)].transpose();
    out.y[i] = kept_y[static_cast<std::size_t>(i)];
  }
  out.y_offset = out.y.mean();
  out.y.array() -= out.y_offset;
  const double sd = std::sqrt(out.y.squaredNorm() / static_cast<double>(n));
  if (sd >= 1e-12) {
    out.y_scale = sd;
    out.y /= sd;
  }
  return out;
}

class GpModel {
 public:
  /// Factorizes K = s2 * (C + jitter I) for the given hyperparameters,
  /// escalating the relative jitter x10 on failure. Throws NumericalError if
  /// the maximum jitter still fails.
  static GpModel build(NormalizedData data, double lengthscale, double signal_variance,
                       const GpOptions& opt = {}) {
    if (!(signal_variance > 0.0)) throw std::invalid_argument("signal variance must be positive");
    return assemble(std::move(data), lengthscale, signal_variance, opt);
  }

  /// As build(), with the signal variance set to its closed-form maximum
  /// likelihood value s2 = y' C^-1 y / n (C the unit-variance kernel matrix
  /// plus jitter). Degenerate all-zero targets get s2 = 1.
  static GpModel build_profiled(NormalizedData data, double lengthscale,
                                const GpOptions& opt = {}) {
    return assemble(std::move(data), lengthscale, 0.0, opt);
  }

  double lengthscale() const { return lengthscale_; }
  double signal_variance() const { return signal_variance_; }
  /// Absolute diagonal jitter in normalized output units.
  double noise_jitter() const { return jitter_; }
  double relative_jitter() const { return jitter_ / signal_variance_; }
  std::size_t size() const { return static_cast<std::size_t>(data_.x.rows()); }
  int dim() const { return static_cast<int>(data_.x.cols()); }
  const Bounds& bounds() const { return data_.bounds; }
  const NormalizedData& data() const { return data_; }
  /// Lower Cholesky factor of K + jitter I.
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const Eigen::VectorXd& weights() const { return alpha_; }

  Eigen::VectorXd to_unit(const Point& x) const {
    if (x.size() != dim()) throw std::invalid_argument("query point dimension mismatch");
    Eigen::VectorXd u(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const auto& b = data_.bounds[static_cast<std::size_t>(k)];
      u[k] = (x[k] - b.lo) / b.width();
    }
    return u;
  }

  Posterior posterior(const Point& x) const {
    const Eigen::VectorXd k = cross_kernel(to_unit(x));
    const double mean = k.dot(alpha_);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    const double var = std::max(signal_variance_ - v.squaredNorm(), 0.0);
    return {data_.y_offset + data_.y_scale * mean, data_.y_scale * std::sqrt(var)};
  }

  double posterior_mean(const Point& x) const {
    return data_.y_offset + data_.y_scale * cross_kernel(to_unit(x)).dot(alpha_);
  }

  /// -1/2 y'(K + jI)^-1 y - 1/2 log det(K + jI) - n/2 log 2 pi, normalized data.
  double log_marginal_likelihood() const { return lml_; }

 private:
  GpModel() = default;

  // signal_variance <= 0 requests the profile estimate.
  static GpModel assemble(NormalizedData data, double lengthscale, double signal_variance,
                          const GpOptions& opt) {
    if (!(lengthscale > 0.0)) throw std::invalid_argument("lengthscale must be positive");
    if (!(opt.initial_jitter > 0.0) || !(opt.max_jitter >= opt.initial_jitter)) {
      throw std::invalid_argument("jitter options need 0 < initial_jitter <= max_jitter");
    }
    const Eigen::MatrixXd corr = kernel_matrix(data.x, lengthscale, 1.0);
    const Eigen::Index n = corr.rows();
    Eigen::LLT<Eigen::MatrixXd> llt;
    double rel = opt.initial_jitter;
    for (;; rel *= 10.0) {
      Eigen::MatrixXd a = corr;
      a.diagonal().array() += rel;
      llt.compute(a);
      if (llt.info() == Eigen::Success) break;
      if (rel * 10.0 > opt.max_jitter * (1.0 + 1e-9)) {
        throw NumericalError("kernel matrix factorization failed at max jitter " +
                             std::to_string(rel) + " (n = " + std::to_string(n) +
                             ", lengthscale = " + std::to_string(lengthscale) + ")");
      }
    }

    GpModel m;
    m.data_ = std::move(data);
    const Eigen::VectorXd& y = m.data_.y;
    const auto nd = static_cast<double>(n);
    Eigen::VectorXd a_tilde = llt.solve(y);
    if (signal_variance <= 0.0) {
      signal_variance = y.dot(a_tilde) / nd;
      if (!(signal_variance >= 1e-12)) signal_variance = 1.0;
    }
    m.lengthscale_ = lengthscale;
    m.signal_variance_ = signal_variance;
    m.jitter_ = rel * signal_variance;
    m.chol_ = llt.matrixL();
    m.chol_ *= std::sqrt(signal_variance);
    m.alpha_ = a_tilde / signal_variance;
    const double log_det = 2.0 * m.chol_.diagonal().array().log().sum();
    m.lml_ = -0.5 * y.dot(m.alpha_) - 0.5 * log_det - 0.5 * nd * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(m.lml_)) {
      throw NumericalError("non-finite log marginal likelihood at lengthscale " +
                           std::to_string(lengthscale));
    }
    return m;
  }

  Eigen::VectorXd cross_kernel(const Eigen::VectorXd& u) const {
    const Eigen::Index n = data_.x.rows();
    const Eigen::Index d = data_.x.cols();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = data_.x(i, j) - u[j];
        r2 += diff * diff;
      }
      k[i] = detail::matern32_r(std::sqrt(r2), lengthscale_, signal_variance_);
    }
    return k;
  }

  NormalizedData data_;
  double lengthscale_ = 1.0;
  double signal_variance_ = 1.0;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

struct LengthscaleCandidate {
  double lengthscale;
  double log_marginal_likelihood;  // -inf when factorization failed
};

struct FitResult {
  GpModel model;
  std::vector<LengthscaleCandidate> candidates;
};

/// Maximum-likelihood fit of the lengthscale by multi-start local search on
/// log-lengthscale over [1e-2, 10] x unit-cube diagonal, with the signal
/// variance profiled out at each candidate. Starts are evenly spaced in log
/// space; every start that is a local maximum of the start grid is refined
/// by a step-halving 1D pattern search.
inline FitResult fit_traced(const ObservationSet& obs, const Bounds& bounds,
                            const GpOptions& opt = {}) {
  const NormalizedData data = normalize(obs, bounds, opt.duplicate_tolerance);
  const double diag = std::sqrt(static_cast<double>(bounds.size()));
  const double lo = std::log(opt.min_lengthscale_factor * diag);
  const double hi = std::log(opt.max_lengthscale_factor * diag);
  const int starts = std::max(opt.lengthscale_starts, 2);
  const double spacing = (hi - lo) / (starts - 1);
  constexpr double kFailed = -std::numeric_limits<double>::infinity();

  std::vector<LengthscaleCandidate> candidates;
  std::optional<GpModel> best;
  std::string last_error;

  auto evaluate = [&](double log_ls) {
    const double ls = std::exp(log_ls);
    double lml = kFailed;
    try {
      GpModel m = GpModel::build_profiled(data, ls, opt);
      lml = m.log_marginal_likelihood();
      if (!best || lml > best->log_marginal_likelihood()) best = std::move(m);
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
    candidates.push_back({ls, lml});
    return lml;
  };

  std::vector<double> grid(static_cast<std::size_t>(starts));
  std::vector<double> grid_lml(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    grid[j] = lo + spacing * static_cast<double>(j);
    grid_lml[j] = evaluate(grid[j]);
  }

  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double v = grid_lml[j];
    if (v == kFailed) continue;
    if (j > 0 && grid_lml[j - 1] > v) continue;
    if (j + 1 < grid.size() && grid_lml[j + 1] > v) continue;
    double c = grid[j];
    double fc = v;
    double h = spacing / 2.0;
    int evals = 0;
    while (h >= opt.search_tolerance && evals < opt.max_evals_per_start) {
      double next = c;
      for (double cand : {c + h, c - h}) {
        if (cand < lo - 1e-12 || cand > hi + 1e-12) continue;
        const double f = evaluate(cand);
        ++evals;
        if (f > fc) {
          fc = f;
          next = cand;
        }
      }
      if (next != c) {
        c = next;
      } else {
        h /= 2.0;
      }
    }
  }

  if (!best) throw NumericalError("GP fit failed for every lengthscale candidate: " + last_error);
  return {std::move(*best), std::move(candidates)};
}

inline GpModel fit(const ObservationSet& obs, const Bounds& bounds, const GpOptions& opt = {}) {
  return fit_traced(obs, bounds, opt).model;
}

/// Model at explicit hyperparameters on the same normalized data fit() would use.
inline GpModel fit_with(const ObservationSet& obs, const Bounds& bounds, double lengthscale,
                        double signal_variance, const GpOptions& opt = {}) {
  return GpModel::build(normalize(obs, bounds, opt.duplicate_tolerance), lengthscale,
                        signal_variance, opt);
}

inline Posterior posterior(const GpModel& model, const Point& x) { return model.posterior(x); }

inline double log_marginal_likelihood(const GpModel& model) {
  return model.log_marginal_likelihood();
}

}  // namespace rlabo
