#pragma once

// Black-box test objectives, presented in maximization form.
//
// Each function below is the canonical minimization form f from the standard
// virtual library of simulation experiments (SFU test-function collection);
// evaluate() returns -f(x). With d the dimension:
//
//   Ackley     f = -20 exp(-0.2 sqrt(sum x_i^2 / d)) - exp(sum cos(2 pi x_i) / d) + 20 + e
//              domain [-32.768, 32.768]^d, min 0 at x = 0
//   Levy       w_i = 1 + (x_i - 1) / 4
//              f = sin^2(pi w_1) + sum_{i<d} (w_i - 1)^2 [1 + 10 sin^2(pi w_i + 1)]
//                  + (w_d - 1)^2 [1 + sin^2(2 pi w_d)]
//              domain [-10, 10]^d, min 0 at x = 1
//   Griewank   f = sum x_i^2 / 4000 - prod cos(x_i / sqrt(i)) + 1
//              domain [-600, 600]^d, min 0 at x = 0
//   Schwefel   f = 418.9829 d - sum x_i sin(sqrt|x_i|)
//              domain [-500, 500]^d, min ~0 at x = 420.9687
//   Eggholder  f = -(x2 + 47) sin(sqrt|x2 + x1/2 + 47|) - x1 sin(sqrt|x1 - (x2 + 47)|)
//              domain [-512, 512]^2 (2D only), min -959.6407 at (512, 404.2319)

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlabo/rng.hpp"

namespace rlabo {

using Point = Eigen::VectorXd;

struct Interval {
  double lo;
  double hi;

  double width() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

using Bounds = std::vector<Interval>;

inline void check_bounds(const Bounds& bounds) {
  if (bounds.empty()) throw std::invalid_argument("bounds must have at least one dimension");
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    if (!(bounds[k].lo < bounds[k].hi)) {
      throw std::invalid_argument("bounds: lo must be < hi in dimension " + std::to_string(k));
    }
  }
}

inline double diagonal_length(const Bounds& bounds) {
  double s = 0.0;
  for (const auto& b : bounds) s += b.width() * b.width();
  return std::sqrt(s);
}

inline bool contains(const Bounds& bounds, const Point& x) {
  if (static_cast<std::size_t>(x.size()) != bounds.size()) return false;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const double v = x[static_cast<Eigen::Index>(k)];
    if (!(v >= bounds[k].lo && v <= bounds[k].hi)) return false;
  }
  return true;
}

enum class BenchmarkId { Ackley, Levy, Griewank, Schwefel, Eggholder };

inline constexpr std::array<BenchmarkId, 5> kAllBenchmarks = {
    BenchmarkId::Ackley, BenchmarkId::Levy, BenchmarkId::Griewank, BenchmarkId::Schwefel,
    BenchmarkId::Eggholder};

constexpr std::string_view benchmark_name(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Ackley: return "ackley";
    case BenchmarkId::Levy: return "levy";
    case BenchmarkId::Griewank: return "griewank";
    case BenchmarkId::Schwefel: return "schwefel";
    case BenchmarkId::Eggholder: return "eggholder";
  }
  return "unknown";
}

inline std::optional<BenchmarkId> parse_benchmark(std::string_view name) {
  for (auto id : kAllBenchmarks) {
    if (benchmark_name(id) == name) return id;
  }
  return std::nullopt;
}

inline std::string valid_benchmark_names() {
  std::string out;
  for (auto id : kAllBenchmarks) {
    if (!out.empty()) out += ", ";
    out += benchmark_name(id);
  }
  return out;
}

class Benchmark {
 public:
  explicit Benchmark(BenchmarkId id, int dim = 2) : id_(id), dim_(dim) {
    if (dim < 1) throw std::invalid_argument("benchmark dimension must be positive");
    if (id == BenchmarkId::Eggholder && dim != 2) {
      throw std::invalid_argument("eggholder is defined only in 2 dimensions");
    }
    const double half = [id] {
      switch (id) {
        case BenchmarkId::Ackley: return 32.768;
        case BenchmarkId::Levy: return 10.0;
        case BenchmarkId::Griewank: return 600.0;
        case BenchmarkId::Schwefel: return 500.0;
        case BenchmarkId::Eggholder: return 512.0;
      }
      return 1.0;
    }();
    bounds_.assign(static_cast<std::size_t>(dim), Interval{-half, half});
  }

  BenchmarkId id() const { return id_; }
  std::string_view name() const { return benchmark_name(id_); }
  int dim() const { return dim_; }
  const Bounds& bounds() const { return bounds_; }

  /// -f(x). Throws std::domain_error naming the first coordinate outside the box.
  double evaluate(const Point& x) const {
    if (x.size() != dim_) {
      throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                  ", benchmark expects " + std::to_string(dim_));
    }
    for (int k = 0; k < dim_; ++k) {
      const auto& b = bounds_[static_cast<std::size_t>(k)];
      if (!(x[k] >= b.lo && x[k] <= b.hi)) {
        throw std::domain_error(std::string(name()) + ": coordinate " + std::to_string(k) + " = " +
                                std::to_string(x[k]) + " outside [" + std::to_string(b.lo) +
                                ", " + std::to_string(b.hi) + "]");
      }
    }
    return -minimization_form(x);
  }

  double operator()(const Point& x) const { return evaluate(x); }

  /// Published global minimizer of f (maximizer of evaluate).
  Point known_maximizer() const {
    switch (id_) {
      case BenchmarkId::Levy: return Point::Ones(dim_);
      case BenchmarkId::Schwefel: return Point::Constant(dim_, 420.9687);
      case BenchmarkId::Eggholder: return Point{{512.0, 404.2319}};
      default: return Point::Zero(dim_);
    }
  }

  double known_maximum() const { return evaluate(known_maximizer()); }

 private:
  double minimization_form(const Point& x) const {
    using std::numbers::pi;
    const double d = static_cast<double>(dim_);
    switch (id_) {
      case BenchmarkId::Ackley: {
        double sq = 0.0, cs = 0.0;
        for (int i = 0; i < dim_; ++i) {
          sq += x[i] * x[i];
          cs += std::cos(2.0 * pi * x[i]);
        }
        return -20.0 * std::exp(-0.2 * std::sqrt(sq / d)) - std::exp(cs / d) + 20.0 +
               std::numbers::e;
      }
      case BenchmarkId::Levy: {
        auto w = [&](int i) { return 1.0 + (x[i] - 1.0) / 4.0; };
        const double s1 = std::sin(pi * w(0));
        double sum = s1 * s1;
        for (int i = 0; i + 1 < dim_; ++i) {
          const double wi = w(i);
          const double s = std::sin(pi * wi + 1.0);
          sum += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * s * s);
        }
        const double wd = w(dim_ - 1);
        const double sd = std::sin(2.0 * pi * wd);
        return sum + (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
      }
      case BenchmarkId::Griewank: {
        double sum = 0.0, prod = 1.0;
        for (int i = 0; i < dim_; ++i) {
          sum += x[i] * x[i] / 4000.0;
          prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
        }
        return sum - prod + 1.0;
      }
      case BenchmarkId::Schwefel: {
        double sum = 0.0;
        for (int i = 0; i < dim_; ++i) sum += x[i] * std::sin(std::sqrt(std::abs(x[i])));
        return 418.9829 * d - sum;
      }
      case BenchmarkId::Eggholder: {
        const double x1 = x[0], x2 = x[1];
        return -(x2 + 47.0) * std::sin(std::sqrt(std::abs(x2 + x1 / 2.0 + 47.0))) -
               x1 * std::sin(std::sqrt(std::abs(x1 - (x2 + 47.0))));
      }
    }
    return 0.0;
  }

  BenchmarkId id_;
  int dim_;
  Bounds bounds_;
};

inline double evaluate(const Benchmark& b, const Point& x) { return b.evaluate(x); }

inline Bounds domain(const Benchmark& b) { return b.bounds(); }

/// n independent uniform points in the box.
inline std::vector<Point> sample_uniform(const Bounds& bounds, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_uniform: n must be >= 1");
  check_bounds(bounds);
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point p(static_cast<Eigen::Index>(bounds.size()));
    for (std::size_t k = 0; k < bounds.size(); ++k) {
      p[static_cast<Eigen::Index>(k)] = rng.uniform(bounds[k].lo, bounds[k].hi);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace rlabo
