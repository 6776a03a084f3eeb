#pragma once

// UCB acquisition family and its inner maximizer.
//
// The five candidate actions are UCB weights {0, 1, 2.576, 2.576^2, inf}:
// the weight list 0, 2.576^(i-1) for i = 1, 2, 3, then infinity. beta = 0 is
// pure exploitation (posterior mean) and beta = inf is pure exploration
// (posterior standard deviation alone, handled as its own branch).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlabo/benchmarks.hpp"
#include "rlabo/gp.hpp"
#include "rlabo/rng.hpp"

namespace rlabo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kNumActions = 5;

struct AcquisitionSpec {
  int index;
  double beta;

  bool exploratory_only() const { return std::isinf(beta); }

  /// Canonical text form used in traces, CSVs and on the command line.
  std::string_view beta_label() const {
    static constexpr std::array<std::string_view, kNumActions> labels = {"0", "1", "2.576",
                                                                         "6.635776", "inf"};
    return labels.at(static_cast<std::size_t>(index));
  }

  friend bool operator==(const AcquisitionSpec&, const AcquisitionSpec&) = default;
};

inline constexpr std::array<AcquisitionSpec, kNumActions> kCandidateSet = {{
    {0, 0.0},
    {1, 1.0},
    {2, 2.576},
    {3, 6.635776},  // 2.576 squared
    {4, kInf},
}};

/// Candidate actions in ascending beta order.
inline std::span<const AcquisitionSpec, kNumActions> candidate_set() { return kCandidateSet; }

inline const AcquisitionSpec& action_spec(std::size_t index) { return kCandidateSet.at(index); }

inline std::optional<AcquisitionSpec> parse_beta(std::string_view text) {
  for (const auto& s : kCandidateSet) {
    if (s.beta_label() == text) return s;
  }
  return std::nullopt;
}

inline std::string valid_beta_labels() {
  std::string out;
  for (const auto& s : kCandidateSet) {
    if (!out.empty()) out += ", ";
    out += s.beta_label();
  }
  return out;
}

inline double ucb_value(double mean, double std, const AcquisitionSpec& spec) {
  if (!(std >= 0.0)) throw std::invalid_argument("ucb_value: std must be nonnegative");
  if (spec.exploratory_only()) return std;
  if (spec.beta == 0.0) return mean;
  return mean + spec.beta * std;
}

struct InnerOptimizerConfig {
  std::size_t probes = 1024;
  std::size_t refine_starts = 8;
  int refine_iterations = 20;
  double initial_step = 0.05;  // fraction of each domain width
};

struct AfMaximum {
  Point x;
  double value;
  std::size_t evaluations;
};

namespace detail {

inline double acquisition_at(const GpModel& model, const AcquisitionSpec& spec, const Point& x) {
  if (spec.beta == 0.0) return model.posterior_mean(x);
  const Posterior p = model.posterior(x);
  return ucb_value(p.mean, p.std, spec);
}

/// Latin-hypercube probes in the box.
inline std::vector<Point> latin_hypercube(const Bounds& bounds, std::size_t n, Rng& rng) {
  const auto d = bounds.size();
  std::vector<Point> pts(n, Point(static_cast<Eigen::Index>(d)));
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < d; ++k) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
      pts[i][static_cast<Eigen::Index>(k)] = bounds[k].lo + u * bounds[k].width();
    }
  }
  return pts;
}

}  // namespace detail

/// Maximizes the UCB of `spec` under `model` over the box: Latin-hypercube
/// probing followed by coordinate pattern search from the best probes.
///
/// Every evaluation is compared against the running best with a strict '>'
/// in evaluation order, so ties go to the first point found and the result
/// is a pure function of (model, spec, bounds, rng state).
inline AfMaximum maximize_af(const GpModel& model, const AcquisitionSpec& spec,
                             const Bounds& bounds, Rng& rng,
                             const InnerOptimizerConfig& cfg = {}) {
  check_bounds(bounds);
  if (cfg.probes == 0) throw std::invalid_argument("maximize_af: need at least one probe");
  const auto d = static_cast<Eigen::Index>(bounds.size());

  std::vector<Point> probes = detail::latin_hypercube(bounds, cfg.probes, rng);
  std::vector<double> values(probes.size());
  AfMaximum best{probes.front(), -kInf, 0};
  auto consider = [&](const Point& x, double v) {
    ++best.evaluations;
    if (v > best.value) {
      best.value = v;
      best.x = x;
    }
  };
  for (std::size_t i = 0; i < probes.size(); ++i) {
    values[i] = detail::acquisition_at(model, spec, probes[i]);
    consider(probes[i], values[i]);
  }

  std::vector<std::size_t> order(probes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t starts = std::min(cfg.refine_starts, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(starts),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });

  for (std::size_t s = 0; s < starts; ++s) {
    Point cur = probes[order[s]];
    double fcur = values[order[s]];
    Eigen::VectorXd step(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      step[k] = cfg.initial_step * bounds[static_cast<std::size_t>(k)].width();
    }
    for (int it = 0; it < cfg.refine_iterations; ++it) {
      Point next = cur;
      double fnext = fcur;
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto& b = bounds[static_cast<std::size_t>(k)];
        for (double dir : {1.0, -1.0}) {
          Point trial = cur;
          trial[k] = std::clamp(cur[k] + dir * step[k], b.lo, b.hi);
          if (trial[k] == cur[k]) continue;
          const double v = detail::acquisition_at(model, spec, trial);
          consider(trial, v);
          if (v > fnext) {
            fnext = v;
            next = trial;
          }
        }
      }
      if (fnext > fcur) {
        cur = std::move(next);
        fcur = fnext;
      } else {
        step *= 0.5;
      }
    }
  }
  return best;
}

}  // namespace rlabo
