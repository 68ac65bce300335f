#pragma once

#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "bounds.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace pbvi {

enum class Strategy { max_gap, random_sample, fixed_grid };

// Per-stage solver bounds, shared between the solver and the samplers.
// gamma[t] is the stage-t alpha-vector set; upper[t] the stage-t point set.
struct StageBounds {
  std::vector<std::vector<AlphaVector>> gamma;
  std::vector<UpperBoundSet> upper;
};

namespace detail {

// Upper-bound evaluation used during sampling: stored value when the belief
// is a known point, sawtooth interpolation otherwise.
inline double stage_upper_value(const UpperBoundSet& set, const SawtoothView& view, const Belief& b) {
  if (auto v = ubs_lookup(set, b)) return *v;
  return view(b);
}

}  // namespace detail

// Walks a single trajectory from b0, following the action with the best
// upper-bound one-step value and the observation whose successor has the
// widest bound gap. `upper_at(stage, belief)` supplies the stage upper bound,
// letting the caller substitute its own representation. Returns one belief
// per stage 1..T-1; duplicates of existing points are returned as-is (the
// caller deduplicates).
template <class UpperFn>
std::vector<std::pair<int, Belief>> sample_max_gap_with(const PomdpModel& m, const StageBounds& bounds,
                                                        const Belief& b0, UpperFn&& upper_at) {
  const int T = m.horizon;
  const Eigen::Index A = m.num_actions(), O = m.num_observations();
  std::vector<std::pair<int, Belief>> out;
  Belief b = b0;
  for (int t = 0; t + 1 < T; ++t) {
    Eigen::Index best_a = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < A; ++a) {
      double q = m.reward.col(a).dot(b.probs());
      for (Eigen::Index o = 0; o < O; ++o) {
        double p = obs_prob(m, b, static_cast<int>(a), static_cast<int>(o));
        if (p == 0.0) continue;
        q += p * upper_at(t + 1, belief_update(m, b, static_cast<int>(a), static_cast<int>(o)));
      }
      if (q > best_q) {
        best_q = q;
        best_a = a;
      }
    }

    const auto& next_gamma = bounds.gamma[static_cast<std::size_t>(t + 1)];
    double best_gap = -std::numeric_limits<double>::infinity();
    Belief chosen = b;
    for (Eigen::Index o = 0; o < O; ++o) {
      double p = obs_prob(m, b, static_cast<int>(best_a), static_cast<int>(o));
      if (p == 0.0) continue;
      Belief succ = belief_update(m, b, static_cast<int>(best_a), static_cast<int>(o));
      double gap = upper_at(t + 1, succ) - lower_bound_value(next_gamma, succ);
      if (gap > best_gap) {
        best_gap = gap;
        chosen = succ;
      }
    }
    b = chosen;
    out.emplace_back(t + 1, b);
  }
  return out;
}

inline std::vector<std::pair<int, Belief>> sample_max_gap(const PomdpModel& m, const StageBounds& bounds,
                                                          const Belief& b0) {
  std::vector<detail::SawtoothView> views;
  views.reserve(bounds.upper.size());
  for (const UpperBoundSet& set : bounds.upper) views.emplace_back(set);
  return sample_max_gap_with(m, bounds, b0, [&](int stage, const Belief& q) {
    return detail::stage_upper_value(bounds.upper[static_cast<std::size_t>(stage)],
                                     views[static_cast<std::size_t>(stage)], q);
  });
}

// One uniform-simplex draw per stage 1..T-1.
inline std::vector<std::pair<int, Belief>> sample_random(const PomdpModel& m, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<std::pair<int, Belief>> out;
  for (int t = 1; t < m.horizon; ++t) {
    Eigen::VectorXd v(m.num_states());
    for (Eigen::Index s = 0; s < m.num_states(); ++s) v[s] = e(rng);
    out.emplace_back(t, Belief(v / v.sum()));
  }
  return out;
}

// All beliefs with entries in {0, 1/k, ..., k/k} summing to 1, enumerated in
// lexicographic order. Counts C(k+S-1, S-1) points; raises before enumerating
// when that exceeds cap.
inline std::vector<Belief> fixed_grid(Eigen::Index num_states, int resolution,
                                      std::size_t cap = 200000) {
  if (resolution < 1) throw std::invalid_argument("fixed_grid: resolution must be >= 1");
  double count = 1.0;  // C(k+S-1, S-1) accumulated multiplicatively
  for (Eigen::Index i = 1; i < num_states; ++i)
    count *= static_cast<double>(resolution + i) / static_cast<double>(i);
  if (count > static_cast<double>(cap))
    throw GridTooLarge(static_cast<std::size_t>(std::min(count, 1e18)), cap);

  std::vector<Belief> out;
  out.reserve(static_cast<std::size_t>(count + 0.5));
  Eigen::VectorXd point = Eigen::VectorXd::Zero(num_states);
  std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index s, int left) {
    if (s == num_states - 1) {
      point[s] = static_cast<double>(left) / resolution;
      out.emplace_back(point);
      return;
    }
    for (int c = left; c >= 0; --c) {
      point[s] = static_cast<double>(c) / resolution;
      rec(s + 1, left - c);
    }
  };
  rec(0, resolution);
  return out;
}

}  // namespace pbvi
