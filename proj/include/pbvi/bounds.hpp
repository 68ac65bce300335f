#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace pbvi {

struct AlphaVector {
  Eigen::VectorXd values;
  int action = 0;
};

inline double alpha_dot(const AlphaVector& a, const Belief& b) { return a.values.dot(b.probs()); }

// Index of the maximizing vector; ties resolve to the lowest index.
inline std::size_t best_alpha(const std::vector<AlphaVector>& gamma, const Belief& b) {
  std::size_t best = 0;
  double best_v = alpha_dot(gamma.at(0), b);
  for (std::size_t i = 1; i < gamma.size(); ++i) {
    double v = alpha_dot(gamma[i], b);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

inline double lower_bound_value(const std::vector<AlphaVector>& gamma, const Belief& b) {
  return alpha_dot(gamma[best_alpha(gamma, b)], b);
}

// Removes vectors that another vector dominates pointwise. Exact duplicates
// keep their first occurrence, so the result is order-deterministic.
inline std::vector<AlphaVector> prune_dominated(const std::vector<AlphaVector>& gamma) {
  const std::size_t n = gamma.size();
  std::vector<bool> dead(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n && !dead[i]; ++j) {
      if (j == i || dead[j]) continue;
      const auto& gi = gamma[i].values;
      const auto& gj = gamma[j].values;
      if ((gj.array() >= gi.array()).all() && ((gj.array() > gi.array()).any() || j < i)) dead[i] = true;
    }
  }
  std::vector<AlphaVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!dead[i]) out.push_back(gamma[i]);
  return out;
}

// Precomputed tensors for backing up many beliefs against one successor set.
// G[a*O+o] column k holds tau_{a,o} * alpha_k; tau_row_sum[a*O+o] dotted with
// b gives P(o | b, a).
class BackupWorkspace {
 public:
  BackupWorkspace(const PomdpModel& m, const std::vector<AlphaVector>& gamma_next) : model_(&m) {
    const Eigen::Index S = m.num_states(), A = m.num_actions(), O = m.num_observations();
    K_ = static_cast<Eigen::Index>(gamma_next.size());
    if (K_ > 0) {
      Eigen::MatrixXd alphas(S, K_);
      for (Eigen::Index k = 0; k < K_; ++k) alphas.col(k) = gamma_next[static_cast<std::size_t>(k)].values;
      G_.reserve(static_cast<std::size_t>(A * O));
      row_sum_.reserve(static_cast<std::size_t>(A * O));
      for (Eigen::Index a = 0; a < A; ++a) {
        for (Eigen::Index o = 0; o < O; ++o) {
          const Eigen::MatrixXd& tau = m.tau[static_cast<std::size_t>(a * O + o)];
          G_.push_back(tau * alphas);
          row_sum_.push_back(tau.rowwise().sum());
        }
      }
    }
  }

  bool terminal() const { return K_ == 0; }

  // One point-based backup (the value-function gradient at b).
  AlphaVector backup(const Belief& b) const {
    const PomdpModel& m = *model_;
    const Eigen::Index A = m.num_actions(), O = m.num_observations();
    AlphaVector best;
    double best_v = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < A; ++a) {
      Eigen::VectorXd g = m.reward.col(a);
      if (K_ > 0) {
        for (Eigen::Index o = 0; o < O; ++o) {
          const std::size_t ao = static_cast<std::size_t>(a * O + o);
          if (row_sum_[ao].dot(b.probs()) == 0.0) continue;  // unobservable branch
          Eigen::VectorXd scores = G_[ao].transpose() * b.probs();
          Eigen::Index k = 0;
          for (Eigen::Index i = 1; i < K_; ++i)
            if (scores[i] > scores[k]) k = i;
          g += G_[ao].col(k);
        }
      }
      double v = g.dot(b.probs());
      if (v > best_v) {
        best_v = v;
        best = AlphaVector{std::move(g), static_cast<int>(a)};
      }
    }
    return best;
  }

 private:
  const PomdpModel* model_;
  Eigen::Index K_ = 0;
  std::vector<Eigen::MatrixXd> G_;
  std::vector<Eigen::VectorXd> row_sum_;
};

inline AlphaVector backup(const PomdpModel& m, const Belief& b, const std::vector<AlphaVector>& gamma_next) {
  return BackupWorkspace(m, gamma_next).backup(b);
}

// ---------------------------------------------------------------------------
// Point-set upper bound with sawtooth projection.

struct UbPoint {
  Belief belief;
  double value;
};

struct UpperBoundSet {
  std::vector<UbPoint> points;  // first num_states entries are the simplex corners
  Eigen::Index num_states = 0;
  std::shared_ptr<std::atomic<std::uint64_t>> sawtooth_counter;
};

inline UpperBoundSet make_upper_bound_set(const Eigen::VectorXd& corner_values,
                                          std::shared_ptr<std::atomic<std::uint64_t>> counter = nullptr) {
  UpperBoundSet set;
  set.num_states = corner_values.size();
  set.sawtooth_counter = counter ? std::move(counter) : std::make_shared<std::atomic<std::uint64_t>>(0);
  set.points.reserve(static_cast<std::size_t>(set.num_states));
  for (Eigen::Index s = 0; s < set.num_states; ++s)
    set.points.push_back({Belief(Eigen::VectorXd::Unit(set.num_states, s)), corner_values[s]});
  return set;
}

// Index of the stored point equal to b, if any.
inline std::optional<std::size_t> ubs_find(const UpperBoundSet& set, const Belief& b) {
  for (std::size_t i = 0; i < set.points.size(); ++i)
    if (same_belief(set.points[i].belief, b)) return i;
  return std::nullopt;
}

inline std::optional<double> ubs_lookup(const UpperBoundSet& set, const Belief& b) {
  if (auto i = ubs_find(set, b)) return set.points[*i].value;
  return std::nullopt;
}

// Stores (b, value), keeping the tighter value when b is already present.
// Returns the index of the stored point.
inline std::size_t ubs_add(UpperBoundSet& set, const Belief& b, double value) {
  if (auto i = ubs_find(set, b)) {
    if (value < set.points[*i].value) set.points[*i].value = value;
    return *i;
  }
  set.points.push_back({b, value});
  return set.points.size() - 1;
}

namespace detail {

// Sawtooth interpolation over one point set. The per-point offsets from the
// corner interpolation are precomputed so repeated queries stay cheap; every
// call to operator() counts as one sawtooth execution.
class SawtoothView {
 public:
  explicit SawtoothView(const UpperBoundSet& set) : set_(&set) {
    const Eigen::Index S = set.num_states;
    corner_.resize(S);
    for (Eigen::Index s = 0; s < S; ++s) corner_[s] = set.points[static_cast<std::size_t>(s)].value;
    f_.reserve(set.points.size() - static_cast<std::size_t>(S));
    for (std::size_t i = static_cast<std::size_t>(S); i < set.points.size(); ++i)
      f_.push_back(set.points[i].value - corner_.dot(set.points[i].belief.probs()));
  }

  double operator()(const Belief& b) const {
    if (set_->sawtooth_counter) set_->sawtooth_counter->fetch_add(1, std::memory_order_relaxed);
    const Eigen::Index S = set_->num_states;
    double base = corner_.dot(b.probs());
    if (f_.empty()) return base;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f_.size(); ++i) {
      const Eigen::VectorXd& p = set_->points[static_cast<std::size_t>(S) + i].belief.probs();
      double lambda = std::numeric_limits<double>::infinity();
      for (Eigen::Index s = 0; s < S; ++s)
        if (p[s] > 0.0) lambda = std::min(lambda, b[s] / p[s]);
      double cand = lambda * f_[i];
      if (cand < best) best = cand;
    }
    return base + best;
  }

 private:
  const UpperBoundSet* set_;
  Eigen::VectorXd corner_;
  std::vector<double> f_;
};

}  // namespace detail

inline double sawtooth_project(const UpperBoundSet& set, const Belief& b) {
  return detail::SawtoothView(set)(b);
}

// One-step upper-bound backup: expected reward plus the projected value of
// each reachable posterior. Projector is any callable Belief -> double.
template <class Projector>
double upper_bound_backup(const PomdpModel& m, const Belief& b, bool terminal, Projector&& project) {
  const Eigen::Index A = m.num_actions(), O = m.num_observations();
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < A; ++a) {
    double v = m.reward.col(a).dot(b.probs());
    if (!terminal) {
      for (Eigen::Index o = 0; o < O; ++o) {
        double p = obs_prob(m, b, static_cast<int>(a), static_cast<int>(o));
        if (p == 0.0) continue;
        v += p * project(belief_update(m, b, static_cast<int>(a), static_cast<int>(o)));
      }
    }
    best = std::max(best, v);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exact finite-horizon solution by cross-sum enumeration with incremental
// pointwise pruning. Throws BlowupExceeded when an intermediate set would
// exceed cap vectors.

inline std::vector<std::vector<AlphaVector>> exact_value(const PomdpModel& m, int horizon,
                                                         std::size_t cap = 1000000) {
  const Eigen::Index A = m.num_actions(), O = m.num_observations();
  std::vector<std::vector<AlphaVector>> stages(static_cast<std::size_t>(horizon));

  std::vector<AlphaVector> terminal;
  for (Eigen::Index a = 0; a < A; ++a) terminal.push_back({m.reward.col(a), static_cast<int>(a)});
  stages[static_cast<std::size_t>(horizon - 1)] = prune_dominated(terminal);

  for (int t = horizon - 2; t >= 0; --t) {
    const auto& next = stages[static_cast<std::size_t>(t + 1)];
    std::vector<AlphaVector> stage;
    for (Eigen::Index a = 0; a < A; ++a) {
      std::vector<AlphaVector> partial{{m.reward.col(a), static_cast<int>(a)}};
      for (Eigen::Index o = 0; o < O; ++o) {
        const Eigen::MatrixXd& tau = m.tau[static_cast<std::size_t>(a * O + o)];
        if (partial.size() * next.size() > cap) throw BlowupExceeded(cap);
        std::vector<AlphaVector> expanded;
        expanded.reserve(partial.size() * next.size());
        for (const auto& g : partial)
          for (const auto& alpha : next)
            expanded.push_back({g.values + tau * alpha.values, static_cast<int>(a)});
        partial = prune_dominated(expanded);
      }
      stage.insert(stage.end(), partial.begin(), partial.end());
    }
    stages[static_cast<std::size_t>(t)] = prune_dominated(stage);
  }
  return stages;
}

}  // namespace pbvi
