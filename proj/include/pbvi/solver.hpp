#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <vector>

#include "bounds.hpp"
#include "gp.hpp"
#include "model.hpp"
#include "sampling.hpp"

namespace pbvi {

enum class UbEngine { sawtooth, gp_ucb };

enum class RunStatus { gap_reached, time_limit, grid_too_large, stalled };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::gap_reached: return "gap_reached";
    case RunStatus::time_limit: return "time_limit";
    case RunStatus::grid_too_large: return "grid_too_large";
    case RunStatus::stalled: return "stalled";
  }
  return "?";
}

struct SolverConfig {
  Strategy strategy = Strategy::max_gap;
  UbEngine ub_engine = UbEngine::sawtooth;
  int rho = 5;
  double eta = 1.0;
  double nu = 1e-5;
  double epsilon = 1e-6;
  double time_limit = 3000.0;  // seconds
  int initial_phase_iters = 5;
  int periodic_check_interval = 5;
  std::uint64_t seed = 0;
  Kernel kernel;                  // signal variance re-estimated on full refits
  double noise_variance = -1.0;   // < 0: auto, 1e-4 x estimated signal variance
  bool random_support_init = false;
  int grid_resolution = 3;
  std::size_t grid_cap = 200000;
};

struct IterationRecord {
  int iteration = 0;
  double wall_seconds = 0.0;
  double lb = 0.0, ub = 0.0, gap = 0.0;
  std::uint64_t sawtooth_executions = 0;      // cumulative for the run
  std::vector<std::size_t> support_sizes;     // per stage: GPR supports (or stored points)
  std::vector<std::size_t> belief_sizes;      // per stage: |B_t|
};

struct RunMetrics {
  std::vector<IterationRecord> records;
  RunStatus status = RunStatus::gap_reached;
};

struct RunResult {
  double lb = std::numeric_limits<double>::quiet_NaN();
  double ub = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  RunMetrics metrics;
};

// Adaptive stopping threshold: the upper bound rounded up to the nearest
// power of ten, scaled down by 10^rho. Nonpositive bounds fall back to
// 10^-rho.
inline double target_gap(double ub_value, int rho) {
  if (!(ub_value > 0.0)) return std::pow(10.0, -rho);
  int e = static_cast<int>(std::ceil(std::log10(ub_value)));
  while (std::pow(10.0, e) < ub_value) ++e;
  while (e > std::numeric_limits<int>::min() && std::pow(10.0, e - 1) >= ub_value) --e;
  return std::pow(10.0, e - rho);
}

namespace detail {

// FNV-1a over raw bytes; used to detect bitwise fixed points of the sweep.
struct StateHash {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  }
  void add(double v) { bytes(&v, sizeof v); }
  void add(std::uint64_t v) { bytes(&v, sizeof v); }
  void add(const Eigen::VectorXd& v) { bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size())); }
};

class SolverRun {
 public:
  SolverRun(const PomdpModel& m, const SolverConfig& cfg) : m_(m), cfg_(cfg), rng_(cfg.seed) {}

  RunResult run() {
    start_ = std::chrono::steady_clock::now();
    T_ = m_.horizon;
    if (T_ < 1) throw std::invalid_argument("solver: horizon must be >= 1");
    if (cfg_.ub_engine == UbEngine::gp_ucb && !(cfg_.nu > 0.0))
      throw std::invalid_argument("solver: nu must be positive");
    counter_ = std::make_shared<std::atomic<std::uint64_t>>(0);

    RunResult res;
    initialize();

    double gap_prev1 = 0.0, gap_prev2 = 0.0;  // last and second-to-last gaps
    int have_gaps = 0;
    double eps_eff = cfg_.epsilon;  // refined from the adaptive target each iteration
    std::uint64_t prev_sig = 0;
    int stable = 0;
    const int stall_window =
        cfg_.ub_engine == UbEngine::gp_ucb ? std::max(2, cfg_.periodic_check_interval + 1) : 1;

    for (int iter = 1;; ++iter) {
      bool refresh_all = iter <= cfg_.initial_phase_iters ||
                         (have_gaps >= 2 && std::abs(gap_prev2 - gap_prev1) > 100.0 * eps_eff) ||
                         (cfg_.periodic_check_interval > 0 && iter % cfg_.periodic_check_interval == 0);
      try {
        expand(iter);
      } catch (const GridTooLarge&) {
        res.metrics.status = RunStatus::grid_too_large;
        return res;
      }
      backward_pass(iter, refresh_all);

      double lb = lower_bound_value(bounds_.gamma[0], m_.initial_belief);
      double ub = *ubs_lookup(bounds_.upper[0], m_.initial_belief);
      double gap = ub - lb;

      IterationRecord rec;
      rec.iteration = iter;
      rec.wall_seconds = elapsed();
      rec.lb = lb;
      rec.ub = ub;
      rec.gap = gap;
      rec.sawtooth_executions = counter_->load(std::memory_order_relaxed);
      for (int t = 0; t < T_; ++t) {
        rec.support_sizes.push_back(cfg_.ub_engine == UbEngine::gp_ucb
                                        ? gp_[static_cast<std::size_t>(t)].supports.size()
                                        : bounds_.upper[static_cast<std::size_t>(t)].points.size());
        rec.belief_sizes.push_back(beliefs_[static_cast<std::size_t>(t)].size());
      }
      res.metrics.records.push_back(std::move(rec));
      res.lb = lb;
      res.ub = ub;
      res.gap = gap;

      gap_prev2 = gap_prev1;
      gap_prev1 = gap;
      have_gaps = std::min(have_gaps + 1, 2);

      eps_eff = std::max(cfg_.epsilon, target_gap(ub, cfg_.rho));
      if (gap <= eps_eff) {
        res.metrics.status = RunStatus::gap_reached;
        break;
      }
      if (elapsed() >= cfg_.time_limit) {
        res.metrics.status = RunStatus::time_limit;
        break;
      }
      std::uint64_t sig = signature(lb, ub);
      if (iter > 1 && sig == prev_sig) ++stable;
      else stable = 0;
      prev_sig = sig;
      if (stable >= stall_window) {
        res.metrics.status = RunStatus::stalled;
        break;
      }
    }
    return res;
  }

 private:
  const PomdpModel& m_;
  SolverConfig cfg_;
  std::mt19937_64 rng_;
  int T_ = 0;
  std::chrono::steady_clock::time_point start_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;

  std::vector<std::vector<Belief>> beliefs_;      // B_t, corners first
  std::vector<std::vector<Belief>> new_beliefs_;  // added this iteration
  StageBounds bounds_;
  std::vector<GprState> gp_;                      // one per stage (gp-ucb)
  std::vector<bool> gp_ready_;
  std::vector<std::vector<std::size_t>> support_point_;  // support -> stored-point index

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool terminal_stage(int t) const { return t == T_ - 1; }

  // Upper-bound backup of b at stage t with the given successor projector.
  template <class Projector>
  double backed_up_value(int t, const Belief& b, Projector&& proj) {
    return upper_bound_backup(m_, b, terminal_stage(t), proj);
  }

  void initialize() {
    const Eigen::Index S = m_.num_states();
    beliefs_.assign(static_cast<std::size_t>(T_), {});
    new_beliefs_.assign(static_cast<std::size_t>(T_), {});
    bounds_.gamma.assign(static_cast<std::size_t>(T_), {});
    bounds_.upper.clear();

    // Perfect-information (MDP) values seed the corner upper bounds.
    std::vector<Eigen::VectorXd> mdp(static_cast<std::size_t>(T_));
    for (int t = T_ - 1; t >= 0; --t) {
      Eigen::VectorXd v(S);
      for (Eigen::Index s = 0; s < S; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < m_.num_actions(); ++a) {
          double q = m_.reward(s, a);
          if (!terminal_stage(t))
            q += m_.transition[static_cast<std::size_t>(a)].row(s).dot(mdp[static_cast<std::size_t>(t + 1)]);
          best = std::max(best, q);
        }
        v[s] = best;
      }
      mdp[static_cast<std::size_t>(t)] = v;
    }

    for (int t = 0; t < T_; ++t) {
      auto& B = beliefs_[static_cast<std::size_t>(t)];
      B = corner_beliefs(S);
      bool b0_is_corner = false;
      for (const Belief& c : B) b0_is_corner = b0_is_corner || same_belief(c, m_.initial_belief);
      if (!b0_is_corner) B.push_back(m_.initial_belief);
      bounds_.upper.push_back(make_upper_bound_set(mdp[static_cast<std::size_t>(t)], counter_));
    }

    // Backward pass over the initial sets: alpha vectors and stored values.
    for (int t = T_ - 1; t >= 0; --t) {
      auto& B = beliefs_[static_cast<std::size_t>(t)];
      BackupWorkspace ws(m_, terminal_stage(t) ? std::vector<AlphaVector>{}
                                               : bounds_.gamma[static_cast<std::size_t>(t + 1)]);
      std::vector<AlphaVector> alphas;
      for (const Belief& b : B) alphas.push_back(ws.backup(b));
      bounds_.gamma[static_cast<std::size_t>(t)] = prune_dominated(alphas);

      for (std::size_t i = static_cast<std::size_t>(S); i < B.size(); ++i) {
        double v = sawtooth_backed_value(t, B[i]);
        ubs_add(bounds_.upper[static_cast<std::size_t>(t)], B[i], v);
      }
    }

    if (cfg_.ub_engine == UbEngine::gp_ucb) {
      gp_.assign(static_cast<std::size_t>(T_), GprState{});
      gp_ready_.assign(static_cast<std::size_t>(T_), false);
      support_point_.assign(static_cast<std::size_t>(T_), {});
    }
  }

  // One-step upper-bound backup using sawtooth interpolation over the
  // successor stage.
  double sawtooth_backed_value(int t, const Belief& b) {
    if (terminal_stage(t)) return backed_up_value(t, b, [](const Belief&) { return 0.0; });
    const UpperBoundSet& next = bounds_.upper[static_cast<std::size_t>(t + 1)];
    SawtoothView view(next);
    return backed_up_value(t, b, [&](const Belief& q) { return stage_upper_value(next, view, q); });
  }

  void expand(int iter) {
    for (auto& v : new_beliefs_) v.clear();
    std::vector<std::pair<int, Belief>> samples;
    switch (cfg_.strategy) {
      case Strategy::max_gap:
        // Each engine walks under its own upper-bound representation.
        if (cfg_.ub_engine == UbEngine::gp_ucb)
          samples = sample_max_gap_with(m_, bounds_, m_.initial_belief,
                                        [&](int stage, const Belief& q) { return gp_upper_value(stage, q); });
        else
          samples = sample_max_gap(m_, bounds_, m_.initial_belief);
        break;
      case Strategy::random_sample:
        samples = sample_random(m_, rng_);
        break;
      case Strategy::fixed_grid:
        if (iter == 1) {
          std::vector<Belief> grid = fixed_grid(m_.num_states(), cfg_.grid_resolution, cfg_.grid_cap);
          for (int t = 0; t < T_; ++t)
            for (const Belief& g : grid) samples.emplace_back(t, g);
        }
        break;
    }
    for (auto& [t, b] : samples) {
      auto& B = beliefs_[static_cast<std::size_t>(t)];
      bool present = false;
      for (const Belief& e : B) {
        if (same_belief(e, b)) {
          present = true;
          break;
        }
      }
      if (!present) {
        B.push_back(b);
        new_beliefs_[static_cast<std::size_t>(t)].push_back(b);
      }
    }
  }

  void backward_pass(int iter, bool refresh_all) {
    for (int t = T_ - 1; t >= 0; --t) {
      update_gamma(t);
      if (cfg_.ub_engine == UbEngine::sawtooth) sawtooth_stage_update(t);
      else gp_stage_update(t, iter, refresh_all);
    }
  }

  void update_gamma(int t) {
    auto& B = beliefs_[static_cast<std::size_t>(t)];
    auto& gamma = bounds_.gamma[static_cast<std::size_t>(t)];
    BackupWorkspace ws(m_, terminal_stage(t) ? std::vector<AlphaVector>{}
                                             : bounds_.gamma[static_cast<std::size_t>(t + 1)]);
    std::vector<AlphaVector> merged = gamma;
    merged.reserve(gamma.size() + B.size());
    for (const Belief& b : B) {
      AlphaVector a = ws.backup(b);
      bool dup = false;  // cheap exact-duplicate screen before the n^2 prune
      for (const AlphaVector& e : merged) {
        if (e.action == a.action && e.values.size() == a.values.size() &&
            std::memcmp(e.values.data(), a.values.data(),
                        sizeof(double) * static_cast<std::size_t>(a.values.size())) == 0) {
          dup = true;
          break;
        }
      }
      if (!dup) merged.push_back(std::move(a));
    }
    gamma = prune_dominated(merged);
  }

  // Sawtooth engine: every stored point gets a fresh backed-up value,
  // merged by min.
  void sawtooth_stage_update(int t) {
    UpperBoundSet& set = bounds_.upper[static_cast<std::size_t>(t)];
    for (const Belief& nb : new_beliefs_[static_cast<std::size_t>(t)])
      ubs_add(set, nb, std::numeric_limits<double>::infinity());
    if (terminal_stage(t)) {
      for (auto& pt : set.points)
        pt.value = std::min(pt.value, backed_up_value(t, pt.belief, [](const Belief&) { return 0.0; }));
      return;
    }
    const UpperBoundSet& next = bounds_.upper[static_cast<std::size_t>(t + 1)];
    SawtoothView view(next);
    auto proj = [&](const Belief& q) { return stage_upper_value(next, view, q); };
    for (auto& pt : set.points) pt.value = std::min(pt.value, backed_up_value(t, pt.belief, proj));
  }

  // Successor evaluation for the GP engine: stored values first, UCB for
  // unknown beliefs, sawtooth as the degenerate fallback. Predictions are
  // floored by the certified lower bound at the same stage: an upper-bound
  // estimate below a realizable value is provably wrong, and the floor keeps
  // the reported gap non-negative.
  double gp_upper_value(int stage, const Belief& q) {
    const UpperBoundSet& set = bounds_.upper[static_cast<std::size_t>(stage)];
    if (auto v = ubs_lookup(set, q)) return *v;
    const GprState& g = gp_[static_cast<std::size_t>(stage)];
    double v = (!gp_ready_[static_cast<std::size_t>(stage)] || g.supports.empty())
                   ? sawtooth_project(set, q)
                   : ucb(g, q, cfg_.eta);
    const auto& gamma = bounds_.gamma[static_cast<std::size_t>(stage)];
    if (!gamma.empty()) v = std::max(v, lower_bound_value(gamma, q));
    return v;
  }

  void gp_fit_stage(int t) {
    auto& idx = support_point_[static_cast<std::size_t>(t)];
    UpperBoundSet& set = bounds_.upper[static_cast<std::size_t>(t)];
    std::vector<Belief> supports;
    idx.clear();
    if (cfg_.random_support_init) {
      std::exponential_distribution<double> e(1.0);
      for (Eigen::Index i = 0; i < m_.num_states() + 1; ++i) {
        Eigen::VectorXd v(m_.num_states());
        for (Eigen::Index s = 0; s < m_.num_states(); ++s) v[s] = e(rng_);
        supports.emplace_back(v / v.sum());
      }
      for (const Belief& b : supports) {
        double val = ubs_lookup(set, b) ? *ubs_lookup(set, b) : sawtooth_project(set, b);
        idx.push_back(ubs_add(set, b, val));
      }
    } else {
      for (const Belief& b : beliefs_[static_cast<std::size_t>(t)]) {
        idx.push_back(*ubs_find(set, b));
        supports.push_back(b);
      }
    }
    Eigen::VectorXd targets(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      targets[static_cast<Eigen::Index>(i)] = set.points[idx[i]].value;
    Kernel k = cfg_.kernel;
    k.signal_variance = estimate_signal_variance(targets);
    double noise = cfg_.noise_variance < 0.0 ? 1e-4 * k.signal_variance : cfg_.noise_variance;
    gp_[static_cast<std::size_t>(t)] = gpr_fit(k, std::move(supports), targets, noise);
    gp_ready_[static_cast<std::size_t>(t)] = true;
  }

  void gp_stage_update(int t, int iter, bool refresh_all) {
    UpperBoundSet& set = bounds_.upper[static_cast<std::size_t>(t)];
    GprState& g = gp_[static_cast<std::size_t>(t)];
    auto& idx = support_point_[static_cast<std::size_t>(t)];

    // Unlike the sawtooth engine, this engine overwrites stored values: a
    // transient optimistic prediction must be allowed to correct itself once
    // the model improves, so no min is taken here.
    if (!gp_ready_[static_cast<std::size_t>(t)]) {
      gp_fit_stage(t);
    } else if (refresh_all) {
      // Recompute every support's sawtooth-backed value, then refit.
      Eigen::VectorXd targets(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        UbPoint& pt = set.points[idx[i]];
        pt.value = sawtooth_backed_value(t, pt.belief);
        targets[static_cast<Eigen::Index>(i)] = pt.value;
      }
      double s2 = estimate_signal_variance(targets);
      if (s2 == g.kernel.signal_variance) {
        g.targets = targets;  // same kernel matrix: weights-only update
        recompute_weights(g);
      } else {
        Kernel k = g.kernel;
        k.signal_variance = s2;
        double noise = cfg_.noise_variance < 0.0 ? 1e-4 * s2 : cfg_.noise_variance;
        g = gpr_fit(k, g.supports, targets, noise);
      }
    } else {
      // Refresh a single random support's sawtooth-backed value.
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      std::size_t i = pick(rng_);
      UbPoint& pt = set.points[idx[i]];
      pt.value = sawtooth_backed_value(t, pt.belief);
      refresh_target(g, static_cast<Eigen::Index>(i), pt.value);
    }

    // New reachable beliefs: value them through the GP projector, keep the
    // informative ones as supports.
    auto proj = [&](const Belief& q) { return gp_upper_value(t + 1, q); };
    for (const Belief& nb : new_beliefs_[static_cast<std::size_t>(t)]) {
      double val = terminal_stage(t) ? backed_up_value(t, nb, [](const Belief&) { return 0.0; })
                                     : backed_up_value(t, nb, proj);
      std::size_t stored = ubs_add(set, nb, val);
      if (ald_delta(g, nb) > cfg_.nu) {
        expand_support(g, nb, set.points[stored].value);
        idx.push_back(stored);
      }
    }

    // Refresh the whole stage's stored values through the GP projector.
    for (auto& pt : set.points) {
      pt.value = terminal_stage(t) ? backed_up_value(t, pt.belief, [](const Belief&) { return 0.0; })
                                   : backed_up_value(t, pt.belief, proj);
    }
  }

  std::uint64_t signature(double lb, double ub) const {
    StateHash h;
    h.add(lb);
    h.add(ub);
    for (int t = 0; t < T_; ++t) {
      const auto& gamma = bounds_.gamma[static_cast<std::size_t>(t)];
      h.add(static_cast<std::uint64_t>(gamma.size()));
      for (const auto& a : gamma) {
        h.add(static_cast<std::uint64_t>(a.action));
        h.add(a.values);
      }
      const auto& set = bounds_.upper[static_cast<std::size_t>(t)];
      h.add(static_cast<std::uint64_t>(set.points.size()));
      for (const auto& pt : set.points) h.add(pt.value);
      if (cfg_.ub_engine == UbEngine::gp_ucb) {
        h.add(static_cast<std::uint64_t>(gp_[static_cast<std::size_t>(t)].supports.size()));
        h.add(gp_[static_cast<std::size_t>(t)].targets);
      }
    }
    return h.h;
  }
};

}  // namespace detail

inline RunResult solve(const PomdpModel& m, const SolverConfig& cfg) {
  return detail::SolverRun(m, cfg).run();
}

inline RunResult solve_pbvi(const PomdpModel& m, const SolverConfig& cfg) {
  if (cfg.ub_engine != UbEngine::sawtooth)
    throw std::invalid_argument("solve_pbvi: engine must be sawtooth");
  return solve(m, cfg);
}

inline RunResult solve_gpucb(const PomdpModel& m, const SolverConfig& cfg) {
  if (cfg.ub_engine != UbEngine::gp_ucb)
    throw std::invalid_argument("solve_gpucb: engine must be gp-ucb");
  return solve(m, cfg);
}

inline std::tuple<double, double, double> gap_at_b0(const StageBounds& bounds, const Belief& b0) {
  double lb = lower_bound_value(bounds.gamma.at(0), b0);
  auto ub = ubs_lookup(bounds.upper.at(0), b0);
  double u = ub ? *ub : sawtooth_project(bounds.upper.at(0), b0);
  return {lb, u, u - lb};
}

}  // namespace pbvi
