#pragma once

// Shared helpers for the test binaries: random model generation and two
// independent oracles (a belief-tree value recursion and a convex-hull
// interpolation bound) used to cross-check the library implementations.

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pbvi/bounds.hpp"
#include "pbvi/model.hpp"

namespace testsupport {

inline Eigen::VectorXd random_simplex(std::mt19937_64& rng, Eigen::Index n) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = e(rng);
  return v / v.sum();
}

inline pbvi::PomdpModel random_model(std::mt19937_64& rng, Eigen::Index S, Eigen::Index A,
                                     Eigen::Index O) {
  pbvi::PomdpModel m;
  for (Eigen::Index s = 0; s < S; ++s) m.states.push_back("s" + std::to_string(s));
  for (Eigen::Index a = 0; a < A; ++a) m.actions.push_back("a" + std::to_string(a));
  for (Eigen::Index o = 0; o < O; ++o) m.observations.push_back("o" + std::to_string(o));
  std::uniform_real_distribution<double> rew(-5.0, 5.0);
  for (Eigen::Index a = 0; a < A; ++a) {
    Eigen::MatrixXd T(S, S), Ob(S, O);
    for (Eigen::Index s = 0; s < S; ++s) {
      T.row(s) = random_simplex(rng, S).transpose();
      Ob.row(s) = random_simplex(rng, O).transpose();
    }
    m.transition.push_back(T);
    m.observation_fn.push_back(Ob);
  }
  m.reward.resize(S, A);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) m.reward(s, a) = rew(rng);
  m.initial_belief = pbvi::Belief(random_simplex(rng, S));
  pbvi::finalize_model(m);
  return m;
}

// Finite-horizon optimal value by direct recursion over the belief tree.
// Deliberately written without alpha vectors so it shares nothing with the
// enumeration path it validates.
inline double tree_value(const pbvi::PomdpModel& m, const pbvi::Belief& b, int steps_left) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < m.num_actions(); ++a) {
    double v = m.reward.col(a).dot(b.probs());
    if (steps_left > 1) {
      for (Eigen::Index o = 0; o < m.num_observations(); ++o) {
        double p = pbvi::obs_prob(m, b, static_cast<int>(a), static_cast<int>(o));
        if (p > 0.0)
          v += p * tree_value(m, pbvi::belief_update(m, b, static_cast<int>(a), static_cast<int>(o)),
                              steps_left - 1);
      }
    }
    best = std::max(best, v);
  }
  return best;
}

// Tightest upper bound consistent with the stored points: the minimum of
// sum(lambda_i v_i) over convex combinations of stored beliefs equal to the
// query. Solved by enumerating candidate bases of size <= S+1; the corners
// are stored, so the program is always feasible.
inline double hull_value(const pbvi::UpperBoundSet& set, const pbvi::Belief& query) {
  const Eigen::Index S = set.num_states;
  const std::size_t n = set.points.size();
  Eigen::MatrixXd P(S + 1, n);
  Eigen::VectorXd vals(n);
  for (std::size_t i = 0; i < n; ++i) {
    P.col(static_cast<Eigen::Index>(i)).head(S) = set.points[i].belief.probs();
    P(S, static_cast<Eigen::Index>(i)) = 1.0;
    vals[static_cast<Eigen::Index>(i)] = set.points[i].value;
  }
  Eigen::VectorXd rhs(S + 1);
  rhs.head(S) = query.probs();
  rhs[S] = 1.0;

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (!pick.empty()) {
      const Eigen::Index k = static_cast<Eigen::Index>(pick.size());
      Eigen::MatrixXd A(S + 1, k);
      Eigen::VectorXd v(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        A.col(j) = P.col(static_cast<Eigen::Index>(pick[static_cast<std::size_t>(j)]));
        v[j] = vals[static_cast<Eigen::Index>(pick[static_cast<std::size_t>(j)])];
      }
      Eigen::VectorXd lambda = A.colPivHouseholderQr().solve(rhs);
      if ((A * lambda - rhs).lpNorm<Eigen::Infinity>() < 1e-9 && lambda.minCoeff() > -1e-9)
        best = std::min(best, lambda.dot(v));
    }
    if (pick.size() == static_cast<std::size_t>(S) + 1) return;
    for (std::size_t i = from; i < n; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace testsupport
