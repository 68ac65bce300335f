#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace pbvi {

namespace detail {
// Renormalize a probability vector in place when float drift is small; reject
// real violations. Sums already within 1e-12 of one are left untouched so a
// serialize/parse round trip reproduces the stored doubles bit for bit.
inline void normalize_prob_row(Eigen::Ref<Eigen::VectorXd> row, double tolerance, const char* what) {
  double sum = row.sum();
  if (std::abs(sum - 1.0) > tolerance)
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " + std::to_string(sum));
  if (std::abs(sum - 1.0) > 1e-12) row /= sum;
}
}  // namespace detail

// A point on the |S|-simplex. Construction renormalizes away float drift
// (|sum - 1| <= 1e-6) and rejects anything worse.
class Belief {
 public:
  Belief() : p_(Eigen::VectorXd::Ones(1)) {}
  explicit Belief(Eigen::VectorXd p) : p_(std::move(p)) {
    if (p_.size() == 0) throw std::invalid_argument("belief: empty vector");
    if ((p_.array() < 0.0).any()) throw std::invalid_argument("belief: negative entry");
    detail::normalize_prob_row(p_, 1e-6, "belief");
  }

  const Eigen::VectorXd& probs() const { return p_; }
  double operator[](Eigen::Index s) const { return p_[s]; }
  Eigen::Index size() const { return p_.size(); }

 private:
  Eigen::VectorXd p_;
};

inline double linf_distance(const Belief& a, const Belief& b) {
  return (a.probs() - b.probs()).cwiseAbs().maxCoeff();
}

inline bool same_belief(const Belief& a, const Belief& b, double tol = 1e-12) {
  return a.size() == b.size() && linf_distance(a, b) <= tol;
}

// The POMDP tuple (S, A, O, transition, observation, reward, b0, T).
// Solving is always undiscounted; whatever a file declared is kept in
// file_discount for reference only.
struct PomdpModel {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::string> observations;
  std::vector<Eigen::MatrixXd> transition;       // [a](s, s') = P(s' | s, a)
  std::vector<Eigen::MatrixXd> observation_fn;   // [a](s', o) = P(o | a, s')
  Eigen::MatrixXd reward;                        // (s, a)
  int horizon = 1;
  Belief initial_belief;
  double discount = 1.0;
  double file_discount = 1.0;

  // tau[a * |O| + o](s, s') = P(s'|s,a) P(o|a,s'); built by finalize_model.
  std::vector<Eigen::MatrixXd> tau;

  Eigen::Index num_states() const { return static_cast<Eigen::Index>(states.size()); }
  Eigen::Index num_actions() const { return static_cast<Eigen::Index>(actions.size()); }
  Eigen::Index num_observations() const { return static_cast<Eigen::Index>(observations.size()); }
};

// Validates the model invariants (row stochasticity within 1e-9, probabilities
// in [0,1], positive sizes) and builds the tau product tensors.
inline void finalize_model(PomdpModel& m) {
  const Eigen::Index S = m.num_states(), A = m.num_actions(), O = m.num_observations();
  if (S < 1 || A < 1 || O < 1 || m.horizon < 1)
    throw std::invalid_argument("model: |S|, |A|, |O| and the horizon must all be at least 1");
  if (static_cast<Eigen::Index>(m.transition.size()) != A ||
      static_cast<Eigen::Index>(m.observation_fn.size()) != A)
    throw std::invalid_argument("model: per-action tensor count does not match |A|");
  if (m.reward.rows() != S || m.reward.cols() != A)
    throw std::invalid_argument("model: reward matrix must be |S| x |A|");
  if (m.initial_belief.size() != S)
    throw std::invalid_argument("model: initial belief length does not match |S|");

  for (Eigen::Index a = 0; a < A; ++a) {
    const auto& T = m.transition[a];
    const auto& Z = m.observation_fn[a];
    if (T.rows() != S || T.cols() != S || Z.rows() != S || Z.cols() != O)
      throw std::invalid_argument("model: tensor shape mismatch for action " + m.actions[a]);
    if ((T.array() < -0.0).any() || (T.array() > 1.0 + 1e-9).any() ||
        (Z.array() < -0.0).any() || (Z.array() > 1.0 + 1e-9).any())
      throw std::invalid_argument("model: probability outside [0,1] for action " + m.actions[a]);
    for (Eigen::Index s = 0; s < S; ++s) {
      if (std::abs(T.row(s).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("model: T(" + m.states[s] + ", " + m.actions[a] + ", .) does not sum to 1");
      if (std::abs(Z.row(s).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("model: O(" + m.actions[a] + ", " + m.states[s] + ", .) does not sum to 1");
    }
  }

  m.tau.assign(static_cast<std::size_t>(A * O), Eigen::MatrixXd());
  for (Eigen::Index a = 0; a < A; ++a)
    for (Eigen::Index o = 0; o < O; ++o)
      m.tau[static_cast<std::size_t>(a * O + o)] =
          m.transition[a].array().rowwise() * m.observation_fn[a].col(o).transpose().array();
}

namespace detail {
// P(. | b, a) over successor states: one-step push of b through the transition.
inline Eigen::VectorXd predicted_state_dist(const PomdpModel& m, const Belief& b, int a) {
  return m.transition[static_cast<std::size_t>(a)].transpose() * b.probs();
}
}  // namespace detail

// P(o | b, a) = sum_{s'} O(a,s',o) sum_s T(s,a,s') b(s).
inline double obs_prob(const PomdpModel& m, const Belief& b, int a, int o) {
  return detail::predicted_state_dist(m, b, a).dot(m.observation_fn[static_cast<std::size_t>(a)].col(o));
}

// Bayes update of b after taking a and observing o.
inline Belief belief_update(const PomdpModel& m, const Belief& b, int a, int o) {
  Eigen::VectorXd pred = detail::predicted_state_dist(m, b, a);
  Eigen::VectorXd post = m.observation_fn[static_cast<std::size_t>(a)].col(o).cwiseProduct(pred);
  double p = post.sum();
  if (p == 0.0) throw ZeroProbabilityObservation();
  return Belief(post / p);
}

inline std::vector<Belief> corner_beliefs(Eigen::Index num_states) {
  std::vector<Belief> corners;
  corners.reserve(static_cast<std::size_t>(num_states));
  for (Eigen::Index s = 0; s < num_states; ++s)
    corners.emplace_back(Eigen::VectorXd::Unit(num_states, s));
  return corners;
}

inline std::vector<Belief> corner_beliefs(const PomdpModel& m) { return corner_beliefs(m.num_states()); }

inline Belief uniform_belief(Eigen::Index num_states) {
  return Belief(Eigen::VectorXd::Constant(num_states, 1.0 / static_cast<double>(num_states)));
}

}  // namespace pbvi
