#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace pbvi {

enum class KernelFamily { exponential, squared_exponential, matern52 };

struct Kernel {
  KernelFamily family = KernelFamily::exponential;
  double length_scale = 1.0;
  double signal_variance = 1.0;
};

inline double kernel_eval(const Kernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double r = (x - y).norm();
  switch (k.family) {
    case KernelFamily::exponential:
      return k.signal_variance * std::exp(-r / k.length_scale);
    case KernelFamily::squared_exponential:
      return k.signal_variance * std::exp(-r * r / (2.0 * k.length_scale * k.length_scale));
    case KernelFamily::matern52: {
      double s = std::sqrt(5.0) * r / k.length_scale;
      return k.signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

inline double estimate_signal_variance(const Eigen::VectorXd& targets) {
  double range = targets.maxCoeff() - targets.minCoeff();
  return std::max(1.0, range * range);
}

// Gaussian-process regressor over belief points with a zero prior mean.
// Holds two lower-triangular factors: one of K + noise (for prediction) and
// one of K alone (for the linear-dependence test).
struct GprState {
  Kernel kernel;
  std::vector<Belief> supports;
  Eigen::VectorXd targets;
  double noise_variance = 0.0;
  Eigen::MatrixXd chol;       // L with L Lᵀ = K + (noise + jitter) I
  Eigen::MatrixXd chol_free;  // L with L Lᵀ = K + jitter_free I
  double jitter = 0.0;
  double jitter_free = 0.0;
  Eigen::VectorXd weights;    // (K + (noise + jitter) I)⁻¹ targets

  Eigen::Index size() const { return targets.size(); }
};

namespace detail {

// Lower Cholesky of K + shift I, escalating jitter from 1e-10 to 1e-4 times
// the signal variance until the factorization succeeds.
inline Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& K, double shift, double signal_variance,
                                         double& jitter_out) {
  for (double scale = 1e-10; scale <= 1.000001e-4; scale *= 10.0) {
    double jitter = scale * signal_variance;
    Eigen::LLT<Eigen::MatrixXd> llt(
        K + (shift + jitter) * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
    if (llt.info() == Eigen::Success) {
      jitter_out = jitter;
      return llt.matrixL();
    }
  }
  throw FactorizationFailure("kernel matrix not positive definite after jitter escalation");
}

inline Eigen::VectorXd kernel_column(const GprState& g, const Belief& b) {
  Eigen::VectorXd k(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i)
    k[i] = kernel_eval(g.kernel, g.supports[static_cast<std::size_t>(i)].probs(), b.probs());
  return k;
}

inline void recompute_weights(GprState& g) {
  g.weights = g.chol.triangularView<Eigen::Lower>().solve(g.targets);
  g.chol.triangularView<Eigen::Lower>().transpose().solveInPlace(g.weights);
}

}  // namespace detail

inline GprState gpr_fit(const Kernel& kernel, std::vector<Belief> supports, Eigen::VectorXd targets,
                        double noise_variance) {
  const Eigen::Index n = static_cast<Eigen::Index>(supports.size());
  if (n == 0 || targets.size() != n) throw std::invalid_argument("gpr_fit: empty or mismatched inputs");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (same_belief(supports[static_cast<std::size_t>(i)], supports[static_cast<std::size_t>(j)]))
        throw DuplicateSupport();

  GprState g;
  g.kernel = kernel;
  g.supports = std::move(supports);
  g.targets = std::move(targets);
  g.noise_variance = noise_variance;

  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      K(i, j) = K(j, i) = kernel_eval(kernel, g.supports[static_cast<std::size_t>(i)].probs(),
                                      g.supports[static_cast<std::size_t>(j)].probs());
  g.chol = detail::jittered_cholesky(K, noise_variance, kernel.signal_variance, g.jitter);
  g.chol_free = detail::jittered_cholesky(K, 0.0, kernel.signal_variance, g.jitter_free);
  detail::recompute_weights(g);
  return g;
}

// Posterior mean and standard deviation (Gaussian conditioning on the stored
// targets, zero prior mean).
inline void gpr_predict(const GprState& g, const Belief& b, double& mean, double& stddev) {
  Eigen::VectorXd k = detail::kernel_column(g, b);
  mean = k.dot(g.weights);
  Eigen::VectorXd half = g.chol.triangularView<Eigen::Lower>().solve(k);
  double var = kernel_eval(g.kernel, b.probs(), b.probs()) - half.squaredNorm();
  stddev = std::sqrt(std::max(0.0, var));
}

inline double gpr_predict_mean(const GprState& g, const Belief& b) {
  return detail::kernel_column(g, b).dot(g.weights);
}

inline double ucb(const GprState& g, const Belief& b, double eta) {
  double mean, stddev;
  gpr_predict(g, b, mean, stddev);
  return mean + eta * stddev;
}

// Residual of projecting k(., b) onto the span of the support columns, using
// the noise-free kernel matrix. Small delta means b is (approximately)
// linearly dependent on the stored supports.
inline double ald_delta(const GprState& g, const Belief& b) {
  Eigen::VectorXd k = detail::kernel_column(g, b);
  Eigen::VectorXd half = g.chol_free.triangularView<Eigen::Lower>().solve(k);
  return std::max(0.0, kernel_eval(g.kernel, b.probs(), b.probs()) - half.squaredNorm());
}

// Adds one support with its target. The triangular factors grow by a rank-1
// bordering step; if the bordered diagonal loses positivity the state is
// refit from scratch with the same kernel.
inline void expand_support(GprState& g, const Belief& b, double target) {
  for (const Belief& s : g.supports)
    if (same_belief(s, b)) throw DuplicateSupport();

  const Eigen::Index n = g.size();
  Eigen::VectorXd k = detail::kernel_column(g, b);
  double kbb = kernel_eval(g.kernel, b.probs(), b.probs());

  auto bordered = [&](const Eigen::MatrixXd& L, double shift) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n + 1);
    out.topLeftCorner(n, n) = L;
    Eigen::VectorXd c = L.triangularView<Eigen::Lower>().solve(k);
    double d2 = kbb + shift - c.squaredNorm();
    if (d2 <= 0.0) return Eigen::MatrixXd();  // lost positivity; caller refits
    out.row(n).head(n) = c.transpose();
    out(n, n) = std::sqrt(d2);
    return out;
  };

  Eigen::MatrixXd grown = bordered(g.chol, g.noise_variance + g.jitter);
  Eigen::MatrixXd grown_free = bordered(g.chol_free, g.jitter_free);

  g.supports.push_back(b);
  g.targets.conservativeResize(n + 1);
  g.targets[n] = target;

  if (grown.size() == 0 || grown_free.size() == 0) {
    g = gpr_fit(g.kernel, std::move(g.supports), std::move(g.targets), g.noise_variance);
    return;
  }
  g.chol = std::move(grown);
  g.chol_free = std::move(grown_free);
  detail::recompute_weights(g);
}

// Replaces one target and recomputes the weights; the factorization is
// untouched.
inline void refresh_target(GprState& g, Eigen::Index index, double new_target) {
  g.targets[index] = new_target;
  detail::recompute_weights(g);
}

}  // namespace pbvi
