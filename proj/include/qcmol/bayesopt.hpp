#pragma once

// Maximizes a black-box function of angle vectors on [0, 2pi)^d with a
// fixed-hyperparameter Gaussian process and expected improvement.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "qcmol/error.hpp"
#include "qcmol/rng.hpp"

namespace qcmol {

struct BoConfig {
  int budget = 20;
  int n_init = 5;
  int candidate_pool = 512;
  double length_scale = 0.2;  // on the unit cube
  double jitter = 1e-6;

  void validate() const {
    if (budget < 1) throw InvalidArgument("optimization budget must be at least 1");
    if (n_init < 0) throw InvalidArgument("n_init must be nonnegative");
    if (candidate_pool < 1) throw InvalidArgument("candidate pool must be nonempty");
    if (!(length_scale > 0.0)) throw InvalidArgument("length scale must be positive");
  }
};

struct BoEvaluation {
  std::vector<double> theta;
  double value = 0.0;
};

struct BoResult {
  std::vector<double> best_theta;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<BoEvaluation> trace;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double expected_improvement(double mu, double sigma, double best) {
  if (sigma < 1e-12) return std::max(mu - best, 0.0);
  const double z = (mu - best) / sigma;
  return (mu - best) * normal_cdf(z) + sigma * normal_pdf(z);
}

}  // namespace detail

/// Latin-hypercube design of `n` points in [0, 1)^d.
inline std::vector<std::vector<double>> latin_hypercube(int n, int d, Rng& rng) {
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<int>(perm));
    for (int i = 0; i < n; ++i) pts[i][k] = (perm[i] + rng.uniform()) / n;
  }
  return pts;
}

/// Makes exactly `budget` objective calls (one call when n_dims is 0) and
/// returns the best point seen; ties keep the earlier evaluation.
inline BoResult optimize(const Objective& objective, int n_dims, const BoConfig& config, std::uint64_t seed) {
  config.validate();
  if (n_dims < 0) throw InvalidArgument("negative dimension");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  BoResult res;
  auto evaluate = [&](const std::vector<double>& unit) {
    std::vector<double> theta(unit.size());
    for (std::size_t k = 0; k < unit.size(); ++k) theta[k] = two_pi * unit[k];
    const double v = objective(theta);
    if (res.trace.empty() || v > res.best_value) {
      res.best_value = v;
      res.best_theta = theta;
    }
    res.trace.push_back({std::move(theta), v});
  };

  if (n_dims == 0) {
    evaluate({});
    return res;
  }

  Rng rng(seed);
  const int n_lhs = std::clamp(config.n_init, 1, config.budget);
  std::vector<std::vector<double>> xs = latin_hypercube(n_lhs, n_dims, rng);
  for (const auto& u : xs) evaluate(u);

  const double inv_two_l2 = 1.0 / (2.0 * config.length_scale * config.length_scale);
  auto kernel = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (int k = 0; k < n_dims; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-d2 * inv_two_l2);
  };

  std::vector<double> cand(static_cast<std::size_t>(n_dims));
  std::vector<double> best_cand(static_cast<std::size_t>(n_dims));
  while (static_cast<int>(res.trace.size()) < config.budget) {
    const auto m = static_cast<Eigen::Index>(xs.size());
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) y(i) = res.trace[i].value;
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(m));
    const Eigen::VectorXd ys = (y.array() - mean) / (sd > 1e-12 ? sd : 1.0);
    const double best = ys.maxCoeff();

    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(xs[i], xs[j]);
      k(i, i) += config.jitter;
    }
    const Eigen::LLT<Eigen::MatrixXd> chol(k);
    const Eigen::VectorXd weights = chol.solve(ys);

    double best_ei = -1.0;
    Eigen::VectorXd ks(m);
    for (int c = 0; c < config.candidate_pool; ++c) {
      for (int d = 0; d < n_dims; ++d) cand[d] = rng.uniform();
      for (Eigen::Index i = 0; i < m; ++i) ks(i) = kernel(cand, xs[i]);
      const double mu = ks.dot(weights);
      const double var = 1.0 - ks.dot(chol.solve(ks));
      const double ei = detail::expected_improvement(mu, std::sqrt(std::max(var, 0.0)), best);
      if (ei > best_ei) {
        best_ei = ei;
        best_cand = cand;
      }
    }
    xs.push_back(best_cand);
    evaluate(best_cand);
  }
  return res;
}

}  // namespace qcmol
