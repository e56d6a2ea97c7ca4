#pragma once

// Independent reference computations used only by the test suites.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "qcmol/circuit.hpp"

namespace oracle {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

/// Kernel of a circuit without CNOTs, built qubit by qubit from explicit
/// 2x2 matrices: H, then exp(i x Z), then one diag RZ matrix per RZ slot.
inline double rz_kernel(std::span<const double> x, std::span<const double> xp, const qcmol::CircuitGrid& grid,
                        std::span<const double> theta) {
  const int n = grid.n_qubits();
  // theta index of every slot, layer-major
  std::vector<std::vector<double>> per_qubit(static_cast<std::size_t>(n));
  std::size_t t = 0;
  for (int l = 0; l < grid.n_layers(); ++l) {
    for (int q = 0; q < n; ++q) {
      if (grid.at(q, l).kind == qcmol::SlotKind::Rz) per_qubit[q].push_back(theta[t++]);
    }
  }
  const double s = 1.0 / std::sqrt(2.0);
  Mat2 h;
  h << s, s, s, -s;
  const Complex i(0.0, 1.0);
  auto qubit_state = [&](double v, const std::vector<double>& angles) {
    Mat2 phase = Mat2::Zero();
    phase(0, 0) = std::exp(i * v);
    phase(1, 1) = std::exp(-i * v);
    Mat2 u = phase * h;
    for (double a : angles) {
      Mat2 rz = Mat2::Zero();
      rz(0, 0) = std::exp(-i * a * v);
      rz(1, 1) = std::exp(i * a * v);
      u = rz * u;
    }
    return Vec2(u.col(0));
  };
  double k = 1.0;
  for (int q = 0; q < n; ++q) {
    const double a = q < static_cast<int>(x.size()) ? x[q] : 0.0;
    const double b = q < static_cast<int>(xp.size()) ? xp[q] : 0.0;
    const Complex overlap = qubit_state(b, per_qubit[q]).dot(qubit_state(a, per_qubit[q]));
    k *= std::norm(overlap);
  }
  return k;
}

/// Empty-circuit kernel: product of cos^2(x_k - x'_k).
inline double cosine_kernel(std::span<const double> x, std::span<const double> xp) {
  double k = 1.0;
  for (std::size_t q = 0; q < x.size(); ++q) k *= std::pow(std::cos(x[q] - xp[q]), 2);
  return k;
}

/// Off-diagonal absolute row sums by a plain double loop.
inline std::vector<double> row_radii(const Eigen::MatrixXd& m) {
  std::vector<double> r;
  for (int i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      if (j != i) s += std::abs(m(i, j));
    }
    r.push_back(s);
  }
  return r;
}

inline double dual_value(const Eigen::MatrixXd& q, const Eigen::VectorXd& alpha) {
  return alpha.sum() - 0.5 * alpha.dot(q * alpha);
}

/// Maximum of the SVM dual by enumeration of every active set: each
/// variable sits at 0, at C, or is free; the free block solves the
/// equality-constrained stationarity system. Feasible for n <= 10.
inline double svm_dual_optimum(const Eigen::MatrixXd& gram, std::span<const int> y, double c) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd q(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) q(a, b) = y[a] * y[b] * gram(a, b);
  double best = -std::numeric_limits<double>::infinity();
  int combos = 1;
  for (int k = 0; k < n; ++k) combos *= 3;
  std::vector<int> state(static_cast<std::size_t>(n));
  for (int code = 0; code < combos; ++code) {
    int rest = code;
    std::vector<int> free;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
      state[k] = rest % 3;
      rest /= 3;
      if (state[k] == 1) alpha[k] = c;
      if (state[k] == 2) free.push_back(k);
    }
    const int f = static_cast<int>(free.size());
    if (f > 0) {
      // [Q_FF  -y_F] [a_F]   [1 - Q_FB a_B]
      // [y_F^T   0 ] [nu ] = [ -y_B^T a_B ]
      Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(f + 1, f + 1);
      Eigen::VectorXd rhs(f + 1);
      double fixed_sum = 0.0;
      for (int k = 0; k < n; ++k) {
        if (state[k] != 2) fixed_sum += y[k] * alpha[k];
      }
      for (int a = 0; a < f; ++a) {
        double r = 1.0;
        for (int k = 0; k < n; ++k) {
          if (state[k] != 2) r -= q(free[a], k) * alpha[k];
        }
        rhs[a] = r;
        for (int b = 0; b < f; ++b) sys(a, b) = q(free[a], free[b]);
        sys(a, f) = -y[free[a]];
        sys(f, a) = y[free[a]];
      }
      rhs[f] = -fixed_sum;
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
      const Eigen::VectorXd sol = lu.solve(rhs);
      if ((sys * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
      for (int a = 0; a < f; ++a) alpha[free[a]] = sol[a];
    }
    double eq = 0.0;
    bool ok = true;
    for (int k = 0; k < n; ++k) {
      eq += y[k] * alpha[k];
      if (alpha[k] < -1e-9 || alpha[k] > c + 1e-9) ok = false;
    }
    if (!ok || std::abs(eq) > 1e-9) continue;
    best = std::max(best, dual_value(q, alpha));
  }
  return best;
}

/// Leading eigenpairs of the sample covariance, largest first.
struct CovarianceEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};

inline CovarianceEigen covariance_eigen(const Eigen::MatrixXd& data) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  CovarianceEigen out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace oracle
