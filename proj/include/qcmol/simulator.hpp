#pragma once

// Exact statevector simulation of the angle-encoded feature map followed by a
// gate grid, and the fidelity kernel built from it.
//
// Basis ordering: qubit 0 is the most significant bit of the basis index.
// RZ at (qubit k, layer l) with angle t applies diag(exp(-i t x_k),
// exp(+i t x_k)); angles are consumed in layer-major, then qubit, order.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qcmol/circuit.hpp"
#include "qcmol/error.hpp"

namespace qcmol {

using Complex = std::complex<double>;

inline constexpr int kMaxSimulatedQubits = 20;

struct StateVector {
  int n_qubits = 0;
  std::vector<Complex> amp;

  double norm() const {
    double s = 0.0;
    for (const Complex& a : amp) s += std::norm(a);
    return std::sqrt(s);
  }
};

inline Complex inner(const StateVector& a, const StateVector& b) {
  Complex s{0.0, 0.0};
  for (std::size_t i = 0; i < a.amp.size(); ++i) s += std::conj(a.amp[i]) * b.amp[i];
  return s;
}

namespace detail {

inline void check_qubits(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxSimulatedQubits)
    throw InvalidArgument("simulator supports 1.." + std::to_string(kMaxSimulatedQubits) + " qubits");
}

inline double feature(std::span<const double> x, int k) { return k < static_cast<int>(x.size()) ? x[k] : 0.0; }

inline std::size_t bit_mask(int n_qubits, int qubit) { return std::size_t{1} << (n_qubits - 1 - qubit); }

}  // namespace detail

/// exp(i sum_k x_k Z_k) H^n |0...0>. Features beyond x.size() are zero.
inline StateVector feature_state(std::span<const double> x, int n_qubits) {
  detail::check_qubits(n_qubits);
  if (static_cast<int>(x.size()) > n_qubits) throw InvalidArgument("more features than qubits");
  StateVector psi{n_qubits, std::vector<Complex>(std::size_t{1} << n_qubits)};
  const double scale = std::pow(2.0, -0.5 * n_qubits);
  for (std::size_t b = 0; b < psi.amp.size(); ++b) {
    double phase = 0.0;
    for (int k = 0; k < static_cast<int>(x.size()); ++k) {
      phase += (b & detail::bit_mask(n_qubits, k)) ? -x[k] : x[k];
    }
    psi.amp[b] = std::polar(scale, phase);
  }
  return psi;
}

/// Applies the grid layer by layer; within a layer, slots in row order.
inline StateVector evolve(StateVector psi, const CircuitGrid& grid, std::span<const double> theta,
                          std::span<const double> x) {
  const int n = grid.n_qubits();
  if (psi.n_qubits != n) throw InvalidArgument("state and circuit qubit counts differ");
  if (static_cast<int>(theta.size()) != count_rz(grid))
    throw InvalidArgument("angle vector has length " + std::to_string(theta.size()) + ", circuit has " +
                          std::to_string(count_rz(grid)) + " RZ gates");
  std::size_t next = 0;
  for (int l = 0; l < grid.n_layers(); ++l) {
    for (int q = 0; q < n; ++q) {
      const GateSlot s = grid.at(q, l);
      if (s.kind == SlotKind::Rz) {
        const double a = theta[next++] * detail::feature(x, q);
        const Complex on_zero = std::polar(1.0, -a);
        const Complex on_one = std::polar(1.0, a);
        const std::size_t m = detail::bit_mask(n, q);
        for (std::size_t b = 0; b < psi.amp.size(); ++b) psi.amp[b] *= (b & m) ? on_one : on_zero;
      } else if (s.kind == SlotKind::CnotControl) {
        const std::size_t cm = detail::bit_mask(n, q);
        const std::size_t tm = detail::bit_mask(n, grid.target_row(q, s.delta));
        for (std::size_t b = 0; b < psi.amp.size(); ++b) {
          if ((b & cm) && !(b & tm)) std::swap(psi.amp[b], psi.amp[b | tm]);
        }
      }
    }
  }
  return psi;
}

inline StateVector encoded_state(std::span<const double> x, const CircuitGrid& grid, std::span<const double> theta) {
  return evolve(feature_state(x, grid.n_qubits()), grid, theta, x);
}

/// |<psi(x')|psi(x)>|^2.
inline double kernel_value(std::span<const double> x, std::span<const double> x_prime, const CircuitGrid& grid,
                           std::span<const double> theta) {
  return std::norm(inner(encoded_state(x_prime, grid, theta), encoded_state(x, grid, theta)));
}

/// One encoded state per row of `features`, stored as columns.
inline Eigen::MatrixXcd encode_states(const Eigen::MatrixXd& features, const CircuitGrid& grid,
                                      std::span<const double> theta) {
  const auto dim = Eigen::Index{1} << grid.n_qubits();
  Eigen::MatrixXcd states(dim, features.rows());
  std::vector<double> x(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) x[c] = features(r, c);
    const StateVector psi = encoded_state(x, grid, theta);
    for (Eigen::Index b = 0; b < dim; ++b) states(b, r) = psi.amp[b];
  }
  return states;
}

/// G(a, b) = |<psi_b|psi_a>|^2 for state columns of `a` and `b`.
inline Eigen::MatrixXd gram_from_states(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.adjoint() * b).cwiseAbs2();
}

inline Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_prime, const CircuitGrid& grid,
                                   std::span<const double> theta) {
  const Eigen::MatrixXcd sa = encode_states(x, grid, theta);
  if (&x == &x_prime) {
    Eigen::MatrixXd g = gram_from_states(sa, sa);
    // Exact symmetry; rounding in the product can differ across triangles.
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < g.cols(); ++j) g(j, i) = g(i, j);
    }
    return g;
  }
  return gram_from_states(sa, encode_states(x_prime, grid, theta));
}

}  // namespace qcmol
