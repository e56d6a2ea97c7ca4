#pragma once

// Batch wiring: circuit -> molecule -> descriptors, and circuit -> optimized
// quantum-kernel SVM -> balanced test accuracy.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "qcmol/bayesopt.hpp"
#include "qcmol/chemmap.hpp"
#include "qcmol/circuit.hpp"
#include "qcmol/datasets.hpp"
#include "qcmol/fingerprint.hpp"
#include "qcmol/molecule.hpp"
#include "qcmol/rng.hpp"
#include "qcmol/simulator.hpp"
#include "qcmol/svm.hpp"

namespace qcmol {

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
/// Each index is handled exactly once; callers write results by index.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Descriptors

struct DescribeSettings {
  LayoutSettings layout;
  double bond_scale = 1.5;
  int max_path_len = 7;
  int fingerprint_width = 2048;
};

struct CircuitDescription {
  bool ok = false;
  std::string error;
  int n_atoms = 0;
  GershgorinSummary radii;
  FingerprintVector fingerprint;
  double pc1 = std::numeric_limits<double>::quiet_NaN();
  double pc2 = std::numeric_limits<double>::quiet_NaN();
};

inline CircuitDescription describe_circuit(const CircuitGrid& grid, const DescribeSettings& settings,
                                           std::uint64_t seed) {
  CircuitDescription d;
  try {
    const Molecule mol = circuit_to_molecule(grid);
    const LayoutResult layout = layout_2d(mol, settings.layout, seed);
    d.n_atoms = mol.size();
    d.radii = gershgorin_radii(coulomb_matrix(mol, layout.coords, settings.bond_scale));
    d.fingerprint = path_fingerprint(mol, settings.max_path_len, settings.fingerprint_width);
    d.ok = true;
  } catch (const UnmappableOffset& e) {
    d.error = "unmappable";
  } catch (const Error& e) {
    d.error = e.what();
  }
  return d;
}

/// Describes every circuit and fits a two-component PCA on the fingerprints
/// of the successfully mapped ones.
inline std::vector<CircuitDescription> describe_batch(const std::vector<CircuitGrid>& grids,
                                                      const DescribeSettings& settings, std::uint64_t seed,
                                                      unsigned threads = 0) {
  std::vector<CircuitDescription> out(grids.size());
  parallel_for(
      grids.size(), [&](std::size_t i) { out[i] = describe_circuit(grids[i], settings, derive_seed(seed, i)); },
      threads);
  std::vector<FingerprintVector> fps;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].ok) continue;
    fps.push_back(out[i].fingerprint);
    rows.push_back(i);
  }
  if (fps.size() >= 2) {
    const Eigen::MatrixXd m = fingerprint_matrix(fps);
    try {
      const PcaModel pca = pca_fit(m, std::min<int>(2, static_cast<int>(std::min(m.rows(), m.cols()))));
      const Eigen::MatrixXd scores = pca_project(pca, m);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        out[rows[r]].pc1 = scores(static_cast<Eigen::Index>(r), 0);
        out[rows[r]].pc2 = scores.cols() > 1 ? scores(static_cast<Eigen::Index>(r), 1) : 0.0;
      }
    } catch (const InvalidArgument&) {
      // identical fingerprints: scores stay NaN
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Train/test data already mapped onto [0, pi] by a scaler fit on train.
struct EvalProblem {
  Dataset train;
  Dataset test;
  FeatureScaler scaler;
};

inline EvalProblem make_problem(const Dataset& train, const Dataset& test) {
  train.validate();
  test.validate();
  if (train.dim() != test.dim()) throw InvalidArgument("train and test feature widths differ");
  EvalProblem p;
  p.scaler = fit_scaler(train.features);
  p.train = apply_scaler(p.scaler, train);
  p.test = apply_scaler(p.scaler, test);
  return p;
}

struct EvalSettings {
  BoConfig bo;
  SvmSettings svm;
  double validation_fraction = 0.25;
};

struct EvaluationRecord {
  int n_rz = 0;
  std::vector<double> theta;
  double validation_accuracy = 0.0;  // best objective value found
  double test_accuracy = 0.0;
  int evaluations = 0;
  std::vector<double> trace_values;
};

namespace detail {

inline Eigen::MatrixXcd select_columns(const Eigen::MatrixXcd& m, const std::vector<int>& cols) {
  Eigen::MatrixXcd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

inline std::vector<int> select(const std::vector<int>& v, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[i]);
  return out;
}

inline double fit_and_score(const Eigen::MatrixXcd& train_states, const std::vector<int>& train_y,
                            const Eigen::MatrixXcd& test_states, const std::vector<int>& test_y,
                            const SvmSettings& svm) {
  Eigen::MatrixXd gram = gram_from_states(train_states, train_states);
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j) gram(j, i) = gram(i, j);
  const SvmModel model = train_svm(gram, train_y, svm);
  const Eigen::MatrixXd cross = gram_from_states(test_states, train_states);
  return balanced_accuracy(predict(model, cross), test_y);
}

}  // namespace detail

/// Optimizes the RZ angles on a stratified validation fold of the training
/// set, then retrains on the full training set and scores the test set.
inline EvaluationRecord evaluate_circuit(const CircuitGrid& grid, const EvalProblem& problem,
                                         const EvalSettings& settings, std::uint64_t seed) {
  if (problem.train.dim() > grid.n_qubits()) throw InvalidArgument("more features than qubits");
  const auto [fit_idx, val_idx] =
      stratified_split(problem.train.labels, 1.0 - settings.validation_fraction, derive_seed(seed, 1));
  const auto fit_y = detail::select(problem.train.labels, fit_idx);
  const auto val_y = detail::select(problem.train.labels, val_idx);

  const Objective objective = [&](std::span<const double> theta) {
    const Eigen::MatrixXcd states = encode_states(problem.train.features, grid, theta);
    return detail::fit_and_score(detail::select_columns(states, fit_idx), fit_y, detail::select_columns(states, val_idx),
                                 val_y, settings.svm);
  };

  EvaluationRecord rec;
  rec.n_rz = count_rz(grid);
  const BoResult bo = optimize(objective, rec.n_rz, settings.bo, derive_seed(seed, 2));
  rec.theta = bo.best_theta;
  rec.validation_accuracy = bo.best_value;
  rec.evaluations = static_cast<int>(bo.trace.size());
  for (const auto& e : bo.trace) rec.trace_values.push_back(e.value);
  rec.test_accuracy = detail::fit_and_score(encode_states(problem.train.features, grid, rec.theta), problem.train.labels,
                                            encode_states(problem.test.features, grid, rec.theta), problem.test.labels,
                                            settings.svm);
  return rec;
}

/// Evaluation seed keyed on the circuit itself, so repeated circuits in a
/// batch get the same angle search.
inline std::uint64_t circuit_seed(std::uint64_t seed, const CircuitGrid& grid) {
  return derive_seed(seed, fnv1a64(to_line(grid)));
}

inline std::vector<EvaluationRecord> evaluate_batch(const std::vector<CircuitGrid>& grids, const EvalProblem& problem,
                                                    const EvalSettings& settings, std::uint64_t seed,
                                                    unsigned threads = 0) {
  std::vector<EvaluationRecord> out(grids.size());
  parallel_for(
      grids.size(),
      [&](std::size_t i) { out[i] = evaluate_circuit(grids[i], problem, settings, circuit_seed(seed, grids[i])); }, threads);
  return out;
}

}  // namespace qcmol
