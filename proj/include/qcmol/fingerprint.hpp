#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qcmol/error.hpp"
#include "qcmol/molecule.hpp"

namespace qcmol {

/// Count vector of hashed linear subgraphs.
struct FingerprintVector {
  std::vector<std::uint32_t> counts;

  std::size_t width() const noexcept { return counts.size(); }
  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  bool operator==(const FingerprintVector&) const = default;
};

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline std::string atom_token(int z, int degree) {
  return "[" + std::to_string(z % 128) + ";" + std::to_string(degree) + "]";
}

// All bonds in this alphabet are single bonds.
inline constexpr std::string_view kBondToken = "-";

inline std::string encode_path(const std::vector<std::string>& tokens, const std::vector<int>& path, bool reverse) {
  std::string s;
  const std::size_t n = path.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) s += kBondToken;
    s += tokens[path[reverse ? n - 1 - k : k]];
  }
  return s;
}

}  // namespace detail

/// Canonical string of a path: the smaller of its two reading directions.
inline std::string canonical_path_encoding(const Molecule& mol, const std::vector<int>& path) {
  const auto deg = mol.degrees();
  std::vector<std::string> tokens(mol.atoms.size());
  for (int i = 0; i < mol.size(); ++i) tokens[i] = detail::atom_token(atomic_number(mol.atoms[i].element), deg[i]);
  const std::string fwd = detail::encode_path(tokens, path, false);
  const std::string rev = detail::encode_path(tokens, path, true);
  return std::min(fwd, rev);
}

/// Enumerates every simple bonded path of 1..max_path_len atoms once and
/// counts the hash bucket of its canonical encoding.
inline FingerprintVector path_fingerprint(const Molecule& mol, int max_path_len = 7, int width = 2048) {
  if (max_path_len < 1) throw InvalidArgument("max_path_len must be at least 1");
  if (width < 16) throw InvalidArgument("fingerprint width must be at least 16");
  FingerprintVector fp;
  fp.counts.assign(static_cast<std::size_t>(width), 0);
  const int n = mol.size();
  if (n == 0) return fp;

  const auto adj = mol.adjacency();
  const auto deg = mol.degrees();
  std::vector<std::string> tokens(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) tokens[i] = detail::atom_token(atomic_number(mol.atoms[i].element), deg[i]);

  std::vector<int> path;
  std::vector<bool> on_path(static_cast<std::size_t>(n), false);
  auto record = [&] {
    const std::string fwd = detail::encode_path(tokens, path, false);
    const std::string rev = detail::encode_path(tokens, path, true);
    const std::uint64_t h = fnv1a64(std::min(fwd, rev));
    ++fp.counts[h % static_cast<std::uint64_t>(width)];
  };
  auto extend = [&](auto&& self) -> void {
    // Paths with two or more atoms are seen from both ends; keep one.
    if (path.size() == 1 || path.front() < path.back()) record();
    if (static_cast<int>(path.size()) == max_path_len) return;
    for (int v : adj[path.back()]) {
      if (on_path[v]) continue;
      on_path[v] = true;
      path.push_back(v);
      self(self);
      path.pop_back();
      on_path[v] = false;
    }
  };
  for (int s = 0; s < n; ++s) {
    path.assign(1, s);
    on_path[s] = true;
    extend(extend);
    on_path[s] = false;
  }
  return fp;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d, orthonormal rows
  Eigen::VectorXd variances;   // k, descending

  int k() const noexcept { return static_cast<int>(components.rows()); }
  int width() const noexcept { return static_cast<int>(mean.size()); }
};

/// Thin SVD of the centered data; each component's largest-magnitude entry
/// is made positive.
inline PcaModel pca_fit(const Eigen::MatrixXd& data, int k) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (n < 2) throw InvalidArgument("PCA needs at least two rows");
  if (k < 1 || k > std::min<Eigen::Index>(n, d)) throw InvalidArgument("PCA component count out of range");
  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  if (centered.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("PCA input has zero variance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  model.components = svd.matrixV().leftCols(k).transpose();
  model.variances = s.head(k).array().square() / static_cast<double>(n - 1);
  for (int c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    model.components.row(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(c, arg) < 0.0) model.components.row(c) *= -1.0;
  }
  return model;
}

/// Scores (rows - mean) * components^T.
inline Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.width()) throw InvalidArgument("PCA input width does not match the model");
  return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

inline Eigen::MatrixXd fingerprint_matrix(const std::vector<FingerprintVector>& fps) {
  if (fps.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(fps.size()), static_cast<Eigen::Index>(fps.front().width()));
  for (std::size_t r = 0; r < fps.size(); ++r) {
    if (fps[r].width() != fps.front().width()) throw InvalidArgument("fingerprint widths differ");
    for (std::size_t c = 0; c < fps[r].width(); ++c) m(r, c) = fps[r].counts[c];
  }
  return m;
}

}  // namespace qcmol
