#pragma once

// Binary classification problems: the synthetic hidden-manifold task, CSV
// tables, MNIST digit pairs, plus the affine [0, pi] feature scaler that
// prepares features for angle encoding.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "qcmol/csv.hpp"
#include "qcmol/error.hpp"
#include "qcmol/fingerprint.hpp"
#include "qcmol/rng.hpp"

namespace qcmol {

struct Dataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // +1 / -1
  std::string name;
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(labels.size()); }
  int dim() const noexcept { return static_cast<int>(features.cols()); }

  int count(int label) const { return static_cast<int>(std::count(labels.begin(), labels.end(), label)); }

  void validate() const {
    if (features.rows() != static_cast<Eigen::Index>(labels.size()))
      throw InvalidArgument("dataset feature and label counts differ");
    if (count(1) == 0 || count(-1) == 0) throw InvalidArgument("dataset '" + name + "' contains a single class");
    if (!features.allFinite()) throw InvalidArgument("dataset '" + name + "' has non-finite features");
  }
};

inline Dataset subset(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.name = data.name;
  out.seed = data.seed;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(rows[r]);
    out.labels.push_back(data.labels[rows[r]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hidden manifold

struct HiddenManifoldParams {
  int latent_dim = 6;
  int teacher_width = 10;
};

/// Latent z ~ N(0, I_m); features tanh(F z / sqrt(m)); labels from a random
/// one-hidden-layer tanh teacher on z, split at the sample median.
inline Dataset gen_hidden_manifold(int d, int n, std::uint64_t seed, const HiddenManifoldParams& params = {}) {
  if (n < 4) throw InvalidArgument("hidden-manifold dataset needs at least 4 points");
  if (d < 1) throw InvalidArgument("feature dimension must be positive");
  const int m = params.latent_dim;
  const int h = params.teacher_width;
  Rng rng(seed);
  Eigen::MatrixXd f(d, m);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) f(i, j) = rng.normal();
  Eigen::MatrixXd w(h, m);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < m; ++j) w(i, j) = rng.normal();
  Eigen::VectorXd v(h);
  for (int i = 0; i < h; ++i) v(i) = rng.normal();

  Dataset data;
  data.name = fmt::format("hidden-manifold-{}d", d);
  data.seed = seed;
  data.features.resize(n, d);
  std::vector<double> score(static_cast<std::size_t>(n));
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  Eigen::VectorXd z(m);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < m; ++j) z(j) = rng.normal();
    data.features.row(r) = ((f * z) * inv_sqrt_m).array().tanh().transpose();
    score[r] = v.dot(((w * z) * inv_sqrt_m).array().tanh().matrix()) / std::sqrt(static_cast<double>(h));
  }
  std::vector<double> sorted = score;
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (int r = 0; r < n; ++r) data.labels.push_back(score[r] > median ? 1 : -1);
  return data;
}

// ---------------------------------------------------------------------------
// CSV

inline Dataset load_csv_dataset(std::istream& in, const std::vector<std::string>& feature_columns,
                                const std::string& label_column, const std::string& positive_token,
                                const std::string& name = "csv") {
  const csv::Table table = csv::read_table(in);
  if (feature_columns.empty()) throw InvalidArgument("no feature columns selected");
  std::vector<int> cols;
  for (const auto& c : feature_columns) cols.push_back(table.require_column(c));
  const int label_col = table.require_column(label_column);

  Dataset data;
  data.name = name;
  data.features.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& cell = row[cols[k]];
      const std::string where = fmt::format("row {}, column '{}'", r + 1, feature_columns[k]);
      if (cell.empty()) throw FormatError("missing value at " + where);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(v))
        throw FormatError("cannot parse '" + cell + "' as a number at " + where);
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
    if (row[label_col].empty()) throw FormatError(fmt::format("missing label at row {}", r + 1));
    data.labels.push_back(row[label_col] == positive_token ? 1 : -1);
  }
  if (data.count(1) == 0 || data.count(-1) == 0) throw FormatError("CSV labels contain a single class");
  return data;
}

inline Dataset load_csv_dataset(const std::string& path, const std::vector<std::string>& feature_columns,
                                const std::string& label_column, const std::string& positive_token) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return load_csv_dataset(in, feature_columns, label_column, positive_token, path);
}

// ---------------------------------------------------------------------------
// MNIST IDX files

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace detail

struct IdxImages {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::uint8_t>> images;
};

inline IdxImages read_idx_images(std::istream& in) {
  if (detail::read_be32(in) != kIdxImageMagic) throw FormatError("bad IDX image magic number");
  const std::uint32_t count = detail::read_be32(in);
  IdxImages out;
  out.rows = static_cast<int>(detail::read_be32(in));
  out.cols = static_cast<int>(detail::read_be32(in));
  if (out.rows <= 0 || out.cols <= 0 || out.rows > 4096 || out.cols > 4096) throw FormatError("bad IDX image size");
  const std::size_t px = static_cast<std::size_t>(out.rows) * out.cols;
  out.images.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> img(px);
    if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(px)))
      throw FormatError("truncated IDX image data");
    out.images.push_back(std::move(img));
  }
  return out;
}

inline std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
  if (detail::read_be32(in) != kIdxLabelMagic) throw FormatError("bad IDX label magic number");
  const std::uint32_t count = detail::read_be32(in);
  std::vector<std::uint8_t> out(count);
  if (count && !in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count)))
    throw FormatError("truncated IDX label data");
  return out;
}

/// Digits a (+1) and b (-1), up to n_per_class each (all when <= 0),
/// flattened and PCA-reduced to out_dim features.
inline Dataset load_mnist_pair(std::istream& images_in, std::istream& labels_in, int digit_a, int digit_b, int out_dim,
                               int n_per_class, std::uint64_t seed) {
  const IdxImages imgs = read_idx_images(images_in);
  const auto labels = read_idx_labels(labels_in);
  if (labels.size() != imgs.images.size()) throw FormatError("IDX image and label counts differ");
  if (digit_a == digit_b) throw InvalidArgument("digits must differ");

  Rng rng(seed);
  std::vector<int> chosen;
  for (int digit : {digit_a, digit_b}) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == digit) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) throw InvalidArgument(fmt::format("digit {} absent from label file", digit));
    rng.shuffle(std::span<int>(idx));
    if (n_per_class > 0 && static_cast<int>(idx.size()) > n_per_class) idx.resize(static_cast<std::size_t>(n_per_class));
    chosen.insert(chosen.end(), idx.begin(), idx.end());
  }
  std::sort(chosen.begin(), chosen.end());

  const auto px = static_cast<Eigen::Index>(imgs.rows) * imgs.cols;
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(chosen.size()), px);
  Dataset data;
  data.name = fmt::format("mnist-{}-{}", digit_a, digit_b);
  data.seed = seed;
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    const auto& img = imgs.images[chosen[r]];
    for (Eigen::Index p = 0; p < px; ++p) raw(static_cast<Eigen::Index>(r), p) = img[p] / 255.0;
    data.labels.push_back(labels[chosen[r]] == digit_a ? 1 : -1);
  }
  const PcaModel pca = pca_fit(raw, out_dim);
  data.features = pca_project(pca, raw);
  return data;
}

inline Dataset load_mnist_pair(const std::string& images_path, const std::string& labels_path, int digit_a,
                               int digit_b, int out_dim, int n_per_class, std::uint64_t seed) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw InvalidArgument("cannot open '" + images_path + "'");
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw InvalidArgument("cannot open '" + labels_path + "'");
  return load_mnist_pair(imgs, labs, digit_a, digit_b, out_dim, n_per_class, seed);
}

// ---------------------------------------------------------------------------
// Scaling

/// Affine map of each training feature's [min, max] onto [0, pi].
struct FeatureScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  bool clamp = false;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != min.size()) throw InvalidArgument("scaler width does not match data");
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double span = max(c) - min(c);
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double v = std::numbers::pi * (x(r, c) - min(c)) / span;
        if (clamp) v = std::clamp(v, 0.0, std::numbers::pi);
        out(r, c) = v;
      }
    }
    return out;
  }
};

inline FeatureScaler fit_scaler(const Eigen::MatrixXd& train) {
  if (train.rows() == 0) throw InvalidArgument("cannot fit a scaler on empty data");
  FeatureScaler s;
  s.min = train.colwise().minCoeff().transpose();
  s.max = train.colwise().maxCoeff().transpose();
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    if (!(s.max(c) > s.min(c))) throw InvalidArgument(fmt::format("feature {} is constant", c));
  }
  return s;
}

inline Dataset apply_scaler(const FeatureScaler& scaler, const Dataset& data) {
  Dataset out = data;
  out.features = scaler.apply(data.features);
  return out;
}

// ---------------------------------------------------------------------------
// Splits and snapshots

/// Splits indices class by class; round(fraction * class size) rows of each
/// class go to the first part. Both parts keep both classes when possible.
inline std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels,
                                                                      double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> first;
  std::vector<int> second;
  for (int cls : {1, -1}) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(static_cast<int>(i));
    }
    rng.shuffle(std::span<int>(idx));
    auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) k = std::clamp<std::size_t>(k, 1, idx.size() - 1);
    first.insert(first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(k, idx.size())));
    second.insert(second.end(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(k, idx.size())), idx.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {first, second};
}

/// Header line, then "label f_1 ... f_d" per point with round-trip precision.
inline void write_snapshot(std::ostream& out, const Dataset& data) {
  out << fmt::format("# {} seed={} n={} d={}\n", data.name, data.seed, data.size(), data.dim());
  for (int r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (int c = 0; c < data.dim(); ++c) out << fmt::format(" {:.17g}", data.features(r, c));
    out << '\n';
  }
}

inline Dataset read_snapshot(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ", 0) != 0) throw FormatError("missing snapshot header");
  Dataset data;
  std::istringstream hs(header.substr(2));
  std::string tok;
  hs >> data.name;
  int n = -1;
  int d = -1;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "seed") data.seed = std::stoull(val);
    if (key == "n") n = std::stoi(val);
    if (key == "d") d = std::stoi(val);
  }
  if (n < 0 || d < 0) throw FormatError("snapshot header lacks n or d");
  data.features.resize(n, d);
  std::string line;
  for (int r = 0; r < n; ++r) {
    if (!std::getline(in, line)) throw FormatError("snapshot truncated");
    std::istringstream ls(line);
    int label = 0;
    if (!(ls >> label) || (label != 1 && label != -1)) throw FormatError(fmt::format("bad label on snapshot row {}", r + 1));
    data.labels.push_back(label);
    for (int c = 0; c < d; ++c) {
      std::string cell;
      if (!(ls >> cell)) throw FormatError(fmt::format("snapshot row {} is short", r + 1));
      data.features(r, c) = std::stod(cell);
    }
  }
  return data;
}

}  // namespace qcmol
