#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "qcmol/error.hpp"
#include "qcmol/rng.hpp"
#include "qcmol/svm.hpp"

namespace qcmol {

/// Linearly interpolated sample quantile (R type 7).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

/// 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to sd when the IQR vanishes.
inline double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw InvalidArgument("bandwidth needs at least two samples");
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> v(samples.begin(), samples.end());
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  double a = std::min(sd, iqr / 1.34);
  if (!(a > 0.0)) a = sd;
  const double h = 0.9 * a * std::pow(n, -0.2);
  if (!(h > 0.0)) throw InvalidArgument("zero KDE bandwidth: all samples identical");
  return h;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return g;
}

/// Grid spanning the samples plus three bandwidths on either side.
inline std::vector<double> kde_grid(std::span<const double> samples, double bandwidth, int n_points = 512) {
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return linspace(*lo - 3.0 * bandwidth, *hi + 3.0 * bandwidth, n_points);
}

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> lower;  // empty without a bootstrap band
  std::vector<double> upper;
  double bandwidth = 0.0;
};

/// Gaussian KDE evaluated on `grid`.
inline DensityEstimate kde_density(std::span<const double> samples, std::span<const double> grid,
                                   std::optional<double> bandwidth = std::nullopt) {
  if (samples.size() < 2) throw InvalidArgument("KDE needs at least two samples");
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) throw InvalidArgument("KDE bandwidth must be positive");
  DensityEstimate est;
  est.bandwidth = h;
  est.grid.assign(grid.begin(), grid.end());
  est.density.resize(grid.size());
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double x : samples) {
      const double u = (grid[g] - x) / h;
      s += std::exp(-0.5 * u * u);
    }
    est.density[g] = s * norm;
  }
  return est;
}

/// Pointwise percentile band over bootstrap resamples. Every resample reuses
/// the bandwidth of the full sample.
inline DensityEstimate bootstrap_band(std::span<const double> samples, std::span<const double> grid, int n_boot = 200,
                                      double level = 0.95, std::uint64_t seed = 0,
                                      std::optional<double> bandwidth = std::nullopt) {
  if (samples.size() < 5) throw InvalidArgument("bootstrap band needs at least five samples");
  if (n_boot < 2) throw InvalidArgument("bootstrap needs at least two resamples");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
  DensityEstimate est = kde_density(samples, grid, bandwidth);
  const std::size_t n = samples.size();
  std::vector<std::vector<double>> boots(grid.size(), std::vector<double>(static_cast<std::size_t>(n_boot)));
  std::vector<double> resample(n);
  for (int b = 0; b < n_boot; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (std::size_t i = 0; i < n; ++i) resample[i] = samples[rng.below(n)];
    const DensityEstimate e = kde_density(resample, grid, est.bandwidth);
    for (std::size_t g = 0; g < grid.size(); ++g) boots[g][b] = e.density[g];
  }
  const double tail = 0.5 * (1.0 - level);
  est.lower.resize(grid.size());
  est.upper.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    est.lower[g] = quantile(boots[g], tail);
    est.upper[g] = quantile(std::move(boots[g]), 1.0 - tail);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Descriptor groups

struct DescriptorRecord {
  double r_min = 0.0;
  double r_max = 0.0;
  PerformanceLabel label = PerformanceLabel::Discarded;
};

/// Record indices by (r_min side, r_max side). A value equal to its
/// threshold counts as low.
struct Quadrants {
  std::vector<int> high_high;
  std::vector<int> high_low;
  std::vector<int> low_high;
  std::vector<int> low_low;
};

inline Quadrants quadrant_split(std::span<const DescriptorRecord> records, double r_min_threshold,
                                double r_max_threshold) {
  if (!std::isfinite(r_min_threshold) || !std::isfinite(r_max_threshold))
    throw InvalidArgument("quadrant thresholds must be finite");
  Quadrants q;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool hi_min = records[i].r_min > r_min_threshold;
    const bool hi_max = records[i].r_max > r_max_threshold;
    auto& group = hi_min ? (hi_max ? q.high_high : q.high_low) : (hi_max ? q.low_high : q.low_low);
    group.push_back(static_cast<int>(i));
  }
  return q;
}

struct GroupCounts {
  int performant = 0;
  int underperforming = 0;
  int discarded = 0;

  int total() const noexcept { return performant + underperforming + discarded; }
  /// Performant share of the whole group, discarded members included.
  double performant_fraction() const { return static_cast<double>(performant) / total(); }
};

inline GroupCounts count_labels(std::span<const PerformanceLabel> labels) {
  GroupCounts c;
  for (PerformanceLabel l : labels) {
    switch (l) {
      case PerformanceLabel::Performant: ++c.performant; break;
      case PerformanceLabel::Underperforming: ++c.underperforming; break;
      case PerformanceLabel::Discarded: ++c.discarded; break;
    }
  }
  return c;
}

struct EnrichmentReport {
  std::string high_rule;
  std::string low_rule;
  GroupCounts high;
  GroupCounts low;
  double high_fraction = 0.0;
  double low_fraction = 0.0;
  double ratio = 0.0;  // +inf when only the high group has performant members, NaN when neither has
};

inline EnrichmentReport enrichment(std::span<const PerformanceLabel> high_group, std::span<const PerformanceLabel> low_group,
                                   std::string high_rule = "high", std::string low_rule = "low") {
  if (high_group.empty() || low_group.empty()) throw InvalidArgument("enrichment needs two nonempty groups");
  EnrichmentReport r;
  r.high_rule = std::move(high_rule);
  r.low_rule = std::move(low_rule);
  r.high = count_labels(high_group);
  r.low = count_labels(low_group);
  r.high_fraction = r.high.performant_fraction();
  r.low_fraction = r.low.performant_fraction();
  if (r.low_fraction > 0.0) r.ratio = r.high_fraction / r.low_fraction;
  else if (r.high_fraction > 0.0) r.ratio = std::numeric_limits<double>::infinity();
  else r.ratio = std::numeric_limits<double>::quiet_NaN();
  return r;
}

inline std::string format_report(const EnrichmentReport& r) {
  auto group = [](const std::string& name, const std::string& rule, const GroupCounts& c, double f) {
    return fmt::format("{}: {}\n  size={} performant={} underperforming={} discarded={} performant_fraction={:.6f}\n",
                       name, rule, c.total(), c.performant, c.underperforming, c.discarded, f);
  };
  std::string ratio = std::isnan(r.ratio) ? "undefined" : std::isinf(r.ratio) ? "inf" : fmt::format("{:.6f}", r.ratio);
  return group("high", r.high_rule, r.high, r.high_fraction) + group("low", r.low_rule, r.low, r.low_fraction) +
         "ratio=" + ratio + "\n";
}

/// Average ranks, ties sharing the mean of their positions (1-based).
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("correlation needs two equal-length samples");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Spearman correlation: Pearson correlation of average ranks.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson(ra, rb);
}

/// Spearman correlation between a descriptor and performant (1) versus
/// underperforming (0); discarded records are left out.
inline double label_rank_correlation(std::span<const double> descriptor, std::span<const PerformanceLabel> labels) {
  std::vector<double> d;
  std::vector<double> y;
  for (std::size_t i = 0; i < descriptor.size(); ++i) {
    if (labels[i] == PerformanceLabel::Discarded) continue;
    d.push_back(descriptor[i]);
    y.push_back(labels[i] == PerformanceLabel::Performant ? 1.0 : 0.0);
  }
  if (d.size() < 2) return 0.0;
  return spearman(d, y);
}

}  // namespace qcmol
