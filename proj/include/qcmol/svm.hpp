#pragma once

// Binary C-SVM on a precomputed kernel. The dual
//   max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij,  0 <= a_i <= C,  y.a = 0
// is solved by SMO with maximal-violating-pair selection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "qcmol/error.hpp"

namespace qcmol {

struct SvmModel {
  std::vector<double> alpha;
  std::vector<int> labels;  // +1 / -1
  double bias = 0.0;
  double c = 1.0;
  std::vector<int> support;  // indices with alpha > 0
  double kkt_gap = 0.0;      // max violation m(a) - M(a) at exit
  int iterations = 0;
  bool converged = false;
};

struct SvmSettings {
  double c = 1.0;
  double tol = 1e-3;
  long max_iterations = 0;  // 0 selects max(10^6, 100 n)
};

inline double dual_objective(const Eigen::MatrixXd& gram, std::span<const int> y, std::span<const double> alpha) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd ay(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ay(i) = alpha[i] * y[i];
    sum += alpha[i];
  }
  return sum - 0.5 * ay.dot(gram * ay);
}

namespace detail {

inline bool in_up(double a, int y, double c) { return (y > 0 && a < c) || (y < 0 && a > 0.0); }
inline bool in_low(double a, int y, double c) { return (y < 0 && a < c) || (y > 0 && a > 0.0); }

}  // namespace detail

/// Maximal KKT violation of a feasible dual point.
inline double kkt_violation(const Eigen::MatrixXd& gram, std::span<const int> y, std::span<const double> alpha,
                            double c) {
  const auto n = static_cast<Eigen::Index>(y.size());
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    double g = -1.0;
    for (Eigen::Index s = 0; s < n; ++s) g += y[t] * y[s] * gram(t, s) * alpha[s];
    const double v = -y[t] * g;
    if (detail::in_up(alpha[t], y[t], c)) m_up = std::max(m_up, v);
    if (detail::in_low(alpha[t], y[t], c)) m_low = std::min(m_low, v);
  }
  if (!std::isfinite(m_up) || !std::isfinite(m_low)) return 0.0;
  return std::max(0.0, m_up - m_low);
}

inline SvmModel train_svm(const Eigen::MatrixXd& gram, std::span<const int> y, const SvmSettings& settings = {}) {
  const auto n = gram.rows();
  if (gram.cols() != n) throw InvalidArgument("Gram matrix must be square");
  if (static_cast<Eigen::Index>(y.size()) != n) throw InvalidArgument("label count does not match Gram size");
  if (!(settings.c > 0.0)) throw InvalidArgument("C must be positive");
  bool pos = false;
  bool neg = false;
  for (int v : y) {
    if (v != 1 && v != -1) throw InvalidArgument("labels must be +1 or -1");
    (v > 0 ? pos : neg) = true;
  }
  if (!pos || !neg) throw InvalidArgument("training labels contain a single class");

  const double c = settings.c;
  const long max_iter = settings.max_iterations > 0 ? settings.max_iterations : std::max(1'000'000L, 100L * n);
  constexpr double tau = 1e-12;

  SvmModel model;
  model.c = c;
  model.labels.assign(y.begin(), y.end());
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  std::vector<double> g(static_cast<std::size_t>(n), -1.0);  // gradient of 1/2 a'Qa - e'a

  long it = 0;
  for (;; ++it) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double best_up = -std::numeric_limits<double>::infinity();
    double best_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * g[t];
      if (detail::in_up(a[t], y[t], c) && v > best_up) {
        best_up = v;
        i = t;
      }
      if (detail::in_low(a[t], y[t], c) && v < best_low) {
        best_low = v;
        j = t;
      }
    }
    model.kkt_gap = (i < 0 || j < 0) ? 0.0 : std::max(0.0, best_up - best_low);
    if (i < 0 || j < 0 || model.kkt_gap < settings.tol) {
      model.converged = true;
      break;
    }
    if (it >= max_iter) break;

    const double kii = gram(i, i);
    const double kjj = gram(j, j);
    const double kij = gram(i, j);
    const double old_ai = a[i];
    const double old_aj = a[j];
    if (y[i] != y[j]) {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }
    const double dai = a[i] - old_ai;
    const double daj = a[j] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) {
      g[t] += y[t] * (y[i] * gram(t, i) * dai + y[j] * gram(t, j) * daj);
    }
  }
  model.iterations = static_cast<int>(std::min<long>(it, std::numeric_limits<int>::max()));

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (a[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / n_free : 0.5 * (ub + lb);
  model.bias = -rho;
  model.alpha = std::move(a);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (model.alpha[t] > 0.0) model.support.push_back(static_cast<int>(t));
  }
  return model;
}

/// Decision values for rows of a test x train kernel matrix.
inline Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::MatrixXd& cross_gram) {
  const auto n = static_cast<Eigen::Index>(model.alpha.size());
  if (cross_gram.cols() != n) throw InvalidArgument("cross kernel has wrong number of columns");
  Eigen::VectorXd ay(n);
  for (Eigen::Index i = 0; i < n; ++i) ay(i) = model.alpha[i] * model.labels[i];
  return (cross_gram * ay).array() + model.bias;
}

/// sign of the decision value; exactly zero maps to +1.
inline std::vector<int> predict(const SvmModel& model, const Eigen::MatrixXd& cross_gram) {
  const Eigen::VectorXd f = decision_values(model, cross_gram);
  std::vector<int> out(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) out[i] = f(i) >= 0.0 ? 1 : -1;
  return out;
}

/// Mean of the true positive and true negative rates.
inline double balanced_accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw InvalidArgument("prediction and label counts differ");
  long pos = 0;
  long neg = 0;
  long tp = 0;
  long tn = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] > 0) {
      ++pos;
      tp += predicted[i] > 0 ? 1 : 0;
    } else {
      ++neg;
      tn += predicted[i] <= 0 ? 1 : 0;
    }
  }
  if (pos == 0 || neg == 0) throw InvalidArgument("balanced accuracy needs both classes in the labels");
  return 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
}

enum class PerformanceLabel { Performant, Underperforming, Discarded };

inline const char* label_name(PerformanceLabel l) {
  switch (l) {
    case PerformanceLabel::Performant: return "performant";
    case PerformanceLabel::Underperforming: return "underperforming";
    case PerformanceLabel::Discarded: return "discarded";
  }
  return "?";
}

inline PerformanceLabel parse_label(const std::string& s) {
  if (s == "performant") return PerformanceLabel::Performant;
  if (s == "underperforming") return PerformanceLabel::Underperforming;
  if (s == "discarded") return PerformanceLabel::Discarded;
  throw FormatError("unknown performance label '" + s + "'");
}

/// Labels relative to the midpoint of the best and worst accuracies. With
/// `relative_margin` the margin is a fraction of (max - min) instead of an
/// absolute accuracy offset.
inline std::vector<PerformanceLabel> label_performance(std::span<const double> accuracies, double margin = 0.10,
                                                       bool relative_margin = false) {
  if (accuracies.empty()) throw InvalidArgument("no accuracies to label");
  if (!(margin >= 0.0)) throw InvalidArgument("margin must be nonnegative");
  const auto [lo, hi] = std::minmax_element(accuracies.begin(), accuracies.end());
  const double boundary = 0.5 * (*lo + *hi);
  const double m = relative_margin ? margin * (*hi - *lo) : margin;
  std::vector<PerformanceLabel> out;
  out.reserve(accuracies.size());
  for (double a : accuracies) {
    if (a > boundary + m) out.push_back(PerformanceLabel::Performant);
    else if (a < boundary - m) out.push_back(PerformanceLabel::Underperforming);
    else out.push_back(PerformanceLabel::Discarded);
  }
  return out;
}

/// Audit dump: alpha, y, bias and support indices.
inline std::string dump_model(const SvmModel& model) {
  std::string s = fmt::format("svm n={} C={:.17g} bias={:.17g} kkt_gap={:.6g} iterations={}\nalpha", model.alpha.size(),
                              model.c, model.bias, model.kkt_gap, model.iterations);
  for (double a : model.alpha) s += fmt::format(" {:.17g}", a);
  s += "\ny";
  for (int v : model.labels) s += fmt::format(" {}", v);
  s += "\nsupport";
  for (int v : model.support) s += fmt::format(" {}", v);
  s += '\n';
  return s;
}

}  // namespace qcmol
