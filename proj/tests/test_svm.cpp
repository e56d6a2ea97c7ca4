#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "qcmol/rng.hpp"
#include "qcmol/svm.hpp"

using namespace qcmol;

namespace {

struct Problem {
  Eigen::MatrixXd gram;
  std::vector<int> y;
};

/// Random PSD problem: RBF Gram of random points in the plane, or a
/// rank-deficient linear Gram.
Problem random_problem(std::uint64_t seed) {
  Rng rng(seed);
  const int n = 2 + static_cast<int>(seed % 9);
  Problem p;
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = rng.normal();
    pts(i, 1) = rng.normal();
    p.y.push_back(rng.uniform() < 0.5 ? 1 : -1);
  }
  p.y[0] = 1;
  p.y[1] = -1;
  p.gram.resize(n, n);
  const bool linear = seed % 3 == 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      p.gram(i, j) = linear ? pts.row(i).dot(pts.row(j)) : std::exp(-(pts.row(i) - pts.row(j)).squaredNorm());
  return p;
}

void expect_feasible(const SvmModel& m, std::span<const int> y, double tol = 1e-9) {
  double eq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GE(m.alpha[i], -tol);
    EXPECT_LE(m.alpha[i], m.c + tol);
    eq += m.alpha[i] * y[i];
  }
  EXPECT_NEAR(eq, 0.0, 1e-9);
}

}  // namespace

TEST(TrainSvm, TwoPointIdentity) {
  const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
  const std::vector<int> y{1, -1};
  const SvmModel m = train_svm(g, y);
  EXPECT_NEAR(m.alpha[0], 1.0, 1e-12);
  EXPECT_NEAR(m.alpha[1], 1.0, 1e-12);
  EXPECT_EQ(m.support, (std::vector<int>{0, 1}));
  EXPECT_EQ(predict(m, g), y);
  Eigen::MatrixXd row(1, 2);
  row << 1.0, 0.0;
  EXPECT_EQ(predict(m, row), std::vector<int>{1});
}

TEST(TrainSvm, SeparableLinearKernel) {
  Rng rng(2);
  const int n = 20;
  Eigen::MatrixXd x(n, 2);
  std::vector<int> y;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    x(i, 0) = label * (1.0 + rng.uniform());
    x(i, 1) = rng.uniform(-1, 1);
    y.push_back(label);
  }
  const Eigen::MatrixXd g = x * x.transpose();
  SvmSettings s;
  s.c = 100.0;
  const SvmModel m = train_svm(g, y, s);
  EXPECT_EQ(balanced_accuracy(predict(m, g), y), 1.0);
  expect_feasible(m, y);
  EXPECT_LT(kkt_violation(g, y, m.alpha, m.c), s.tol);
}

TEST(TrainSvm, MatchesBruteForceDual) {
  SvmSettings s;
  s.tol = 1e-9;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Problem p = random_problem(seed);
    s.c = seed % 2 == 0 ? 1.0 : 0.3;
    const SvmModel m = train_svm(p.gram, p.y, s);
    EXPECT_TRUE(m.converged);
    expect_feasible(m, p.y);
    const double best = oracle::svm_dual_optimum(p.gram, p.y, s.c);
    EXPECT_NEAR(dual_objective(p.gram, p.y, m.alpha), best, 1e-6) << "seed " << seed;
  }
}

TEST(TrainSvm, DefaultTolKktAndFeasibility) {
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const Problem p = random_problem(seed);
    const SvmModel m = train_svm(p.gram, p.y);
    EXPECT_TRUE(m.converged);
    expect_feasible(m, p.y);
    EXPECT_LT(kkt_violation(p.gram, p.y, m.alpha, m.c), 1e-3 + 1e-12);
    EXPECT_NEAR(kkt_violation(p.gram, p.y, m.alpha, m.c), m.kkt_gap, 1e-9);
  }
}

TEST(TrainSvm, Deterministic) {
  const Problem p = random_problem(7);
  EXPECT_EQ(dump_model(train_svm(p.gram, p.y)), dump_model(train_svm(p.gram, p.y)));
}

TEST(TrainSvm, Errors) {
  const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(train_svm(g, std::vector<int>{1, 1, 1}), InvalidArgument);
  EXPECT_THROW(train_svm(Eigen::MatrixXd::Identity(3, 2), std::vector<int>{1, -1, 1}), InvalidArgument);
  EXPECT_THROW(train_svm(g, std::vector<int>{1, -1}), InvalidArgument);
  EXPECT_THROW(train_svm(g, std::vector<int>{1, -1, 0}), InvalidArgument);
  SvmSettings s;
  s.c = 0.0;
  EXPECT_THROW(train_svm(g, std::vector<int>{1, -1, 1}, s), InvalidArgument);
}

TEST(Predict, ZeroDecisionIsPositive) {
  SvmModel m;
  m.alpha = {0.0, 0.0};
  m.labels = {1, -1};
  m.bias = 0.0;
  EXPECT_EQ(predict(m, Eigen::MatrixXd::Ones(1, 2)), std::vector<int>{1});
  EXPECT_THROW(predict(m, Eigen::MatrixXd::Ones(1, 3)), InvalidArgument);
}

TEST(BalancedAccuracy, Cases) {
  const std::vector<int> truth{1, 1, 1, 1, 1, -1, -1, -1, -1, -1};
  EXPECT_EQ(balanced_accuracy(truth, truth), 1.0);
  const std::vector<int> pred{1, 1, 1, 1, -1, -1, -1, -1, 1, 1};  // TPR 0.8, TNR 0.6
  EXPECT_NEAR(balanced_accuracy(pred, truth), 0.7, 1e-15);
  EXPECT_EQ(balanced_accuracy(std::vector<int>(10, 1), truth), 0.5);
  EXPECT_THROW(balanced_accuracy(std::vector<int>{1, 1}, std::vector<int>{1, 1}), InvalidArgument);
  EXPECT_THROW(balanced_accuracy(std::vector<int>{1}, truth), InvalidArgument);
}

TEST(BalancedAccuracy, ClassPreservingPermutation) {
  const std::vector<int> truth{1, 1, 1, -1, -1, -1, -1};
  const std::vector<int> pred{1, -1, 1, -1, 1, -1, -1};
  const std::vector<int> perm{2, 0, 1, 6, 3, 5, 4};  // permutes within each class
  std::vector<int> t2;
  std::vector<int> p2;
  for (int i : perm) {
    t2.push_back(truth[i]);
    p2.push_back(pred[i]);
  }
  EXPECT_EQ(balanced_accuracy(p2, t2), balanced_accuracy(pred, truth));
}

TEST(LabelPerformance, Rule) {
  using L = PerformanceLabel;
  EXPECT_EQ(label_performance(std::vector<double>{0.9, 0.5}), (std::vector<L>{L::Performant, L::Underperforming}));
  EXPECT_EQ(label_performance(std::vector<double>{0.9, 0.5, 0.72})[2], L::Discarded);
  EXPECT_EQ(label_performance(std::vector<double>{0.6, 0.6, 0.6}), std::vector<L>(3, L::Discarded));
  EXPECT_THROW(label_performance(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(label_performance(std::vector<double>{0.5, 0.6}, -0.1), InvalidArgument);
  // relative margin: 10% of the 0.4 range
  EXPECT_EQ(label_performance(std::vector<double>{0.9, 0.5, 0.75}, 0.10, true)[2], L::Performant);
}

TEST(LabelPerformance, InteriorAdditionsKeepLabels) {
  const std::vector<double> base{0.55, 0.62, 0.91, 0.84, 0.58};
  const auto before = label_performance(base);
  std::vector<double> more = base;
  more.insert(more.end(), {0.70, 0.74, 0.79});  // inside (min, max); boundary unchanged
  const auto after = label_performance(more);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(before[i], after[i]);
}

TEST(LabelNames, Roundtrip) {
  for (auto l : {PerformanceLabel::Performant, PerformanceLabel::Underperforming, PerformanceLabel::Discarded})
    EXPECT_EQ(parse_label(label_name(l)), l);
  EXPECT_THROW(parse_label("great"), FormatError);
}
