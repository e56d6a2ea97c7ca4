#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "qcmol/bayesopt.hpp"

using namespace qcmol;

namespace {

constexpr double kPi = std::numbers::pi;

double parabola(std::span<const double> t) { return -(t[0] - kPi) * (t[0] - kPi); }

}  // namespace

TEST(LatinHypercube, OnePointPerStratum) {
  Rng rng(3);
  const auto pts = latin_hypercube(8, 3, rng);
  ASSERT_EQ(pts.size(), 8u);
  for (int k = 0; k < 3; ++k) {
    std::vector<int> strata;
    for (const auto& p : pts) {
      EXPECT_GE(p[k], 0.0);
      EXPECT_LT(p[k], 1.0);
      strata.push_back(static_cast<int>(p[k] * 8));
    }
    std::sort(strata.begin(), strata.end());
    for (int i = 0; i < 8; ++i) EXPECT_EQ(strata[i], i);
  }
}

TEST(Optimize, FindsParabolaPeak) {
  const BoResult r = optimize(parabola, 1, BoConfig{}, 1);
  EXPECT_NEAR(r.best_theta[0], kPi, 0.2);
}

TEST(Optimize, BudgetAndIncumbent) {
  for (int budget : {1, 3, 5, 12}) {
    int calls = 0;
    const Objective f = [&](std::span<const double> t) {
      ++calls;
      return std::sin(t[0]) * std::cos(t[1]);
    };
    BoConfig cfg;
    cfg.budget = budget;
    const BoResult r = optimize(f, 2, cfg, 9);
    EXPECT_EQ(calls, budget);
    ASSERT_EQ(static_cast<int>(r.trace.size()), budget);
    double running = -1e300;
    double max_seen = -1e300;
    for (const auto& e : r.trace) {
      const double next = std::max(running, e.value);
      EXPECT_GE(next, running);
      running = next;
      max_seen = std::max(max_seen, e.value);
      for (double t : e.theta) {
        EXPECT_GE(t, 0.0);
        EXPECT_LT(t, 2 * kPi);
      }
    }
    EXPECT_EQ(r.best_value, max_seen);
  }
}

TEST(Optimize, ConstantObjective) {
  const BoResult r = optimize([](std::span<const double>) { return 0.42; }, 3, BoConfig{}, 5);
  EXPECT_EQ(r.best_value, 0.42);
  EXPECT_EQ(r.best_theta.size(), 3u);
}

TEST(Optimize, Deterministic) {
  const BoResult a = optimize(parabola, 1, BoConfig{}, 4);
  const BoResult b = optimize(parabola, 1, BoConfig{}, 4);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].theta, b.trace[i].theta);
    EXPECT_EQ(a.trace[i].value, b.trace[i].value);
  }
}

TEST(Optimize, ZeroDimensions) {
  int calls = 0;
  const BoResult r = optimize(
      [&](std::span<const double> t) {
        ++calls;
        EXPECT_TRUE(t.empty());
        return 0.8;
      },
      0, BoConfig{}, 1);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.best_value, 0.8);
}

TEST(Optimize, ConfigErrors) {
  BoConfig cfg;
  cfg.budget = 0;
  EXPECT_THROW(optimize(parabola, 1, cfg, 1), InvalidArgument);
  EXPECT_THROW(optimize(parabola, -1, BoConfig{}, 1), InvalidArgument);
}
