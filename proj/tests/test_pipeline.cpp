#include <gtest/gtest.h>

#include <atomic>
#include <sstream>

#include "qcmol/csv.hpp"
#include "qcmol/pipeline.hpp"

using namespace qcmol;

TEST(ParallelFor, VisitsEachIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 3) throw InvalidArgument("x"); }, 3), InvalidArgument);
}

TEST(DescribeBatch, FlagsUnmappableAndKeepsOthers) {
  std::vector<CircuitGrid> grids;
  for (std::uint64_t s = 0; s < 6; ++s) grids.push_back(sample_circuit(6, 3, GatePolicy{0.2, 0.5, 0.3, 4}, s));
  CircuitGrid bad(6, 1);
  bad.set_cnot(0, 0, 5);
  grids.insert(grids.begin() + 2, bad);
  const auto d = describe_batch(grids, DescribeSettings{}, 1, 2);
  ASSERT_EQ(d.size(), 7u);
  EXPECT_FALSE(d[2].ok);
  EXPECT_EQ(d[2].error, "unmappable");
  EXPECT_TRUE(std::isnan(d[2].pc1));
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i == 2) continue;
    EXPECT_TRUE(d[i].ok);
    EXPECT_GT(d[i].radii.r_max, 0.0);
    EXPECT_LE(d[i].radii.r_min, d[i].radii.r_max);
    EXPECT_TRUE(std::isfinite(d[i].pc1));
  }
}

TEST(DescribeBatch, ThreadCountDoesNotChangeResults) {
  std::vector<CircuitGrid> grids;
  for (std::uint64_t s = 0; s < 12; ++s) grids.push_back(sample_circuit(4, 5, GatePolicy{}, s));
  const auto a = describe_batch(grids, DescribeSettings{}, 3, 1);
  const auto b = describe_batch(grids, DescribeSettings{}, 3, 4);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    EXPECT_EQ(a[i].radii.r_min, b[i].radii.r_min);
    EXPECT_EQ(a[i].radii.r_max, b[i].radii.r_max);
    EXPECT_EQ(a[i].pc1, b[i].pc1);
  }
}

TEST(EvaluateCircuit, DeterministicAndBudgeted) {
  const Dataset all = gen_hidden_manifold(4, 120, 5);
  std::vector<int> tr;
  std::vector<int> te;
  for (int i = 0; i < 120; ++i) (i < 60 ? tr : te).push_back(i);
  const EvalProblem p = make_problem(subset(all, tr), subset(all, te));
  EvalSettings s;
  s.bo.budget = 4;
  const CircuitGrid g = sample_circuit(4, 3, GatePolicy{}, 8);
  const EvaluationRecord a = evaluate_circuit(g, p, s, 2);
  const EvaluationRecord b = evaluate_circuit(g, p, s, 2);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.test_accuracy, b.test_accuracy);
  EXPECT_EQ(a.evaluations, 4);
  EXPECT_EQ(a.n_rz, count_rz(g));
  EXPECT_EQ(static_cast<int>(a.theta.size()), a.n_rz);
  EXPECT_GE(a.test_accuracy, 0.0);
  EXPECT_LE(a.test_accuracy, 1.0);
  EXPECT_EQ(a.validation_accuracy, *std::max_element(a.trace_values.begin(), a.trace_values.end()));

  s.bo.budget = 1;
  EXPECT_EQ(evaluate_circuit(g, p, s, 2).evaluations, 1);
  const CircuitGrid wide(3, 1);
  EXPECT_THROW(evaluate_circuit(wide, p, s, 1), InvalidArgument);
}

TEST(EvaluateBatch, IdenticalCircuitsIdenticalAccuracies) {
  const Dataset all = gen_hidden_manifold(4, 80, 6);
  std::vector<int> tr;
  std::vector<int> te;
  for (int i = 0; i < 80; ++i) (i % 2 ? tr : te).push_back(i);
  const EvalProblem p = make_problem(subset(all, tr), subset(all, te));
  EvalSettings s;
  s.bo.budget = 1;
  const std::vector<CircuitGrid> grids(5, sample_circuit(4, 3, GatePolicy{}, 4));
  const auto recs = evaluate_batch(grids, p, s, 1, 2);
  std::vector<double> acc;
  for (const auto& r : recs) acc.push_back(r.test_accuracy);
  for (double a : acc) EXPECT_EQ(a, acc.front());
  for (auto l : label_performance(acc)) EXPECT_EQ(l, PerformanceLabel::Discarded);
}

TEST(Csv, QuotingRoundtrip) {
  std::stringstream io;
  csv::write_row(io, {"plain", "with,comma", "with \"quote\"", "multi\nline", ""});
  csv::write_row(io, {"a", "b", "c", "d", "e"});
  const auto rows = csv::read_all(io);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (csv::Row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""}));
  std::istringstream bad("a,\"b\n");
  EXPECT_THROW(csv::read_all(bad), FormatError);
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(csv::read_table(ragged), FormatError);
}
