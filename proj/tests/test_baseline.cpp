#include <gtest/gtest.h>

#include <cmath>

#include "mmdt/mmdt.hpp"

using namespace mmdt;

namespace {

Points rows(const std::vector<Vector>& v) {
  Points p;
  p.cols = v.front().size();
  for (const auto& x : v) p.push_back(x);
  return p;
}

/// Mistakes of a cut counted directly from the definition.
std::size_t brute_mistakes(const CenteredDataset& d, std::size_t axis, double theta) {
  std::size_t m = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    m += (d.points(i, axis) <= theta) != (d.centers[static_cast<std::size_t>(d.assignment[i])][axis] <= theta);
  return m;
}

}  // namespace

TEST(Baseline, AssignmentIsNearestWithLowIndexTies) {
  const auto d = make_centered(rows({{0.0}, {1.0}, {2.0}, {1.6}}), {{0.0}, {2.0}});
  EXPECT_EQ(d.assignment, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Baseline, DuplicateCentersRejected) {
  EXPECT_THROW(make_centered(rows({{0.0}}), {{1.0}, {1.0}}), Error);
}

TEST(Baseline, SeparableCaseHasNoMistakes) {
  const auto d = make_centered(rows({{0.0, 5.0}, {0.2, -3.0}, {10.0, 1.0}, {9.5, 2.0}}), {{0.0, 0.0}, {10.0, 0.0}});
  ImmTrace trace;
  const auto t = build_imm(d, &trace);
  EXPECT_EQ(t.nodes[0].axis, 0);
  EXPECT_EQ(trace.mistakes[0], 0u);
  EXPECT_EQ(check_tree(t, d.centers), "");
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(predict(t, d.points.row(i)), d.assignment[i]);
}

TEST(Baseline, RootCutMinimizesMistakesAgainstBruteForce) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = random_gaussian_mixture(3, 3, 2.0, 30.0, s);
    const auto data = sample(m, 400, s);
    const auto d = make_centered(data.points, component_means(m));
    ImmTrace trace;
    const auto t = build_imm(d, &trace);
    EXPECT_EQ(trace.mistakes[0], brute_mistakes(d, static_cast<std::size_t>(t.nodes[0].axis), t.nodes[0].theta));
    // No cut on any axis at any data or center coordinate does better while separating centers.
    for (std::size_t j = 0; j < 3; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto& c : d.centers) {
        lo = std::min(lo, c[j]);
        hi = std::max(hi, c[j]);
      }
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double th = d.points(i, j);
        if (th >= lo && th < hi) EXPECT_GE(brute_mistakes(d, j, th), trace.mistakes[0]);
      }
    }
    EXPECT_EQ(check_tree(t, d.centers), "");
  }
}

TEST(Baseline, EligibleCountsNeverGrowDownAPath) {
  const auto m = random_gaussian_mixture(6, 4, 1.0, 10.0, 3);
  const auto d = make_centered(sample(m, 3000, 1).points, component_means(m));
  ImmTrace trace;
  const auto t = build_imm(d, &trace);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) continue;
    EXPECT_LE(trace.mistakes[i], trace.eligible[i]);
    EXPECT_LE(trace.eligible[i], d.size());
    for (int c : {n.left, n.right})
      if (!t.nodes[static_cast<std::size_t>(c)].is_leaf())
        EXPECT_LE(trace.eligible[static_cast<std::size_t>(c)], trace.eligible[i] - trace.mistakes[i]);
  }
}

TEST(Baseline, B3SampleRootCutNearZero) {
  const auto inst = gen_b3(4);
  const auto data = sample(inst.model, 10000, 5);
  const auto d = make_centered(data.points, component_means(inst.model));
  const auto t = build_imm(d);
  EXPECT_NEAR(t.nodes[0].theta, 0.0, 0.51);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) wrong += predict(t, data.points.row(i)) != data.labels[i];
  const double eps = 1.0 / 8.0;
  EXPECT_NEAR(wrong / 10000.0, eps, 3.0 * std::sqrt(eps * (1 - eps) / 10000.0));
}

TEST(Baseline, DeterministicTies) {
  // Symmetric configuration: both axes separate equally well; the lowest axis and lowest theta win.
  const auto d = make_centered(rows({{0.0, 0.0}, {1.0, 1.0}}), {{0.0, 0.0}, {1.0, 1.0}});
  const auto t = build_imm(d);
  EXPECT_EQ(t.nodes[0].axis, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].theta, 0.5);
}

TEST(Baseline, EmpiricalPriceOfAssignmentTreeIsAtMostOne) {
  const auto m = random_gaussian_mixture(2, 2, 50.0, 60.0, 1);
  const auto data = sample(m, 2000, 2);
  const auto d = make_centered(data.points, component_means(m));
  const auto t = build_imm(d);
  bool reproduces = true;
  for (std::size_t i = 0; i < d.size(); ++i) reproduces &= predict(t, d.points.row(i)) == d.assignment[i];
  ASSERT_TRUE(reproduces);
  EXPECT_LE(empirical_price(d, t, Norm::l1), 1.0 + 1e-12);
  EXPECT_LE(empirical_price(d, t, Norm::l2sq), 1.0 + 1e-12);
}

TEST(Baseline, EmpiricalPriceHandComputation) {
  // Groups by assignment {0, 1} and {9, 10}; the tree cuts at 0.5, moving 1 into the right leaf.
  const auto d = make_centered(rows({{0.0}, {1.0}, {9.0}, {10.0}}), {{0.5}, {9.5}});
  AxisTree t;
  t.dim = 1;
  t.num_components = 2;
  t.add_cut(0, 0.5);
  t.nodes[0].left = t.add_leaf(0);
  t.nodes[0].right = t.add_leaf(1);
  const auto r = empirical_price_report(d, t, Norm::l2sq);
  EXPECT_DOUBLE_EQ(r.baseline_cost, 1.0);
  // Right leaf {1, 9, 10} has mean 20/3.
  const double c = std::pow(1 - 20.0 / 3, 2) + std::pow(9 - 20.0 / 3, 2) + std::pow(10 - 20.0 / 3, 2);
  EXPECT_NEAR(r.tree_cost, c, 1e-12);
  // l1: group medians are the lower elements 0 and 9; leaf medians 0 and 9.
  const auto r1 = empirical_price_report(d, t, Norm::l1);
  EXPECT_DOUBLE_EQ(r1.baseline_cost, 2.0);
  EXPECT_DOUBLE_EQ(r1.tree_cost, 8.0 + 0.0 + 1.0);
}

TEST(Baseline, EmptyLeafFallsBackToCenter) {
  const auto d = make_centered(rows({{0.0}, {0.1}}), {{0.0}, {5.0}});
  AxisTree t;
  t.dim = 1;
  t.num_components = 2;
  t.add_cut(0, 2.5);
  t.nodes[0].left = t.add_leaf(0);
  t.nodes[0].right = t.add_leaf(1);
  EXPECT_EQ(empirical_price_report(d, t, Norm::l1).empty_leaves, 1u);
}
