#include <gtest/gtest.h>

#include <cmath>

#include "mmdt/mmdt.hpp"

using namespace mmdt;

TEST(Adversarial, Thm4InstanceMoments) {
  const auto inst = gen_thm4(2, 2);
  EXPECT_NO_THROW(inst.model.validate());
  EXPECT_DOUBLE_EQ(enr(inst.model), 2.0);
  for (const auto& c : inst.model.components) {
    double total = 0.0;
    for (double p : c.mass) total += p;
    EXPECT_DOUBLE_EQ(total, 1.0);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(c.variance(j), 0.5);
  }
  EXPECT_THROW(gen_thm4(3, 2), Error);
}

TEST(Adversarial, Thm4DeviationsAreDisjointAcrossAxes) {
  for (auto [K, q] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 2}, {3, 3}, {3, 12}, {4, 9}}) {
    const auto inst = gen_thm4(K, q);
    EXPECT_DOUBLE_EQ(enr(inst.model), static_cast<double>(q));
    for (const auto& c : inst.model.components)
      for (const auto& x : c.support) {
        std::size_t moved = 0;
        for (std::size_t j = 0; j < K; ++j) moved += x[j] != c.mean[j];
        EXPECT_LE(moved, 1u);
      }
  }
}

TEST(Adversarial, Thm4CanonicalTreeSeparatesInOrder) {
  const auto inst = gen_thm4(3, 3);
  const auto t = thm4_canonical_tree(inst.model);
  EXPECT_EQ(check_tree(t, component_means(inst.model)), "");
  EXPECT_EQ(t.nodes[0].axis, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].theta, 0.5);
}

TEST(Adversarial, Thm4MinimumErrorOverAllTrees) {
  // Enumerated by hand for K = 2: both valid trees cut one basis axis at 1/2. Along axis 0
  // component 0 (mean e1) crosses when it deviates by -1 on axis 0 (mass eps); component 1
  // (mean e2) crosses when it deviates by +1 on axis 0 (mass eps). Error = eps = 1/(2q).
  for (std::size_t q : {2u, 8u}) {
    const auto inst = gen_thm4(2, q);
    std::vector<double> errors;
    const auto n = for_each_valid_tree(inst.model, [&](const AxisTree& t) {
      errors.push_back(exact_eval_discrete(inst.model, t).error_rate);
    });
    EXPECT_EQ(n, 2u);
    for (double e : errors) EXPECT_NEAR(e, 1.0 / (2.0 * static_cast<double>(q)), 1e-15);
  }
}

TEST(Adversarial, B3Targets) {
  const auto inst = gen_b3(4);
  EXPECT_NO_THROW(inst.model.validate());
  EXPECT_DOUBLE_EQ(inst.targets.at("price"), 1.25);
  EXPECT_DOUBLE_EQ(inst.targets.at("error"), 0.125);
  EXPECT_EQ(inst.model.mean(0), Vector(4, 0.5));
  EXPECT_EQ(inst.model.mean(1), Vector(4, -0.5));
  const auto r = exact_eval_discrete(inst.model, b3_canonical_tree(inst.model));
  EXPECT_NEAR(r.baseline_cost, inst.targets.at("baseline_l1"), 1e-12);
}

TEST(Adversarial, Thm2TargetsMatchExactComputation) {
  const auto inst = gen_thm2(2, 3, 4);
  EXPECT_NO_THROW(inst.model.validate());
  const double d = 8.0, M = 3.0;
  EXPECT_NEAR(enr(inst.model), inst.targets.at("enr"), 1e-9);
  EXPECT_NEAR(enr(inst.model), 2.0 * (2.0 * d + M), 1e-9);
  EXPECT_NEAR(beta_estimate(inst.model), inst.targets.at("beta"), 1e-9);
  const auto r = exact_eval_discrete(inst.model, build_mmdt(inst.model));
  EXPECT_NEAR(r.baseline_cost, 2.0 * d / (2.0 * d + M), 1e-12);
  EXPECT_TRUE(inst.verified_subset_sizes.empty());
}

TEST(Adversarial, Thm2CentersAreFarApart) {
  const auto inst = gen_thm2(3, 0, 1);
  const auto means = component_means(inst.model);
  EXPECT_TRUE(thm2_property1(means));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t l = k + 1; l < 3; ++l) {
      std::size_t h = 0;
      for (std::size_t j = 0; j < 27; ++j) h += means[k][j] != means[l][j];
      EXPECT_GE(4 * h, 27u);
    }
}

TEST(Adversarial, Thm2PropertyChecks) {
  // Four centers on two axes covering every sign pattern: each pattern on one axis is held by 2 = 4 * 1/2.
  const std::vector<Vector> all{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  EXPECT_TRUE(thm2_property2(all, 1, 0.0));
  EXPECT_TRUE(thm2_property2(all, 2, 0.0));
  const std::vector<Vector> skew{{1, 1}, {1, -1}, {1, 1}, {-1, -1}};
  EXPECT_FALSE(thm2_property2(skew, 1, 0.0));
  EXPECT_TRUE(thm2_property2(skew, 1, 0.25));
  EXPECT_FALSE(thm2_property1({{1, 1, 1, 1, 1}, {1, 1, 1, 1, -1}}));
}

TEST(Adversarial, Thm2RetriesExhaustedNamesProperty) {
  try {
    gen_thm2(2, 0, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Hamming"), std::string::npos);
  }
}

TEST(Adversarial, EnumerationHandCount) {
  // Means differ on axis 0 only; projections {0, 1} leave a single candidate cut.
  const auto m = make_mixture({Component::discrete({{0.0, 0.0}}, {1.0}),
                               Component::discrete({{1.0, 0.0}, {1.0, 0.0}}, {0.5, 0.5})},
                              {0.5, 0.5});
  const auto trees = enumerate_valid_trees(m);
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(trees[0].nodes[0].axis, 0);
  EXPECT_DOUBLE_EQ(trees[0].nodes[0].theta, 0.5);
  for (const auto& t : trees) EXPECT_DOUBLE_EQ(exact_eval_discrete(m, t).error_rate, 0.0);

  const auto m3 = make_mixture({Component::discrete({{0.0}}, {1.0}), Component::discrete({{1.0}, {3.0}}, {0.25, 0.75})},
                               {0.5, 0.5});
  // Means 0 and 2.5; projections {0, 1, 3}: midpoints 0.5 and 2 both separate them.
  EXPECT_EQ(enumerate_valid_trees(m3).size(), 2u);
}

TEST(Adversarial, EnumerationCountsThreeComponents) {
  // Point masses at 0, 1, 2 on a line: root cut at 0.5 or 1.5, then the single remaining cut.
  const auto m = make_mixture({Component::discrete({{0.0}}, {1.0}), Component::discrete({{1.0}}, {1.0}),
                               Component::discrete({{2.0}}, {1.0})},
                              {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto trees = enumerate_valid_trees(m);
  EXPECT_EQ(trees.size(), 2u);
  for (const auto& t : trees) EXPECT_EQ(check_tree(t, component_means(m)), "");
}

TEST(Adversarial, EnumerationRejectsLargeInstances) {
  EXPECT_THROW(for_each_valid_tree(gen_thm4(4, 4).model, [](const AxisTree&) {}), Error);
  EXPECT_THROW(for_each_valid_tree(gen_b3(64).model, [](const AxisTree&) {}), Error);
}
