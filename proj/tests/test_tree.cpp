#include <doctest.h>

#include "support.hpp"
#include "tree_fixtures.hpp"

using namespace todflow;

TEST_SUITE("tree") {

TEST_CASE("single node tree predicting positive reads out as true") {
  TreeNode leaf;
  leaf.n_pos = 3;
  leaf.w_pos = 3.0;
  const auto tree = DecisionTree::from_nodes({leaf}, 4);
  CHECK(tree_to_dnf(tree, leaf_rule::weighted_majority()).is_true());
  CHECK(tree_to_dnf(tree, leaf_rule::purity_at_least(0.95)).is_true());

  TreeNode empty;
  const auto never = DecisionTree::from_nodes({empty}, 4);
  CHECK(tree_to_dnf(never, leaf_rule::any_positive()).is_false());
}

TEST_CASE("depth two tree reads out its selected paths") {
  // root splits on A; A=1 splits on B. Positive leaves: A&B and !A.
  std::vector<TreeNode> nodes(5);
  nodes[0].feature = 0;
  nodes[0].children[0] = 1;
  nodes[0].children[1] = 2;
  nodes[1].n_pos = 4;  // !A
  nodes[2].feature = 1;
  nodes[2].children[0] = 3;
  nodes[2].children[1] = 4;
  nodes[3].n_neg = 4;  // A & !B
  nodes[4].n_pos = 4;  // A & B
  const auto tree = DecisionTree::from_nodes(nodes, 2);
  const auto dnf = tree_to_dnf(tree, leaf_rule::any_positive());
  const DnfCondition expected({{Literal{0, false}, Literal{1, false}}, {Literal{0, true}}});
  CHECK(dnf == expected);
}

TEST_CASE("leaf rules") {
  TreeNode n;
  n.n_pos = 19;
  n.n_neg = 1;
  n.w_pos = 19.0;
  n.w_neg = 4.0;
  CHECK(leaf_rule::purity_at_least(0.95)(n));
  CHECK_FALSE(leaf_rule::purity_at_least(0.96)(n));
  CHECK(leaf_rule::weighted_majority()(n));
  n.w_neg = 19.0;
  CHECK_FALSE(leaf_rule::weighted_majority()(n));
  CHECK(leaf_rule::any_positive()(n));
  TreeNode empty;
  CHECK_FALSE(leaf_rule::purity_at_least(0.0)(empty));
}

TEST_CASE("fitted trees agree with their DNF on every input") {
  Rng rng(2024);
  const LeafRule rules[] = {leaf_rule::weighted_majority(), leaf_rule::purity_at_least(0.9),
                            leaf_rule::any_positive()};
  for (int t = 0; t < 150; ++t) {
    const auto fit = test::random_fitted_tree(rng, 10);
    const std::size_t n = fit.n_features;
    for (const auto& rule : rules) {
      const auto dnf = tree_to_dnf(fit.tree, rule);
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
        REQUIRE(dnf.evaluate(BitVector::from_mask(n, m)) == rule(test::walk(fit.tree, m)));
      }
    }
  }
}

TEST_CASE("separable data is fitted exactly") {
  // y = x0 & !x2 over 4 features, every input repeated 6 times
  std::vector<BitVector> xs;
  std::vector<std::uint8_t> ys;
  for (int rep = 0; rep < 6; ++rep) {
    for (std::uint64_t m = 0; m < 16; ++m) {
      xs.push_back(BitVector::from_mask(4, m));
      ys.push_back((m & 1U) && !(m & 4U));
    }
  }
  std::vector<const BitVector*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  TreeOptions opt;
  const auto tree = DecisionTree::fit(ptrs, ys, 4, opt);
  const auto dnf = tree_to_dnf(tree, leaf_rule::weighted_majority());
  CHECK(test::same_truth_table(dnf, DnfCondition::all_of({Literal{0, false}, Literal{2, true}}), 4));
}

TEST_CASE("fitting is deterministic") {
  Rng a(5), b(5);
  for (int t = 0; t < 20; ++t) {
    const auto x = test::random_fitted_tree(a);
    const auto y = test::random_fitted_tree(b);
    CHECK(tree_to_dnf(x.tree, leaf_rule::weighted_majority()) ==
          tree_to_dnf(y.tree, leaf_rule::weighted_majority()));
  }
}

TEST_CASE("chi-square critical values") {
  CHECK(chi2_1dof_critical(0.05) == doctest::Approx(3.841).epsilon(0.001));
  CHECK(chi2_1dof_critical(0.01) == doctest::Approx(6.635).epsilon(0.001));
  CHECK(chi2_1dof_critical(0.001) == doctest::Approx(10.828).epsilon(0.001));
}

}  // TEST_SUITE
