#pragma once

#include <memory>
#include <vector>

#include "todflow/rng.hpp"
#include "todflow/tree.hpp"

namespace todflow::test {

// Walks the node array directly instead of going through leaf_for.
inline const TreeNode& walk(const DecisionTree& tree, std::uint64_t mask) {
  std::size_t at = 0;
  while (tree.nodes()[at].feature >= 0) {
    const auto& n = tree.nodes()[at];
    at = static_cast<std::size_t>(n.children[(mask >> n.feature) & 1U]);
  }
  return tree.nodes()[at];
}

struct RandomFit {
  DecisionTree tree;
  std::size_t n_features = 0;
};

// Labels come from a hidden random rule plus label noise, so trees of many
// shapes and depths show up.
inline RandomFit random_fitted_tree(Rng& rng, std::size_t max_features = 12) {
  RandomFit out;
  out.n_features = 1 + rng.below(max_features);
  const std::size_t n = out.n_features;
  const std::size_t rows = 20 + rng.below(400);
  std::vector<BitVector> xs;
  std::vector<std::uint8_t> ys;
  const std::uint64_t rule_mask = rng.next();
  const double noise = rng.uniform() * 0.3;
  for (std::size_t r = 0; r < rows; ++r) {
    BitVector x(n);
    for (std::size_t j = 0; j < n; ++j) x.set(j, rng.bernoulli(0.5));
    bool y = false;
    for (std::size_t j = 0; j + 1 < n; j += 2) {
      if (((rule_mask >> j) & 1U) && x.test(j) && !x.test(j + 1)) y = true;
    }
    if (rng.bernoulli(noise)) y = !y;
    xs.push_back(std::move(x));
    ys.push_back(y ? 1 : 0);
  }
  std::vector<const BitVector*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  TreeOptions opt;
  opt.pos_weight = 0.25 + rng.uniform() * 2.0;
  opt.neg_weight = 0.25 + rng.uniform() * 2.0;
  opt.max_depth = 1 + rng.below(8);
  opt.min_leaf_examples = 1 + rng.below(6);
  opt.split_significance = rng.bernoulli(0.5) ? 0.0 : 0.05;
  opt.seed = rng.next();
  out.tree = DecisionTree::fit(ptrs, ys, n, opt);
  return out;
}

}  // namespace todflow::test
