#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "todflow/core.hpp"
#include "todflow/dnf.hpp"

namespace todflow {

struct TreeOptions {
  /// Per-example weight of each class in the impurity.
  double pos_weight = 1.0;
  double neg_weight = 1.0;
  std::size_t max_depth = 6;
  std::size_t min_leaf_examples = 5;
  /// Family-wise level of the chi-square test a split must pass
  /// (Bonferroni over the candidate features of the node). Values outside
  /// (0, 1) disable the test.
  double split_significance = 0.01;
  /// Breaks exact gain ties between features.
  std::uint64_t seed = 0;
};

struct TreeNode {
  /// Tested feature, or -1 at a leaf.
  int feature = -1;
  /// children[0] when the feature bit is clear, children[1] when set.
  int children[2] = {-1, -1};
  std::size_t depth = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double w_pos = 0.0;
  double w_neg = 0.0;

  bool is_leaf() const { return feature < 0; }
  std::size_t count() const { return n_pos + n_neg; }
  /// Unweighted fraction of positives; 0 for an empty node.
  double purity() const { return count() ? static_cast<double>(n_pos) / count() : 0.0; }
};

/// Selects the leaves whose region becomes a clause.
using LeafRule = std::function<bool(const TreeNode&)>;

namespace leaf_rule {
/// Weighted positive mass strictly exceeds weighted negative mass.
LeafRule weighted_majority();
/// Unweighted positive fraction >= threshold (and the leaf is non-empty).
LeafRule purity_at_least(double threshold);
/// Leaf holds at least one positive example.
LeafRule any_positive();
}  // namespace leaf_rule

/// CART-style binary tree over binary features, weighted Gini impurity.
class DecisionTree {
 public:
  /// rows[i] is example i's feature vector (all of length n_features),
  /// labels[i] its class (non-zero = positive).
  static DecisionTree fit(std::span<const BitVector* const> rows,
                          std::span<const std::uint8_t> labels, std::size_t n_features,
                          const TreeOptions& options);

  /// Tree from explicit nodes; node 0 is the root.
  static DecisionTree from_nodes(std::vector<TreeNode> nodes, std::size_t n_features);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t leaf_count() const;

  const TreeNode& leaf_for(const BitVector& x) const;
  bool predict(const BitVector& x, const LeafRule& rule) const { return rule(leaf_for(x)); }

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

/// One clause per selected leaf: the signed feature tests on its
/// root-to-leaf path. Truth-table-equivalent to the selected-leaf indicator.
DnfCondition tree_to_dnf(const DecisionTree& tree, const LeafRule& rule);

/// Upper critical value of the chi-square distribution with one degree of
/// freedom at tail probability p.
double chi2_1dof_critical(double p);

}  // namespace todflow
