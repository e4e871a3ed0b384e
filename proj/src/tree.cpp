#include "todflow/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "todflow/rng.hpp"

namespace todflow {

namespace leaf_rule {

LeafRule weighted_majority() {
  return [](const TreeNode& n) { return n.w_pos > n.w_neg; };
}

LeafRule purity_at_least(double threshold) {
  return [threshold](const TreeNode& n) { return n.count() > 0 && n.purity() >= threshold; };
}

LeafRule any_positive() {
  return [](const TreeNode& n) { return n.n_pos > 0; };
}

}  // namespace leaf_rule

double chi2_1dof_critical(double p) {
  // Solve 0.5 * erfc(z / sqrt 2) = p / 2 for z, return z^2.
  const double target = p / 2.0;
  double lo = 0.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double tail = 0.5 * std::erfc(mid / std::sqrt(2.0));
    if (tail > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double z = 0.5 * (lo + hi);
  return z * z;
}

namespace {

// Weighted Gini impurity times node weight: W * (1 - p^2 - n^2) = 2pn / W.
double impurity_mass(double p, double n) {
  const double w = p + n;
  return w > 0.0 ? 2.0 * p * n / w : 0.0;
}

double chi2_stat(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double den = (a + b) * (c + d) * (a + c) * (b + d);
  if (den <= 0.0) return 0.0;
  const double diff = a * d - b * c;
  return n * diff * diff / den;
}

class Builder {
 public:
  Builder(std::span<const BitVector* const> rows, std::span<const std::uint8_t> labels,
          std::size_t n_features, const TreeOptions& opt)
      : rows_(rows), labels_(labels), n_features_(n_features), opt_(opt),
        pos1_(n_features), neg1_(n_features) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> all(rows_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    grow(std::move(all), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> idx, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    TreeNode node;
    node.depth = depth;
    for (auto i : idx) {
      if (labels_[i]) {
        ++node.n_pos;
      } else {
        ++node.n_neg;
      }
    }
    node.w_pos = static_cast<double>(node.n_pos) * opt_.pos_weight;
    node.w_neg = static_cast<double>(node.n_neg) * opt_.neg_weight;
    nodes_[id] = node;

    const int feature = choose_split(idx, node, static_cast<std::uint64_t>(id));
    if (feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) {
      (rows_[i]->test(static_cast<std::size_t>(feature)) ? right : left).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[id].feature = feature;
    nodes_[id].children[0] = l;
    nodes_[id].children[1] = r;
    return id;
  }

  int choose_split(const std::vector<std::size_t>& idx, const TreeNode& node, std::uint64_t node_id) {
    if (depth_exhausted(node) || node.n_pos == 0 || node.n_neg == 0) return -1;
    if (node.count() < 2 * opt_.min_leaf_examples) return -1;

    std::fill(pos1_.begin(), pos1_.end(), 0);
    std::fill(neg1_.begin(), neg1_.end(), 0);
    for (auto i : idx) {
      auto& counts = labels_[i] ? pos1_ : neg1_;
      const auto words = rows_[i]->words();
      for (std::size_t w = 0; w < words.size(); ++w) {
        std::uint64_t bits = words[w];
        while (bits) {
          const int b = std::countr_zero(bits);
          const std::size_t j = w * 64 + static_cast<std::size_t>(b);
          if (j < n_features_) ++counts[j];
          bits &= bits - 1;
        }
      }
    }

    const double parent = impurity_mass(node.w_pos, node.w_neg);
    double best = 0.0;
    std::vector<int> tied;
    std::size_t candidates = 0;
    for (std::size_t j = 0; j < n_features_; ++j) {
      const std::size_t p1 = pos1_[j];
      const std::size_t n1 = neg1_[j];
      const std::size_t p0 = node.n_pos - p1;
      const std::size_t n0 = node.n_neg - n1;
      if (p1 + n1 < opt_.min_leaf_examples || p0 + n0 < opt_.min_leaf_examples) continue;
      ++candidates;
      const double gain = parent -
                          impurity_mass(p1 * opt_.pos_weight, n1 * opt_.neg_weight) -
                          impurity_mass(p0 * opt_.pos_weight, n0 * opt_.neg_weight);
      const double tol = 1e-12 * std::max(1.0, std::abs(best));
      if (gain > best + tol) {
        best = gain;
        tied.assign(1, static_cast<int>(j));
      } else if (!tied.empty() && std::abs(gain - best) <= tol) {
        tied.push_back(static_cast<int>(j));
      }
    }
    if (tied.empty() || best <= 1e-12 * std::max(1.0, parent)) return -1;

    int feature = tied.front();
    if (tied.size() > 1) {
      Rng rng(derive_seed(opt_.seed, node_id));
      feature = tied[rng.below(tied.size())];
    }

    if (opt_.split_significance > 0.0 && opt_.split_significance < 1.0) {
      const auto j = static_cast<std::size_t>(feature);
      const double a = static_cast<double>(pos1_[j]);
      const double b = static_cast<double>(neg1_[j]);
      const double c = static_cast<double>(node.n_pos - pos1_[j]);
      const double d = static_cast<double>(node.n_neg - neg1_[j]);
      const double critical =
          chi2_1dof_critical(opt_.split_significance / static_cast<double>(candidates));
      if (chi2_stat(a, b, c, d) < critical) return -1;
    }
    return feature;
  }

  bool depth_exhausted(const TreeNode& node) const { return node.depth >= opt_.max_depth; }

  std::span<const BitVector* const> rows_;
  std::span<const std::uint8_t> labels_;
  std::size_t n_features_;
  TreeOptions opt_;
  std::vector<std::size_t> pos1_;
  std::vector<std::size_t> neg1_;
  std::vector<TreeNode> nodes_;
};

void collect(const DecisionTree& tree, int id, Clause& path, const LeafRule& rule,
             std::vector<Clause>& out) {
  const TreeNode& n = tree.nodes()[static_cast<std::size_t>(id)];
  if (n.is_leaf()) {
    if (rule(n)) out.push_back(path);
    return;
  }
  const auto f = static_cast<ActIndex>(n.feature);
  path.push_back(Literal{f, true});
  collect(tree, n.children[0], path, rule, out);
  path.back().negated = false;
  collect(tree, n.children[1], path, rule, out);
  path.pop_back();
}

}  // namespace

DecisionTree DecisionTree::fit(std::span<const BitVector* const> rows,
                               std::span<const std::uint8_t> labels, std::size_t n_features,
                               const TreeOptions& options) {
  DecisionTree tree;
  tree.n_features_ = n_features;
  Builder builder(rows, labels, n_features, options);
  tree.nodes_ = builder.build();
  return tree;
}

DecisionTree DecisionTree::from_nodes(std::vector<TreeNode> nodes, std::size_t n_features) {
  DecisionTree tree;
  tree.nodes_ = std::move(nodes);
  tree.n_features_ = n_features;
  if (tree.nodes_.empty()) tree.nodes_.emplace_back();
  return tree;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

const TreeNode& DecisionTree::leaf_for(const BitVector& x) const {
  const TreeNode* n = &nodes_.front();
  while (!n->is_leaf()) {
    n = &nodes_[static_cast<std::size_t>(n->children[x.test(static_cast<std::size_t>(n->feature))])];
  }
  return *n;
}

DnfCondition tree_to_dnf(const DecisionTree& tree, const LeafRule& rule) {
  std::vector<Clause> clauses;
  Clause path;
  collect(tree, 0, path, rule, clauses);
  return DnfCondition(std::move(clauses));
}

}  // namespace todflow
