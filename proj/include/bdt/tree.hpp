#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bdt/dataset.hpp"

namespace bdt {

using NodeId = std::size_t;

// Continuous rule: left iff x[variable] <= threshold.
// Categorical rule: left iff x[variable] == level.
struct SplitRule {
  std::size_t variable = 0;
  bool categorical = false;
  double threshold = 0.0;
  int level = 0;

  static SplitRule at_threshold(std::size_t var, double thr) { return {var, false, thr, 0}; }
  static SplitRule at_level(std::size_t var, int lvl) { return {var, true, 0.0, lvl}; }

  bool goes_left(double x) const {
    return categorical ? x == static_cast<double>(level) : x <= threshold;
  }

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

using LeafCounts = std::array<std::size_t, 2>;

struct Split {
  SplitRule rule;
  NodeId left = 0;
  NodeId right = 0;
  friend bool operator==(const Split&, const Split&) = default;
};

struct Leaf {
  LeafCounts counts{0, 0};
  friend bool operator==(const Leaf&, const Leaf&) = default;
};

struct TreeNode {
  NodeId id = 0;
  std::variant<Split, Leaf> body;

  bool is_leaf() const { return std::holds_alternative<Leaf>(body); }
  const Split& split() const { return std::get<Split>(body); }
  const Leaf& leaf() const { return std::get<Leaf>(body); }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreePrior {
  std::size_t s_max = 1;
  std::size_t min_leaf = 1;
  double dirichlet_alpha = 1.0;

  void validate() const;
};

// Binary decision tree stored as a node vector indexed by id. Values are
// immutable in practice: every edit returns a new tree.
class DecisionTree {
 public:
  // Single-leaf tree.
  DecisionTree();
  // Validates structure; throws ValidationError on dangling ids, cycles,
  // unreachable nodes or a bad root.
  DecisionTree(std::vector<TreeNode> nodes, NodeId root, bool annotated);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  NodeId root() const { return root_; }
  bool annotated() const { return annotated_; }

  std::size_t leaf_count() const { return nodes_.size() - split_count(); }
  std::size_t split_count() const { return splits_; }

  std::vector<NodeId> leaves() const;
  std::vector<NodeId> split_nodes() const;
  // Split nodes whose two children are both leaves.
  std::vector<NodeId> prunable_nodes() const;
  std::size_t max_variable() const;  // 1 + largest variable index used, 0 if none
  bool uses_variable(std::size_t var) const;

  // Leaf `leaf` becomes a split; new leaves are appended with the next two ids.
  DecisionTree with_birth(NodeId leaf, const SplitRule& rule) const;
  // Prunable node `node` becomes a leaf; its children are removed and ids compacted.
  DecisionTree with_death(NodeId node) const;
  DecisionTree with_rule(NodeId node, const SplitRule& rule) const;
  DecisionTree with_counts(std::span<const LeafCounts> per_node_counts) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
  NodeId root_ = 0;
  bool annotated_ = false;
  std::size_t splits_ = 0;
};

NodeId route(const DecisionTree& tree, std::span<const double> x);
DecisionTree annotate(const DecisionTree& tree, const Dataset& data);

// Sum over leaves of log[B(n0 + a, n1 + a) / B(a, a)].
double log_marginal_likelihood(const DecisionTree& tree, const TreePrior& prior);
double leaf_log_marginal(const LeafCounts& counts, double alpha);

std::array<double, 2> leaf_predictive(const LeafCounts& counts, const TreePrior& prior);

// Continuous: sorted distinct values without the maximum. Categorical: equality
// levels present in the data; with exactly two present levels only the lower one
// is kept because both describe the same partition. Empty for constant columns.
std::vector<SplitRule> candidate_rules(const Dataset& data, std::size_t variable);

// One-line JSON record: {"nodes":[...],"root":r} plus "loglik" when given.
std::string serialize(const DecisionTree& tree, std::optional<double> loglik = std::nullopt);

struct ParsedTree {
  DecisionTree tree;
  std::optional<double> loglik;
};
// Throws ValidationError naming the offending position.
ParsedTree deserialize(std::string_view line);

}  // namespace bdt
