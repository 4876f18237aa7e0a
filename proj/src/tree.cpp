#include "bdt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bdt/errors.hpp"

namespace bdt {

using ojson = nlohmann::ordered_json;

void TreePrior::validate() const {
  if (s_max < 1) throw ValidationError("tree prior: s_max must be at least 1");
  if (min_leaf < 1) throw ValidationError("tree prior: min_leaf must be at least 1");
  if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha))
    throw ValidationError("tree prior: dirichlet_alpha must be positive");
}

DecisionTree::DecisionTree() : nodes_{TreeNode{0, Leaf{}}}, root_(0), annotated_(false) {}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, NodeId root, bool annotated)
    : nodes_(std::move(nodes)), root_(root), annotated_(annotated) {
  const auto n = nodes_.size();
  if (n == 0) throw ValidationError("tree: no nodes");
  if (root_ >= n) throw ValidationError("tree: root id " + std::to_string(root_) + " not found");
  std::vector<int> parents(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != i)
      throw ValidationError("tree: node at position " + std::to_string(i) + " has id " +
                            std::to_string(nodes_[i].id));
    if (nodes_[i].is_leaf()) continue;
    ++splits_;
    const auto& s = nodes_[i].split();
    for (NodeId child : {s.left, s.right}) {
      if (child >= n)
        throw ValidationError("tree: node " + std::to_string(i) + " references dangling child id " +
                              std::to_string(child));
      ++parents[child];
    }
    if (s.left == s.right)
      throw ValidationError("tree: node " + std::to_string(i) + " has identical children");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int expected = i == root_ ? 0 : 1;
    if (parents[i] != expected)
      throw ValidationError("tree: node " + std::to_string(i) + " has " +
                            std::to_string(parents[i]) + " parents, expected " +
                            std::to_string(expected));
  }
  // One parent per non-root node: anything unreachable from the root sits on a cycle.
  std::vector<NodeId> stack{root_};
  std::size_t visited = 0;
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    ++visited;
    if (!nodes_[id].is_leaf()) {
      stack.push_back(nodes_[id].split().left);
      stack.push_back(nodes_[id].split().right);
    }
  }
  if (visited != n) throw ValidationError("tree: nodes unreachable from the root (cycle)");
}

std::vector<NodeId> DecisionTree::leaves() const {
  std::vector<NodeId> out;
  for (const auto& node : nodes_)
    if (node.is_leaf()) out.push_back(node.id);
  return out;
}

std::vector<NodeId> DecisionTree::split_nodes() const {
  std::vector<NodeId> out;
  for (const auto& node : nodes_)
    if (!node.is_leaf()) out.push_back(node.id);
  return out;
}

std::vector<NodeId> DecisionTree::prunable_nodes() const {
  std::vector<NodeId> out;
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    const auto& s = node.split();
    if (nodes_[s.left].is_leaf() && nodes_[s.right].is_leaf()) out.push_back(node.id);
  }
  return out;
}

std::size_t DecisionTree::max_variable() const {
  std::size_t out = 0;
  for (const auto& node : nodes_)
    if (!node.is_leaf()) out = std::max(out, node.split().rule.variable + 1);
  return out;
}

bool DecisionTree::uses_variable(std::size_t var) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [var](const TreeNode& node) {
    return !node.is_leaf() && node.split().rule.variable == var;
  });
}

DecisionTree DecisionTree::with_birth(NodeId leaf, const SplitRule& rule) const {
  if (leaf >= nodes_.size() || !nodes_[leaf].is_leaf())
    throw ValidationError("tree: birth target " + std::to_string(leaf) + " is not a leaf");
  auto nodes = nodes_;
  const NodeId left = nodes.size();
  const NodeId right = left + 1;
  nodes[leaf].body = Split{rule, left, right};
  nodes.push_back(TreeNode{left, Leaf{}});
  nodes.push_back(TreeNode{right, Leaf{}});
  return DecisionTree(std::move(nodes), root_, false);
}

DecisionTree DecisionTree::with_death(NodeId node) const {
  if (node >= nodes_.size() || nodes_[node].is_leaf())
    throw ValidationError("tree: death target " + std::to_string(node) + " is not a split");
  const auto s = nodes_[node].split();
  if (!nodes_[s.left].is_leaf() || !nodes_[s.right].is_leaf())
    throw ValidationError("tree: death target " + std::to_string(node) +
                          " has non-leaf children");
  LeafCounts merged{0, 0};
  for (NodeId c : {s.left, s.right})
    for (std::size_t k = 0; k < 2; ++k) merged[k] += nodes_[c].leaf().counts[k];

  std::vector<NodeId> remap(nodes_.size());
  NodeId next = 0;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    remap[i] = (i == s.left || i == s.right) ? nodes_.size() : next++;

  std::vector<TreeNode> nodes;
  nodes.reserve(nodes_.size() - 2);
  for (const auto& old : nodes_) {
    if (old.id == s.left || old.id == s.right) continue;
    TreeNode copy = old;
    copy.id = remap[old.id];
    if (old.id == node) {
      copy.body = Leaf{merged};
    } else if (!old.is_leaf()) {
      auto sp = old.split();
      sp.left = remap[sp.left];
      sp.right = remap[sp.right];
      copy.body = sp;
    }
    nodes.push_back(std::move(copy));
  }
  return DecisionTree(std::move(nodes), remap[root_], annotated_);
}

DecisionTree DecisionTree::with_rule(NodeId node, const SplitRule& rule) const {
  if (node >= nodes_.size() || nodes_[node].is_leaf())
    throw ValidationError("tree: rule change target " + std::to_string(node) +
                          " is not a split");
  auto nodes = nodes_;
  auto sp = nodes[node].split();
  sp.rule = rule;
  nodes[node].body = sp;
  return DecisionTree(std::move(nodes), root_, false);
}

DecisionTree DecisionTree::with_counts(std::span<const LeafCounts> per_node_counts) const {
  if (per_node_counts.size() != nodes_.size())
    throw ValidationError("tree: count vector does not match node count");
  DecisionTree out = *this;
  for (auto& node : out.nodes_)
    if (node.is_leaf()) node.body = Leaf{per_node_counts[node.id]};
  out.annotated_ = true;
  return out;
}

// ---------------------------------------------------------------------------

NodeId route(const DecisionTree& tree, std::span<const double> x) {
  const auto need = tree.max_variable();
  if (x.size() < need)
    throw ValidationError("route: input has " + std::to_string(x.size()) +
                          " features, tree uses variable index " + std::to_string(need - 1));
  const auto& nodes = tree.nodes();
  NodeId id = tree.root();
  while (!nodes[id].is_leaf()) {
    const auto& s = nodes[id].split();
    id = s.rule.goes_left(x[s.rule.variable]) ? s.left : s.right;
  }
  return id;
}

DecisionTree annotate(const DecisionTree& tree, const Dataset& data) {
  if (data.cols() < tree.max_variable())
    throw ValidationError("annotate: dataset has fewer variables than the tree uses");
  std::vector<LeafCounts> counts(tree.nodes().size(), LeafCounts{0, 0});
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto x = data.row(i);
    NodeId id = tree.root();
    while (!nodes[id].is_leaf()) {
      const auto& s = nodes[id].split();
      id = s.rule.goes_left(x[s.rule.variable]) ? s.left : s.right;
    }
    ++counts[id][static_cast<std::size_t>(data.label(i))];
  }
  return tree.with_counts(counts);
}

double leaf_log_marginal(const LeafCounts& c, double a) {
  const double n0 = static_cast<double>(c[0]);
  const double n1 = static_cast<double>(c[1]);
  // log B(n0+a, n1+a) - log B(a, a)
  return std::lgamma(n0 + a) + std::lgamma(n1 + a) - std::lgamma(n0 + n1 + 2 * a) -
         (2 * std::lgamma(a) - std::lgamma(2 * a));
}

double log_marginal_likelihood(const DecisionTree& tree, const TreePrior& prior) {
  if (!tree.annotated())
    throw ValidationError("log_marginal_likelihood: tree is not annotated");
  double total = 0.0;
  for (const auto& node : tree.nodes())
    if (node.is_leaf()) total += leaf_log_marginal(node.leaf().counts, prior.dirichlet_alpha);
  return total;
}

std::array<double, 2> leaf_predictive(const LeafCounts& c, const TreePrior& prior) {
  const double a = prior.dirichlet_alpha;
  const double n0 = static_cast<double>(c[0]) + a;
  const double n1 = static_cast<double>(c[1]) + a;
  const double total = n0 + n1;
  return {n0 / total, n1 / total};
}

std::vector<SplitRule> candidate_rules(const Dataset& data, std::size_t variable) {
  if (variable >= data.cols())
    throw ValidationError("candidate_rules: variable index " + std::to_string(variable) +
                          " out of range");
  std::set<double> values;
  for (std::size_t i = 0; i < data.rows(); ++i) values.insert(data.at(i, variable));
  std::vector<SplitRule> out;
  if (values.size() <= 1) return out;
  if (data.schema().variable(variable).is_categorical()) {
    if (values.size() == 2) {
      out.push_back(SplitRule::at_level(variable, static_cast<int>(*values.begin())));
    } else {
      for (double v : values) out.push_back(SplitRule::at_level(variable, static_cast<int>(v)));
    }
  } else {
    values.erase(std::prev(values.end()));
    for (double v : values) out.push_back(SplitRule::at_threshold(variable, v));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize(const DecisionTree& tree, std::optional<double> loglik) {
  ojson nodes = ojson::array();
  for (const auto& node : tree.nodes()) {
    ojson item;
    item["id"] = node.id;
    if (node.is_leaf()) {
      item["leaf"] = {node.leaf().counts[0], node.leaf().counts[1]};
    } else {
      const auto& s = node.split();
      ojson rule;
      rule["var"] = s.rule.variable;
      if (s.rule.categorical) {
        rule["level"] = s.rule.level;
      } else {
        rule["thr"] = s.rule.threshold;
      }
      item["split"] = std::move(rule);
      item["left"] = s.left;
      item["right"] = s.right;
    }
    nodes.push_back(std::move(item));
  }
  ojson doc;
  doc["nodes"] = std::move(nodes);
  doc["root"] = tree.root();
  if (loglik) doc["loglik"] = *loglik;
  return doc.dump();
}

namespace {

std::size_t get_index(const ojson& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing \"" + key + "\"");
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ValidationError(where + ": \"" + key + "\" must be a nonnegative integer");
  return v.get<std::size_t>();
}

}  // namespace

ParsedTree deserialize(std::string_view line) {
  ojson doc;
  try {
    doc = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw ValidationError("tree record: JSON error at byte " + std::to_string(e.byte) + ": " +
                          e.what());
  }
  if (!doc.is_object()) throw ValidationError("tree record: expected a JSON object");
  if (!doc.contains("nodes") || !doc.at("nodes").is_array())
    throw ValidationError("tree record: missing \"nodes\" array");
  const auto root = get_index(doc, "root", "tree record");

  std::vector<TreeNode> nodes;
  const auto& items = doc.at("nodes");
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const auto& item = items[pos];
    const std::string where = "tree record: nodes[" + std::to_string(pos) + "]";
    if (!item.is_object()) throw ValidationError(where + ": expected an object");
    TreeNode node;
    node.id = get_index(item, "id", where);
    const bool has_leaf = item.contains("leaf");
    const bool has_split = item.contains("split");
    if (has_leaf == has_split)
      throw ValidationError(where + ": exactly one of \"leaf\" or \"split\" is required");
    if (has_leaf) {
      const auto& c = item.at("leaf");
      if (!c.is_array() || c.size() != 2 || !c[0].is_number_unsigned() ||
          !c[1].is_number_unsigned())
        throw ValidationError(where + ".leaf: expected [n0, n1]");
      node.body = Leaf{{c[0].get<std::size_t>(), c[1].get<std::size_t>()}};
    } else {
      const auto& r = item.at("split");
      if (!r.is_object()) throw ValidationError(where + ".split: expected an object");
      SplitRule rule;
      rule.variable = get_index(r, "var", where + ".split");
      if (r.contains("level") == r.contains("thr"))
        throw ValidationError(where + ".split: exactly one of \"level\" or \"thr\" is required");
      if (r.contains("level")) {
        if (!r.at("level").is_number_integer())
          throw ValidationError(where + ".split.level: expected an integer");
        rule.categorical = true;
        rule.level = r.at("level").get<int>();
      } else {
        if (!r.at("thr").is_number())
          throw ValidationError(where + ".split.thr: expected a number");
        rule.threshold = r.at("thr").get<double>();
      }
      node.body = Split{rule, get_index(item, "left", where), get_index(item, "right", where)};
    }
    nodes.push_back(std::move(node));
  }
  std::optional<double> loglik;
  if (doc.contains("loglik")) {
    if (!doc.at("loglik").is_number())
      throw ValidationError("tree record: \"loglik\" must be a number");
    loglik = doc.at("loglik").get<double>();
  }
  return ParsedTree{DecisionTree(std::move(nodes), root, true), loglik};
}

}  // namespace bdt
