#pragma once

// Test-only helpers: small dataset builders, random tree growth and
// oracles that recompute quantities without going through the library.

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "bdt/dataset.hpp"
#include "bdt/ensemble.hpp"
#include "bdt/tree.hpp"

namespace bdt::test {

inline Schema continuous_schema(std::size_t m) {
  std::vector<VariableSpec> vars;
  for (std::size_t j = 0; j < m; ++j)
    vars.push_back({"x" + std::to_string(j + 1), VariableKind::continuous, {}});
  return Schema(std::move(vars), "y");
}

inline Dataset make_data(const Schema& schema, const std::vector<std::vector<double>>& rows,
                         const std::vector<int>& labels) {
  std::vector<double> feats;
  for (const auto& r : rows) feats.insert(feats.end(), r.begin(), r.end());
  return Dataset(schema, std::move(feats), labels, "test");
}

// log B(a, b) for positive integers: (a-1)! (b-1)! / (a+b-1)!
inline double log_beta_integer(long a, long b) {
  double out = 0.0;
  for (long k = 2; k < a; ++k) out += std::log(static_cast<double>(k));
  for (long k = 2; k < b; ++k) out += std::log(static_cast<double>(k));
  for (long k = 2; k < a + b; ++k) out -= std::log(static_cast<double>(k));
  return out;
}

inline double oracle_leaf_marginal(std::size_t n0, std::size_t n1, long alpha) {
  return log_beta_integer(static_cast<long>(n0) + alpha, static_cast<long>(n1) + alpha) -
         log_beta_integer(alpha, alpha);
}

inline double catalan(std::size_t s) {
  // C(0) = 1, C(k+1) = sum C(i) C(k-i)
  std::vector<double> c(s + 1, 0.0);
  c[0] = 1.0;
  for (std::size_t k = 1; k <= s; ++k)
    for (std::size_t i = 0; i < k; ++i) c[k] += c[i] * c[k - 1 - i];
  return c[s];
}

// Leaf reached by x, following children by hand rather than via route().
inline NodeId walk(const DecisionTree& tree, const std::vector<double>& x) {
  NodeId at = tree.root();
  while (!tree.node(at).is_leaf()) {
    const auto& sp = tree.node(at).split();
    const double v = x[sp.rule.variable];
    const bool left = sp.rule.categorical ? v == sp.rule.level : v <= sp.rule.threshold;
    at = left ? sp.left : sp.right;
  }
  return at;
}

// Per-leaf class counts computed by walking every row.
inline std::vector<std::array<std::size_t, 2>> oracle_counts(const DecisionTree& tree,
                                                             const Dataset& data) {
  std::vector<std::array<std::size_t, 2>> counts(tree.nodes().size(), {0, 0});
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto r = data.row(i);
    counts[walk(tree, std::vector<double>(r.begin(), r.end()))][data.label(i)]++;
  }
  return counts;
}

// Posterior weight (unnormalized, log) under the size-uniform structural prior.
// Returns -inf for trees outside the support.
inline double oracle_log_posterior(const DecisionTree& tree, const Dataset& data,
                                   std::size_t s_max, std::size_t min_leaf,
                                   const std::vector<std::size_t>& rules_per_var) {
  const auto s = tree.split_count();
  if (s > s_max) return -INFINITY;
  const double m = static_cast<double>(rules_per_var.size());
  double lp = -std::log(static_cast<double>(s_max + 1)) - std::log(catalan(s));
  for (const auto& node : tree.nodes())
    if (!node.is_leaf())
      lp -= std::log(m * static_cast<double>(rules_per_var[node.split().rule.variable]));
  const auto counts = oracle_counts(tree, data);
  for (const auto& node : tree.nodes()) {
    if (!node.is_leaf()) continue;
    const auto& c = counts[node.id];
    if (c[0] + c[1] < min_leaf) return -INFINITY;
    lp += oracle_leaf_marginal(c[0], c[1], 1);
  }
  return lp;
}

// Structure key independent of node numbering.
inline std::string canonical(const DecisionTree& tree, NodeId at) {
  const auto& node = tree.node(at);
  if (node.is_leaf()) return "L";
  const auto& sp = node.split();
  std::string rule = std::to_string(sp.rule.variable) +
                     (sp.rule.categorical ? "=" + std::to_string(sp.rule.level)
                                          : "<=" + std::to_string(sp.rule.threshold));
  return "(" + rule + " " + canonical(tree, sp.left) + " " + canonical(tree, sp.right) + ")";
}
inline std::string canonical(const DecisionTree& tree) { return canonical(tree, tree.root()); }

// Grows a tree by `births` random births using the data's candidate rules.
inline DecisionTree random_tree(const Dataset& data, std::size_t births, std::mt19937_64& rng) {
  DecisionTree tree;
  for (std::size_t b = 0; b < births; ++b) {
    std::vector<SplitRule> rules;
    for (std::size_t j = 0; j < data.cols(); ++j)
      for (const auto& r : candidate_rules(data, j)) rules.push_back(r);
    if (rules.empty()) break;
    const auto leaves = tree.leaves();
    std::uniform_int_distribution<std::size_t> pl(0, leaves.size() - 1), pr(0, rules.size() - 1);
    tree = tree.with_birth(leaves[pl(rng)], rules[pr(rng)]);
  }
  return annotate(tree, data);
}

inline Ensemble ensemble_of(std::vector<DecisionTree> trees, std::size_t n_features) {
  Ensemble e;
  e.trees = std::move(trees);
  e.logliks.assign(e.trees.size(), 0.0);
  e.meta.n_features = n_features;
  e.meta.s_max = 10;
  e.meta.config.min_leaf = 1;
  return e;
}

}  // namespace bdt::test
