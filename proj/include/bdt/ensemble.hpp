#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bdt/chain_config.hpp"
#include "bdt/tree.hpp"

namespace bdt {

struct EnsembleMeta {
  ChainConfig config;
  std::size_t n_features = 0;
  std::size_t train_rows = 0;
  std::size_t s_max = 0;
  MoveCounters burn_in;
  MoveCounters post_burn_in;

  TreePrior prior() const { return {s_max, config.min_leaf, config.dirichlet_alpha}; }
};

// Post-burn-in trees in collection order with their training log marginal
// likelihoods.
struct Ensemble {
  std::vector<DecisionTree> trees;
  std::vector<double> logliks;
  EnsembleMeta meta;

  std::size_t size() const { return trees.size(); }
  // Throws ValidationError unless N >= 1, logliks align and all trees fit n_features.
  void validate() const;
};

// One serialized tree (with "loglik") per line.
std::string ensemble_to_jsonl(const Ensemble& ensemble);
void write_ensemble(const Ensemble& ensemble, const std::filesystem::path& path);

std::string meta_to_json_text(const EnsembleMeta& meta,
                              std::optional<double> wall_clock_seconds = std::nullopt);
EnsembleMeta meta_from_json_text(const std::string& text);

// Reads the JSON-lines file; metadata comes from `meta_path` when given,
// otherwise defaults with n_features inferred from the trees.
Ensemble read_ensemble(const std::filesystem::path& path,
                       const std::optional<std::filesystem::path>& meta_path = std::nullopt);
Ensemble parse_ensemble(const std::string& text, const std::string& source);

}  // namespace bdt
