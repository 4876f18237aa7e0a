#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bdt/chain_config.hpp"
#include "bdt/dataset.hpp"
#include "bdt/ensemble.hpp"
#include "bdt/tree.hpp"

namespace bdt {

using Rng = std::mt19937_64;

struct ChainState {
  DecisionTree current;  // annotated against the training data
  double current_loglik = 0.0;
  std::size_t step = 0;
  MoveCounters counters;
};

// A fully specified move: `node` is the leaf (birth) or split node (others);
// `rule` is the new rule for birth / change_split / change_rule.
struct MoveChoice {
  MoveKind kind = MoveKind::birth;
  NodeId node = 0;
  SplitRule rule;
};

struct Proposal {
  MoveKind kind = MoveKind::birth;
  DecisionTree candidate;  // annotated
  double candidate_loglik = 0.0;
  double log_proposal_ratio = 0.0;  // log q(candidate -> current) - log q(current -> candidate)
  double log_prior_ratio = 0.0;     // log p(candidate) - log p(current)
};

// Reversible-jump sampler over decision trees for one training set.
//
// Structural prior: the split count s is uniform on {0, ..., s_max}; given s,
// each of the Catalan(s) tree shapes is equally likely, and every split draws
// its variable from U(1..m) and its rule uniformly from that variable's
// candidate rules. Trees with a leaf holding fewer than min_leaf training rows
// get zero posterior mass.
class Sampler {
 public:
  Sampler(Dataset train, ChainConfig config);

  const Dataset& data() const { return data_; }
  const ChainConfig& config() const { return config_; }
  const TreePrior& prior() const { return prior_; }
  const std::vector<SplitRule>& candidates(std::size_t var) const { return candidates_.at(var); }
  std::size_t variables() const { return candidates_.size(); }

  ChainState init(Rng& rng) const;
  ChainState state_for(const DecisionTree& tree) const;

  // nullopt when the move is inapplicable to the current tree.
  std::optional<Proposal> propose(const ChainState& state, MoveKind kind, Rng& rng) const;
  std::optional<Proposal> propose_with(const ChainState& state, const MoveChoice& choice) const;

  bool satisfies_min_leaf(const DecisionTree& tree) const;
  // -inf when the candidate violates min_leaf.
  double log_acceptance(const ChainState& state, const Proposal& proposal) const;
  double log_structure_prior(const DecisionTree& tree) const;

  // One Metropolis-Hastings step; returns true when the proposal was accepted.
  bool step(ChainState& state, Rng& rng) const;

  Ensemble run() const;

 private:
  Dataset data_;
  ChainConfig config_;
  TreePrior prior_;
  std::vector<std::vector<SplitRule>> candidates_;
  std::array<double, kMoveKinds> move_cdf_;  // cumulative move_probs
};

ChainState init_chain(const Dataset& data, const ChainConfig& config);
bool mh_step(ChainState& state, const Dataset& data, const ChainConfig& config, Rng& rng);
Ensemble run_chain(const Dataset& data, const ChainConfig& config);

struct ChainDiagnostics {
  MoveCounters burn_in;
  MoveCounters post_burn_in;
  std::array<double, kMoveKinds> acceptance{};  // whole run, per move kind
  double overall_acceptance = 0.0;

  double loglik_mean = 0.0;
  double loglik_min = 0.0;
  double loglik_max = 0.0;
  std::vector<double> window_means;  // 10 consecutive windows of the trace
  double max_window_drift = 0.0;     // largest |window mean - trace mean|
  double first_half_mean = 0.0;
  double second_half_mean = 0.0;
  double half_diff_se = 0.0;  // autocorrelation-aware standard error of the difference
  double drift_z = 0.0;       // (second - first) / half_diff_se

  std::map<std::size_t, std::size_t> leaf_histogram;
};

ChainDiagnostics chain_diagnostics(const Ensemble& ensemble);
std::string format_diagnostics(const ChainDiagnostics& diag);

// Standard error of the mean of a correlated series via non-overlapping batch means.
double batch_means_standard_error(const std::vector<double>& series, std::size_t batches = 20);

// Standard error of the mean from the initial monotone sequence of autocovariances.
double autocorrelation_standard_error(const std::vector<double>& series);

}  // namespace bdt
