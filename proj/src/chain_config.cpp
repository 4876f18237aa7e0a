#include "bdt/chain_config.hpp"

#include <cmath>
#include <numeric>

#include "bdt/errors.hpp"

namespace bdt {

const char* to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::birth: return "birth";
    case MoveKind::death: return "death";
    case MoveKind::change_split: return "change_split";
    case MoveKind::change_rule: return "change_rule";
  }
  return "?";
}

void ChainConfig::validate() const {
  if (thin < 1) throw ValidationError("chain config: thin must be at least 1");
  if (collect_count < 1) throw ValidationError("chain config: collect_count must be at least 1");
  if (min_leaf < 1) throw ValidationError("chain config: min_leaf must be at least 1");
  if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha))
    throw ValidationError("chain config: dirichlet_alpha must be positive");
  double sum = 0.0;
  for (double p : move_probs) {
    if (!(p >= 0.0)) throw ValidationError("chain config: move probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("chain config: move probabilities must sum to 1");
}

std::size_t ChainConfig::effective_s_max(std::size_t train_rows) const {
  if (s_max > 0) return s_max;
  const auto by_leaf = train_rows / min_leaf;
  return by_leaf >= 2 ? by_leaf - 1 : 1;
}

TreePrior ChainConfig::prior_for(std::size_t train_rows) const {
  TreePrior prior{effective_s_max(train_rows), min_leaf, dirichlet_alpha};
  prior.validate();
  return prior;
}

std::size_t MoveCounters::total_proposed() const {
  return std::accumulate(proposed.begin(), proposed.end(), std::size_t{0});
}

std::size_t MoveCounters::total_accepted() const {
  return std::accumulate(accepted.begin(), accepted.end(), std::size_t{0});
}

double MoveCounters::rate(MoveKind kind) const {
  const auto k = static_cast<std::size_t>(kind);
  return proposed[k] ? static_cast<double>(accepted[k]) / static_cast<double>(proposed[k]) : 0.0;
}

double MoveCounters::overall_rate() const {
  const auto p = total_proposed();
  return p ? static_cast<double>(total_accepted()) / static_cast<double>(p) : 0.0;
}

}  // namespace bdt
