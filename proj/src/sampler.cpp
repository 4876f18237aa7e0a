#include "bdt/sampler.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bdt/errors.hpp"

namespace bdt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of the number of binary tree shapes with s internal nodes.
double log_catalan(std::size_t s) {
  const double x = static_cast<double>(s);
  return std::lgamma(2 * x + 1) - std::lgamma(x + 2) - std::lgamma(x + 1);
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

const ChainConfig& checked(const ChainConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Sampler::Sampler(Dataset train, ChainConfig config)
    : data_(std::move(train)),
      config_(checked(config)),
      prior_(config_.prior_for(data_.rows())),
      move_cdf_{} {
  double acc = 0.0;
  for (std::size_t k = 0; k < kMoveKinds; ++k) move_cdf_[k] = (acc += config_.move_probs[k]);
  candidates_.reserve(data_.cols());
  for (std::size_t j = 0; j < data_.cols(); ++j) candidates_.push_back(candidate_rules(data_, j));
}

bool Sampler::satisfies_min_leaf(const DecisionTree& tree) const {
  for (const auto& node : tree.nodes())
    if (node.is_leaf() && node.leaf().counts[0] + node.leaf().counts[1] < prior_.min_leaf)
      return false;
  return true;
}

ChainState Sampler::state_for(const DecisionTree& tree) const {
  ChainState state;
  state.current = annotate(tree, data_);
  state.current_loglik = log_marginal_likelihood(state.current, prior_);
  return state;
}

ChainState Sampler::init(Rng& rng) const {
  constexpr int kMaxInitDraws = 1000;
  std::uniform_int_distribution<std::size_t> var_dist(0, variables() - 1);
  for (int attempt = 0; attempt < kMaxInitDraws; ++attempt) {
    const auto var = var_dist(rng);
    const auto& cands = candidates_[var];
    if (cands.empty()) continue;
    const auto& rule = pick(cands, rng);
    auto tree = annotate(DecisionTree().with_birth(0, rule), data_);
    if (satisfies_min_leaf(tree)) return state_for(tree);
  }
  return state_for(DecisionTree());
}

double Sampler::log_structure_prior(const DecisionTree& tree) const {
  const auto s = tree.split_count();
  if (s > prior_.s_max) return kNegInf;
  const double m = static_cast<double>(variables());
  double lp = -std::log(static_cast<double>(prior_.s_max + 1)) - log_catalan(s);
  for (const auto& node : tree.nodes()) {
    if (node.is_leaf()) continue;
    const auto& rule = node.split().rule;
    const auto L = rule.variable < variables() ? candidates_[rule.variable].size() : 0;
    if (L == 0) return kNegInf;
    lp -= std::log(m * static_cast<double>(L));
  }
  return lp;
}

std::optional<Proposal> Sampler::propose(const ChainState& state, MoveKind kind,
                                         Rng& rng) const {
  const auto& tree = state.current;
  MoveChoice choice{kind, 0, {}};
  std::uniform_int_distribution<std::size_t> var_dist(0, variables() - 1);
  switch (kind) {
    case MoveKind::birth: {
      if (tree.split_count() >= prior_.s_max) return std::nullopt;
      choice.node = pick(tree.leaves(), rng);
      const auto& cands = candidates_[var_dist(rng)];
      if (cands.empty()) return std::nullopt;
      choice.rule = pick(cands, rng);
      break;
    }
    case MoveKind::death: {
      const auto prunable = tree.prunable_nodes();
      if (prunable.empty()) return std::nullopt;
      choice.node = pick(prunable, rng);
      break;
    }
    case MoveKind::change_split: {
      const auto splits = tree.split_nodes();
      if (splits.empty()) return std::nullopt;
      choice.node = pick(splits, rng);
      const auto& cands = candidates_[var_dist(rng)];
      if (cands.empty()) return std::nullopt;
      choice.rule = pick(cands, rng);
      break;
    }
    case MoveKind::change_rule: {
      const auto splits = tree.split_nodes();
      if (splits.empty()) return std::nullopt;
      choice.node = pick(splits, rng);
      const auto& cands = candidates_[tree.node(choice.node).split().rule.variable];
      if (cands.empty()) return std::nullopt;
      choice.rule = pick(cands, rng);
      break;
    }
  }
  return propose_with(state, choice);
}

std::optional<Proposal> Sampler::propose_with(const ChainState& state,
                                              const MoveChoice& choice) const {
  const auto& tree = state.current;
  const double m = static_cast<double>(variables());
  const double p_birth = config_.move_probs[static_cast<std::size_t>(MoveKind::birth)];
  const double p_death = config_.move_probs[static_cast<std::size_t>(MoveKind::death)];
  const auto s = tree.split_count();
  auto cand_count = [&](std::size_t var) -> double {
    return var < variables() ? static_cast<double>(candidates_[var].size()) : 0.0;
  };
  if (choice.node >= tree.nodes().size()) return std::nullopt;
  const auto& target = tree.node(choice.node);

  Proposal out;
  out.kind = choice.kind;
  switch (choice.kind) {
    case MoveKind::birth: {
      if (!target.is_leaf() || s >= prior_.s_max) return std::nullopt;
      const double L = cand_count(choice.rule.variable);
      if (L == 0) return std::nullopt;
      out.candidate = tree.with_birth(choice.node, choice.rule);
      const double prunable_after = static_cast<double>(out.candidate.prunable_nodes().size());
      const double leaves_before = static_cast<double>(s + 1);
      out.log_proposal_ratio =
          safe_log(p_death / prunable_after) - safe_log(p_birth / (leaves_before * m * L));
      out.log_prior_ratio = log_catalan(s) - log_catalan(s + 1) - std::log(m * L);
      break;
    }
    case MoveKind::death: {
      if (target.is_leaf()) return std::nullopt;
      const auto& sp = target.split();
      if (!tree.node(sp.left).is_leaf() || !tree.node(sp.right).is_leaf()) return std::nullopt;
      const double L = cand_count(sp.rule.variable);
      if (L == 0) return std::nullopt;
      const double prunable_before = static_cast<double>(tree.prunable_nodes().size());
      const double leaves_after = static_cast<double>(s);
      out.candidate = tree.with_death(choice.node);
      out.log_proposal_ratio =
          safe_log(p_birth / (leaves_after * m * L)) - safe_log(p_death / prunable_before);
      out.log_prior_ratio = log_catalan(s) - log_catalan(s - 1) + std::log(m * L);
      break;
    }
    case MoveKind::change_split: {
      if (target.is_leaf()) return std::nullopt;
      const double L_old = cand_count(target.split().rule.variable);
      const double L_new = cand_count(choice.rule.variable);
      if (L_old == 0 || L_new == 0) return std::nullopt;
      out.candidate = tree.with_rule(choice.node, choice.rule);
      out.log_proposal_ratio = std::log(L_new) - std::log(L_old);
      out.log_prior_ratio = std::log(L_old) - std::log(L_new);
      break;
    }
    case MoveKind::change_rule: {
      if (target.is_leaf()) return std::nullopt;
      if (choice.rule.variable != target.split().rule.variable) return std::nullopt;
      if (cand_count(choice.rule.variable) == 0) return std::nullopt;
      out.candidate = tree.with_rule(choice.node, choice.rule);
      break;
    }
  }
  out.candidate = annotate(out.candidate, data_);
  out.candidate_loglik = log_marginal_likelihood(out.candidate, prior_);
  return out;
}

double Sampler::log_acceptance(const ChainState& state, const Proposal& proposal) const {
  if (!satisfies_min_leaf(proposal.candidate)) return kNegInf;
  return (proposal.candidate_loglik - state.current_loglik) + proposal.log_prior_ratio +
         proposal.log_proposal_ratio;
}

bool Sampler::step(ChainState& state, Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * move_cdf_.back();
  std::size_t k = 0;
  while (k + 1 < kMoveKinds && (u >= move_cdf_[k] || config_.move_probs[k] == 0.0)) ++k;
  ++state.step;
  ++state.counters.proposed[k];
  auto proposal = propose(state, static_cast<MoveKind>(k), rng);
  bool accepted = false;
  if (proposal) {
    const double log_a = log_acceptance(state, *proposal);
    if (log_a >= 0.0) {
      accepted = true;
    } else if (log_a > kNegInf) {
      accepted = std::log(unit(rng)) < log_a;
    }
    if (accepted) {
      state.current = std::move(proposal->candidate);
      state.current_loglik = proposal->candidate_loglik;
      ++state.counters.accepted[k];
    }
  }
#ifndef NDEBUG
  if (state.step % 1000 == 0) {
    const double check = log_marginal_likelihood(annotate(state.current, data_), prior_);
    assert(std::abs(check - state.current_loglik) < 1e-9);
  }
#endif
  return accepted;
}

Ensemble Sampler::run() const {
  Rng rng(config_.seed);
  auto state = init(rng);
  for (std::size_t i = 0; i < config_.burn_in_steps; ++i) step(state, rng);
  const auto after_burn_in = state.counters;

  Ensemble out;
  out.trees.reserve(config_.collect_count);
  out.logliks.reserve(config_.collect_count);
  for (std::size_t c = 0; c < config_.collect_count; ++c) {
    for (std::size_t t = 0; t < config_.thin; ++t) step(state, rng);
    out.trees.push_back(state.current);
    out.logliks.push_back(state.current_loglik);
  }
  out.meta.config = config_;
  out.meta.n_features = data_.cols();
  out.meta.train_rows = data_.rows();
  out.meta.s_max = prior_.s_max;
  out.meta.burn_in = after_burn_in;
  for (std::size_t k = 0; k < kMoveKinds; ++k) {
    out.meta.post_burn_in.proposed[k] = state.counters.proposed[k] - after_burn_in.proposed[k];
    out.meta.post_burn_in.accepted[k] = state.counters.accepted[k] - after_burn_in.accepted[k];
  }
  return out;
}

ChainState init_chain(const Dataset& data, const ChainConfig& config) {
  Sampler sampler(data, config);
  Rng rng(config.seed);
  return sampler.init(rng);
}

bool mh_step(ChainState& state, const Dataset& data, const ChainConfig& config, Rng& rng) {
  return Sampler(data, config).step(state, rng);
}

Ensemble run_chain(const Dataset& data, const ChainConfig& config) {
  return Sampler(data, config).run();
}

// ---------------------------------------------------------------------------

double batch_means_standard_error(const std::vector<double>& series, std::size_t batches) {
  const auto n = series.size();
  if (n < 2) return 0.0;
  if (n < 2 * batches) batches = n;
  const auto size = n / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * size);
    means.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(size), 0.0) /
                    static_cast<double>(size));
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double ss = 0.0;
  for (double v : means) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(means.size() - 1);
  return std::sqrt(var / static_cast<double>(means.size()));
}

double autocorrelation_standard_error(const std::vector<double>& series) {
  const auto n = series.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (series[i] - mean) * (series[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  // Sum of consecutive autocovariance pairs, truncated at the first non-positive
  // pair and forced to be non-increasing.
  double var = -autocov(0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    const double pair = autocov(k) + autocov(k + 1);
    if (pair <= 0.0) break;
    prev = std::min(prev, pair);
    var += 2.0 * prev;
  }
  return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
}

ChainDiagnostics chain_diagnostics(const Ensemble& ensemble) {
  if (ensemble.size() == 0) throw ValidationError("chain_diagnostics: empty ensemble");
  ChainDiagnostics d;
  d.burn_in = ensemble.meta.burn_in;
  d.post_burn_in = ensemble.meta.post_burn_in;
  MoveCounters all;
  for (std::size_t k = 0; k < kMoveKinds; ++k) {
    all.proposed[k] = d.burn_in.proposed[k] + d.post_burn_in.proposed[k];
    all.accepted[k] = d.burn_in.accepted[k] + d.post_burn_in.accepted[k];
    d.acceptance[k] = all.rate(static_cast<MoveKind>(k));
  }
  d.overall_acceptance = all.overall_rate();

  const auto& trace = ensemble.logliks;
  const auto n = trace.size();
  d.loglik_mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
  d.loglik_min = *std::min_element(trace.begin(), trace.end());
  d.loglik_max = *std::max_element(trace.begin(), trace.end());

  const std::size_t windows = std::min<std::size_t>(10, n);
  for (std::size_t w = 0; w < windows; ++w) {
    const auto lo = w * n / windows;
    const auto hi = (w + 1) * n / windows;
    const double mean = std::accumulate(trace.begin() + static_cast<std::ptrdiff_t>(lo),
                                        trace.begin() + static_cast<std::ptrdiff_t>(hi), 0.0) /
                        static_cast<double>(hi - lo);
    d.window_means.push_back(mean);
    d.max_window_drift = std::max(d.max_window_drift, std::abs(mean - d.loglik_mean));
  }

  if (n >= 2) {
    const std::vector<double> first(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(n / 2));
    const std::vector<double> second(trace.begin() + static_cast<std::ptrdiff_t>(n / 2), trace.end());
    d.first_half_mean = std::accumulate(first.begin(), first.end(), 0.0) / first.size();
    d.second_half_mean = std::accumulate(second.begin(), second.end(), 0.0) / second.size();
    const double se1 = autocorrelation_standard_error(first);
    const double se2 = autocorrelation_standard_error(second);
    d.half_diff_se = std::sqrt(se1 * se1 + se2 * se2);
    const double diff = d.second_half_mean - d.first_half_mean;
    d.drift_z = d.half_diff_se > 0.0 ? diff / d.half_diff_se : (diff == 0.0 ? 0.0 : INFINITY);
  } else {
    d.first_half_mean = d.second_half_mean = trace.front();
  }

  for (const auto& tree : ensemble.trees) ++d.leaf_histogram[tree.leaf_count()];
  return d;
}

std::string format_diagnostics(const ChainDiagnostics& d) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "acceptance (all steps):";
  for (std::size_t k = 0; k < kMoveKinds; ++k)
    out << ' ' << to_string(static_cast<MoveKind>(k)) << '=' << d.acceptance[k];
  out << " overall=" << d.overall_acceptance << '\n';
  out << "acceptance (post burn-in): overall=" << d.post_burn_in.overall_rate() << '\n';
  out.precision(3);
  out << "loglik trace: mean=" << d.loglik_mean << " min=" << d.loglik_min
      << " max=" << d.loglik_max << " max_window_drift=" << d.max_window_drift << '\n';
  out << "loglik halves: first=" << d.first_half_mean << " second=" << d.second_half_mean
      << " se=" << d.half_diff_se << " z=" << d.drift_z << '\n';
  out << "leaf-count histogram:";
  for (const auto& [leaves, count] : d.leaf_histogram) out << ' ' << leaves << ':' << count;
  out << '\n';
  return out.str();
}

}  // namespace bdt
