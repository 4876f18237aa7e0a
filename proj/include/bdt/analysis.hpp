#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bdt/bma.hpp"
#include "bdt/chain_config.hpp"
#include "bdt/dataset.hpp"
#include "bdt/ensemble.hpp"

namespace bdt {

enum class ImportanceMode {
  split_share,  // share of all split nodes that test the variable
  tree_share,   // trees containing the variable, normalised to sum to one
};

struct ImportanceVector {
  std::vector<double> probability;

  std::size_t argmin() const;
  std::size_t argmax() const;
  // 0-based rank of `var` from the bottom (0 = least important).
  std::size_t rank_from_bottom(std::size_t var) const;
};

ImportanceVector variable_importance(const Ensemble& ensemble,
                                     ImportanceMode mode = ImportanceMode::split_share);
ImportanceVector average_importance(const std::vector<ImportanceVector>& items);

std::string importance_to_csv(const ImportanceVector& importance, const Schema& schema);
// Horizontal bar chart, one line per variable.
std::string format_importance_chart(const ImportanceVector& importance, const Schema& schema);

struct SelectionResult {
  Ensemble kept;
  std::size_t omitted_count = 0;
  std::size_t excluded_variable = 0;
};

// Keeps, in order, the trees with no split on `variable`.
SelectionResult filter_ensemble(const Ensemble& ensemble, std::size_t variable);

// Seeds are derived from one master seed: derive_seed(master, stream, index)
// = splitmix64(splitmix64(master + stream * 0x9E3779B97F4A7C15) + index).
enum class SeedStream : std::uint64_t {
  folds = 1,
  noise = 2,
  chain_all = 3,
  chain_dropped = 4,
  chain_noised = 5,
  repeat = 6,
};
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index);

// Runs body(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

struct FoldRun {
  Ensemble ensemble;
  EvalReport report;
};

// Trains one chain per fold on the other folds and evaluates on the held-out
// fold. Fold f uses seed derive_seed(config.seed, stream, f).
std::vector<FoldRun> cross_validate(const Dataset& data, const FoldPlan& plan,
                                    const ChainConfig& config, SeedStream stream,
                                    std::size_t jobs = 1);

enum class Arm : std::size_t { all = 0, dropped = 1, selected = 2, noised = 3 };
inline constexpr std::size_t kArms = 4;
const char* to_string(Arm arm);

struct ComparisonOptions {
  std::size_t folds = 5;
  std::optional<std::size_t> weakest;  // argmin of arm (a) importance when empty
  double noise_intensity = 0.01;
  std::size_t jobs = 1;
};

struct ComparisonReport {
  FoldPlan plan;
  Schema schema;  // of the full data
  std::uint64_t seed = 0;
  std::size_t weakest = 0;
  bool weakest_from_importance = false;
  double noise_intensity = 0.0;
  ImportanceVector importance;  // arm (a), averaged over folds
  std::array<std::vector<EvalReport>, kArms> arms;
  std::vector<std::size_t> omitted;        // per fold, arm (c)
  std::vector<std::size_t> ensemble_size;  // per fold, arm (a)
  std::array<std::vector<double>, kArms> acceptance;  // overall acceptance per fold

  std::vector<double> performance(Arm arm) const;
  std::vector<double> entropy(Arm arm) const;
  std::vector<double> loglik(Arm arm) const;
};

// Arms share one FoldPlan: (a) all variables, (b) `weakest` dropped, (c) arm (a)
// ensembles filtered by `weakest`, (d) `weakest` dropped and noise added to the
// full data before splitting. config.seed is the master seed.
ComparisonReport run_comparison(const Dataset& data, const ChainConfig& config,
                                const ComparisonOptions& options);

std::string comparison_to_csv(const ComparisonReport& report);
std::string format_comparison(const ComparisonReport& report);
std::string fold_plan_to_csv(const FoldPlan& plan);

// Table of original vs selected ensembles, one row per evaluation.
std::string format_selection_table(const std::vector<EvalReport>& original,
                                   const std::vector<EvalReport>& selected,
                                   const std::vector<std::size_t>& omitted);

}  // namespace bdt
