#include "bdt/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "bdt/errors.hpp"
#include "bdt/report.hpp"
#include "bdt/sampler.hpp"

namespace bdt {

std::size_t ImportanceVector::argmin() const {
  return static_cast<std::size_t>(
      std::min_element(probability.begin(), probability.end()) - probability.begin());
}

std::size_t ImportanceVector::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(probability.begin(), probability.end()) - probability.begin());
}

std::size_t ImportanceVector::rank_from_bottom(std::size_t var) const {
  const double v = probability.at(var);
  std::size_t below = 0;
  for (std::size_t j = 0; j < probability.size(); ++j)
    if (probability[j] < v || (probability[j] == v && j < var)) ++below;
  return below;
}

ImportanceVector variable_importance(const Ensemble& ensemble, ImportanceMode mode) {
  if (ensemble.size() == 0) throw ValidationError("variable_importance: empty ensemble");
  std::vector<double> counts(ensemble.meta.n_features, 0.0);
  for (const auto& tree : ensemble.trees) {
    std::vector<bool> present(counts.size(), false);
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      const auto var = node.split().rule.variable;
      if (var >= counts.size())
        throw ValidationError("variable_importance: tree uses variable beyond ensemble arity");
      if (mode == ImportanceMode::split_share) {
        counts[var] += 1.0;
      } else {
        present[var] = true;
      }
    }
    if (mode == ImportanceMode::tree_share)
      for (std::size_t j = 0; j < counts.size(); ++j)
        if (present[j]) counts[j] += 1.0;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total == 0.0)
    throw ValidationError("variable_importance: ensemble holds only single-leaf trees");
  for (auto& c : counts) c /= total;
  return ImportanceVector{std::move(counts)};
}

ImportanceVector average_importance(const std::vector<ImportanceVector>& items) {
  if (items.empty()) throw ValidationError("average_importance: nothing to average");
  ImportanceVector out{std::vector<double>(items.front().probability.size(), 0.0)};
  for (const auto& item : items) {
    if (item.probability.size() != out.probability.size())
      throw ValidationError("average_importance: length mismatch");
    for (std::size_t j = 0; j < item.probability.size(); ++j)
      out.probability[j] += item.probability[j];
  }
  for (auto& p : out.probability) p /= static_cast<double>(items.size());
  return out;
}

std::string importance_to_csv(const ImportanceVector& importance, const Schema& schema) {
  std::ostringstream out;
  out.precision(10);
  out << "variable,name,probability\n";
  for (std::size_t j = 0; j < importance.probability.size(); ++j)
    out << j + 1 << ',' << (j < schema.size() ? schema.variable(j).name : "?") << ','
        << importance.probability[j] << '\n';
  return out.str();
}

std::string format_importance_chart(const ImportanceVector& importance, const Schema& schema) {
  constexpr int kBarWidth = 50;
  const double top = importance.probability.empty()
                         ? 1.0
                         : *std::max_element(importance.probability.begin(),
                                             importance.probability.end());
  std::size_t name_width = 0;
  for (const auto& v : schema.variables()) name_width = std::max(name_width, v.name.size());
  std::ostringstream out;
  out << "Posterior probabilities of variables used in the ensemble\n";
  for (std::size_t j = 0; j < importance.probability.size(); ++j) {
    const double p = importance.probability[j];
    const int len = top > 0 ? static_cast<int>(std::lround(kBarWidth * p / top)) : 0;
    std::string name = j < schema.size() ? schema.variable(j).name : "?";
    name.resize(name_width, ' ');
    char idx[8];
    std::snprintf(idx, sizeof(idx), "%2zu", j + 1);
    out << idx << ' ' << name << ' ' << format_fixed(p, 4) << ' ' << std::string(len, '#')
        << '\n';
  }
  return out.str();
}

SelectionResult filter_ensemble(const Ensemble& ensemble, std::size_t variable) {
  if (ensemble.size() == 0) throw ValidationError("filter_ensemble: empty ensemble");
  SelectionResult out;
  out.excluded_variable = variable;
  out.kept.meta = ensemble.meta;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (ensemble.trees[i].uses_variable(variable)) {
      ++out.omitted_count;
      continue;
    }
    out.kept.trees.push_back(ensemble.trees[i]);
    out.kept.logliks.push_back(ensemble.logliks[i]);
  }
  if (out.kept.trees.empty())
    throw ValidationError("filter_ensemble: every tree uses variable " +
                          std::to_string(variable + 1) + "; the selection would be empty");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index) {
  const auto s = static_cast<std::uint64_t>(stream);
  return splitmix64(splitmix64(master + s * 0x9E3779B97F4A7C15ULL) + index);
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
    workers.emplace_back([&] {
      for (auto i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<FoldRun> cross_validate(const Dataset& data, const FoldPlan& plan,
                                    const ChainConfig& config, SeedStream stream,
                                    std::size_t jobs) {
  if (plan.assignments.size() != data.rows())
    throw ValidationError("cross_validate: fold plan does not match dataset rows");
  std::vector<FoldRun> out(plan.k);
  parallel_for(plan.k, jobs, [&](std::size_t f) {
    const auto train_rows = plan.train_rows(f);
    const auto test_rows = plan.test_rows(f);
    ChainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, stream, f);
    auto ensemble = run_chain(data.subset(train_rows), fold_config);
    auto report = evaluate(ensemble, data.subset(test_rows));
    out[f] = FoldRun{std::move(ensemble), std::move(report)};
  });
  return out;
}

const char* to_string(Arm arm) {
  switch (arm) {
    case Arm::all: return "all";
    case Arm::dropped: return "dropped";
    case Arm::selected: return "selected";
    case Arm::noised: return "noised";
  }
  return "?";
}

std::vector<double> ComparisonReport::performance(Arm arm) const {
  std::vector<double> out;
  for (const auto& r : arms[static_cast<std::size_t>(arm)]) out.push_back(r.performance_pct);
  return out;
}

std::vector<double> ComparisonReport::entropy(Arm arm) const {
  std::vector<double> out;
  for (const auto& r : arms[static_cast<std::size_t>(arm)]) out.push_back(r.entropy_bits);
  return out;
}

std::vector<double> ComparisonReport::loglik(Arm arm) const {
  std::vector<double> out;
  for (const auto& r : arms[static_cast<std::size_t>(arm)]) out.push_back(r.max_train_loglik);
  return out;
}

ComparisonReport run_comparison(const Dataset& data, const ChainConfig& config,
                                const ComparisonOptions& options) {
  config.validate();
  if (options.weakest && *options.weakest >= data.cols())
    throw ValidationError("run_comparison: weakest variable index out of range");

  const auto master = config.seed;
  ComparisonReport report{make_folds(data, options.folds, derive_seed(master, SeedStream::folds, 0)),
                          data.schema(), master, 0, false, 0.0, {}, {}, {}, {}, {}};
  report.seed = master;
  report.noise_intensity = options.noise_intensity;
  const auto k = report.plan.k;
  auto arm_index = [](Arm a) { return static_cast<std::size_t>(a); };

  auto runs_all = cross_validate(data, report.plan, config, SeedStream::chain_all, options.jobs);
  std::vector<ImportanceVector> per_fold;
  for (auto& run : runs_all) {
    report.arms[arm_index(Arm::all)].push_back(run.report);
    report.ensemble_size.push_back(run.ensemble.size());
    report.acceptance[arm_index(Arm::all)].push_back(chain_diagnostics(run.ensemble).overall_acceptance);
    per_fold.push_back(variable_importance(run.ensemble));
  }
  report.importance = average_importance(per_fold);
  report.weakest_from_importance = !options.weakest.has_value();
  report.weakest = options.weakest.value_or(report.importance.argmin());

  for (std::size_t f = 0; f < k; ++f) {
    auto selection = filter_ensemble(runs_all[f].ensemble, report.weakest);
    report.omitted.push_back(selection.omitted_count);
    report.arms[arm_index(Arm::selected)].push_back(
        evaluate(selection.kept, data.subset(report.plan.test_rows(f))));
    report.acceptance[arm_index(Arm::selected)].push_back(
        report.acceptance[arm_index(Arm::all)][f]);
  }
  runs_all.clear();

  const auto dropped = drop_variable(data, report.weakest);
  for (auto& run : cross_validate(dropped, report.plan, config, SeedStream::chain_dropped,
                                  options.jobs)) {
    report.arms[arm_index(Arm::dropped)].push_back(run.report);
    report.acceptance[arm_index(Arm::dropped)].push_back(
        chain_diagnostics(run.ensemble).overall_acceptance);
  }

  const auto noised =
      add_noise(dropped, options.noise_intensity, derive_seed(master, SeedStream::noise, 0));
  for (auto& run : cross_validate(noised, report.plan, config, SeedStream::chain_noised,
                                  options.jobs)) {
    report.arms[arm_index(Arm::noised)].push_back(run.report);
    report.acceptance[arm_index(Arm::noised)].push_back(
        chain_diagnostics(run.ensemble).overall_acceptance);
  }
  return report;
}

std::string fold_plan_to_csv(const FoldPlan& plan) {
  std::ostringstream out;
  out << "row,fold\n";
  for (std::size_t i = 0; i < plan.assignments.size(); ++i)
    out << i + 1 << ',' << plan.assignments[i] + 1 << '\n';
  return out.str();
}

std::string comparison_to_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "# " << kLoglikNote << "\n";
  out << "# noise added to the full dataset before the fold split\n";
  out << "arm,fold,test_rows,performance_pct,entropy_bits,entropy_per_row,max_train_loglik,"
         "omitted,acceptance\n";
  for (std::size_t a = 0; a < kArms; ++a) {
    for (std::size_t f = 0; f < report.arms[a].size(); ++f) {
      const auto& r = report.arms[a][f];
      out << to_string(static_cast<Arm>(a)) << ',' << f + 1 << ',' << r.per_point.size() << ','
          << r.performance_pct << ',' << r.entropy_bits << ',' << r.entropy_per_row << ','
          << r.max_train_loglik << ','
          << (a == static_cast<std::size_t>(Arm::selected) ? report.omitted[f] : 0) << ','
          << report.acceptance[a][f] << '\n';
    }
  }
  return out.str();
}

std::string format_selection_table(const std::vector<EvalReport>& original,
                                   const std::vector<EvalReport>& selected,
                                   const std::vector<std::size_t>& omitted) {
  std::vector<double> p0, e0, om, p1, e1;
  for (std::size_t f = 0; f < original.size(); ++f) {
    p0.push_back(original[f].performance_pct);
    e0.push_back(original[f].entropy_bits);
    om.push_back(static_cast<double>(omitted[f]));
    p1.push_back(selected[f].performance_pct);
    e1.push_back(selected[f].entropy_bits);
  }
  return format_fold_table("Original vs selected ensemble",
                           {"Orig perf, %", "Orig entropy", "Trees omitted", "Sel perf, %",
                            "Sel entropy"},
                           {p0, e0, om, p1, e1}, {2, 2, 0, 2, 2});
}

std::string format_comparison(const ComparisonReport& report) {
  const auto& schema = report.schema;
  const auto w = report.weakest;
  const std::string m = std::to_string(schema.size());
  const std::string wname = std::to_string(w + 1);
  std::ostringstream out;
  out << "Comparison run: seed " << report.seed << ", " << report.plan.k << "-fold stratified CV\n";
  out << "Weakest variable: " << w + 1 << " (" << schema.variable(w).name << ")"
      << (report.weakest_from_importance ? ", argmin of arm (a) importance" : ", given") << "\n";
  out << "Noise intensity " << report.noise_intensity
      << ", added to the full dataset before the fold split\n";
  out << kLoglikNote << "\n\n";

  out << format_importance_chart(report.importance, schema) << '\n';

  auto all = static_cast<std::size_t>(Arm::all);
  auto dropped = static_cast<std::size_t>(Arm::dropped);
  auto selected = static_cast<std::size_t>(Arm::selected);
  auto noised = static_cast<std::size_t>(Arm::noised);

  out << format_fold_table(
             "Maximal loglikelihoods, performances and entropies: " + m + " vs " + m + "\\" + wname +
                 " variables",
             {"Loglik L" + m, "Loglik L" + m + "\\" + wname, "Perf " + m + ", %",
              "Perf " + m + "\\" + wname + ", %", "Entropy " + m, "Entropy " + m + "\\" + wname},
             {report.loglik(Arm::all), report.loglik(Arm::dropped), report.performance(Arm::all),
              report.performance(Arm::dropped), report.entropy(Arm::all),
              report.entropy(Arm::dropped)},
             {2, 2, 2, 2, 2, 2})
      << '\n';
  out << format_selection_table(report.arms[all], report.arms[selected], report.omitted) << '\n';
  out << format_fold_table(
             "Performance and entropy: " + m + " variables vs " + m + "\\" + wname +
                 " variables + noise",
             {"Perf " + m + ", %", "Entropy " + m, "Perf +noise, %", "Entropy +noise"},
             {report.performance(Arm::all), report.entropy(Arm::all),
              report.performance(Arm::noised), report.entropy(Arm::noised)},
             {2, 2, 2, 2})
      << '\n';

  auto deltas = [&](std::size_t arm, bool perf) {
    std::vector<double> d;
    for (std::size_t f = 0; f < report.arms[all].size(); ++f) {
      const auto& a = report.arms[all][f];
      const auto& b = report.arms[arm][f];
      d.push_back(perf ? b.performance_pct - a.performance_pct : b.entropy_bits - a.entropy_bits);
    }
    return d;
  };
  out << format_fold_table("Paired deltas against arm (a)",
                           {"dPerf (b)", "dEntropy (b)", "dPerf (c)", "dEntropy (c)", "dPerf (d)",
                            "dEntropy (d)"},
                           {deltas(dropped, true), deltas(dropped, false), deltas(selected, true),
                            deltas(selected, false), deltas(noised, true), deltas(noised, false)},
                           {2, 2, 2, 2, 2, 2});
  return out.str();
}

}  // namespace bdt
