#include "bdt/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bdt/analysis.hpp"
#include "bdt/bma.hpp"
#include "bdt/dataset.hpp"
#include "bdt/ensemble.hpp"
#include "bdt/errors.hpp"
#include "bdt/manifest.hpp"
#include "bdt/sampler.hpp"
#include "bdt/version.hpp"

namespace bdt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct ChainFlags {
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> collect;
  std::optional<std::size_t> thin;
  std::optional<std::size_t> min_leaf;
  std::optional<std::size_t> s_max;
  std::optional<double> alpha;
  bool paper_scale = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--burn-in", burn_in, "Burn-in MH steps");
    cmd->add_option("--collect", collect, "Trees collected after burn-in");
    cmd->add_option("--thin", thin, "Steps between collected trees");
    cmd->add_option("--min-leaf", min_leaf, "Minimal training rows per leaf");
    cmd->add_option("--s-max", s_max, "Maximal split count (default floor(n/min_leaf)-1)");
    cmd->add_option("--alpha", alpha, "Dirichlet pseudo-count per class");
  }

  ChainConfig resolve(bool paper_default, std::uint64_t seed) const {
    auto c = (paper_default || paper_scale) ? ChainConfig::paper_scale() : ChainConfig::desk_scale();
    if (burn_in) c.burn_in_steps = *burn_in;
    if (collect) c.collect_count = *collect;
    if (thin) c.thin = *thin;
    if (min_leaf) c.min_leaf = *min_leaf;
    if (s_max) c.s_max = *s_max;
    if (alpha) c.dirichlet_alpha = *alpha;
    c.seed = seed;
    c.validate();
    return c;
  }
};

ojson config_json(const ChainConfig& c) {
  return {{"burn_in_steps", c.burn_in_steps}, {"collect_count", c.collect_count},
          {"thin", c.thin},                   {"min_leaf", c.min_leaf},
          {"s_max", c.s_max},                 {"dirichlet_alpha", c.dirichlet_alpha},
          {"move_probs", c.move_probs},       {"seed", c.seed}};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

struct Inputs {
  std::string data;
  std::string schema;
};

Schema resolve_schema(const std::string& path, RunManifest* manifest) {
  if (path.empty()) return trauma_schema();
  if (manifest) manifest->add_input(path);
  return load_schema(path);
}

Dataset resolve_data(const Inputs& in, RunManifest& manifest) {
  const auto schema = resolve_schema(in.schema, &manifest);
  if (!fs::exists(in.data)) throw IoError("data file '" + in.data + "' does not exist");
  manifest.add_input(in.data);
  return load_csv(in.data, schema);
}

std::size_t to_index(std::size_t one_based, std::size_t m, const char* flag) {
  if (one_based < 1 || one_based > m)
    throw ValidationError(std::string(flag) + " must lie in 1.." + std::to_string(m));
  return one_based - 1;
}

fs::path sidecar_for(const fs::path& ensemble_path) {
  auto p = ensemble_path;
  if (p.extension() == ".jsonl") p.replace_extension();
  p += ".meta.json";
  return p;
}

Ensemble load_ensemble_for(const std::string& path, const std::string& meta, std::size_t features,
                           RunManifest& manifest) {
  if (!fs::exists(path)) throw IoError("ensemble file '" + path + "' does not exist");
  manifest.add_input(path);
  std::optional<fs::path> meta_path;
  if (!meta.empty()) {
    meta_path = meta;
  } else if (fs::exists(sidecar_for(path))) {
    meta_path = sidecar_for(path);
  }
  if (meta_path) manifest.add_input(*meta_path);
  auto ensemble = read_ensemble(path, meta_path);
  if (!meta_path && features) {
    ensemble.meta.n_features = features;
    ensemble.validate();
  }
  return ensemble;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian averaging over MCMC-sampled decision trees"};
  app.name("bdt");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::size_t jobs = 1;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with the trauma layout");
  std::size_t rows = 316;
  std::vector<std::size_t> irrelevant{9};
  std::uint64_t synth_seed = 7;
  synth->add_option("--rows", rows, "Rows to generate (>= 20)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--irrelevant", irrelevant,
                    "1-based variables generated independently of the label")
      ->capture_default_str();
  synth->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  // train
  Inputs train_in;
  ChainFlags train_flags;
  auto* train = app.add_subcommand("train", "Run one chain and write the sampled ensemble");
  train->add_option("--data", train_in.data, "Training CSV")->required();
  train->add_option("--schema", train_in.schema, "Schema JSON (default: trauma layout)");
  train->add_option("--seed", seed, "Chain seed")->capture_default_str();
  train->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  train->add_flag("--paper-scale", train_flags.paper_scale, "Paper-scale chain (the default here)");
  train_flags.attach(train);

  // eval
  Inputs eval_in;
  ChainFlags eval_flags;
  std::size_t folds = 5;
  auto* eval = app.add_subcommand("eval", "k-fold cross-validation of the averaged ensemble");
  eval->add_option("--data", eval_in.data, "Dataset CSV")->required();
  eval->add_option("--schema", eval_in.schema, "Schema JSON (default: trauma layout)");
  eval->add_option("--seed", seed, "Master seed")->capture_default_str();
  eval->add_option("--folds", folds, "Fold count")->capture_default_str();
  eval->add_option("--jobs", jobs, "Parallel folds")->capture_default_str();
  eval->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  eval->add_flag("--paper-scale", eval_flags.paper_scale, "Burn-in 200000, collect 10000");
  eval_flags.attach(eval);

  // importance
  std::string ensemble_path, meta_path, importance_schema;
  bool by_tree = false;
  auto* importance = app.add_subcommand("importance", "Posterior variable usage of an ensemble");
  importance->add_option("--ensemble", ensemble_path, "Ensemble JSON-lines file")->required();
  importance->add_option("--meta", meta_path, "Ensemble metadata (default: sidecar)");
  importance->add_option("--schema", importance_schema, "Schema JSON for variable names");
  importance->add_flag("--by-tree", by_tree, "Share of trees instead of share of split nodes");
  importance->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  // filter
  std::string filter_data, filter_schema;
  std::size_t variable = 0;
  auto* filter = app.add_subcommand("filter", "Drop trees that split on a variable");
  filter->add_option("--ensemble", ensemble_path, "Ensemble JSON-lines file")->required();
  filter->add_option("--meta", meta_path, "Ensemble metadata (default: sidecar)");
  filter->add_option("--variable", variable, "1-based variable to exclude")->required();
  filter->add_option("--data", filter_data, "Evaluation CSV for before/after reports");
  filter->add_option("--schema", filter_schema, "Schema JSON (default: trauma layout)");
  filter->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  // compare
  Inputs compare_in;
  ChainFlags compare_flags;
  std::optional<std::size_t> weakest;
  double noise = 0.01;
  auto* compare = app.add_subcommand("compare", "All / dropped / selected / noised arms under one fold plan");
  compare->add_option("--data", compare_in.data, "Dataset CSV")->required();
  compare->add_option("--schema", compare_in.schema, "Schema JSON (default: trauma layout)");
  compare->add_option("--seed", seed, "Master seed")->capture_default_str();
  compare->add_option("--folds", folds, "Fold count")->capture_default_str();
  compare->add_option("--variable", weakest, "1-based weakest variable (default: least important)");
  compare->add_option("--noise", noise, "Noise intensity")->capture_default_str();
  compare->add_option("--jobs", jobs, "Parallel folds")->capture_default_str();
  compare->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  compare->add_flag("--paper-scale", compare_flags.paper_scale, "Burn-in 200000, collect 10000");
  compare_flags.attach(compare);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << std::string(kVersion) << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  const fs::path dir(out_dir);
  try {
    if (synth->parsed()) {
      std::set<std::size_t> irr;
      for (auto v : irrelevant) irr.insert(to_index(v, 16, "--irrelevant"));
      RunManifest manifest("synth", args, synth_seed);
      manifest.config() = {{"rows", rows}, {"seed", synth_seed}, {"irrelevant", irrelevant}};
      const auto data = synth_trauma(rows, synth_seed, irr);
      ensure_dir(dir);
      save_csv(data, dir / "data.csv");
      save_schema(data.schema(), dir / "schema.json");
      write_file(dir / "provenance.txt", data.provenance() + "\n");
      for (const char* name : {"data.csv", "schema.json", "provenance.txt"})
        manifest.add_artifact(dir, name);
      manifest.write(dir / "manifest.json");
      out << "wrote " << data.rows() << " rows (" << data.class_count(1) << " died) to "
          << (dir / "data.csv").string() << '\n';
      return kExitOk;
    }

    if (train->parsed()) {
      RunManifest manifest("train", args, seed);
      const auto data = resolve_data(train_in, manifest);
      const auto config = train_flags.resolve(true, seed);
      manifest.config() = config_json(config);
      const auto start = std::chrono::steady_clock::now();
      const auto ensemble = run_chain(data, config);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      ensure_dir(dir);
      write_ensemble(ensemble, dir / "ensemble.jsonl");
      write_file(dir / "ensemble.meta.json", meta_to_json_text(ensemble.meta, elapsed.count()));
      const auto diag = format_diagnostics(chain_diagnostics(ensemble));
      write_file(dir / "diagnostics.txt", diag);
      for (const char* name : {"ensemble.jsonl", "ensemble.meta.json", "diagnostics.txt"})
        manifest.add_artifact(dir, name);
      manifest.write(dir / "manifest.json");
      out << "burn_in=" << config.burn_in_steps << " collect=" << config.collect_count
          << " thin=" << config.thin << " min_leaf=" << config.min_leaf
          << " s_max=" << ensemble.meta.s_max << '\n'
          << diag;
      return kExitOk;
    }

    if (eval->parsed()) {
      RunManifest manifest("eval", args, seed);
      const auto data = resolve_data(eval_in, manifest);
      const auto config = eval_flags.resolve(false, seed);
      manifest.config() = config_json(config);
      manifest.config()["folds"] = folds;
      const auto plan = make_folds(data, folds, derive_seed(seed, SeedStream::folds, 0));
      const auto runs = cross_validate(data, plan, config, SeedStream::chain_all, jobs);
      std::vector<EvalReport> reports;
      for (const auto& r : runs) reports.push_back(r.report);
      const auto table = format_eval_table(
          reports, "Cross-validated ensemble (" + std::to_string(folds) + " folds, " +
                       std::to_string(data.cols()) + " variables)");
      ensure_dir(dir);
      write_file(dir / "eval.csv", eval_reports_to_csv(reports));
      write_file(dir / "eval.txt", table);
      write_file(dir / "folds.csv", fold_plan_to_csv(plan));
      for (const char* name : {"eval.csv", "eval.txt", "folds.csv"}) manifest.add_artifact(dir, name);
      manifest.write(dir / "manifest.json");
      out << table;
      return kExitOk;
    }

    if (importance->parsed()) {
      RunManifest manifest("importance", args, 0);
      const auto schema = resolve_schema(importance_schema, &manifest);
      const auto ensemble = load_ensemble_for(ensemble_path, meta_path, schema.size(), manifest);
      if (ensemble.meta.n_features != schema.size())
        throw ValidationError("ensemble has " + std::to_string(ensemble.meta.n_features) +
                              " features but the schema lists " + std::to_string(schema.size()));
      const auto imp = variable_importance(
          ensemble, by_tree ? ImportanceMode::tree_share : ImportanceMode::split_share);
      manifest.config() = {{"mode", by_tree ? "tree_share" : "split_share"}};
      const auto chart = format_importance_chart(imp, schema);
      ensure_dir(dir);
      write_file(dir / "importance.csv", importance_to_csv(imp, schema));
      write_file(dir / "importance.txt", chart);
      for (const char* name : {"importance.csv", "importance.txt"}) manifest.add_artifact(dir, name);
      manifest.write(dir / "manifest.json");
      out << chart;
      return kExitOk;
    }

    if (filter->parsed()) {
      RunManifest manifest("filter", args, 0);
      const auto schema = resolve_schema(filter_schema, &manifest);
      const auto ensemble = load_ensemble_for(ensemble_path, meta_path, schema.size(), manifest);
      const auto var = to_index(variable, ensemble.meta.n_features, "--variable");
      const auto selection = filter_ensemble(ensemble, var);
      manifest.config() = {{"variable", variable}};
      ensure_dir(dir);
      write_ensemble(selection.kept, dir / "selected.jsonl");
      write_file(dir / "selected.meta.json", meta_to_json_text(selection.kept.meta));
      ojson summary = {{"excluded_variable", variable},
                       {"original_size", ensemble.size()},
                       {"kept_size", selection.kept.size()},
                       {"omitted_count", selection.omitted_count}};
      std::string table;
      if (!filter_data.empty()) {
        if (!fs::exists(filter_data)) throw IoError("data file '" + filter_data + "' does not exist");
        manifest.add_input(filter_data);
        const auto data = load_csv(filter_data, schema);
        const auto before = evaluate(ensemble, data);
        const auto after = evaluate(selection.kept, data);
        summary["before"] = {{"performance_pct", before.performance_pct},
                             {"entropy_bits", before.entropy_bits}};
        summary["after"] = {{"performance_pct", after.performance_pct},
                            {"entropy_bits", after.entropy_bits}};
        table = format_selection_table({before}, {after}, {selection.omitted_count});
        write_file(dir / "selection.txt", table);
      }
      write_file(dir / "selection.json", summary.dump(2) + "\n");
      for (const char* name : {"selected.jsonl", "selected.meta.json", "selection.json"})
        manifest.add_artifact(dir, name);
      if (!table.empty()) manifest.add_artifact(dir, "selection.txt");
      manifest.write(dir / "manifest.json");
      out << "variable " << variable << ": omitted " << selection.omitted_count << " of "
          << ensemble.size() << " trees\n"
          << table;
      return kExitOk;
    }

    if (compare->parsed()) {
      RunManifest manifest("compare", args, seed);
      const auto data = resolve_data(compare_in, manifest);
      const auto config = compare_flags.resolve(false, seed);
      ComparisonOptions options;
      options.folds = folds;
      options.noise_intensity = noise;
      options.jobs = jobs;
      if (weakest) options.weakest = to_index(*weakest, data.cols(), "--variable");
      manifest.config() = config_json(config);
      manifest.config()["folds"] = folds;
      manifest.config()["noise"] = noise;
      manifest.config()["noise_order"] = "before fold split";
      const auto report = run_comparison(data, config, options);
      const auto text = format_comparison(report);
      ensure_dir(dir);
      write_file(dir / "comparison.csv", comparison_to_csv(report));
      write_file(dir / "comparison.txt", text);
      write_file(dir / "folds.csv", fold_plan_to_csv(report.plan));
      write_file(dir / "importance.csv", importance_to_csv(report.importance, data.schema()));
      for (const char* name : {"comparison.csv", "comparison.txt", "folds.csv", "importance.csv"})
        manifest.add_artifact(dir, name);
      manifest.write(dir / "manifest.json");
      out << text;
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace bdt
