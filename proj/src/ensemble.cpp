#include "bdt/ensemble.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bdt/errors.hpp"

namespace bdt {

using ojson = nlohmann::ordered_json;

void Ensemble::validate() const {
  if (trees.empty()) throw ValidationError("ensemble: no trees");
  if (logliks.size() != trees.size())
    throw ValidationError("ensemble: " + std::to_string(logliks.size()) + " log-likelihoods for " +
                          std::to_string(trees.size()) + " trees");
  for (std::size_t i = 0; i < trees.size(); ++i)
    if (trees[i].max_variable() > meta.n_features)
      throw ValidationError("ensemble: tree " + std::to_string(i) + " uses a variable beyond " +
                            std::to_string(meta.n_features) + " features");
}

std::string ensemble_to_jsonl(const Ensemble& ensemble) {
  std::string out;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    out += serialize(ensemble.trees[i], ensemble.logliks[i]);
    out += '\n';
  }
  return out;
}

void write_ensemble(const Ensemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << ensemble_to_jsonl(ensemble);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

ojson counters_json(const MoveCounters& c) {
  ojson out;
  for (std::size_t k = 0; k < kMoveKinds; ++k) {
    const auto kind = static_cast<MoveKind>(k);
    out[to_string(kind)] = {{"proposed", c.proposed[k]},
                            {"accepted", c.accepted[k]},
                            {"rate", c.rate(kind)}};
  }
  out["overall_rate"] = c.overall_rate();
  return out;
}

MoveCounters counters_from(const ojson& j) {
  MoveCounters c;
  for (std::size_t k = 0; k < kMoveKinds; ++k) {
    const auto& item = j.at(to_string(static_cast<MoveKind>(k)));
    c.proposed[k] = item.at("proposed").get<std::size_t>();
    c.accepted[k] = item.at("accepted").get<std::size_t>();
  }
  return c;
}

}  // namespace

std::string meta_to_json_text(const EnsembleMeta& meta, std::optional<double> wall_clock_seconds) {
  const auto& c = meta.config;
  ojson doc;
  doc["config"] = {{"burn_in_steps", c.burn_in_steps},
                   {"collect_count", c.collect_count},
                   {"thin", c.thin},
                   {"min_leaf", c.min_leaf},
                   {"s_max", c.s_max},
                   {"dirichlet_alpha", c.dirichlet_alpha},
                   {"move_probs", c.move_probs}};
  doc["seed"] = c.seed;
  doc["effective_s_max"] = meta.s_max;
  doc["n_features"] = meta.n_features;
  doc["train_rows"] = meta.train_rows;
  doc["acceptance"] = {{"burn_in", counters_json(meta.burn_in)},
                       {"post_burn_in", counters_json(meta.post_burn_in)}};
  if (wall_clock_seconds) doc["wall_clock_seconds"] = *wall_clock_seconds;
  return doc.dump(2) + "\n";
}

EnsembleMeta meta_from_json_text(const std::string& text) {
  try {
    const auto doc = ojson::parse(text);
    EnsembleMeta meta;
    const auto& c = doc.at("config");
    meta.config.burn_in_steps = c.at("burn_in_steps").get<std::size_t>();
    meta.config.collect_count = c.at("collect_count").get<std::size_t>();
    meta.config.thin = c.at("thin").get<std::size_t>();
    meta.config.min_leaf = c.at("min_leaf").get<std::size_t>();
    meta.config.s_max = c.at("s_max").get<std::size_t>();
    meta.config.dirichlet_alpha = c.at("dirichlet_alpha").get<double>();
    meta.config.move_probs = c.at("move_probs").get<std::array<double, kMoveKinds>>();
    meta.config.seed = doc.at("seed").get<std::uint64_t>();
    meta.s_max = doc.at("effective_s_max").get<std::size_t>();
    meta.n_features = doc.at("n_features").get<std::size_t>();
    meta.train_rows = doc.at("train_rows").get<std::size_t>();
    meta.burn_in = counters_from(doc.at("acceptance").at("burn_in"));
    meta.post_burn_in = counters_from(doc.at("acceptance").at("post_burn_in"));
    meta.config.validate();
    return meta;
  } catch (const ojson::exception& e) {
    throw ValidationError(std::string("ensemble metadata: ") + e.what());
  }
}

Ensemble parse_ensemble(const std::string& text, const std::string& source) {
  Ensemble out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      auto parsed = deserialize(line);
      out.logliks.push_back(parsed.loglik.value_or(0.0));
      out.meta.n_features = std::max(out.meta.n_features, parsed.tree.max_variable());
      out.trees.push_back(std::move(parsed.tree));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.trees.empty()) throw ValidationError(source + ": ensemble file holds no trees");
  return out;
}

Ensemble read_ensemble(const std::filesystem::path& path,
                       const std::optional<std::filesystem::path>& meta_path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  auto ensemble = parse_ensemble(slurp(path), path.string());
  if (meta_path) {
    const auto inferred = ensemble.meta.n_features;
    ensemble.meta = meta_from_json_text(slurp(*meta_path));
    if (inferred > ensemble.meta.n_features)
      throw ValidationError(path.string() + ": trees use more features than the metadata lists");
  }
  ensemble.validate();
  return ensemble;
}

}  // namespace bdt
