#include "bdt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "bdt/errors.hpp"

namespace bdt {

using nlohmann::json;

bool VariableSpec::admits(double value) const {
  if (!is_categorical()) return std::isfinite(value);
  if (value != std::floor(value)) return false;
  return std::binary_search(levels.begin(), levels.end(), static_cast<int>(value));
}

Schema::Schema(std::vector<VariableSpec> variables, std::string outcome)
    : variables_(std::move(variables)), outcome_(std::move(outcome)) {
  if (variables_.empty()) throw ValidationError("schema: at least one variable is required");
  if (outcome_.empty()) throw ValidationError("schema: outcome name is empty");
  std::unordered_set<std::string> seen;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw ValidationError("schema: variable with empty name");
    if (!seen.insert(v.name).second)
      throw ValidationError("schema: duplicate variable name '" + v.name + "'");
    if (v.is_categorical()) {
      if (v.levels.empty())
        throw ValidationError("schema: categorical variable '" + v.name + "' has no levels");
      for (std::size_t i = 1; i < v.levels.size(); ++i)
        if (v.levels[i] <= v.levels[i - 1])
          throw ValidationError("schema: levels of '" + v.name +
                                "' must be distinct and ascending");
    } else if (!v.levels.empty()) {
      throw ValidationError("schema: continuous variable '" + v.name + "' lists levels");
    }
  }
  if (seen.count(outcome_))
    throw ValidationError("schema: outcome '" + outcome_ + "' is also a feature name");
}

std::size_t Schema::find(const std::string& name) const {
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].name == name) return j;
  return variables_.size();
}

Schema schema_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("schema: malformed JSON: ") + e.what());
  }
  try {
    std::vector<VariableSpec> vars;
    for (const auto& item : doc.at("variables")) {
      VariableSpec spec;
      spec.name = item.at("name").get<std::string>();
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "continuous") {
        spec.kind = VariableKind::continuous;
      } else if (kind == "categorical") {
        spec.kind = VariableKind::categorical;
      } else {
        throw ValidationError("schema: variable '" + spec.name + "' has unknown kind '" + kind +
                              "'");
      }
      if (item.contains("levels") && !item.at("levels").is_null())
        spec.levels = item.at("levels").get<std::vector<int>>();
      vars.push_back(std::move(spec));
    }
    return Schema(std::move(vars), doc.at("outcome").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema: ") + e.what());
  }
}

std::string schema_to_json_text(const Schema& schema) {
  json vars = json::array();
  for (const auto& v : schema.variables()) {
    json item = {{"name", v.name}, {"kind", v.is_categorical() ? "categorical" : "continuous"}};
    if (v.is_categorical()) item["levels"] = v.levels;
    vars.push_back(std::move(item));
  }
  json doc = {{"variables", std::move(vars)}, {"outcome", schema.outcome()}};
  return doc.dump(2) + "\n";
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

Schema load_schema(const std::filesystem::path& path) {
  return schema_from_json_text(read_text(path));
}

void save_schema(const Schema& schema, const std::filesystem::path& path) {
  write_text(path, schema_to_json_text(schema));
}

Schema trauma_schema() {
  auto cat = [](std::string name, int max_level) {
    VariableSpec v{std::move(name), VariableKind::categorical, {}};
    for (int l = 0; l <= max_level; ++l) v.levels.push_back(l);
    return v;
  };
  auto cont = [](std::string name) {
    return VariableSpec{std::move(name), VariableKind::continuous, {}};
  };
  return Schema(
      {
          cont("Age"),
          cat("Gender", 1),
          cat("InjuryType", 1),
          cat("HeadInjury", 6),
          cat("FacialInjury", 4),
          cat("ChestInjury", 6),
          cat("AbdominalInjury", 5),
          cat("LimbsInjury", 5),
          cat("ExternalInjury", 3),
          cont("RespirationRate"),
          cont("SystolicBP"),
          cat("GCSEye", 4),
          cat("GCSMotor", 6),
          cat("GCSVerbal", 5),
          cont("Oximetry"),
          cont("HeartRate"),
      },
      "Died");
}

// ---------------------------------------------------------------------------

Dataset::Dataset(Schema schema, std::vector<double> features, std::vector<int> labels,
                 std::string provenance)
    : schema_(std::move(schema)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)) {
  if (labels_.empty()) throw ValidationError("dataset: at least one row is required");
  if (features_.size() != labels_.size() * schema_.size())
    throw ValidationError("dataset: feature matrix does not match rows x variables");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0 && labels_[i] != 1)
      throw ValidationError("dataset: row " + std::to_string(i + 1) + ": label " +
                            std::to_string(labels_[i]) + " is not 0 or 1");
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (!schema_.variable(j).admits(at(i, j)))
        throw ValidationError("dataset: row " + std::to_string(i + 1) + ", column " +
                              std::to_string(j + 1) + " (" + schema_.variable(j).name +
                              "): value outside declared levels");
    }
  }
}

std::size_t Dataset::class_count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  std::vector<double> feats;
  std::vector<int> labs;
  feats.reserve(row_indices.size() * cols());
  labs.reserve(row_indices.size());
  for (auto i : row_indices) {
    if (i >= rows()) throw ValidationError("dataset: subset row index out of range");
    auto r = row(i);
    feats.insert(feats.end(), r.begin(), r.end());
    labs.push_back(labels_[i]);
  }
  return Dataset(schema_, std::move(feats), std::move(labs), provenance_ + " [subset]");
}

Dataset Dataset::with_column(std::size_t var, std::span<const double> values) const {
  if (var >= cols() || values.size() != rows())
    throw ValidationError("dataset: replacement column has the wrong shape");
  auto feats = features_;
  for (std::size_t i = 0; i < rows(); ++i) feats[i * cols() + var] = values[i];
  return Dataset(schema_, std::move(feats), labels_, provenance_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_csv(const std::string& text, const Schema& schema, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](std::size_t row, std::size_t col, const std::string& what) -> ValidationError {
    std::ostringstream msg;
    msg << source << ": row " << row;
    if (col) msg << ", column " << col;
    msg << ": " << what;
    return ValidationError(msg.str());
  };

  if (!std::getline(in, line)) throw ValidationError(source + ": empty file (no header row)");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_fields(line);
  const std::size_t m = schema.size();
  if (header.size() != m + 1)
    throw fail(1, 0,
               "header has " + std::to_string(header.size()) + " columns, expected " +
                   std::to_string(m + 1));

  // Outcome column may sit anywhere; features must follow schema order.
  std::size_t outcome_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (trim(header[c]) == schema.outcome()) outcome_col = c;
  if (outcome_col == header.size())
    throw fail(1, 0, "header lacks outcome column '" + schema.outcome() + "'");
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != outcome_col) feature_cols.push_back(c);
  for (std::size_t j = 0; j < m; ++j) {
    const auto got = trim(header[feature_cols[j]]);
    if (got != schema.variable(j).name)
      throw fail(1, feature_cols[j] + 1,
                 "header name '" + std::string(got) + "' does not match schema variable '" +
                     schema.variable(j).name + "'");
  }

  std::vector<double> features;
  std::vector<int> labels;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw fail(data_row, 0,
                 "has " + std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(header.size()));
    for (std::size_t j = 0; j < m; ++j) {
      const auto col = feature_cols[j];
      const auto cell = trim(fields[col]);
      if (cell.empty()) throw fail(data_row, col + 1, "missing value");
      double v = 0;
      if (!parse_number(cell, v))
        throw fail(data_row, col + 1, "non-numeric value '" + std::string(cell) + "'");
      if (!schema.variable(j).admits(v))
        throw fail(data_row, col + 1,
                   "value " + std::string(cell) + " is not a level of '" +
                       schema.variable(j).name + "'");
      features.push_back(v);
    }
    const auto cell = trim(fields[outcome_col]);
    double y = 0;
    if (cell.empty()) throw fail(data_row, outcome_col + 1, "missing label");
    if (!parse_number(cell, y) || (y != 0.0 && y != 1.0))
      throw fail(data_row, outcome_col + 1, "label '" + std::string(cell) + "' is not 0 or 1");
    labels.push_back(static_cast<int>(y));
  }
  if (labels.empty()) throw ValidationError(source + ": no data rows");
  return Dataset(schema, std::move(features), std::move(labels), source);
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  return parse_csv(read_text(path), schema, path.string());
}

std::string to_csv(const Dataset& data) {
  std::string out;
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) out += schema.variable(j).name + ",";
  out += schema.outcome() + "\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (double v : data.row(i)) {
      out += format_number(v);
      out += ',';
    }
    out += std::to_string(data.label(i));
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  write_text(path, to_csv(data));
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldPlan::test_rows(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_rows(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

std::size_t FoldPlan::fold_size(std::size_t fold) const {
  return static_cast<std::size_t>(std::count(assignments.begin(), assignments.end(), fold));
}

FoldPlan make_folds(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("make_folds: k must be at least 2");
  const auto smallest = std::min(data.class_count(0), data.class_count(1));
  if (smallest < k)
    throw ValidationError("make_folds: k=" + std::to_string(k) +
                          " exceeds the smallest class count " + std::to_string(smallest));

  std::mt19937_64 rng(seed);
  FoldPlan plan{k, std::vector<std::size_t>(data.rows(), 0)};
  std::size_t next = 0;
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.rows(); ++i)
      if (data.label(i) == label) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) {
      plan.assignments[i] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Transformations

Dataset drop_variable(const Dataset& data, std::size_t var_index) {
  const auto m = data.cols();
  if (var_index >= m)
    throw ValidationError("drop_variable: index " + std::to_string(var_index) +
                          " out of range for " + std::to_string(m) + " variables");
  if (m == 1) throw ValidationError("drop_variable: no features would remain");
  auto vars = data.schema().variables();
  const auto dropped = vars[var_index].name;
  vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(var_index));
  std::vector<double> feats;
  feats.reserve(data.rows() * (m - 1));
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (j != var_index) feats.push_back(data.at(i, j));
  return Dataset(Schema(std::move(vars), data.schema().outcome()), std::move(feats),
                 data.labels(), data.provenance() + " [drop " + dropped + "]");
}

Dataset add_noise(const Dataset& data, double intensity, std::uint64_t seed) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity))
    throw ValidationError("add_noise: intensity must be a nonnegative finite number");
  const auto n = data.rows();
  const auto m = data.cols();
  std::vector<double> range(m, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    double lo = data.at(0, j), hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, data.at(i, j));
      hi = std::max(hi, data.at(i, j));
    }
    if (hi > lo) range[j] = hi - lo;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  auto feats = data.features();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double u = unit(rng);
      if (intensity > 0.0) feats[i * m + j] += range[j] * intensity * u;
    }
  auto vars = data.schema().variables();
  for (auto& v : vars) {
    v.kind = VariableKind::continuous;
    v.levels.clear();
  }
  std::ostringstream tag;
  tag << data.provenance() << " [noise " << intensity << " seed " << seed << "]";
  return Dataset(Schema(std::move(vars), data.schema().outcome()), std::move(feats),
                 data.labels(), tag.str());
}

// ---------------------------------------------------------------------------
// Synthetic generator

int planted_risk_points(std::size_t var, double x) {
  switch (var) {
    case 0: return x >= 55 ? 2 : 0;                        // Age
    case 1: return x == 1 ? 2 : 0;                         // Gender (male)
    case 2: return x == 0 ? 2 : 0;                         // InjuryType (penetrating)
    case 3: return x >= 3 ? 2 : 0;                         // HeadInjury
    case 4: return x >= 2 ? 2 : 0;                         // FacialInjury
    case 5: return x >= 5 ? 4 : (x >= 3 ? 2 : 0);          // ChestInjury
    case 6: return x >= 2 ? 2 : 0;                         // AbdominalInjury
    case 7: return x >= 3 ? 2 : 0;                         // LimbsInjury
    case 8: return x >= 2 ? 2 : 0;                         // ExternalInjury
    case 9: return (x < 13 || x > 25) ? 2 : 0;             // RespirationRate
    case 10: return x < 80 ? 4 : (x < 105 ? 2 : 0);        // SystolicBP
    case 11: return x <= 2 ? 2 : 0;                        // GCSEye
    case 12: return x <= 4 ? 2 : 0;                        // GCSMotor
    case 13: return x <= 3 ? 2 : 0;                        // GCSVerbal
    case 14: return x < 92 ? 2 : 0;                        // Oximetry
    case 15: return (x > 110 || x < 55) ? 2 : 0;           // HeartRate
    default: return 0;
  }
}

namespace {

constexpr std::size_t kTraumaVars = 16;

double draw_feature(std::size_t var, std::mt19937_64& rng) {
  auto normal_clamped = [&](double mean, double sd, double lo, double hi) {
    std::normal_distribution<double> d(mean, sd);
    return std::clamp(d(rng), lo, hi);
  };
  auto level = [&](std::initializer_list<double> weights) {
    std::discrete_distribution<int> d(weights);
    return static_cast<double>(d(rng));
  };
  switch (var) {
    case 0: return std::round(normal_clamped(42, 19, 16, 95));
    case 1: return level({0.28, 0.72});
    case 2: return level({0.18, 0.82});
    case 3: return level({0.40, 0.14, 0.12, 0.11, 0.10, 0.08, 0.05});
    case 4: return level({0.55, 0.20, 0.13, 0.08, 0.04});
    case 5: return level({0.45, 0.12, 0.12, 0.11, 0.09, 0.07, 0.04});
    case 6: return level({0.60, 0.12, 0.10, 0.08, 0.06, 0.04});
    case 7: return level({0.35, 0.20, 0.18, 0.14, 0.09, 0.04});
    case 8: return level({0.40, 0.30, 0.20, 0.10});
    case 9: return std::round(normal_clamped(19, 6, 4, 50));
    case 10: return std::round(normal_clamped(124, 28, 40, 220));
    case 11: return level({0.06, 0.08, 0.10, 0.16, 0.60});
    case 12: return level({0.04, 0.04, 0.05, 0.06, 0.08, 0.13, 0.60});
    case 13: return level({0.06, 0.06, 0.08, 0.10, 0.15, 0.55});
    case 14: return std::round(10 * normal_clamped(95, 4.5, 70, 100)) / 10;
    case 15: return std::round(normal_clamped(92, 20, 30, 190));
    default: return 0.0;
  }
}

}  // namespace

Dataset synth_trauma(std::size_t n, std::uint64_t seed, const std::set<std::size_t>& irrelevant,
                     SynthTrace* trace) {
  if (n < 20) throw ValidationError("synth_trauma: at least 20 rows are required");
  for (auto v : irrelevant)
    if (v >= kTraumaVars)
      throw ValidationError("synth_trauma: irrelevant variable index " + std::to_string(v) +
                            " out of range");
  if (irrelevant.size() >= kTraumaVars)
    throw ValidationError("synth_trauma: irrelevant set covers every variable");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(kPlantedFlipRate);
  std::vector<double> feats(n * kTraumaVars);
  std::vector<int> labels(n);
  if (trace) {
    trace->clean_labels.assign(n, 0);
    trace->flipped.assign(n, false);
  }
  for (std::size_t i = 0; i < n; ++i) {
    int points = 0;
    for (std::size_t j = 0; j < kTraumaVars; ++j) {
      const double x = draw_feature(j, rng);
      feats[i * kTraumaVars + j] = x;
      if (!irrelevant.count(j)) points += planted_risk_points(j, x);
    }
    const int clean = points >= kPlantedDeathThreshold ? 1 : 0;
    const bool flipped = flip(rng);
    labels[i] = flipped ? 1 - clean : clean;
    if (trace) {
      trace->clean_labels[i] = clean;
      trace->flipped[i] = flipped;
    }
  }

  std::ostringstream tag;
  tag << "synth_trauma(n=" << n << ", seed=" << seed << ", irrelevant={";
  bool first = true;
  for (auto v : irrelevant) {
    tag << (first ? "" : ",") << v + 1;
    first = false;
  }
  tag << "}); rule: Died=1 iff sum of risk points over relevant variables >= "
      << kPlantedDeathThreshold << ", label flipped with probability " << kPlantedFlipRate
      << "; points: Age>=55:2; Gender=1:2; InjuryType=0:2; HeadInjury>=3:2; "
         "FacialInjury>=2:2; ChestInjury>=5:4,>=3:2; AbdominalInjury>=2:2; LimbsInjury>=3:2; "
         "ExternalInjury>=2:2; RespirationRate<13|>25:2; SystolicBP<80:4,<105:2; GCSEye<=2:2; "
         "GCSMotor<=4:2; GCSVerbal<=3:2; Oximetry<92:2; HeartRate>110|<55:2";
  return Dataset(trauma_schema(), std::move(feats), std::move(labels), tag.str());
}

}  // namespace bdt
