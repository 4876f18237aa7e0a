#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bdt {

enum class VariableKind { continuous, categorical };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  std::vector<int> levels;  // ascending, distinct; categorical only

  bool is_categorical() const { return kind == VariableKind::categorical; }
  bool admits(double value) const;

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

class Schema {
 public:
  Schema(std::vector<VariableSpec> variables, std::string outcome);

  std::size_t size() const { return variables_.size(); }
  const VariableSpec& variable(std::size_t index) const { return variables_.at(index); }
  const std::vector<VariableSpec>& variables() const { return variables_; }
  const std::string& outcome() const { return outcome_; }

  // Index of the named variable, or size() when absent.
  std::size_t find(const std::string& name) const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<VariableSpec> variables_;
  std::string outcome_;
};

Schema load_schema(const std::filesystem::path& path);
Schema schema_from_json_text(const std::string& text);
std::string schema_to_json_text(const Schema& schema);
void save_schema(const Schema& schema, const std::filesystem::path& path);

// The 16-variable screening-test layout with binary outcome "Died".
Schema trauma_schema();

// Immutable n x m feature matrix (row-major) with binary labels.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<double> features, std::vector<int> labels,
          std::string provenance);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return schema_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t j) const { return features_[i * cols() + j]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& features() const { return features_; }
  const std::string& provenance() const { return provenance_; }

  // Count of rows with label 0 and label 1.
  std::size_t class_count(int label) const;

  Dataset subset(std::span<const std::size_t> row_indices) const;
  // Same rows, with column `var` replaced by `values`. Schema kind is kept.
  Dataset with_column(std::size_t var, std::span<const double> values) const;

 private:
  Schema schema_;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::string provenance_;
};

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(const std::string& text, const Schema& schema, const std::string& source);
std::string to_csv(const Dataset& data);
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // per-row fold index in [0, k)

  std::vector<std::size_t> test_rows(std::size_t fold) const;
  std::vector<std::size_t> train_rows(std::size_t fold) const;
  std::size_t fold_size(std::size_t fold) const;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

// Stratified by label. Each class is shuffled with `seed` and dealt round-robin,
// the second class continuing where the first stopped, so fold sizes differ by
// at most one overall and within each class.
FoldPlan make_folds(const Dataset& data, std::size_t k, std::uint64_t seed);

Dataset drop_variable(const Dataset& data, std::size_t var_index);

// v -> v + range_j * u, u ~ U(-intensity/2, intensity/2); every output column is
// continuous. range_j is max - min of column j, or 1 for a constant column.
Dataset add_noise(const Dataset& data, double intensity, std::uint64_t seed);

struct SynthTrace {
  std::vector<int> clean_labels;  // planted rule output before flips
  std::vector<bool> flipped;
};

// Synthetic stand-in for the screening-test data; see planted_risk_points().
Dataset synth_trauma(std::size_t n, std::uint64_t seed, const std::set<std::size_t>& irrelevant,
                     SynthTrace* trace = nullptr);

// Points contributed by variable `var` (0-based, trauma layout) at `value`.
int planted_risk_points(std::size_t var, double value);
inline constexpr int kPlantedDeathThreshold = 12;
inline constexpr double kPlantedFlipRate = 0.03;

}  // namespace bdt
