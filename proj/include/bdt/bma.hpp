#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdt/dataset.hpp"
#include "bdt/ensemble.hpp"

namespace bdt {

// p[c] is the probability of label c (0 = lived, 1 = died).
struct Prediction {
  std::array<double, 2> p{0.5, 0.5};

  // Ties at exactly 0.5 go to label 0.
  int label() const { return p[1] > p[0] ? 1 : 0; }
  double entropy_bits() const;
};

// Unweighted mean of the trees' leaf predictive distributions.
Prediction predict(const Ensemble& ensemble, std::span<const double> x);

struct PointResult {
  int label = 0;
  Prediction prediction;
};

struct EvalReport {
  double performance_pct = 0.0;
  double entropy_bits = 0.0;     // summed over test rows
  double entropy_per_row = 0.0;  // entropy_bits / rows
  double max_train_loglik = 0.0;
  std::vector<PointResult> per_point;
};

EvalReport evaluate(const Ensemble& ensemble, const Dataset& test);
double max_loglikelihood(const Ensemble& ensemble);

// Header line recorded with every report that carries max_train_loglik.
inline constexpr const char* kLoglikNote =
    "loglik = maximum over sampled trees of the training-fold log marginal likelihood";

std::string eval_reports_to_csv(const std::vector<EvalReport>& folds);
std::string format_eval_table(const std::vector<EvalReport>& folds, const std::string& title);

}  // namespace bdt
